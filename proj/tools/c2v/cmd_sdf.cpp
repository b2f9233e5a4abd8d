#include <memory>

#include "c2v/commands.hpp"
#include "c2v/common/error.hpp"
#include "c2v/dataset.hpp"

namespace c2v::cli {

Command make_sdf(CLI::App& root, const nlohmann::json* replay) {
  struct Opts {
    std::vector<std::string> cases;
    std::string dataset;
    std::string out;
    int dims = 0;
    double spacing = 1.0;
    double tau = 0.0;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("sdf", "Build condition volumes (s_p, s_w, s_c, edge, ribbon) from a mesh pair");
  auto ps = std::make_shared<ParamSet>(app, replay);
  ps->add("--case", "cases", o->cases, "Case directory with wm.obj and pial.obj (repeatable)");
  ps->add("--dataset", "dataset", o->dataset, "Process every case_* directory under this root");
  ps->add("--out,-o", "out", o->out, "Output directory (single case only; default: the case directory)");
  ps->add("--dims", "dims", o->dims, "Voxels per axis; 0 takes the grid of the case image");
  ps->add("--spacing", "spacing", o->spacing, "Voxel spacing when --dims is given");
  ps->add("--tau", "tau", o->tau, "Edge-map half width; 0 selects half the smallest spacing");

  Command c{"sdf", app, [ps] { return ps->to_json(); }, {}};
  c.run = [o](const Globals& g) {
    const auto cases = collect_cases(o->cases, o->dataset);
    if (!o->out.empty() && cases.size() != 1) throw ValidationError("sdf: --out needs exactly one case");
    if (o->dims < 0 || (o->dims > 0 && !(o->spacing > 0.0))) throw ValidationError("sdf: bad grid");
    if (o->tau < 0.0) throw ValidationError("sdf: tau must be non-negative");
    for (const auto& dir : cases) {
      const std::optional<Grid> forced = o->dims > 0 ? std::optional<Grid>(model_grid(o->dims, o->spacing)) : std::nullopt;
      const Grid grid = forced ? *forced : case_grid(dir, std::nullopt);
      if (!fs::exists(dir / kWhiteFile) || !fs::exists(dir / kPialFile)) {
        throw ValidationError(dir.string() + ": missing wm.obj/pial.obj");
      }
      const auto cond = geometry::build_conditions(geometry::load_mesh(dir / kWhiteFile),
                                                   geometry::load_mesh(dir / kPialFile), grid,
                                                   o->tau > 0.0 ? std::optional<double>(o->tau) : std::nullopt);
      const fs::path out = o->out.empty() ? dir : fs::path(o->out);
      fs::create_directories(out);
      write_conditions(out, cond);
      // Per-case resolved config, so each output directory replays on its own.
      nlohmann::json params = {{"cases", std::vector<std::string>{dir.string()}},
                               {"dataset", ""},
                               {"out", o->out},
                               {"dims", o->dims},
                               {"spacing", o->spacing},
                               {"tau", o->tau}};
      write_run_config(out, make_run_config("sdf", g, params));
    }
  };
  return c;
}

}  // namespace c2v::cli
