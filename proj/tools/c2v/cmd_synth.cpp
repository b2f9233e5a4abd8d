#include <memory>

#include "c2v/commands.hpp"
#include "c2v/common/error.hpp"
#include "c2v/dataset.hpp"
#include "c2v/nn/train.hpp"

namespace c2v::cli {

Command make_synth(CLI::App& root, const nlohmann::json* replay) {
  struct Opts {
    std::string checkpoint;
    std::vector<std::string> cases;
    std::string dataset;
    std::string wm;
    std::string pial;
    std::string out;
    int n_steps = 10;
    double eta = 0.0;
    double spacing = 1.0;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("synth", "Synthesize images from surface conditions with a trained model");
  auto ps = std::make_shared<ParamSet>(app, replay);
  require_unless_replayed(*ps, ps->add("--checkpoint,-c", "checkpoint", o->checkpoint, "Trained checkpoint"),
                          "checkpoint");
  ps->add("--case", "cases", o->cases, "Case directory (repeatable)");
  ps->add("--dataset", "dataset", o->dataset, "Synthesize every case_* directory under this root");
  ps->add("--wm", "wm", o->wm, "External white surface (with --pial)");
  ps->add("--pial", "pial", o->pial, "External pial surface (with --wm)");
  require_unless_replayed(*ps, ps->add("--out,-o", "out", o->out, "Output directory"), "out");
  ps->add("--n-steps", "n_steps", o->n_steps, "Sampling steps");
  ps->add("--eta", "eta", o->eta, "Share of posterior noise drawn fresh (0 = deterministic)");
  ps->add("--spacing", "spacing", o->spacing, "Voxel spacing for external meshes without an image grid");

  Command c{"synth", app, [ps] { return ps->to_json(); }, {}};
  c.run = [o, ps](const Globals& g) {
    const nn::ModelDenoiser model = nn::load_denoiser(o->checkpoint);
    const int res = model.config().resolution;
    const auto sched = diffusion::make_schedule(model.steps());
    if (o->n_steps < 1 || o->n_steps > model.steps()) throw ValidationError("synth: --n-steps out of range");
    if (!(o->eta >= 0.0 && o->eta <= 1.0)) throw ValidationError("synth: --eta must lie in [0, 1]");

    struct Job {
      std::string name;
      geometry::ConditionSet cond;
    };
    std::vector<Job> jobs;
    const bool external = !o->wm.empty() || !o->pial.empty();
    if (external) {
      if (o->wm.empty() || o->pial.empty()) throw ValidationError("synth: --wm and --pial go together");
      if (!o->cases.empty() || !o->dataset.empty()) throw ValidationError("synth: meshes exclude --case/--dataset");
      jobs.push_back({"", geometry::build_conditions(geometry::load_mesh(o->wm), geometry::load_mesh(o->pial),
                                                     model_grid(res, o->spacing))});
    } else {
      const auto cases = collect_cases(o->cases, o->dataset);
      for (const auto& dir : cases) {
        const Grid grid = case_grid(dir, model_grid(res, o->spacing));
        if (grid.dims != std::array<int, 3>{res, res, res}) {
          throw ShapeMismatch(dir.string() + ": condition resolution differs from the checkpoint (" +
                              std::to_string(res) + ")");
        }
        jobs.push_back({cases.size() == 1 ? std::string() : dir.filename().string(), load_conditions(dir, grid)});
      }
    }

    const fs::path out(o->out);
    fs::create_directories(out);
    const std::string ckpt_hash = file_hash(o->checkpoint);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      diffusion::SampleOptions opt;
      opt.n_steps = o->n_steps;
      opt.eta = o->eta;
      opt.seed = g.seed;
      opt.sample_id = i;
      const Volume image = nn::synthesize(model, jobs[i].cond, sched, opt);
      const fs::path dir = jobs[i].name.empty() ? out : out / jobs[i].name;
      fs::create_directories(dir);
      save_volume(dir / kImageFile, image);
      nlohmann::json prov = {{"condition_hash", condition_hash(jobs[i].cond)},
                             {"checkpoint_hash", ckpt_hash},
                             {"seed", g.seed},
                             {"sample_id", i},
                             {"n_steps", o->n_steps},
                             {"eta", o->eta},
                             {"aux", model.config().aux.to_string()}};
      write_json(dir / "provenance.json", prov);
    }
    write_run_config(out, make_run_config("synth", g, ps->to_json()));
  };
  return c;
}

}  // namespace c2v::cli
