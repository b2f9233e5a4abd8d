#include <fstream>
#include <memory>
#include <numeric>

#include "c2v/commands.hpp"
#include "c2v/common/error.hpp"
#include "c2v/dataset.hpp"
#include "c2v/geometry/cortex.hpp"
#include "c2v/nn/train.hpp"

namespace c2v::cli {
namespace {

std::vector<int> read_region(const fs::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read region file " + path.string());
  std::vector<int> region;
  int v = 0;
  while (in >> v) {
    if (v != 0 && v != 1) throw ValidationError(path.string() + ": region entries must be 0 or 1");
    region.push_back(v);
  }
  if (!in.eof()) throw ValidationError(path.string() + ": malformed region file");
  if (region.size() != n) throw ValidationError(path.string() + ": region length differs from the vertex count");
  return region;
}

// "x>=0.5", "y<=-1" and friends: selects vertices of `mesh` on one side of an
// axis-aligned plane.
std::vector<int> cap_region(const std::string& spec, const geometry::TriMesh& mesh) {
  const auto bad = [&] { return ValidationError("bad --cap '" + spec + "' (expected AXIS>=V or AXIS<=V)"); };
  if (spec.size() < 4) throw bad();
  const int axis = spec[0] == 'x' ? 0 : spec[0] == 'y' ? 1 : spec[0] == 'z' ? 2 : -1;
  const std::string op = spec.substr(1, 2);
  if (axis < 0 || (op != ">=" && op != "<=")) throw bad();
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(spec.substr(3), &used);
    if (used != spec.size() - 3) throw bad();
  } catch (const std::logic_error&) {
    throw bad();
  }
  std::vector<int> region(mesh.vertex_count());
  for (std::size_t i = 0; i < region.size(); ++i) {
    const double x = mesh.vertices[i][axis];
    region[i] = (op == ">=" ? x >= value : x <= value) ? 1 : 0;
  }
  return region;
}

double mean(const std::vector<double>& v, const std::vector<int>* mask, int want) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (mask && (*mask)[i] != want) continue;
    s += v[i];
    ++n;
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

}  // namespace

Command make_atrophy(CLI::App& root, const nlohmann::json* replay) {
  struct Opts {
    std::string case_dir;
    std::string wm;
    std::string pial;
    std::string out;
    double delta = 0.0;
    double step = 0.05;
    double clearance = 0.0;
    std::string region;
    std::string cap;
    std::string checkpoint;
    int n_steps = 10;
    double spacing = 1.0;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("atrophy", "Thin the cortex by moving the pial surface inward");
  auto ps = std::make_shared<ParamSet>(app, replay);
  ps->add("--case", "case", o->case_dir, "Case directory with wm.obj and pial.obj");
  ps->add("--wm", "wm", o->wm, "White surface (instead of --case)");
  ps->add("--pial", "pial", o->pial, "Pial surface (instead of --case)");
  require_unless_replayed(*ps, ps->add("--out,-o", "out", o->out, "Output directory"), "out");
  require_unless_replayed(*ps, ps->add("--delta", "delta", o->delta, "Requested thinning (mm)"), "delta");
  ps->add("--step", "step", o->step, "Displacement per iteration (mm)");
  ps->add("--clearance", "clearance", o->clearance, "Minimum distance kept to the white surface (0 = --step)");
  ps->add("--region", "region", o->region, "File of per-vertex 0/1 flags restricting the deformation");
  ps->add("--cap", "cap", o->cap, "Restrict to pial vertices with AXIS>=V or AXIS<=V (e.g. x>=0)");
  ps->add("--checkpoint,-c", "checkpoint", o->checkpoint, "Also synthesize the atrophied image with this model");
  ps->add("--n-steps", "n_steps", o->n_steps, "Sampling steps for the image");
  ps->add("--spacing", "spacing", o->spacing, "Voxel spacing when the case has no image grid");

  Command c{"atrophy", app, [ps] { return ps->to_json(); }, {}};
  c.run = [o, ps](const Globals& g) {
    if (o->delta < 0.0) throw ValidationError("atrophy: --delta must be non-negative");
    if (!o->region.empty() && !o->cap.empty()) throw ValidationError("atrophy: --region and --cap are exclusive");
    fs::path wm_path, pial_path;
    if (!o->case_dir.empty()) {
      if (!o->wm.empty() || !o->pial.empty()) throw ValidationError("atrophy: --case excludes --wm/--pial");
      wm_path = fs::path(o->case_dir) / kWhiteFile;
      pial_path = fs::path(o->case_dir) / kPialFile;
    } else {
      if (o->wm.empty() || o->pial.empty()) throw ValidationError("atrophy: give --case or both --wm and --pial");
      wm_path = o->wm;
      pial_path = o->pial;
    }
    const geometry::TriMesh white = geometry::load_mesh(wm_path);
    const geometry::TriMesh pial = geometry::load_mesh(pial_path);

    geometry::AtrophyOptions opt;
    opt.step = o->step;
    if (o->clearance > 0.0) opt.clearance = o->clearance;
    if (!o->region.empty()) opt.region = read_region(o->region, pial.vertex_count());
    if (!o->cap.empty()) opt.region = cap_region(o->cap, pial);
    const geometry::AtrophyResult res = geometry::simulate_atrophy(pial, white, o->delta, opt);

    const auto before = geometry::cortical_thickness(pial, white);
    const auto after = geometry::cortical_thickness(res.pial, white);
    std::vector<double> thinning(before.size());
    for (std::size_t i = 0; i < before.size(); ++i) thinning[i] = before[i] - after[i];
    const std::vector<int>* mask = opt.region ? &*opt.region : nullptr;

    const fs::path out(o->out);
    fs::create_directories(out);
    geometry::save_mesh(out / kPialFile, res.pial);
    geometry::save_mesh(out / kWhiteFile, white);
    nlohmann::json report = {{"delta", o->delta},
                             {"iterations", res.iterations},
                             {"clamped", res.clamped},
                             {"all_clamped", res.all_clamped},
                             {"mean_thickness_before", mean(before, nullptr, 0)},
                             {"mean_thickness_after", mean(after, nullptr, 0)},
                             {"mean_thinning", mean(thinning, mask, 1)},
                             {"mean_displacement", mean(res.displacement, mask, 1)}};
    if (mask) {
      report["region_vertices"] = std::accumulate(mask->begin(), mask->end(), 0);
      report["mean_thinning_outside"] = mean(thinning, mask, 0);
    }

    if (!o->checkpoint.empty()) {
      const nn::ModelDenoiser model = nn::load_denoiser(o->checkpoint);
      const int r = model.config().resolution;
      const Grid grid = o->case_dir.empty() ? model_grid(r, o->spacing)
                                            : case_grid(o->case_dir, model_grid(r, o->spacing));
      if (grid.dims != std::array<int, 3>{r, r, r}) throw ShapeMismatch("atrophy: case grid differs from the checkpoint");
      const auto cond = geometry::build_conditions(white, res.pial, grid);
      diffusion::SampleOptions so;
      so.n_steps = o->n_steps;
      so.seed = g.seed;
      const Volume image = nn::synthesize(model, cond, diffusion::make_schedule(model.steps()), so);
      save_volume(out / kImageFile, image);
      report["condition_hash"] = condition_hash(cond);
    }
    write_json(out / "atrophy.json", report);
    write_run_config(out, make_run_config("atrophy", g, ps->to_json()));
  };
  return c;
}

}  // namespace c2v::cli
