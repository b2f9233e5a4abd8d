#include <cmath>
#include <memory>
#include <sstream>

#include "c2v/commands.hpp"
#include "c2v/common/error.hpp"
#include "c2v/common/rng.hpp"
#include "c2v/dataset.hpp"
#include "c2v/geometry/cortex.hpp"
#include "c2v/shape/pca_model.hpp"

namespace c2v::cli {
namespace {

geometry::TriMesh case_midthickness(const fs::path& dir) {
  return geometry::midthickness_with_thickness(geometry::load_mesh(dir / kPialFile),
                                               geometry::load_mesh(dir / kWhiteFile));
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Command make_pca_fit(CLI::App& root, const nlohmann::json* replay) {
  struct Opts {
    std::vector<std::string> cases;
    std::string dataset;
    std::string out;
    std::size_t components = 0;
    double variance = 0.95;
    double outlier_threshold = 0.0;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("pca-fit", "Fit a PCA shape model to midthickness surfaces with thickness");
  auto ps = std::make_shared<ParamSet>(app, replay);
  ps->add("--case", "cases", o->cases, "Case directory with wm.obj and pial.obj (repeatable)");
  ps->add("--dataset", "dataset", o->dataset, "Use every case_* directory under this root");
  require_unless_replayed(*ps, ps->add("--out,-o", "out", o->out, "Output directory"), "out");
  ps->add("--components,-k", "components", o->components, "Number of components; 0 selects by --variance");
  ps->add("--variance", "variance", o->variance, "Explained-variance fraction used when --components is 0");
  ps->add("--outlier-threshold", "outlier_threshold", o->outlier_threshold,
          "Refit without samples whose |latent| exceeds this in any component (0 disables)");

  Command c{"pca-fit", app, [ps] { return ps->to_json(); }, {}};
  c.run = [o, ps](const Globals& g) {
    const auto cases = collect_cases(o->cases, o->dataset);
    if (cases.size() < 2) throw ValidationError("pca-fit: need at least two cases");
    if (!(o->variance > 0.0 && o->variance <= 1.0)) throw ValidationError("pca-fit: --variance must be in (0, 1]");
    if (o->outlier_threshold < 0.0) throw ValidationError("pca-fit: --outlier-threshold must be non-negative");
    std::vector<geometry::TriMesh> samples;
    samples.reserve(cases.size());
    for (const auto& dir : cases) samples.push_back(case_midthickness(dir));

    const auto fit = [&](const std::vector<geometry::TriMesh>& s) {
      const std::size_t k = o->components > 0 ? o->components : shape::components_for_variance(s, o->variance);
      return shape::pca_fit(s, k);
    };
    shape::PcaModel model = fit(samples);
    std::vector<std::string> dropped;
    if (o->outlier_threshold > 0.0) {
      const auto filtered = shape::outlier_filter(model, samples, o->outlier_threshold);
      if (!filtered.dropped.empty()) {
        std::vector<geometry::TriMesh> kept;
        for (std::size_t i : filtered.retained) kept.push_back(samples[i]);
        for (std::size_t i : filtered.dropped) dropped.push_back(cases[i].filename().string());
        if (kept.size() < 2) throw ValidationError("pca-fit: outlier filter left fewer than two samples");
        model = fit(kept);
      }
    }

    const fs::path out(o->out);
    fs::create_directories(out);
    shape::save_model(out / "model.c2pc", model);
    nlohmann::json report = {{"samples", cases.size() - dropped.size()},
                             {"dropped", dropped},
                             {"vertex_count", model.vertex_count},
                             {"components", model.components()},
                             {"explained_variance_ratio", model.explained_variance_ratio()},
                             {"total_variance", model.total_variance},
                             {"variances", to_vector(model.variances)}};
    write_json(out / "fit_report.json", report);
    write_run_config(out, make_run_config("pca-fit", g, ps->to_json()));
  };
  return c;
}

Command make_pca_sample(CLI::App& root, const nlohmann::json* replay) {
  struct Opts {
    std::string model;
    std::string from;
    std::string to;
    bool random = false;
    double phi = 0.5;
    std::string mode = "slerp";
    std::string radius = "first";
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("pca-sample", "Interpolate between two shapes in the PCA latent space");
  auto ps = std::make_shared<ParamSet>(app, replay);
  require_unless_replayed(*ps, ps->add("--model,-m", "model", o->model, "Shape model (model.c2pc)"), "model");
  ps->add("--from", "from", o->from, "First case directory");
  ps->add("--to", "to", o->to, "Second case directory");
  ps->flag("--random", "random", o->random, "Draw both endpoints from the model prior (uses --seed)");
  ps->add("--phi", "phi", o->phi, "Interpolation weight in [0, 1]");
  ps->add("--mode", "mode", o->mode, "slerp or lerp")->check(CLI::IsMember({"slerp", "lerp"}));
  ps->add("--radius", "radius", o->radius, "Slerp radius: first or interpolated")
      ->check(CLI::IsMember({"first", "interpolated"}));
  require_unless_replayed(*ps, ps->add("--out,-o", "out", o->out, "Output directory"), "out");

  Command c{"pca-sample", app, [ps] { return ps->to_json(); }, {}};
  c.run = [o, ps](const Globals& g) {
    const shape::PcaModel model = shape::load_model(o->model);
    Eigen::VectorXd e1, e2;
    if (o->random) {
      if (!o->from.empty() || !o->to.empty()) throw ValidationError("pca-sample: --random excludes --from/--to");
      RngStream rng(CounterRng::derive(g.seed, "pca-sample"));
      e1.resize(static_cast<Eigen::Index>(model.components()));
      e2.resize(e1.size());
      for (Eigen::Index i = 0; i < e1.size(); ++i) e1[i] = std::sqrt(model.variances[i]) * rng.normal();
      for (Eigen::Index i = 0; i < e2.size(); ++i) e2[i] = std::sqrt(model.variances[i]) * rng.normal();
    } else {
      if (o->from.empty() || o->to.empty()) throw ValidationError("pca-sample: give --from and --to, or --random");
      e1 = shape::embed(model, case_midthickness(o->from));
      e2 = shape::embed(model, case_midthickness(o->to));
    }
    const Eigen::VectorXd e =
        o->mode == "lerp"
            ? shape::lerp_sample(e1, e2, o->phi)
            : shape::slerp_sample(e1, e2, o->phi,
                                  o->radius == "first" ? shape::SlerpRadius::kFirst : shape::SlerpRadius::kInterpolated);
    const geometry::TriMesh mid = shape::invert(model, e);
    const geometry::SurfacePair pair = geometry::surfaces_from_midthickness(mid);

    const fs::path out(o->out);
    fs::create_directories(out);
    geometry::save_mesh(out / "mid.obj", mid);
    geometry::save_mesh(out / kWhiteFile, pair.white);
    geometry::save_mesh(out / kPialFile, pair.pial);
    nlohmann::json latent = {{"e1", to_vector(e1)},
                             {"e2", to_vector(e2)},
                             {"e", to_vector(e)},
                             {"phi", o->phi},
                             {"mode", o->mode},
                             {"mahalanobis", shape::mahalanobis(model, e)}};
    write_json(out / "latent.json", latent);
    write_run_config(out, make_run_config("pca-sample", g, ps->to_json()));
  };
  return c;
}

Command make_pca_mahalanobis(CLI::App& root, const nlohmann::json* replay) {
  struct Opts {
    std::string model;
    std::vector<std::string> cases;
    std::string dataset;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("pca-mahalanobis", "Mahalanobis distance of each case under a shape model");
  auto ps = std::make_shared<ParamSet>(app, replay);
  require_unless_replayed(*ps, ps->add("--model,-m", "model", o->model, "Shape model (model.c2pc)"), "model");
  ps->add("--case", "cases", o->cases, "Case directory (repeatable)");
  ps->add("--dataset", "dataset", o->dataset, "Use every case_* directory under this root");
  require_unless_replayed(*ps, ps->add("--out,-o", "out", o->out, "Output directory"), "out");

  Command c{"pca-mahalanobis", app, [ps] { return ps->to_json(); }, {}};
  c.run = [o, ps](const Globals& g) {
    const shape::PcaModel model = shape::load_model(o->model);
    const auto cases = collect_cases(o->cases, o->dataset);
    if (cases.empty()) throw ValidationError("pca-mahalanobis: no cases");
    std::ostringstream csv;
    csv << "case,mahalanobis\n";
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& dir : cases) {
      const double d = shape::mahalanobis(model, shape::embed(model, case_midthickness(dir)));
      const std::string name = dir.filename().string();
      csv << name << ',' << format_double(d) << '\n';
      rows.push_back({{"case", name}, {"mahalanobis", d}});
    }
    const fs::path out(o->out);
    fs::create_directories(out);
    write_text(out / "mahalanobis.csv", csv.str());
    write_json(out / "mahalanobis.json", rows);
    write_run_config(out, make_run_config("pca-mahalanobis", g, ps->to_json()));
  };
  return c;
}

}  // namespace c2v::cli
