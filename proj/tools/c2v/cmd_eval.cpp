#include <memory>
#include <optional>
#include <sstream>

#include "c2v/commands.hpp"
#include "c2v/common/error.hpp"
#include "c2v/common/parallel.hpp"
#include "c2v/common/rng.hpp"
#include "c2v/dataset.hpp"
#include "c2v/geometry/surface_metrics.hpp"
#include "c2v/metrics/image_metrics.hpp"

namespace c2v::cli {
namespace {

inline constexpr int kReportVersion = 1;
inline constexpr const char* kCsvColumns = "case,psnr,ssim,data_range,mr_ssim,assd_white,assd_pial";

struct Row {
  std::string name;
  metrics::MetricReport image;
  std::optional<double> mr_ssim;
  std::optional<double> assd_white;
  std::optional<double> assd_pial;
};

bool has_meshes(const fs::path& dir) { return fs::exists(dir / kWhiteFile) && fs::exists(dir / kPialFile); }

// Generated and reference case directories paired by name; two single-case
// directories pair with each other.
std::vector<std::pair<fs::path, fs::path>> match_cases(const fs::path& gen, const fs::path& ref) {
  const auto g = list_cases(gen);
  const auto r = list_cases(ref);
  if (g.size() == 1 && r.size() == 1 && (g[0] == gen || r[0] == ref)) return {{g[0], r[0]}};
  std::vector<std::pair<fs::path, fs::path>> out;
  for (const auto& gc : g) {
    const fs::path rc = ref / gc.filename();
    if (!fs::is_directory(rc)) throw ValidationError("eval: no reference case for " + gc.filename().string());
    out.emplace_back(gc, rc);
  }
  return out;
}

std::string case_label(const fs::path& dir) {
  fs::path p = dir.lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().string();
}

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

Command make_eval(CLI::App& root, const nlohmann::json* replay) {
  struct Opts {
    std::string generated;
    std::string reference;
    std::string pool;
    std::string out;
    int n_refs = 5;
    std::size_t n_points = 4000;
    bool no_assd = false;
    double data_range = 0.0;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("eval", "Image and surface metrics of generated cases against references");
  auto ps = std::make_shared<ParamSet>(app, replay);
  require_unless_replayed(*ps, ps->add("--generated,-g", "generated", o->generated, "Generated case(s)"), "generated");
  require_unless_replayed(*ps, ps->add("--reference,-r", "reference", o->reference, "Reference case(s)"),
                          "reference");
  ps->add("--pool", "pool", o->pool, "Reference image pool for MR-SSIM (dataset root)");
  ps->add("--n-refs", "n_refs", o->n_refs, "References drawn from the pool per case");
  ps->add("--n-points", "n_points", o->n_points, "Surface samples per mesh for ASSD");
  ps->flag("--no-assd", "no_assd", o->no_assd, "Skip surface metrics");
  ps->add("--data-range", "data_range", o->data_range, "Intensity range for PSNR/SSIM (0 = from the reference)");
  require_unless_replayed(*ps, ps->add("--out,-o", "out", o->out, "Output directory"), "out");

  Command c{"eval", app, [ps] { return ps->to_json(); }, {}};
  c.run = [o, ps](const Globals& g) {
    const auto pairs = match_cases(o->generated, o->reference);
    if (pairs.empty()) throw ValidationError("eval: no cases to evaluate");
    if (o->data_range < 0.0) throw ValidationError("eval: --data-range must be non-negative");
    std::vector<Volume> pool;
    if (!o->pool.empty()) {
      for (const auto& dir : list_cases(o->pool)) pool.push_back(load_volume(dir / kImageFile));
      if (static_cast<int>(pool.size()) < o->n_refs || o->n_refs < 1) {
        throw ValidationError("eval: pool smaller than --n-refs");
      }
    }
    const std::optional<double> range = o->data_range > 0.0 ? std::optional<double>(o->data_range) : std::nullopt;

    std::vector<Row> rows(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto& [gen, ref] = pairs[i];
        Row& row = rows[i];
        row.name = case_label(gen);
        const Volume gi = load_volume(gen / kImageFile);
        const Volume ri = load_volume(ref / kImageFile);
        row.image = metrics::evaluate(gi, ri, range);
        if (!pool.empty()) {
          row.mr_ssim = metrics::mr_ssim(gi, pool, o->n_refs, CounterRng::derive(g.seed, "mr-ssim", i).key(), range);
        }
        if (!o->no_assd && has_meshes(ref)) {
          geometry::TriMesh gw, gp;
          if (has_meshes(gen)) {
            gw = geometry::load_mesh(gen / kWhiteFile);
            gp = geometry::load_mesh(gen / kPialFile);
          } else {
            auto s = phantom::extract_surfaces(gi, case_spec(ref));
            gw = std::move(s.white);
            gp = std::move(s.pial);
          }
          const std::uint64_t seed = CounterRng::derive(g.seed, "assd", i).key();
          row.assd_white = geometry::assd(gw, geometry::load_mesh(ref / kWhiteFile), o->n_points, seed);
          row.assd_pial = geometry::assd(gp, geometry::load_mesh(ref / kPialFile), o->n_points, seed);
        }
      }
    }, 1);

    std::ostringstream csv;
    csv << "# c2v-eval-report v" << kReportVersion << '\n' << kCsvColumns << '\n';
    nlohmann::json cases = nlohmann::json::array();
    for (const Row& r : rows) {
      csv << r.name << ',' << format_double(r.image.psnr) << ',' << format_double(r.image.ssim) << ','
          << format_double(r.image.data_range) << ',' << cell(r.mr_ssim) << ',' << cell(r.assd_white) << ','
          << cell(r.assd_pial) << '\n';
      nlohmann::json j = {{"case", r.name},
                          {"psnr", metric_json(r.image.psnr)},
                          {"ssim", r.image.ssim},
                          {"data_range", r.image.data_range}};
      if (r.mr_ssim) j["mr_ssim"] = *r.mr_ssim;
      if (r.assd_white) j["assd_white"] = *r.assd_white;
      if (r.assd_pial) j["assd_pial"] = *r.assd_pial;
      cases.push_back(std::move(j));
    }
    const fs::path out(o->out);
    fs::create_directories(out);
    write_text(out / "report.csv", csv.str());
    write_json(out / "report.json", {{"format", "c2v-eval-report"}, {"version", kReportVersion}, {"cases", cases}});
    write_run_config(out, make_run_config("eval", g, ps->to_json()));
  };
  return c;
}

}  // namespace c2v::cli
