#include "c2v/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "c2v/common/error.hpp"
#include "c2v/common/rng.hpp"
#include "c2v/params.hpp"

namespace c2v::cli {
namespace {

constexpr std::array<std::pair<geometry::Channel, const char*>, 5> kConditionFiles = {{
    {geometry::Channel::kCortexSdf, "s_c.c2vx"},
    {geometry::Channel::kPialSdf, "s_p.c2vx"},
    {geometry::Channel::kWhiteSdf, "s_w.c2vx"},
    {geometry::Channel::kEdge, "edge.c2vx"},
    {geometry::Channel::kRibbon, "ribbon.c2vx"},
}};

bool is_case_dir(const fs::path& p) {
  return fs::exists(p / kImageFile) || (fs::exists(p / kWhiteFile) && fs::exists(p / kPialFile));
}

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ull;
  }
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string case_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "case_%04zu", index);
  return buf;
}

std::vector<fs::path> list_cases(const fs::path& dataset) {
  if (!fs::is_directory(dataset)) throw ValidationError("not a directory: " + dataset.string());
  if (is_case_dir(dataset)) return {dataset};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dataset)) {
    if (e.is_directory() && e.path().filename().string().rfind("case_", 0) == 0) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ValidationError("no case_* directories in " + dataset.string());
  return out;
}

std::vector<fs::path> collect_cases(const std::vector<std::string>& cases, const std::string& dataset) {
  std::vector<fs::path> out;
  for (const auto& c : cases) {
    if (!fs::is_directory(c)) throw ValidationError("case directory not found: " + c);
    out.emplace_back(c);
  }
  if (!dataset.empty()) {
    for (auto& c : list_cases(dataset)) out.push_back(std::move(c));
  }
  if (out.empty()) throw ValidationError("no input cases given (use --case or --dataset)");
  return out;
}

void write_conditions(const fs::path& dir, const geometry::ConditionSet& c) {
  for (const auto& [ch, file] : kConditionFiles) save_volume(dir / file, c.channel(ch));
}

Grid case_grid(const fs::path& case_dir, const std::optional<Grid>& fallback) {
  if (fs::exists(case_dir / kImageFile)) return load_volume(case_dir / kImageFile).grid();
  if (fallback) return *fallback;
  throw ValidationError(case_dir.string() + ": no image to take the grid from; pass --dims/--spacing");
}

geometry::ConditionSet load_conditions(const fs::path& case_dir, const Grid& grid) {
  const bool stored = std::all_of(kConditionFiles.begin(), kConditionFiles.end(),
                                  [&](const auto& f) { return fs::exists(case_dir / f.second); });
  if (stored) {
    geometry::ConditionSet c;
    c.s_c = load_volume(case_dir / "s_c.c2vx");
    c.s_p = load_volume(case_dir / "s_p.c2vx");
    c.s_w = load_volume(case_dir / "s_w.c2vx");
    c.edge = load_volume(case_dir / "edge.c2vx");
    c.ribbon = load_volume(case_dir / "ribbon.c2vx");
    if (c.s_c.grid() == grid) {
      c.validate();
      return c;
    }
  }
  if (!fs::exists(case_dir / kWhiteFile) || !fs::exists(case_dir / kPialFile)) {
    throw ValidationError(case_dir.string() + ": missing wm.obj/pial.obj");
  }
  return geometry::build_conditions(geometry::load_mesh(case_dir / kWhiteFile),
                                    geometry::load_mesh(case_dir / kPialFile), grid);
}

phantom::PhantomSpec case_spec(const fs::path& case_dir) {
  if (!fs::exists(case_dir / kSpecFile)) return {};
  return read_json(case_dir / kSpecFile).get<phantom::PhantomSpec>();
}

std::string condition_hash(const geometry::ConditionSet& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [ch, file] : kConditionFiles) {
    const Volume& v = c.channel(ch);
    fnv(h, v.grid().dims.data(), sizeof(int) * 3);
    fnv(h, v.grid().spacing.data(), sizeof(double) * 3);
    fnv(h, v.grid().origin.data(), sizeof(double) * 3);
    fnv(h, v.data().data(), v.size() * sizeof(float));
  }
  return hex(h);
}

std::string file_hash(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    fnv(h, buf, static_cast<std::size_t>(is.gcount()));
  }
  return hex(h);
}

Grid model_grid(int resolution, double spacing) { return Grid::centered(resolution, spacing); }

}  // namespace c2v::cli
