#include "c2v/params.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "c2v/common/error.hpp"

namespace c2v::cli {

void require_unless_replayed(const ParamSet& ps, CLI::Option* opt, const std::string& key) {
  if (!ps.replayed(key)) opt->required();
}

nlohmann::json make_run_config(const std::string& subcommand, const Globals& g, const nlohmann::json& params) {
  return {{"format", "c2v-run-config"},
          {"version", kRunConfigVersion},
          {"subcommand", subcommand},
          {"seed", g.seed},
          {"params", params}};
}

void write_run_config(const std::filesystem::path& dir, const nlohmann::json& config) {
  write_json(dir / "run_config.json", config);
}

nlohmann::json read_run_config(const std::filesystem::path& path) {
  const nlohmann::json j = read_json(path);
  if (!j.is_object() || j.value("format", "") != "c2v-run-config") {
    throw ValidationError(path.string() + ": not a c2v run config");
  }
  if (j.value("version", 0) != kRunConfigVersion) {
    throw ValidationError(path.string() + ": unsupported run config version");
  }
  if (!j.contains("subcommand") || !j.contains("params") || !j["params"].is_object()) {
    throw ValidationError(path.string() + ": run config lacks subcommand or params");
  }
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw Error("failed writing " + path.string());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

nlohmann::json metric_json(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int v = 0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
    if (r.ec != std::errc() || r.ptr != item.data() + item.size()) {
      throw ValidationError("expected a comma-separated integer list, got '" + s + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty integer list");
  return out;
}

}  // namespace c2v::cli
