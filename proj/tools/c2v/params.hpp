#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace c2v::cli {

/// Options shared by every subcommand.
struct Globals {
  std::uint64_t seed = 0;
};

/// Binds subcommand options to variables and mirrors them as JSON. When a
/// replayed run config is given, its values become the option defaults.
class ParamSet {
 public:
  ParamSet(CLI::App* app, const nlohmann::json* replay) : app_(app), replay_(replay) {}

  template <class T>
  CLI::Option* add(const std::string& flags, const std::string& key, T& target, const std::string& help) {
    if (replay_ && replay_->contains(key)) target = replay_->at(key).get<T>();
    writers_.push_back([key, &target](nlohmann::json& j) { j[key] = target; });
    return app_->add_option(flags, target, help)->capture_default_str();
  }

  CLI::Option* flag(const std::string& flags, const std::string& key, bool& target, const std::string& help) {
    if (replay_ && replay_->contains(key)) target = replay_->at(key).get<bool>();
    writers_.push_back([key, &target](nlohmann::json& j) { j[key] = target; });
    return app_->add_flag(flags, target, help);
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& w : writers_) w(j);
    return j;
  }

  /// True when a replayed config supplies this key (required options may then
  /// be omitted on the command line).
  bool replayed(const std::string& key) const { return replay_ && replay_->contains(key); }

 private:
  CLI::App* app_;
  const nlohmann::json* replay_;
  std::vector<std::function<void(nlohmann::json&)>> writers_;
};

/// Marks an option required unless the replayed config already provides it.
void require_unless_replayed(const ParamSet& ps, CLI::Option* opt, const std::string& key);

inline constexpr int kRunConfigVersion = 1;

/// {"format", "version", "subcommand", "seed", "params"}.
nlohmann::json make_run_config(const std::string& subcommand, const Globals& g, const nlohmann::json& params);
void write_run_config(const std::filesystem::path& dir, const nlohmann::json& config);
/// Loads and checks a run_config.json.
nlohmann::json read_run_config(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);
/// Shortest round-trip decimal form.
std::string format_double(double v);
/// JSON value for a possibly infinite metric ("inf" / "-inf" strings).
nlohmann::json metric_json(double v);

/// Parses "a,b,c" into integers.
std::vector<int> parse_int_list(const std::string& s);

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  std::function<nlohmann::json()> params;
  std::function<void(const Globals&)> run;
};

}  // namespace c2v::cli
