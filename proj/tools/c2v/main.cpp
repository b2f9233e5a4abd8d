#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include "c2v/commands.hpp"
#include "c2v/common/error.hpp"

namespace {

using namespace c2v::cli;

constexpr const char* kSubcommands[] = {"phantom", "sdf",   "pca-fit", "pca-sample", "pca-mahalanobis",
                                        "train",   "synth", "atrophy", "eval",       "schedule-dump"};

// Value of --config from the raw arguments; the replayed params must be known
// before the options are declared so they can act as defaults.
std::string find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

int run(std::vector<std::string> args) {
  nlohmann::json config;
  const std::string config_path = find_config(args);
  if (!config_path.empty()) {
    config = read_run_config(config_path);
    const bool named = std::any_of(args.begin() + 1, args.end(), [](const std::string& a) {
      return std::find(std::begin(kSubcommands), std::end(kSubcommands), a) != std::end(kSubcommands);
    });
    if (!named) args.push_back(config["subcommand"].get<std::string>());
  }
  const std::string replay_name = config.is_object() ? config["subcommand"].get<std::string>() : std::string();
  const auto replay_for = [&](const char* name) -> const nlohmann::json* {
    return replay_name == name ? &config["params"] : nullptr;
  };

  CLI::App app{"c2v: cortical-surface-conditioned image synthesis toolkit"};
  app.require_subcommand(1);
  Globals globals;
  if (config.is_object()) globals.seed = config.value("seed", std::uint64_t{0});
  app.add_option("--seed", globals.seed, "Global random seed")->capture_default_str();
  std::string unused;
  app.add_option("--config", unused, "Replay a run_config.json (its params become the defaults)");

  std::vector<Command> commands;
  commands.push_back(make_phantom(app, replay_for("phantom")));
  commands.push_back(make_sdf(app, replay_for("sdf")));
  commands.push_back(make_pca_fit(app, replay_for("pca-fit")));
  commands.push_back(make_pca_sample(app, replay_for("pca-sample")));
  commands.push_back(make_pca_mahalanobis(app, replay_for("pca-mahalanobis")));
  commands.push_back(make_train(app, replay_for("train")));
  commands.push_back(make_synth(app, replay_for("synth")));
  commands.push_back(make_atrophy(app, replay_for("atrophy")));
  commands.push_back(make_eval(app, replay_for("eval")));
  commands.push_back(make_schedule_dump(app, replay_for("schedule-dump")));

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (const auto& cmd : commands) {
    if (cmd.app->parsed()) cmd.run(globals);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(std::vector<std::string>(argv, argv + argc));
  } catch (const c2v::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
