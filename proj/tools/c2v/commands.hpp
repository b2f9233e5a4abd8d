#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include "c2v/params.hpp"

namespace c2v::cli {

// Each factory registers its subcommand on `root`. `replay` holds the params
// of a replayed run config for this subcommand (or is null).
Command make_phantom(CLI::App& root, const nlohmann::json* replay);
Command make_sdf(CLI::App& root, const nlohmann::json* replay);
Command make_pca_fit(CLI::App& root, const nlohmann::json* replay);
Command make_pca_sample(CLI::App& root, const nlohmann::json* replay);
Command make_pca_mahalanobis(CLI::App& root, const nlohmann::json* replay);
Command make_train(CLI::App& root, const nlohmann::json* replay);
Command make_synth(CLI::App& root, const nlohmann::json* replay);
Command make_atrophy(CLI::App& root, const nlohmann::json* replay);
Command make_eval(CLI::App& root, const nlohmann::json* replay);
Command make_schedule_dump(CLI::App& root, const nlohmann::json* replay);

}  // namespace c2v::cli
