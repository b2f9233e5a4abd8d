#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "c2v/geometry/conditions.hpp"
#include "c2v/geometry/mesh.hpp"
#include "c2v/geometry/volume.hpp"
#include "c2v/phantom/phantom.hpp"

namespace c2v::cli {

namespace fs = std::filesystem;

// Case layout: case_####/{wm.obj, pial.obj, image.c2vx, spec.json} plus the
// optional condition volumes s_p, s_w, s_c, edge, ribbon (.c2vx).
inline constexpr const char* kWhiteFile = "wm.obj";
inline constexpr const char* kPialFile = "pial.obj";
inline constexpr const char* kImageFile = "image.c2vx";
inline constexpr const char* kSpecFile = "spec.json";

std::string case_name(std::size_t index);

/// Sorted case_* subdirectories; a directory that itself holds a case is
/// returned as the only entry.
std::vector<fs::path> list_cases(const fs::path& dataset);

/// Case directories from --case entries and --dataset roots, in that order.
std::vector<fs::path> collect_cases(const std::vector<std::string>& cases, const std::string& dataset);

void write_conditions(const fs::path& dir, const geometry::ConditionSet& c);

/// Grid of the case image if present, otherwise `fallback`.
Grid case_grid(const fs::path& case_dir, const std::optional<Grid>& fallback);

/// Stored condition volumes when all five exist on `grid`, otherwise built
/// from the case meshes.
geometry::ConditionSet load_conditions(const fs::path& case_dir, const Grid& grid);

/// Phantom spec stored with the case, or defaults.
phantom::PhantomSpec case_spec(const fs::path& case_dir);

/// 64-bit FNV-1a over the condition volumes (hex string).
std::string condition_hash(const geometry::ConditionSet& c);
std::string file_hash(const fs::path& path);

Grid model_grid(int resolution, double spacing);

}  // namespace c2v::cli
