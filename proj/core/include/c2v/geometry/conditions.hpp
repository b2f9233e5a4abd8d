#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "c2v/geometry/mesh.hpp"
#include "c2v/geometry/volume.hpp"

namespace c2v::geometry {

/// Shape representations derivable from a white/pial surface pair. The
/// numeric values are part of the checkpoint format; do not reorder.
enum class Channel : int { kCortexSdf = 0, kPialSdf = 1, kWhiteSdf = 2, kEdge = 3, kRibbon = 4 };

std::string_view channel_name(Channel c);
Channel parse_channel(std::string_view name);  // "s_c", "s_p", "s_w", "edge", "ribbon"

/// Ordered subset of auxiliary channels fed to the denoiser. Canonical order
/// is s_p, s_w, edge, ribbon regardless of how the set was specified.
class AuxChannels {
 public:
  AuxChannels() = default;
  static AuxChannels all();
  static AuxChannels none() { return {}; }
  static AuxChannels parse(std::string_view comma_list);  // "" or "none" -> empty

  void set(Channel c, bool on);
  bool contains(Channel c) const;
  std::vector<Channel> ordered() const;
  std::size_t count() const { return ordered().size(); }
  std::string to_string() const;

  friend bool operator==(const AuxChannels&, const AuxChannels&) = default;

 private:
  std::array<bool, 5> on_{};
};

struct CortexFusion {
  Volume s_c;
  Volume ribbon;
};

/// Region-wise fusion of pial and white-matter SDFs. Values <= 0 count as
/// inside. Both outside: s_c = s_p. Signs disagree: s_c = 0, ribbon = 1.
/// Both inside: s_c = s_w.
CortexFusion fuse_cortex_sdf(const Volume& s_p, const Volume& s_w);

/// Binary map of voxels within tau of either boundary.
Volume edge_map(const Volume& s_p, const Volume& s_w, double tau);
double default_edge_tau(const Grid& grid);

struct ConditionSet {
  Volume s_c;
  Volume s_p;
  Volume s_w;
  Volume edge;
  Volume ribbon;
  AuxChannels active = AuxChannels::all();

  const Grid& grid() const { return s_c.grid(); }
  const Volume& channel(Channel c) const;

  /// Shared geometry, binary edge/ribbon, s_c == 0 wherever ribbon == 1.
  void validate() const;
};

ConditionSet build_conditions(const TriMesh& white, const TriMesh& pial, const Grid& grid,
                              std::optional<double> tau = std::nullopt);

}  // namespace c2v::geometry
