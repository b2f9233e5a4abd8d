#include "c2v/geometry/conditions.hpp"

#include <cmath>

#include "c2v/common/error.hpp"
#include "c2v/geometry/distance.hpp"

namespace c2v::geometry {

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::kCortexSdf: return "s_c";
    case Channel::kPialSdf: return "s_p";
    case Channel::kWhiteSdf: return "s_w";
    case Channel::kEdge: return "edge";
    case Channel::kRibbon: return "ribbon";
  }
  return "?";
}

Channel parse_channel(std::string_view name) {
  for (int i = 0; i < 5; ++i) {
    if (channel_name(static_cast<Channel>(i)) == name) return static_cast<Channel>(i);
  }
  throw ValidationError("unknown condition channel '" + std::string(name) + "'");
}

AuxChannels AuxChannels::all() {
  AuxChannels a;
  for (Channel c : {Channel::kPialSdf, Channel::kWhiteSdf, Channel::kEdge, Channel::kRibbon}) a.set(c, true);
  return a;
}

AuxChannels AuxChannels::parse(std::string_view list) {
  AuxChannels a;
  if (list.empty() || list == "none") return a;
  if (list == "all") return all();
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = list.find(',', pos);
    const auto token = list.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    if (!token.empty()) a.set(parse_channel(token), true);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return a;
}

void AuxChannels::set(Channel c, bool on) {
  if (c == Channel::kCortexSdf) throw ValidationError("s_c is the bridge endpoint, not an auxiliary channel");
  on_[static_cast<int>(c)] = on;
}

bool AuxChannels::contains(Channel c) const { return on_[static_cast<int>(c)]; }

std::vector<Channel> AuxChannels::ordered() const {
  std::vector<Channel> out;
  for (Channel c : {Channel::kPialSdf, Channel::kWhiteSdf, Channel::kEdge, Channel::kRibbon}) {
    if (contains(c)) out.push_back(c);
  }
  return out;
}

std::string AuxChannels::to_string() const {
  std::string s;
  for (Channel c : ordered()) {
    if (!s.empty()) s += ',';
    s += channel_name(c);
  }
  return s.empty() ? "none" : s;
}

CortexFusion fuse_cortex_sdf(const Volume& s_p, const Volume& s_w) {
  require_same_grid(s_p.grid(), s_w.grid(), "fuse_cortex_sdf");
  CortexFusion out{Volume(s_p.grid()), Volume(s_p.grid())};
  for (std::size_t n = 0; n < s_p.size(); ++n) {
    const bool pial_inside = s_p[n] <= 0.0f;
    const bool white_inside = s_w[n] <= 0.0f;
    if (!pial_inside && !white_inside) {
      out.s_c[n] = s_p[n];
    } else if (pial_inside != white_inside) {
      out.s_c[n] = 0.0f;
      out.ribbon[n] = 1.0f;
    } else {
      out.s_c[n] = s_w[n];
    }
  }
  return out;
}

Volume edge_map(const Volume& s_p, const Volume& s_w, double tau) {
  require_same_grid(s_p.grid(), s_w.grid(), "edge_map");
  if (!(tau > 0.0)) throw ValidationError("edge_map: tau must be positive");
  Volume out(s_p.grid());
  for (std::size_t n = 0; n < s_p.size(); ++n) {
    out[n] = (std::abs(s_p[n]) < tau || std::abs(s_w[n]) < tau) ? 1.0f : 0.0f;
  }
  return out;
}

double default_edge_tau(const Grid& grid) { return 0.5 * grid.min_spacing(); }

const Volume& ConditionSet::channel(Channel c) const {
  switch (c) {
    case Channel::kCortexSdf: return s_c;
    case Channel::kPialSdf: return s_p;
    case Channel::kWhiteSdf: return s_w;
    case Channel::kEdge: return edge;
    case Channel::kRibbon: return ribbon;
  }
  throw ValidationError("unknown channel");
}

void ConditionSet::validate() const {
  for (const Volume* v : {&s_p, &s_w, &edge, &ribbon}) require_same_grid(s_c.grid(), v->grid(), "condition set");
  for (const Volume* v : {&s_c, &s_p, &s_w, &edge, &ribbon}) v->validate();
  for (std::size_t n = 0; n < s_c.size(); ++n) {
    if ((edge[n] != 0.0f && edge[n] != 1.0f) || (ribbon[n] != 0.0f && ribbon[n] != 1.0f)) {
      throw ValidationError("condition set: edge/ribbon must be binary");
    }
    if (ribbon[n] == 1.0f && s_c[n] != 0.0f) throw ValidationError("condition set: s_c must vanish on the ribbon");
  }
}

ConditionSet build_conditions(const TriMesh& white, const TriMesh& pial, const Grid& grid,
                              std::optional<double> tau) {
  grid.validate();
  ConditionSet c;
  c.s_p = sample_sdf_grid(pial, grid);
  c.s_w = sample_sdf_grid(white, grid);
  auto fused = fuse_cortex_sdf(c.s_p, c.s_w);
  c.s_c = std::move(fused.s_c);
  c.ribbon = std::move(fused.ribbon);
  c.edge = edge_map(c.s_p, c.s_w, tau.value_or(default_edge_tau(grid)));
  return c;
}

}  // namespace c2v::geometry
