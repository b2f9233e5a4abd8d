#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "c2v/common/error.hpp"
#include "c2v/geometry/mesh.hpp"

namespace c2v::geometry {
namespace {

std::string_view next_token(std::string_view& rest) {
  const auto start = rest.find_first_not_of(" \t\r");
  if (start == std::string_view::npos) {
    rest = {};
    return {};
  }
  rest.remove_prefix(start);
  const auto end = rest.find_first_of(" \t\r");
  const auto token = rest.substr(0, end);
  rest.remove_prefix(end == std::string_view::npos ? rest.size() : end);
  return token;
}

template <class T>
T parse_number(std::string_view token, const std::string& source, std::size_t line) {
  T value{};
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(source, line, "malformed number '" + std::string(token) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::filesystem::path thickness_sidecar(const std::filesystem::path& obj_path) {
  auto p = obj_path;
  p.replace_extension(".thick");
  return p;
}

TriMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open mesh " + path.string());
  const std::string source = path.string();
  TriMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest(line);
    const auto keyword = next_token(rest);
    if (keyword.empty() || keyword.front() == '#') continue;
    if (keyword == "v") {
      Vec3 p;
      for (int a = 0; a < 3; ++a) {
        const auto tok = next_token(rest);
        if (tok.empty()) throw ParseError(source, line_no, "vertex needs 3 coordinates");
        p[a] = parse_number<double>(tok, source, line_no);
      }
      if (!next_token(rest).empty()) throw ParseError(source, line_no, "vertex has more than 3 coordinates");
      mesh.vertices.push_back(p);
    } else if (keyword == "f") {
      Face f;
      for (int c = 0; c < 3; ++c) {
        const auto tok = next_token(rest);
        if (tok.empty()) throw ParseError(source, line_no, "face needs 3 indices");
        const long idx = parse_number<long>(tok, source, line_no);
        if (idx < 1) throw ParseError(source, line_no, "index out of range (OBJ indices are 1-based)");
        f[c] = static_cast<int>(idx - 1);
      }
      if (!next_token(rest).empty()) throw ParseError(source, line_no, "only triangular faces are supported");
      mesh.faces.push_back(f);
    } else {
      throw ParseError(source, line_no, "unsupported statement '" + std::string(keyword) + "'");
    }
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (int idx : mesh.faces[f]) {
      if (idx >= static_cast<int>(mesh.vertices.size())) {
        throw ValidationError(source + ": face " + std::to_string(f) + ": index out of range");
      }
    }
  }

  const auto sidecar = thickness_sidecar(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream ts(sidecar);
    std::size_t tline = 0;
    while (std::getline(ts, line)) {
      ++tline;
      std::string_view rest(line);
      const auto tok = next_token(rest);
      if (tok.empty()) continue;
      mesh.thickness.push_back(parse_number<double>(tok, sidecar.string(), tline));
    }
  }
  validate(mesh);
  return mesh;
}

void save_mesh(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ostringstream os;
  for (const Vec3& p : mesh.vertices) {
    os << "v " << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
  }
  for (const Face& f : mesh.faces) os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << os.str();

  const auto sidecar = thickness_sidecar(path);
  if (mesh.has_thickness()) {
    std::ofstream ts(sidecar, std::ios::binary);
    for (double t : mesh.thickness) ts << format_double(t) << '\n';
  } else if (std::filesystem::exists(sidecar)) {
    std::filesystem::remove(sidecar);
  }
}

}  // namespace c2v::geometry
