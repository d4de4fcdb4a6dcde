#include "tetzero/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "tetzero/error.hpp"

namespace tetzero {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

Vec3 Mesh::normal(std::size_t t) const {
  const auto& f = triangles[t];
  return cross(vertices[f[1]] - vertices[f[0]], vertices[f[2]] - vertices[f[0]]);
}

double Mesh::area(std::size_t t) const { return 0.5 * norm(normal(t)); }

double surface_area(const Mesh& m) {
  double a = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) a += m.area(t);
  return a;
}

namespace {

std::string extension(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return {};
  std::string e = path.substr(dot + 1);
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

void check_indices(const Mesh& m, const std::string& path) {
  for (const auto& f : m.triangles)
    for (uint32_t i : f)
      TZ_REQUIRE(i < m.vertices.size(), io, path, ": face index ", i, " out of range");
}

template <class T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

// Scalar PLY property types we accept, decoded to double.
double read_scalar(std::istream& in, const std::string& type, bool ascii) {
  if (ascii) {
    double v;
    in >> v;
    return v;
  }
  if (type == "double" || type == "float64") return read_pod<double>(in);
  if (type == "float" || type == "float32") return read_pod<float>(in);
  if (type == "uchar" || type == "uint8") return read_pod<uint8_t>(in);
  if (type == "char" || type == "int8") return read_pod<int8_t>(in);
  if (type == "ushort" || type == "uint16") return read_pod<uint16_t>(in);
  if (type == "short" || type == "int16") return read_pod<int16_t>(in);
  if (type == "uint" || type == "uint32") return read_pod<uint32_t>(in);
  if (type == "int" || type == "int32") return read_pod<int32_t>(in);
  detail::raise(ErrorCode::io, "unsupported PLY property type '", type, "'");
}

}  // namespace

void write_obj(const std::string& path, const Mesh& m) {
  std::ofstream out(path);
  TZ_REQUIRE(out, io, "cannot open ", path, " for writing");
  out.precision(17);
  for (const Vec3& v : m.vertices) out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
  for (const auto& f : m.triangles) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  TZ_REQUIRE(out.good(), io, "write failed: ", path);
}

void write_ply(const std::string& path, const Mesh& m) {
  std::ofstream out(path, std::ios::binary);
  TZ_REQUIRE(out, io, "cannot open ", path, " for writing");
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << m.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << m.triangles.size() << "\n"
      << "property list uchar uint vertex_indices\nend_header\n";
  for (const Vec3& v : m.vertices) {
    const double xyz[3] = {v.x, v.y, v.z};
    out.write(reinterpret_cast<const char*>(xyz), sizeof xyz);
  }
  for (const auto& f : m.triangles) {
    const uint8_t n = 3;
    out.write(reinterpret_cast<const char*>(&n), 1);
    out.write(reinterpret_cast<const char*>(f.data()), 3 * sizeof(uint32_t));
  }
  TZ_REQUIRE(out.good(), io, "write failed: ", path);
}

Mesh read_obj(const std::string& path) {
  std::ifstream in(path);
  TZ_REQUIRE(in, io, "cannot open ", path);
  Mesh m;
  std::string line;
  std::vector<long> poly;
  while (std::getline(in, line)) {
    if (line.size() < 2) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      ls >> v.x >> v.y >> v.z;
      TZ_REQUIRE(!ls.fail(), io, path, ": bad vertex line '", line, "'");
      m.vertices.push_back(v);
    } else if (tag == "f") {
      poly.clear();
      std::string tok;
      while (ls >> tok) {
        // "i", "i/t", "i//n", "i/t/n"; negative indices are relative.
        long i = std::stol(tok.substr(0, tok.find('/')));
        if (i < 0) i += long(m.vertices.size()) + 1;
        poly.push_back(i - 1);
      }
      TZ_REQUIRE(poly.size() >= 3, io, path, ": face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k)
        m.triangles.push_back({uint32_t(poly[0]), uint32_t(poly[k]), uint32_t(poly[k + 1])});
    }
  }
  check_indices(m, path);
  return m;
}

Mesh read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  TZ_REQUIRE(in, io, "cannot open ", path);
  std::string line;
  std::getline(in, line);
  TZ_REQUIRE(line.rfind("ply", 0) == 0, io, path, ": not a PLY file");

  struct Property {
    std::string name, type, count_type;  // count_type non-empty for lists
  };
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> props;
  };
  std::vector<Element> elements;
  bool ascii = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      TZ_REQUIRE(fmt == "ascii" || fmt == "binary_little_endian", io, path, ": unsupported PLY format ", fmt);
      ascii = fmt == "ascii";
    } else if (kw == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (kw == "property") {
      TZ_REQUIRE(!elements.empty(), io, path, ": property before element");
      Property p;
      ls >> p.type;
      if (p.type == "list") ls >> p.count_type >> p.type;
      ls >> p.name;
      elements.back().props.push_back(p);
    } else if (kw == "end_header") {
      break;
    }
  }

  Mesh m;
  for (const Element& e : elements) {
    for (std::size_t i = 0; i < e.count; ++i) {
      Vec3 v;
      for (const Property& p : e.props) {
        if (!p.count_type.empty()) {
          const auto n = std::size_t(read_scalar(in, p.count_type, ascii));
          std::vector<uint32_t> idx(n);
          for (auto& k : idx) k = uint32_t(read_scalar(in, p.type, ascii));
          if (e.name == "face" && (p.name == "vertex_indices" || p.name == "vertex_index")) {
            TZ_REQUIRE(n >= 3, io, path, ": face with fewer than 3 vertices");
            for (std::size_t k = 1; k + 1 < n; ++k) m.triangles.push_back({idx[0], idx[k], idx[k + 1]});
          }
          continue;
        }
        const double x = read_scalar(in, p.type, ascii);
        if (e.name == "vertex") {
          if (p.name == "x") v.x = x;
          else if (p.name == "y") v.y = x;
          else if (p.name == "z") v.z = x;
        }
      }
      if (e.name == "vertex") m.vertices.push_back(v);
    }
    TZ_REQUIRE(!in.fail(), io, path, ": truncated PLY body");
  }
  check_indices(m, path);
  return m;
}

Mesh read_mesh(const std::string& path) {
  const std::string e = extension(path);
  if (e == "obj") return read_obj(path);
  if (e == "ply") return read_ply(path);
  detail::raise(ErrorCode::io, "unsupported mesh format: ", path);
}

void write_mesh(const std::string& path, const Mesh& m) {
  const std::string e = extension(path);
  if (e == "obj") return write_obj(path, m);
  if (e == "ply") return write_ply(path, m);
  detail::raise(ErrorCode::io, "unsupported mesh format: ", path);
}

TopologyReport check_topology(const Mesh& m) {
  // Directed half-edges keyed by (min, max); count uses per orientation.
  std::unordered_map<uint64_t, std::array<uint32_t, 2>> uses;
  uses.reserve(m.triangles.size() * 2);
  for (const auto& f : m.triangles)
    for (int k = 0; k < 3; ++k) {
      const uint32_t a = f[k], b = f[(k + 1) % 3];
      const uint64_t key = (uint64_t(std::min(a, b)) << 32) | std::max(a, b);
      ++uses[key][a < b ? 0 : 1];
    }
  TopologyReport r;
  r.edges = uses.size();
  for (const auto& [key, u] : uses) {
    const uint32_t total = u[0] + u[1];
    if (total == 1) ++r.boundary_edges;
    else if (total > 2) ++r.nonmanifold_edges;
    else if (u[0] != 1) ++r.misoriented_edges;
  }
  return r;
}

Mesh weld(const Mesh& m, double tol) {
  TZ_REQUIRE(tol > 0, invalid_argument, "weld tolerance must be positive");
  auto cell = [&](const Vec3& v) {
    return std::array<int64_t, 3>{int64_t(std::floor(v.x / tol)), int64_t(std::floor(v.y / tol)),
                                  int64_t(std::floor(v.z / tol))};
  };
  auto key = [](const std::array<int64_t, 3>& c) {
    uint64_t h = uint64_t(c[0]) * 0x9E3779B97F4A7C15ull;
    h ^= uint64_t(c[1]) * 0xC2B2AE3D27D4EB4Full + (h << 6);
    h ^= uint64_t(c[2]) * 0x165667B19E3779F9ull + (h >> 3);
    return h;
  };
  std::unordered_multimap<uint64_t, uint32_t> buckets;
  Mesh out;
  std::vector<uint32_t> remap(m.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    const Vec3& v = m.vertices[i];
    const auto c = cell(v);
    uint32_t found = UINT32_MAX;
    for (int dx = -1; dx <= 1 && found == UINT32_MAX; ++dx)
      for (int dy = -1; dy <= 1 && found == UINT32_MAX; ++dy)
        for (int dz = -1; dz <= 1 && found == UINT32_MAX; ++dz) {
          auto [lo, hi] = buckets.equal_range(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          for (auto it = lo; it != hi; ++it)
            if (norm(out.vertices[it->second] - v) <= tol) {
              found = it->second;
              break;
            }
        }
    if (found == UINT32_MAX) {
      found = uint32_t(out.vertices.size());
      out.vertices.push_back(v);
      buckets.emplace(key(c), found);
    }
    remap[i] = found;
  }
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& f = m.triangles[t];
    const std::array<uint32_t, 3> g{remap[f[0]], remap[f[1]], remap[f[2]]};
    if (g[0] == g[1] || g[1] == g[2] || g[0] == g[2]) continue;
    out.triangles.push_back(g);
    if (!m.region.empty()) out.region.push_back(m.region[t]);
  }
  return out;
}

}  // namespace tetzero
