#include "tetzero/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "tetzero/error.hpp"

namespace tetzero {

namespace {

constexpr std::array<Int3, kFamilies> kNormals{{
    {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, -1, 0}, {0, 1, -1}, {1, 0, -1},
}};

constexpr double kQuant = 1e9;

void dedup_sorted(std::vector<double>& v, double tol) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v)
    if (out.empty() || x - out.back() > tol) out.push_back(x);
  v.swap(out);
}

double dot_int(const Int3& n, const Vec3& x) { return n[0] * x.x + n[1] * x.y + n[2] * x.z; }

// Index of the raw offset equal to value (within tol), or -1.
int32_t find_offset(const std::vector<double>& raw, double value, double tol) {
  auto it = std::lower_bound(raw.begin(), raw.end(), value - tol);
  if (it != raw.end() && std::abs(*it - value) <= tol) return int32_t(it - raw.begin());
  return -1;
}

}  // namespace

std::vector<PlaneFamily> plane_families(const std::vector<int>& resolutions) {
  TZ_REQUIRE(!resolutions.empty(), invalid_argument, "no grid levels");
  std::vector<PlaneFamily> fam(kFamilies);
  for (int f = 0; f < kFamilies; ++f) {
    const Int3& n = kNormals[f];
    const double len = std::sqrt(double(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]));
    fam[f].normal_int = n;
    fam[f].normal = Vec3(n[0], n[1], n[2]) * (1.0 / len);
    for (int N : resolutions) {
      const int lo = f < 3 ? 0 : -N;
      for (int m = lo; m <= N; ++m) fam[f].raw.push_back(double(m) / N);
    }
    dedup_sorted(fam[f].raw, 1e-12);
    for (double r : fam[f].raw) fam[f].offsets.push_back(r / len);
  }
  return fam;
}

Skeleton extract_vertices(const std::vector<PlaneFamily>& families) {
  TZ_REQUIRE(families.size() >= 3, invalid_argument, "need at least three plane families");
  const int nf = int(families.size());
  std::vector<std::array<int64_t, 3>> keys;
  for (int a = 0; a < nf; ++a)
    for (int b = a + 1; b < nf; ++b)
      for (int c = b + 1; c < nf; ++c) {
        const Int3 &na = families[a].normal_int, &nb = families[b].normal_int,
                   &nc = families[c].normal_int;
        const Mat3 nm = Mat3::from_rows(Vec3(na[0], na[1], na[2]), Vec3(nb[0], nb[1], nb[2]),
                                        Vec3(nc[0], nc[1], nc[2]));
        if (std::abs(det(nm)) < 0.5) continue;  // integer normals: det is 0 or >= 1
        const Mat3 inv = inverse(nm);
        const Vec3 ca = inv.column(0), cb = inv.column(1), cc = inv.column(2);
        for (double da : families[a].raw)
          for (double db : families[b].raw) {
            const Vec3 base = ca * da + cb * db;
            for (double dc : families[c].raw) {
              const Vec3 x = base + cc * dc;
              if (x.x < -1e-9 || x.y < -1e-9 || x.z < -1e-9 || x.x > 1 + 1e-9 || x.y > 1 + 1e-9 ||
                  x.z > 1 + 1e-9)
                continue;
              keys.push_back({std::llround(x.x * kQuant), std::llround(x.y * kQuant),
                              std::llround(x.z * kQuant)});
            }
          }
      }
  // deterministic order: z-major, then y, then x
  std::sort(keys.begin(), keys.end(), [](const auto& p, const auto& q) {
    return std::tie(p[2], p[1], p[0]) < std::tie(q[2], q[1], q[0]);
  });
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  Skeleton s;
  s.vertices.reserve(keys.size());
  s.incidence.reserve(keys.size());
  for (const auto& k : keys) {
    Vec3 x{double(k[0]) / kQuant, double(k[1]) / kQuant, double(k[2]) / kQuant};
    // snap back to the exact plane intersection through the incident offsets
    std::array<int32_t, kFamilies> inc;
    inc.fill(-1);
    for (int f = 0; f < nf; ++f) inc[f] = find_offset(families[f].raw, dot_int(families[f].normal_int, x), 2e-9);
    int used[3], nu = 0;
    for (int f = 0; f < nf && nu < 3; ++f) {
      if (inc[f] < 0) continue;
      bool independent = true;
      if (nu == 2) {
        const Int3 &p = families[used[0]].normal_int, &q = families[used[1]].normal_int,
                   &r = families[f].normal_int;
        const Mat3 m = Mat3::from_rows(Vec3(p[0], p[1], p[2]), Vec3(q[0], q[1], q[2]), Vec3(r[0], r[1], r[2]));
        independent = std::abs(det(m)) > 0.5;
      }
      if (independent) used[nu++] = f;
    }
    if (nu == 3) {
      const auto& A = families[used[0]];
      const auto& B = families[used[1]];
      const auto& C = families[used[2]];
      const Mat3 m = Mat3::from_rows(Vec3(A.normal_int[0], A.normal_int[1], A.normal_int[2]),
                                     Vec3(B.normal_int[0], B.normal_int[1], B.normal_int[2]),
                                     Vec3(C.normal_int[0], C.normal_int[1], C.normal_int[2]));
      x = inverse(m) * Vec3(A.raw[inc[used[0]]], B.raw[inc[used[1]]], C.raw[inc[used[2]]]);
      for (int k = 0; k < 3; ++k) x[k] = std::clamp(x[k], 0.0, 1.0);
    }
    s.vertices.push_back(x);
    s.incidence.push_back(inc);
  }
  return s;
}

void extract_edges(const std::vector<PlaneFamily>& families, Skeleton& s) {
  const int nf = int(families.size());
  struct Item {
    int32_t o1, o2;
    double t;
    uint32_t v;
  };
  std::vector<std::array<uint32_t, 2>> edges;
  std::vector<Item> items;
  for (int a = 0; a < nf; ++a)
    for (int b = a + 1; b < nf; ++b) {
      const Vec3 dir = cross(families[a].normal, families[b].normal);
      if (norm(dir) < 1e-12) continue;
      items.clear();
      for (uint32_t v = 0; v < s.vertices.size(); ++v) {
        const auto& inc = s.incidence[v];
        if (inc[a] >= 0 && inc[b] >= 0) items.push_back({inc[a], inc[b], dot(dir, s.vertices[v]), v});
      }
      std::sort(items.begin(), items.end(), [](const Item& p, const Item& q) {
        return std::tie(p.o1, p.o2, p.t, p.v) < std::tie(q.o1, q.o2, q.t, q.v);
      });
      for (std::size_t i = 1; i < items.size(); ++i) {
        const Item &p = items[i - 1], &q = items[i];
        if (p.o1 != q.o1 || p.o2 != q.o2) continue;
        edges.push_back({std::min(p.v, q.v), std::max(p.v, q.v)});
      }
    }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  s.edges = std::move(edges);
}

Skeleton extract_skeleton(const Grid& grid) {
  const auto fam = plane_families(grid.resolutions());
  Skeleton s = extract_vertices(fam);
  extract_edges(fam, s);
  return s;
}

std::vector<LevelTag> annotate(const Skeleton& s, const Grid& grid, double mask_eps) {
  const int L = grid.levels();
  std::vector<LevelTag> out(s.vertices.size() * L);
  for (std::size_t v = 0; v < s.vertices.size(); ++v) {
    const auto t = grid.tags(s.vertices[v], mask_eps);
    std::copy(t.begin(), t.end(), out.begin() + v * L);
  }
  return out;
}

std::string grid_digest(const Grid& grid) {
  std::ostringstream os;
  os << "tetzero-skeleton-v1;domain=unit;resolutions=";
  for (int n : grid.resolutions()) os << n << ",";
  const std::string msg = os.str();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  TZ_REQUIRE(EVP_Digest(msg.data(), msg.size(), md, &len, EVP_sha256(), nullptr) == 1, internal,
             "SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

namespace {
template <class T>
void put(std::ostream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
void get(std::istream& f, T& v) {
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_skeleton(const std::string& path, const Skeleton& s, const std::string& digest) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    TZ_REQUIRE(f.good(), io, "cannot write ", tmp);
    f.write("TZSK", 4);
    put(f, uint32_t(1));
    TZ_REQUIRE(digest.size() == 64, invalid_argument, "digest must be 64 hex characters");
    f.write(digest.data(), 64);
    put(f, uint64_t(s.vertices.size()));
    f.write(reinterpret_cast<const char*>(s.vertices.data()), s.vertices.size() * sizeof(Vec3));
    f.write(reinterpret_cast<const char*>(s.incidence.data()),
            s.incidence.size() * sizeof(s.incidence[0]));
    put(f, uint64_t(s.edges.size()));
    f.write(reinterpret_cast<const char*>(s.edges.data()), s.edges.size() * sizeof(s.edges[0]));
    TZ_REQUIRE(f.good(), io, "write failed for ", tmp);
  }
  std::filesystem::rename(tmp, path);
}

bool load_skeleton(const std::string& path, const std::string& digest, Skeleton& s) {
  std::ifstream f(path, std::ios::binary);
  if (!f.good()) return false;
  char magic[4];
  uint32_t version = 0;
  std::string d(64, '\0');
  f.read(magic, 4);
  get(f, version);
  f.read(d.data(), 64);
  if (!f.good() || std::memcmp(magic, "TZSK", 4) != 0 || version != 1 || d != digest) return false;
  uint64_t nv = 0, ne = 0;
  get(f, nv);
  s.vertices.resize(nv);
  s.incidence.resize(nv);
  f.read(reinterpret_cast<char*>(s.vertices.data()), nv * sizeof(Vec3));
  f.read(reinterpret_cast<char*>(s.incidence.data()), nv * sizeof(s.incidence[0]));
  get(f, ne);
  if (!f.good()) return false;
  s.edges.resize(ne);
  f.read(reinterpret_cast<char*>(s.edges.data()), ne * sizeof(s.edges[0]));
  return f.good();
}

Skeleton cached_skeleton(const Grid& grid, const std::string& dir, bool* hit) {
  const std::string digest = grid_digest(grid);
  const std::string path = (std::filesystem::path(dir) / ("skeleton-" + digest + ".bin")).string();
  Skeleton s;
  if (load_skeleton(path, digest, s)) {
    if (hit) *hit = true;
    return s;
  }
  if (hit) *hit = false;
  s = extract_skeleton(grid);
  std::filesystem::create_directories(dir);
  save_skeleton(path, s, digest);
  return s;
}

}  // namespace tetzero
