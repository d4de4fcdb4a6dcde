#include "tetzero/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "tetzero/error.hpp"

namespace tetzero {

Shape Shape::sphere(const Vec3& c, double r) {
  TZ_REQUIRE(r > 0, invalid_argument, "sphere radius must be positive");
  Shape s;
  s.kind = ShapeKind::sphere;
  s.center = c;
  s.radius = r;
  return s;
}

Shape Shape::box(const Vec3& c, const Vec3& half) {
  TZ_REQUIRE(half.x > 0 && half.y > 0 && half.z > 0, invalid_argument,
             "box half-extents must be positive");
  Shape s;
  s.kind = ShapeKind::box;
  s.center = c;
  s.half = half;
  return s;
}

Shape Shape::torus(const Vec3& c, double major, double minor) {
  TZ_REQUIRE(minor > 0 && major > minor, invalid_argument, "torus needs major > minor > 0");
  Shape s;
  s.kind = ShapeKind::torus;
  s.center = c;
  s.major = major;
  s.radius = minor;
  return s;
}

Shape Shape::combine(ShapeKind op, const Shape& a, const Shape& b) {
  TZ_REQUIRE(op == ShapeKind::unite || op == ShapeKind::intersect || op == ShapeKind::subtract,
             invalid_argument, "not a CSG operator");
  Shape s;
  s.kind = op;
  s.a = std::make_shared<const Shape>(a);
  s.b = std::make_shared<const Shape>(b);
  return s;
}

double sdf_eval(const Shape& s, const Vec3& x) {
  const Vec3 p = x - s.center;
  switch (s.kind) {
    case ShapeKind::sphere:
      return norm(p) - s.radius;
    case ShapeKind::box: {
      const Vec3 q{std::abs(p.x) - s.half.x, std::abs(p.y) - s.half.y, std::abs(p.z) - s.half.z};
      const Vec3 qp{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
      return norm(qp) + std::min(std::max({q.x, q.y, q.z}), 0.0);
    }
    case ShapeKind::torus: {
      const double ring = std::hypot(p.x, p.y) - s.major;
      return std::hypot(ring, p.z) - s.radius;
    }
    case ShapeKind::unite:
      return std::min(sdf_eval(*s.a, x), sdf_eval(*s.b, x));
    case ShapeKind::intersect:
      return std::max(sdf_eval(*s.a, x), sdf_eval(*s.b, x));
    case ShapeKind::subtract:
      return std::max(sdf_eval(*s.a, x), -sdf_eval(*s.b, x));
  }
  return 0.0;
}

Vec3 sdf_gradient(const Shape& s, const Vec3& x, double h) {
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    Vec3 d;
    d[k] = h;
    g[k] = (sdf_eval(s, x + d) - sdf_eval(s, x - d)) / (2 * h);
  }
  return g;
}

namespace {

using nlohmann::json;

const char* kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::box: return "box";
    case ShapeKind::torus: return "torus";
    case ShapeKind::unite: return "union";
    case ShapeKind::intersect: return "intersection";
    case ShapeKind::subtract: return "difference";
  }
  return "?";
}

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
Vec3 json_vec(const json& j) {
  TZ_REQUIRE(j.is_array() && j.size() == 3, invalid_argument, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json to_json(const Shape& s) {
  json j;
  j["type"] = kind_name(s.kind);
  switch (s.kind) {
    case ShapeKind::sphere:
      j["center"] = vec_json(s.center);
      j["radius"] = s.radius;
      break;
    case ShapeKind::box:
      j["center"] = vec_json(s.center);
      j["half_extents"] = vec_json(s.half);
      break;
    case ShapeKind::torus:
      j["center"] = vec_json(s.center);
      j["major"] = s.major;
      j["minor"] = s.radius;
      break;
    default:
      j["a"] = to_json(*s.a);
      j["b"] = to_json(*s.b);
  }
  return j;
}

Shape from_json(const json& j) {
  const std::string t = j.at("type").get<std::string>();
  const Vec3 c = j.contains("center") ? json_vec(j["center"]) : Vec3{};
  if (t == "sphere") return Shape::sphere(c, j.at("radius").get<double>());
  if (t == "box") return Shape::box(c, json_vec(j.at("half_extents")));
  if (t == "torus") return Shape::torus(c, j.at("major").get<double>(), j.at("minor").get<double>());
  ShapeKind op;
  if (t == "union") op = ShapeKind::unite;
  else if (t == "intersection") op = ShapeKind::intersect;
  else if (t == "difference") op = ShapeKind::subtract;
  else detail::raise(ErrorCode::invalid_argument, "unknown shape type '", t, "'");
  return Shape::combine(op, from_json(j.at("a")), from_json(j.at("b")));
}

double surface_area(const Shape& s) {
  switch (s.kind) {
    case ShapeKind::sphere: return 4 * std::numbers::pi * s.radius * s.radius;
    case ShapeKind::box:
      return 8 * (s.half.x * s.half.y + s.half.y * s.half.z + s.half.x * s.half.z);
    case ShapeKind::torus: return 4 * std::numbers::pi * std::numbers::pi * s.major * s.radius;
    default: return surface_area(*s.a) + surface_area(*s.b);
  }
}

}  // namespace

std::string shape_to_json(const Shape& s) { return to_json(s).dump(); }

Shape shape_from_json(const std::string& text) {
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    detail::raise(ErrorCode::invalid_argument, "shape: ", e.what());
  }
}

Shape shape_preset(const std::string& name) {
  if (name == "sphere") return Shape::sphere({0, 0, 0}, 0.6);
  if (name == "box") return Shape::box({0, 0, 0}, {0.5, 0.4, 0.3});
  if (name == "torus") return Shape::torus({0, 0, 0}, 0.5, 0.2);
  if (name == "csg")
    return Shape::combine(ShapeKind::subtract, Shape::box({0, 0, 0}, {0.5, 0.5, 0.5}),
                          Shape::sphere({0, 0, 0}, 0.62));
  detail::raise(ErrorCode::invalid_argument, "unknown shape preset '", name, "'");
}

Vec3 sample_surface(const Shape& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  switch (s.kind) {
    case ShapeKind::sphere: {
      std::normal_distribution<double> g(0, 1);
      Vec3 d;
      do d = {g(rng), g(rng), g(rng)};
      while (norm(d) < 1e-12);
      return s.center + normalized(d) * s.radius;
    }
    case ShapeKind::box: {
      const Vec3& h = s.half;
      const double axy = h.x * h.y, ayz = h.y * h.z, axz = h.x * h.z;
      const double r = u(rng) * (axy + ayz + axz);
      const double side = u(rng) < 0.5 ? -1.0 : 1.0;
      const double a = 2 * u(rng) - 1, b = 2 * u(rng) - 1;
      Vec3 p;
      if (r < axy) p = {a * h.x, b * h.y, side * h.z};
      else if (r < axy + ayz) p = {side * h.x, a * h.y, b * h.z};
      else p = {a * h.x, side * h.y, b * h.z};
      return s.center + p;
    }
    case ShapeKind::torus: {
      const double theta = 2 * std::numbers::pi * u(rng);
      double phi;
      do phi = 2 * std::numbers::pi * u(rng);
      while (u(rng) * (s.major + s.radius) > s.major + s.radius * std::cos(phi));
      const double ring = s.major + s.radius * std::cos(phi);
      return s.center + Vec3{ring * std::cos(theta), ring * std::sin(theta), s.radius * std::sin(phi)};
    }
    default: {
      const double wa = surface_area(*s.a), wb = surface_area(*s.b);
      for (int attempt = 0; attempt < 1000000; ++attempt) {
        const Vec3 p = u(rng) * (wa + wb) < wa ? sample_surface(*s.a, rng) : sample_surface(*s.b, rng);
        if (std::abs(sdf_eval(s, p)) <= 1e-9) return p;
      }
      detail::raise(ErrorCode::domain, "CSG shape has no surface");
    }
  }
}

SampleSet sample_training(const Shape& s, const SampleConfig& cfg) {
  TZ_REQUIRE(cfg.n >= 1, invalid_argument, "sample count must be >= 1");
  TZ_REQUIRE(cfg.p_near >= 0 && cfg.p_near <= 1, invalid_argument, "p_near must be in [0,1]");
  TZ_REQUIRE(cfg.sigma >= 0, invalid_argument, "sigma must be >= 0");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> g(0, 1);
  auto inside_box = [&](const Vec3& p) {
    for (int k = 0; k < 3; ++k)
      if (p[k] < cfg.lo[k] || p[k] > cfg.hi[k]) return false;
    return true;
  };
  const std::size_t n_near = static_cast<std::size_t>(std::llround(cfg.p_near * double(cfg.n)));
  SampleSet out;
  out.points.reserve(cfg.n);
  while (out.points.size() < n_near) {
    const Vec3 p = sample_surface(s, rng);
    Vec3 x = p;
    if (cfg.sigma > 0) x += normalized(sdf_gradient(s, p)) * (cfg.sigma * g(rng));
    if (!inside_box(x)) continue;
    out.points.push_back(x);
    out.near.push_back(1);
  }
  while (out.points.size() < cfg.n) {
    Vec3 x;
    for (int k = 0; k < 3; ++k) x[k] = cfg.lo[k] + (cfg.hi[k] - cfg.lo[k]) * u(rng);
    out.points.push_back(x);
    out.near.push_back(0);
  }
  out.targets.resize(out.points.size());
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    out.targets[i] = sdf_eval(s, out.points[i]);
    if (cfg.sigma == 0 && out.near[i]) out.targets[i] = 0.0;
  }
  return out;
}

void write_samples(const std::string& path, const SampleSet& set) {
  std::ofstream f(path, std::ios::binary);
  TZ_REQUIRE(f.good(), io, "cannot write ", path);
  const uint32_t version = 1;
  const uint64_t n = set.size();
  f.write("TZSS", 4);
  f.write(reinterpret_cast<const char*>(&version), 4);
  f.write(reinterpret_cast<const char*>(&n), 8);
  for (const Vec3& p : set.points) {
    const float v[3] = {float(p.x), float(p.y), float(p.z)};
    f.write(reinterpret_cast<const char*>(v), sizeof v);
  }
  for (double t : set.targets) {
    const float v = float(t);
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
  TZ_REQUIRE(f.good(), io, "write failed for ", path);
}

SampleSet read_samples(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  TZ_REQUIRE(f.good(), io, "cannot read ", path);
  char magic[4];
  uint32_t version = 0;
  uint64_t n = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&n), 8);
  TZ_REQUIRE(f.good() && std::memcmp(magic, "TZSS", 4) == 0 && version == 1, io,
             path, " is not a sample file");
  SampleSet s;
  s.points.resize(n);
  s.targets.resize(n);
  s.near.assign(n, 0);
  for (auto& p : s.points) {
    float v[3];
    f.read(reinterpret_cast<char*>(v), sizeof v);
    p = {v[0], v[1], v[2]};
  }
  for (auto& t : s.targets) {
    float v;
    f.read(reinterpret_cast<char*>(&v), 4);
    t = v;
  }
  TZ_REQUIRE(f.good(), io, path, " is truncated");
  return s;
}

}  // namespace tetzero
