#pragma once

// Analytic signed distance fields and training-sample generation.

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tetzero/geometry.hpp"

namespace tetzero {

enum class ShapeKind { sphere, box, torus, unite, intersect, subtract };

/// Negative inside. Torus axis is z. CSG nodes combine with min/max, which is
/// exact outside for unions and a lower bound on |distance| elsewhere.
struct Shape {
  ShapeKind kind = ShapeKind::sphere;
  Vec3 center;
  double radius = 0.5;        // sphere radius, torus tube radius
  double major = 0.5;         // torus ring radius
  Vec3 half{0.5, 0.5, 0.5};   // box half-extents
  std::shared_ptr<const Shape> a, b;

  static Shape sphere(const Vec3& c, double r);
  static Shape box(const Vec3& c, const Vec3& half);
  static Shape torus(const Vec3& c, double major, double minor);
  static Shape combine(ShapeKind op, const Shape& a, const Shape& b);
};

double sdf_eval(const Shape& s, const Vec3& x);
/// Central-difference gradient.
Vec3 sdf_gradient(const Shape& s, const Vec3& x, double h = 1e-6);

std::string shape_to_json(const Shape& s);
Shape shape_from_json(const std::string& text);
/// "sphere", "box", "torus" or "csg" presets used by the CLI.
Shape shape_preset(const std::string& name);

struct SampleConfig {
  std::size_t n = 50000;
  double p_near = 0.8;
  double sigma = 0.01;
  uint64_t seed = 0;
  Vec3 lo{-1, -1, -1};
  Vec3 hi{1, 1, 1};
};

struct SampleSet {
  std::vector<Vec3> points;
  std::vector<double> targets;
  std::vector<uint8_t> near;  // 1 = near-surface, 0 = uniform
  std::size_t size() const { return points.size(); }
};

/// Uniform-area point on the shape's surface.
Vec3 sample_surface(const Shape& s, std::mt19937_64& rng);

SampleSet sample_training(const Shape& s, const SampleConfig& cfg);

/// Header "TZSS", u32 version, u64 n, then n float32 triples and n float32 targets.
void write_samples(const std::string& path, const SampleSet& set);
SampleSet read_samples(const std::string& path);

}  // namespace tetzero
