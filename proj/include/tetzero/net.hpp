#pragma once

// ReLU MLP on top of the tetrahedral encoder, sign vectors, and the composed
// field f(x) = mlp(encode(map(x))).

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tetzero/encoder.hpp"
#include "tetzero/precond.hpp"

namespace tetzero {

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> W;  // out x in, row-major
  std::vector<double> b;
};

/// Hidden ReLU layers followed by a scalar affine output. Neurons are numbered
/// layer-major: hidden neurons 0..H-1, then the output neuron H.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int input, const std::vector<int>& hidden);

  int input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
  int hidden_neurons() const { return hidden_; }
  int neurons() const { return hidden_ + 1; }
  int hidden_layers() const { return int(layers_.size()) - 1; }
  std::vector<int> hidden_widths() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Layer index and within-layer index of a global neuron id.
  std::pair<int, int> locate_neuron(int g) const;

  /// W, b ~ U(-1/sqrt(in), 1/sqrt(in)).
  void init_uniform(std::mt19937_64& rng);

  /// Returns f; writes the pre-activations of all neurons (size neurons())
  /// when `preacts` is non-empty.
  double forward(std::span<const double> z, std::span<double> preacts = {}) const;

  /// Pre-activation of neuron g, evaluating only the layers it depends on.
  double preact(std::span<const double> z, int g) const;

  /// df/dz with the ReLU derivative taken as 0 at exactly 0.
  void input_gradient(std::span<const double> preacts, std::span<double> dz) const;

 private:
  std::vector<DenseLayer> layers_;
  int hidden_ = 0;
};

/// Ternary code packed two bits per entry (00 = 0, 01 = +1, 10 = -1).
class SignVector {
 public:
  SignVector() = default;
  explicit SignVector(int n) : n_(n), words_((n + 31) / 32, 0) {}

  int size() const { return n_; }
  int get(int i) const {
    const uint64_t c = (words_[i >> 5] >> (2 * (i & 31))) & 3u;
    return c == 1 ? 1 : (c == 2 ? -1 : 0);
  }
  void set(int i, int s) {
    uint64_t& w = words_[i >> 5];
    const int sh = 2 * (i & 31);
    w &= ~(uint64_t(3) << sh);
    w |= uint64_t(s > 0 ? 1 : (s < 0 ? 2 : 0)) << sh;
  }
  int zeros() const;
  friend bool operator==(const SignVector&, const SignVector&) = default;

 private:
  int n_ = 0;
  std::vector<uint64_t> words_;
};

inline int sign_of(double v, double eps) { return v > eps ? 1 : (v < -eps ? -1 : 0); }

/// Signs of the first `upto` pre-activations (all when upto < 0).
SignVector sign_vector(std::span<const double> preacts, double eps, int upto = -1);

/// The composed field. Grid-space coordinates y live in [0,1]^3; scene
/// coordinates x map to them through `input`.
struct Model {
  Encoder encoder;
  Mlp mlp;
  InputMap input;
  Vec3 box_lo{-1, -1, -1};
  Vec3 box_hi{1, 1, 1};
  bool preconditioned = false;

  Model(const Encoder& e, const Mlp& m) : encoder(e), mlp(m) {}

  const Grid& grid() const { return encoder.grid(); }

  double eval_grid(const Vec3& y, std::span<double> preacts = {}) const;
  double eval(const Vec3& x) const { return eval_grid(input.apply(x)); }

  double neuron_preact_grid(const Vec3& y, int g) const;

  /// Gradient in grid space on the located region (tie-break cell on boundaries).
  Vec3 grad_grid(const Vec3& y) const;
  Vec3 grad(const Vec3& x) const { return input.pull_gradient(grad_grid(input.apply(x))); }
};

/// Gradients of the four Kuhn barycentric weights with respect to y for tetra
/// type t at resolution n (constant on the tetra).
std::array<Vec3, 4> kuhn_weight_gradients(int t, double n);

}  // namespace tetzero
