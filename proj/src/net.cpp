#include "tetzero/net.hpp"

#include <algorithm>
#include <cmath>

#include "tetzero/error.hpp"

namespace tetzero {

Mlp::Mlp(int input, const std::vector<int>& hidden) {
  TZ_REQUIRE(input >= 1, invalid_argument, "MLP input width must be >= 1");
  int prev = input;
  for (int w : hidden) {
    TZ_REQUIRE(w >= 1, invalid_argument, "hidden width must be >= 1, got ", w);
    layers_.push_back({prev, w, std::vector<double>(std::size_t(prev) * w, 0.0),
                       std::vector<double>(w, 0.0)});
    hidden_ += w;
    prev = w;
  }
  layers_.push_back({prev, 1, std::vector<double>(prev, 0.0), std::vector<double>(1, 0.0)});
}

std::vector<int> Mlp::hidden_widths() const {
  std::vector<int> w;
  for (int i = 0; i + 1 < int(layers_.size()); ++i) w.push_back(layers_[i].out);
  return w;
}

std::pair<int, int> Mlp::locate_neuron(int g) const {
  TZ_REQUIRE(g >= 0 && g < neurons(), invalid_argument, "neuron ", g, " out of range");
  for (int i = 0; i < int(layers_.size()); ++i) {
    if (g < layers_[i].out) return {i, g};
    g -= layers_[i].out;
  }
  detail::raise(ErrorCode::internal, "neuron lookup fell through");
}

void Mlp::init_uniform(std::mt19937_64& rng) {
  for (auto& l : layers_) {
    const double k = 1.0 / std::sqrt(double(l.in));
    std::uniform_real_distribution<double> u(-k, k);
    for (double& v : l.W) v = u(rng);
    for (double& v : l.b) v = u(rng);
  }
}

namespace {

// Runs layers [0, last] and writes their pre-activations; returns the
// pre-activation buffer of layer `last`.
void run_layers(const std::vector<DenseLayer>& layers, std::span<const double> z, int last,
                std::vector<double>& a, std::vector<double>& next, double* preacts) {
  a.assign(z.begin(), z.end());
  for (int i = 0; i <= last; ++i) {
    const DenseLayer& l = layers[i];
    next.assign(l.out, 0.0);
    for (int o = 0; o < l.out; ++o) {
      const double* w = l.W.data() + std::size_t(o) * l.in;
      double s = l.b[o];
      for (int k = 0; k < l.in; ++k) s += w[k] * a[k];
      next[o] = s;
    }
    if (preacts) {
      std::copy(next.begin(), next.end(), preacts);
      preacts += l.out;
    }
    if (i + 1 < int(layers.size()))
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    a.swap(next);
  }
}

}  // namespace

double Mlp::forward(std::span<const double> z, std::span<double> preacts) const {
  TZ_REQUIRE(int(z.size()) == input_dim(), invalid_argument, "MLP input has ", z.size(),
             " entries, expected ", input_dim());
  TZ_REQUIRE(preacts.empty() || int(preacts.size()) == neurons(), invalid_argument,
             "pre-activation buffer has wrong size");
  thread_local std::vector<double> a, next;
  run_layers(layers_, z, int(layers_.size()) - 1, a, next, preacts.empty() ? nullptr : preacts.data());
  return a[0];
}

double Mlp::preact(std::span<const double> z, int g) const {
  TZ_REQUIRE(int(z.size()) == input_dim(), invalid_argument, "MLP input has wrong size");
  const auto [layer, k] = locate_neuron(g);
  thread_local std::vector<double> a, next;
  a.assign(z.begin(), z.end());
  for (int i = 0; i <= layer; ++i) {
    const DenseLayer& l = layers_[i];
    const int rows = (i == layer) ? k + 1 : l.out;
    next.assign(rows, 0.0);
    for (int o = (i == layer ? k : 0); o < rows; ++o) {
      const double* w = l.W.data() + std::size_t(o) * l.in;
      double s = l.b[o];
      for (int q = 0; q < l.in; ++q) s += w[q] * a[q];
      next[o] = (i == layer) ? s : (s > 0.0 ? s : 0.0);
    }
    a.swap(next);
  }
  return a[k];
}

void Mlp::input_gradient(std::span<const double> preacts, std::span<double> dz) const {
  TZ_REQUIRE(int(preacts.size()) == neurons() && int(dz.size()) == input_dim(), invalid_argument,
             "gradient buffers have wrong size");
  thread_local std::vector<double> delta, prev;
  delta.assign(1, 1.0);
  int offset = hidden_;
  for (int i = int(layers_.size()) - 1; i >= 0; --i) {
    const DenseLayer& l = layers_[i];
    prev.assign(l.in, 0.0);
    for (int o = 0; o < l.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* w = l.W.data() + std::size_t(o) * l.in;
      for (int q = 0; q < l.in; ++q) prev[q] += d * w[q];
    }
    if (i > 0) {
      offset -= l.in;
      for (int q = 0; q < l.in; ++q)
        if (!(preacts[offset + q] > 0.0)) prev[q] = 0.0;
    }
    delta.swap(prev);
  }
  std::copy(delta.begin(), delta.end(), dz.begin());
}

int SignVector::zeros() const {
  int z = 0;
  for (int i = 0; i < n_; ++i) z += get(i) == 0;
  return z;
}

SignVector sign_vector(std::span<const double> preacts, double eps, int upto) {
  const int n = upto < 0 ? int(preacts.size()) : upto;
  TZ_REQUIRE(n <= int(preacts.size()), invalid_argument, "sign prefix longer than pre-activations");
  SignVector s(n);
  for (int i = 0; i < n; ++i) s.set(i, sign_of(preacts[i], eps));
  return s;
}

std::array<Vec3, 4> kuhn_weight_gradients(int t, double n) {
  // w = (1 - u_f, u_f - u_s, u_s - u_t, u_t) with u = n y - a
  const auto& ax = kTetraAxes[t];
  Vec3 ef, es, et;
  ef[ax[0]] = n;
  es[ax[1]] = n;
  et[ax[2]] = n;
  return {-ef, ef - es, es - et, et};
}

double Model::eval_grid(const Vec3& y, std::span<double> preacts) const {
  thread_local std::vector<double> z;
  z.resize(encoder.output_dim());
  encoder.encode(y, z);
  return mlp.forward(z, preacts);
}

double Model::neuron_preact_grid(const Vec3& y, int g) const {
  thread_local std::vector<double> z;
  z.resize(encoder.output_dim());
  encoder.encode(y, z);
  return mlp.preact(z, g);
}

Vec3 Model::grad_grid(const Vec3& y) const {
  const int L = encoder.levels(), d = encoder.features();
  std::vector<LevelSample> s(L);
  std::vector<double> z(encoder.output_dim()), pre(mlp.neurons()), dz(encoder.output_dim());
  encoder.encode(y, z, s);
  mlp.forward(z, pre);
  mlp.input_gradient(pre, dz);
  Vec3 g;
  for (int l = 0; l < L; ++l) {
    const auto dw = kuhn_weight_gradients(s[l].id.tetra, grid().resolution(l));
    for (int i = 0; i < 4; ++i) {
      const double* h = encoder.row(l, s[l].rows[i]);
      double c = 0.0;
      for (int k = 0; k < d; ++k) c += dz[l * d + k] * h[k];
      g += dw[i] * c;
    }
  }
  return g;
}

}  // namespace tetzero
