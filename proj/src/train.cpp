#include "tetzero/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tetzero/error.hpp"

namespace tetzero {

Gradients::Gradients(const Model& m) {
  for (int l = 0; l < m.encoder.levels(); ++l)
    features.emplace_back(m.encoder.table(l).data.size(), 0.0);
  for (const auto& layer : m.mlp.layers()) {
    W.emplace_back(layer.W.size(), 0.0);
    b.emplace_back(layer.b.size(), 0.0);
  }
}

void Gradients::zero() {
  for (auto* group : {&features, &W, &b})
    for (auto& v : *group) std::fill(v.begin(), v.end(), 0.0);
}

namespace {

struct Workspace {
  std::vector<LevelSample> s;
  std::vector<std::array<Vec3, 4>> dw;
  std::vector<std::vector<double>> act;    // act[i] = input of layer i
  std::vector<std::vector<double>> pre;    // pre-activations of layer i
  std::vector<std::vector<double>> delta;  // df/dpre_i
  std::vector<std::vector<double>> tan;    // tangent input of layer i
  std::vector<double> dz;
};

void setup(Workspace& w, const Model& m) {
  const auto& layers = m.mlp.layers();
  w.s.resize(m.encoder.levels());
  w.dw.resize(m.encoder.levels());
  w.act.resize(layers.size());
  w.pre.resize(layers.size());
  w.delta.resize(layers.size());
  w.tan.resize(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    w.act[i].resize(layers[i].in);
    w.tan[i].resize(layers[i].in);
    w.pre[i].resize(layers[i].out);
    w.delta[i].resize(layers[i].out);
  }
  w.dz.resize(m.encoder.output_dim());
}

// Forward pass plus df/dpre and df/dz. Returns f.
double forward_backward(const Model& m, const Vec3& y, Workspace& w) {
  const auto& layers = m.mlp.layers();
  const int nl = int(layers.size());
  m.encoder.encode(y, w.act[0], w.s);
  for (int i = 0; i < nl; ++i) {
    const DenseLayer& l = layers[i];
    for (int o = 0; o < l.out; ++o) {
      const double* wr = l.W.data() + std::size_t(o) * l.in;
      double s = l.b[o];
      for (int k = 0; k < l.in; ++k) s += wr[k] * w.act[i][k];
      w.pre[i][o] = s;
      if (i + 1 < nl) w.act[i + 1][o] = s > 0.0 ? s : 0.0;
    }
  }
  w.delta[nl - 1][0] = 1.0;
  for (int i = nl - 1; i >= 0; --i) {
    const DenseLayer& l = layers[i];
    double* back = i > 0 ? w.delta[i - 1].data() : w.dz.data();
    std::fill(back, back + l.in, 0.0);
    for (int o = 0; o < l.out; ++o) {
      const double d = w.delta[i][o];
      if (d == 0.0) continue;
      const double* wr = l.W.data() + std::size_t(o) * l.in;
      for (int k = 0; k < l.in; ++k) back[k] += d * wr[k];
    }
    if (i > 0)
      for (int k = 0; k < l.in; ++k)
        if (!(w.pre[i - 1][k] > 0.0)) back[k] = 0.0;
  }
  return w.pre[nl - 1][0];
}

}  // namespace

LossValue loss_and_gradient(const Model& m, const SampleSet& data, std::span<const std::size_t> idx,
                            double lambda_eik, Gradients* g) {
  TZ_REQUIRE(!idx.empty(), invalid_argument, "empty batch");
  const auto& layers = m.mlp.layers();
  const int nl = int(layers.size());
  const int L = m.encoder.levels(), d = m.encoder.features();
  const double inv_b = 1.0 / double(idx.size());
  Workspace w;
  setup(w, m);
  LossValue lv;
  for (std::size_t id : idx) {
    const Vec3 y = m.input.apply(data.points[id]);
    const double f = forward_backward(m, y, w);
    // grad_y f = sum_l sum_i (dz_l . h_i) grad w_i
    Vec3 gy;
    for (int l = 0; l < L; ++l) {
      w.dw[l] = kuhn_weight_gradients(w.s[l].id.tetra, m.grid().resolution(l));
      for (int i = 0; i < 4; ++i) {
        const double* h = m.encoder.row(l, w.s[l].rows[i]);
        double c = 0.0;
        for (int k = 0; k < d; ++k) c += w.dz[l * d + k] * h[k];
        gy += w.dw[l][i] * c;
      }
    }
    const Vec3 gx = m.input.pull_gradient(gy);
    const double n = norm(gx);
    const double r = f - data.targets[id];
    lv.l1 += std::abs(r);
    lv.eik += (n - 1.0) * (n - 1.0);
    if (!g) continue;

    const double c1 = (r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0)) * inv_b;
    Vec3 p;  // d(eikonal)/d(grad_y f)
    const bool eik_on = lambda_eik != 0.0 && n > 0.0;
    if (eik_on) p = m.input.M * (gx * (lambda_eik * 2.0 * (n - 1.0) / n * inv_b));

    // features
    for (int l = 0; l < L; ++l)
      for (int i = 0; i < 4; ++i) {
        double coef = c1 * w.s[l].w[i];
        if (eik_on) coef += dot(w.dw[l][i], p);
        if (coef == 0.0) continue;
        double* gr = g->features[l].data() + std::size_t(w.s[l].rows[i]) * d;
        for (int k = 0; k < d; ++k) gr[k] += coef * w.dz[l * d + k];
      }
    // MLP, L1 part
    if (c1 != 0.0)
      for (int i = 0; i < nl; ++i) {
        const DenseLayer& lay = layers[i];
        for (int o = 0; o < lay.out; ++o) {
          const double dd = c1 * w.delta[i][o];
          if (dd == 0.0) continue;
          double* gw = g->W[i].data() + std::size_t(o) * lay.in;
          for (int k = 0; k < lay.in; ++k) gw[k] += dd * w.act[i][k];
          g->b[i][o] += dd;
        }
      }
    // MLP, eikonal part: tangent pass seeded with A' p
    if (eik_on) {
      for (int l = 0; l < L; ++l) {
        std::array<double, 4> wp;
        for (int i = 0; i < 4; ++i) wp[i] = dot(w.dw[l][i], p);
        for (int k = 0; k < d; ++k) {
          double t = 0.0;
          for (int i = 0; i < 4; ++i) t += wp[i] * m.encoder.row(l, w.s[l].rows[i])[k];
          w.tan[0][l * d + k] = t;
        }
      }
      for (int i = 0; i < nl; ++i) {
        const DenseLayer& lay = layers[i];
        for (int o = 0; o < lay.out; ++o) {
          const double* wr = lay.W.data() + std::size_t(o) * lay.in;
          const double dd = w.delta[i][o];
          if (dd != 0.0) {
            double* gw = g->W[i].data() + std::size_t(o) * lay.in;
            for (int k = 0; k < lay.in; ++k) gw[k] += dd * w.tan[i][k];
          }
          if (i + 1 < nl) {
            double t = 0.0;
            if (w.pre[i][o] > 0.0)
              for (int k = 0; k < lay.in; ++k) t += wr[k] * w.tan[i][k];
            w.tan[i + 1][o] = t;
          }
        }
      }
    }
  }
  lv.l1 *= inv_b;
  lv.eik *= inv_b;
  lv.total = lv.l1 + lambda_eik * lv.eik;
  return lv;
}

LossValue evaluate_loss(const Model& m, const SampleSet& data, double lambda_eik) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  return loss_and_gradient(m, data, idx, lambda_eik, nullptr);
}

Adam::Adam(const Model& m, const TrainConfig& cfg) : cfg_(cfg), m1_(m), m2_(m) {}

namespace {
void adam_update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m1,
                 std::vector<double>& m2, double lr, double b1, double b2, double eps, double c1,
                 double c2) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m1[i] = b1 * m1[i] + (1 - b1) * g[i];
    m2[i] = b2 * m2[i] + (1 - b2) * g[i] * g[i];
    p[i] -= lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
  }
}
}  // namespace

void Adam::step(Model& m, const Gradients& g) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (int l = 0; l < m.encoder.levels(); ++l)
    adam_update(m.encoder.table(l).data, g.features[l], m1_.features[l], m2_.features[l],
                cfg_.lr_features, cfg_.beta1, cfg_.beta2, cfg_.adam_eps, c1, c2);
  auto& layers = m.mlp.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    adam_update(layers[i].W, g.W[i], m1_.W[i], m2_.W[i], cfg_.lr_mlp, cfg_.beta1, cfg_.beta2,
                cfg_.adam_eps, c1, c2);
    adam_update(layers[i].b, g.b[i], m1_.b[i], m2_.b[i], cfg_.lr_mlp, cfg_.beta1, cfg_.beta2,
                cfg_.adam_eps, c1, c2);
  }
}

void round_parameters_to_float(Model& m) {
  for (int l = 0; l < m.encoder.levels(); ++l)
    for (double& v : m.encoder.table(l).data) v = double(float(v));
  for (auto& layer : m.mlp.layers()) {
    for (double& v : layer.W) v = double(float(v));
    for (double& v : layer.b) v = double(float(v));
  }
}

std::vector<EpochStats> train(Model& m, const SampleSet& data, const TrainConfig& cfg,
                              const EpochCallback& on_epoch) {
  TZ_REQUIRE(data.size() > 0, invalid_argument, "training set is empty");
  TZ_REQUIRE(cfg.epochs >= 0 && cfg.batch >= 1, invalid_argument, "bad epochs/batch");
  TZ_REQUIRE(cfg.lambda_eik >= 0, invalid_argument, "eikonal weight must be >= 0");
  std::mt19937_64 rng(cfg.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  Gradients g(m);
  Adam adam(m, cfg);
  std::vector<EpochStats> log;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats st;
    st.epoch = e + 1;
    std::size_t seen = 0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch) {
      const std::size_t n = std::min<std::size_t>(cfg.batch, order.size() - s);
      g.zero();
      const LossValue lv =
          loss_and_gradient(m, data, std::span(order).subspan(s, n), cfg.lambda_eik, &g);
      TZ_REQUIRE(std::isfinite(lv.total), non_finite, "non-finite loss at epoch ", e + 1,
                 ", batch starting at ", s, " (l1 = ", lv.l1, ", eik = ", lv.eik, ")");
      adam.step(m, g);
      st.l1 += lv.l1 * double(n);
      st.eik += lv.eik * double(n);
      seen += n;
    }
    st.l1 /= double(seen);
    st.eik /= double(seen);
    st.total = st.l1 + cfg.lambda_eik * st.eik;
    log.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  if (cfg.round_to_float) round_parameters_to_float(m);
  return log;
}

}  // namespace tetzero
