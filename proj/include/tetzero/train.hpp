#pragma once

// L1 + eikonal training with hand-derived gradients and Adam.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tetzero/net.hpp"
#include "tetzero/sdf.hpp"

namespace tetzero {

struct TrainConfig {
  int epochs = 10;
  int batch = 128;
  double lr_features = 1e-2;
  double lr_mlp = 1e-3;
  double lambda_eik = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;
  /// Round trained parameters to float32 so in-memory values equal the weight file.
  bool round_to_float = true;
};

struct LossValue {
  double l1 = 0.0;
  double eik = 0.0;     // mean (|grad f| - 1)^2, unweighted
  double total = 0.0;   // l1 + lambda * eik
};

/// Same layout as the model parameters.
struct Gradients {
  std::vector<std::vector<double>> features;  // per level, rows * d
  std::vector<std::vector<double>> W;
  std::vector<std::vector<double>> b;

  explicit Gradients(const Model& m);
  void zero();
};

/// Mean loss over `idx` and its gradient (accumulated into g, which is not cleared).
LossValue loss_and_gradient(const Model& m, const SampleSet& data, std::span<const std::size_t> idx,
                            double lambda_eik, Gradients* g);

struct EpochStats {
  int epoch = 0;
  double l1 = 0.0;
  double eik = 0.0;
  double total = 0.0;
};

class Adam {
 public:
  Adam(const Model& m, const TrainConfig& cfg);
  void step(Model& m, const Gradients& g);
  long steps() const { return t_; }

 private:
  TrainConfig cfg_;
  long t_ = 0;
  Gradients m1_, m2_;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Deterministic given cfg.seed: the sample order of each epoch is a
/// seeded permutation and batch reductions run in sample order.
std::vector<EpochStats> train(Model& m, const SampleSet& data, const TrainConfig& cfg,
                              const EpochCallback& on_epoch = {});

/// Mean loss over the whole set without gradients.
LossValue evaluate_loss(const Model& m, const SampleSet& data, double lambda_eik);

void round_parameters_to_float(Model& m);

}  // namespace tetzero
