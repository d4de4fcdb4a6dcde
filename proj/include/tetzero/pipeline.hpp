#pragma once

// Run configuration, weight files and the train / extract / mc / eval steps
// that the C API and the command-line tool expose.

#include <optional>
#include <string>
#include <vector>

#include "tetzero/evalbench.hpp"
#include "tetzero/extract.hpp"
#include "tetzero/train.hpp"

namespace tetzero {

struct RunConfig {
  std::string preset = "small";  // small | medium | large | custom
  GridConfig grid;               // filled from the preset unless custom
  EncoderConfig encoder;
  std::vector<int> widths{12, 12, 12};
  TrainConfig train;
  SampleConfig samples;
  std::string shape_name = "sphere";
  Shape shape = Shape::sphere({0, 0, 0}, 0.6);
  bool precondition = true;
  ExtractConfig extract;
  uint64_t seed = 0;
  std::string out_dir = "out";

  /// Sets preset and grid. Throws invalid_argument on unknown names.
  void set_preset(const std::string& name);
  void set_shape(const std::string& name);
  /// Throws invalid_argument if any field is out of range.
  void validate() const;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);
};

/// (n_min, n_max) with L = 4: small (2, 32), medium (4, 64), large (8, 128).
GridConfig preset_grid(const std::string& name);

/// Freshly initialized model for the config (features, MLP, input map).
Model make_model(const RunConfig& cfg);

/// Binary weights: "TSDF", version, grid and encoder header, float32 tables,
/// MLP, input map. A JSON sidecar with the same metadata goes to path + ".json".
void write_weights(const std::string& path, const Model& m);
Model read_weights(const std::string& path);

struct TrainOutcome {
  std::vector<EpochStats> epochs;
  LossValue final_loss;
  double seconds = 0.0;
};

/// Samples the configured shape and trains. Writes the CSV log when
/// `log_csv` is non-empty.
TrainOutcome train_model(Model& m, const RunConfig& cfg, const std::string& log_csv = {});

struct ExtractOutcome {
  Mesh mesh;
  ExtractReport report;
  TopologyReport topology;
  bool cache_hit = false;
  double seconds_skeleton = 0.0;
  std::string to_json() const;
};

/// Skeleton (cached under cache_dir when non-empty) followed by extract_mesh.
ExtractOutcome extract_model(const Model& m, const ExtractConfig& cfg, const std::string& cache_dir = {});

/// Banded Marching Cubes of the network over its scene box.
Mesh mc_model(const Model& m, int resolution);

struct SkeletonStats {
  std::vector<int> resolutions;
  std::size_t vertices = 0, edges = 0;
  double seconds = 0.0;
  double peak_mb = 0.0;  // estimate from container sizes
  bool cache_hit = false;
  static std::string csv_header();
  std::string csv_row(const std::string& name) const;
};
SkeletonStats skeleton_stats(const GridConfig& g, const std::string& cache_dir = {});

/// case, kappa before, kappa after.
std::string precond_report_csv();

}  // namespace tetzero
