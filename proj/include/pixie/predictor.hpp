#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pixie/grid.hpp"
#include "pixie/materials.hpp"

namespace pixie {

inline constexpr int kLogitChannels = kMaterialClassCount;  // 8
inline constexpr int kContinuousChannels = 3;               // log E, nu, log rho (normalized)
inline constexpr int kOutputChannels = kLogitChannels + kContinuousChannels;

// Per-voxel material predictor.
//
//   z_v   = silu(Wp f_v + bp)                    projection to width h
//   m_v   = mean of z over occupied voxels in the 3x3x3 block around v
//   a_v   = silu(W1 [z_v; m_v] + b1)             hidden layer, width h
//   out_v = W2 a_v + b2                          8 logits, 3 continuous
//   cont  = tanh(out[8:11])
//
// All parameters live in one flat f64 vector, in declaration order
// Wp, bp, W1, b1, W2, b2 with row-major weight matrices (rows = outputs).
class PredictorModel {
 public:
  static constexpr std::uint32_t kLayerCount = 3;

  PredictorModel() = default;
  PredictorModel(int input_dim, int width);  // all-zero parameters

  static PredictorModel initialized(int input_dim, int width, std::uint64_t seed);

  int input_dim() const { return d_; }
  int width() const { return h_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  // Offsets of each blob in params().
  std::size_t off_wp() const { return 0; }
  std::size_t off_bp() const { return off_wp() + static_cast<std::size_t>(h_) * d_; }
  std::size_t off_w1() const { return off_bp() + h_; }
  std::size_t off_b1() const { return off_w1() + static_cast<std::size_t>(h_) * 2 * h_; }
  std::size_t off_w2() const { return off_b1() + h_; }
  std::size_t off_b2() const { return off_w2() + static_cast<std::size_t>(kOutputChannels) * h_; }

  bool operator==(const PredictorModel&) const = default;

 private:
  int d_ = 0;
  int h_ = 0;
  std::vector<double> params_;
};

// PXMODEL1: magic, u32 d, u32 h, u32 layer count, f64 blobs in declaration order.
std::vector<std::uint8_t> encode_model(const PredictorModel& model);
PredictorModel decode_model(const std::vector<std::uint8_t>& bytes);
void write_model(const std::filesystem::path& path, const PredictorModel& model);
PredictorModel read_model(const std::filesystem::path& path);

// Per-voxel 8 logits followed by 3 normalized continuous values (f32, d = 11).
class PredictionGrid : public DenseGrid<float> {
 public:
  PredictionGrid() = default;
  explicit PredictionGrid(int n) : DenseGrid(GridDims(n, kOutputChannels)) {}
  PredictionGrid(int n, std::vector<float> data) : DenseGrid(GridDims(n, kOutputChannels), std::move(data)) {}

  int argmax_class(std::size_t v) const;
  NormalizedParams continuous(std::size_t v) const;
};

void write_prediction(const std::filesystem::path& path, const PredictionGrid& grid);
PredictionGrid read_prediction(const std::filesystem::path& path);

// Ground truth in the predictor's output space.
struct NormalizedTargets {
  int n = 0;
  std::vector<std::uint8_t> cls;
  std::vector<NormalizedParams> values;
  int clamped = 0;  // channels clamped into the stats range
};

NormalizedTargets normalize_targets(const MaterialGrid& material, const NormStats& stats);

struct LossBreakdown {
  double total = 0.0;
  double ce = 0.0;
  double mse_e = 0.0;
  double mse_nu = 0.0;
  double mse_rho = 0.0;
};

// (1/N_occ) * sum over occupied voxels of lambda*CE + squared errors.
// total == lambda*ce + mse_e + mse_nu + mse_rho.
LossBreakdown masked_loss(const PredictionGrid& pred, const NormalizedTargets& gt, const OccupancyMask& mask,
                          double lambda);

PredictionGrid forward(const PredictorModel& model, const FeatureGrid& features, const OccupancyMask& mask);

// Outputs for the listed voxels only, in list order; each row depends only on
// the voxel's 3x3x3 neighbourhood, so order and subset do not matter.
std::vector<std::array<float, kOutputChannels>> forward_sparse(const PredictorModel& model,
                                                               const FeatureGrid& features,
                                                               const OccupancyMask& mask,
                                                               std::span<const std::size_t> voxels);

// Argmax class plus denormalized parameters on occupied voxels.
MaterialGrid to_material_grid(const PredictionGrid& pred, const OccupancyMask& mask, const NormStats& stats);

struct TrainingExample {
  FeatureGrid features;
  MaterialGrid material;
  OccupancyMask mask;
};

enum class Optimizer {
  GradientDescent,  // step along -gradient
  Adam,             // step along the bias-corrected Adam direction
};

struct TrainConfig {
  double lambda = 1.0;
  double learning_rate = 0.5;
  int epochs = 200;
  int batch_voxels = 4096;  // shard size for fixed-order gradient accumulation
  std::uint64_t seed = 0;
  double lr_growth = 1.25;  // step growth after an accepted step; 1 = never grow
  Optimizer optimizer = Optimizer::GradientDescent;
  NormStats norm_stats = NormStats::defaults();

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown loss;
  double learning_rate = 0.0;
};

struct TrainResult {
  PredictorModel model;
  std::vector<EpochRecord> trace;
};

struct LossAndGradient {
  LossBreakdown loss;  // mean over scenes
  std::vector<double> gradient;
};

// Objective is the mean of the per-scene masked losses.
LossAndGradient loss_and_gradient(const PredictorModel& model, std::span<const TrainingExample> dataset,
                                  const TrainConfig& cfg);

// Full-batch descent with step halving: a trial step that raises the loss is
// halved until it does not, so the recorded trace never increases. The step
// direction is the gradient or the Adam direction, per cfg.optimizer.
TrainResult train(PredictorModel model, std::span<const TrainingExample> dataset, const TrainConfig& cfg);

std::string loss_trace_csv(const std::vector<EpochRecord>& trace);

struct Metrics {
  double mat_acc = 0.0;
  double mse_log_e = 0.0;
  double mse_nu = 0.0;
  double mse_log_rho = 0.0;
  double avg_cont_mse = 0.0;
};

Metrics evaluate_prediction(const PredictionGrid& pred, const NormalizedTargets& gt, const OccupancyMask& mask);

}  // namespace pixie
