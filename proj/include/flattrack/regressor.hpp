#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "flattrack/geometry.hpp"
#include "flattrack/image.hpp"

namespace flattrack::regress {

inline constexpr int kInputSide = 32;
inline constexpr int kInputSize = kInputSide * kInputSide;
inline constexpr std::array<int, 4> kLayerWidths{kInputSize, 128, 64, 3};
inline constexpr int kNumLayers = 3;

struct DenseLayer {
  Eigen::MatrixXd weight;  // fan_out x fan_in
  Eigen::VectorXd bias;    // fan_out

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() && a.weight == b.weight &&
           a.bias == b.bias;
  }
};

/// 1024 -> dense 128 + ReLU -> dense 64 + ReLU -> dense 3 -> unit normalization.
/// A pre-normalization vector of (near) zero length maps to (0, 0, 1).
struct RegressorModel {
  std::vector<DenseLayer> layers;

  std::size_t parameter_count() const;
  bool all_finite() const;
  friend bool operator==(const RegressorModel&, const RegressorModel&) = default;
};

/// Same shape as the model; per-parameter values (gradients, optimizer moments).
using ParameterSet = RegressorModel;

ParameterSet zeros_like(const RegressorModel& m);

/// Fan-in scaled Gaussian weights (std sqrt(2/fan_in)), zero biases except
/// the output layer's z bias, which starts at +1 so every initial
/// prediction points at the screen.
RegressorModel model_init(std::uint64_t seed);

/// Which dense layers receive gradient updates (index 0 = input layer).
using LayerMask = std::array<bool, kNumLayers>;
inline constexpr LayerMask kAllLayers{true, true, true};
inline constexpr LayerMask kLastTwoLayers{false, true, true};

struct ForwardCache {
  Eigen::MatrixXd x, z1, h1, z2, h2, u;  // one column per sample
  std::vector<geometry::GazeVector> gaze;
};

/// Batched forward pass; inputs holds one kInputSize column per sample.
ForwardCache forward_batch(const RegressorModel& m, const Eigen::MatrixXd& inputs);

/// Single-image forward pass on a pre-downsampled 32x32 input.
geometry::GazeVector forward(const RegressorModel& m, std::span<const double> input);

/// |dx| + |dy| in pixels.
double loss_l1(const geometry::ScreenPoint& pred, const geometry::ScreenPoint& gt);

struct BackwardResult {
  ParameterSet grads;
  double loss_sum = 0.0;  // over samples that contributed
  int used = 0;
  int skipped = 0;  // unprojectable or degenerate predictions
};

/// Exact gradient of the mean screen-space L1 loss over the contributing
/// samples, chained through gaze projection and unit normalization.
BackwardResult backward(const RegressorModel& m, const ForwardCache& cache,
                        std::span<const geometry::ScreenPoint> targets, const geometry::CalibratedScreen& screen,
                        const LayerMask& mask = kAllLayers);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;  // coupled L2 added to the gradient
};

struct AdamState {
  ParameterSet m1;
  ParameterSet m2;
  long step = 0;
};

AdamState adam_init(const RegressorModel& m);
void adam_step(RegressorModel& m, const ParameterSet& grads, AdamState& state, double lr, const AdamConfig& cfg,
               const LayerMask& mask = kAllLayers);

struct AffineParams {
  double rotation_deg = 0.0;
  double translate_x_px = 0.0;
  double translate_y_px = 0.0;
  double scale = 1.0;
};

struct AugmentRanges {
  double rotation_deg = 5.0;
  double translate_px = 1.0;
  double scale_min = 0.95;
  double scale_max = 1.05;
};

/// Rotation/scale about the image center then translation; bilinear
/// resampling, outside samples filled with the mean of the border pixels.
Image affine_warp(const Image& img, const AffineParams& params);
Image augment_affine(const Image& img, const AugmentRanges& ranges, std::uint64_t seed);

/// Optional centered eye crop (0 = none) then area downsample to 32x32.
std::vector<double> prepare_input(const Image& img, int eye_crop = 0);

struct LabeledSample {
  Image image;  // reconstruction (or scene) at native resolution
  geometry::ScreenPoint target;
  geometry::GazeVector gaze;
  int subject_id = 0;
  int round_id = 0;
  int grid_i = 0;
  int grid_j = 0;
};

struct TrainConfig {
  int epochs = 50;
  double lr = 1e-4;
  int lr_step_epochs = 5;
  double lr_decay = 0.5;
  int batch_size = 32;
  AdamConfig adam{};
  AugmentRanges aug{};
  bool augment = true;
  int eye_crop = 0;
  std::uint64_t seed = 1;

  void validate() const;
  double lr_at_epoch(int epoch) const;  // epoch counted from 1
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_err_deg = 0.0;
  double lr = 0.0;
  int skipped = 0;
};

struct TrainResult {
  RegressorModel model;  // best validation angular error, initial weights included
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_err_deg = 0.0;
  double initial_val_err_deg = 0.0;
};

struct SetMetrics {
  double mean_l1 = 0.0;
  double mean_err_deg = 0.0;
  int unprojectable = 0;
};

/// Mean L1 (pixels) and mean angular error over pre-computed inputs.
SetMetrics score(const RegressorModel& m, const Eigen::MatrixXd& inputs, std::span<const LabeledSample> samples,
                 const geometry::CalibratedScreen& screen);

Eigen::MatrixXd stack_inputs(std::span<const LabeledSample> samples, int eye_crop);

TrainResult train(const RegressorModel& init, std::span<const LabeledSample> train_set,
                  std::span<const LabeledSample> val_set, const geometry::CalibratedScreen& screen,
                  const TrainConfig& cfg, const LayerMask& mask = kAllLayers);

/// train() with only the last two dense layers unfrozen.
TrainResult fine_tune(const RegressorModel& pretrained, std::span<const LabeledSample> train_set,
                      std::span<const LabeledSample> val_set, const geometry::CalibratedScreen& screen,
                      const TrainConfig& cfg);

struct LatencyStats {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double mean_ms = 0.0;
  int iterations = 0;
};

LatencyStats summarize_latency(std::vector<double> samples_ms);

struct GridPointError {
  int grid_i = 0;
  int grid_j = 0;
  geometry::ScreenPoint screen_pt;
  double mean_err_deg = 0.0;
  int count = 0;
};

struct EvalReport {
  std::vector<double> per_sample_err_deg;
  double mean_err_deg = 0.0;
  double min_err_deg = 0.0;
  double max_err_deg = 0.0;
  std::vector<GridPointError> per_point;  // sorted by (grid_i, grid_j)
  LatencyStats regress_latency;           // downsample + forward
  double fps() const { return regress_latency.median_ms > 0 ? 1000.0 / regress_latency.median_ms : 0.0; }
};

/// Aggregates per-sample angular errors of arbitrary predictions.
EvalReport evaluate_predictions(std::span<const geometry::GazeVector> predictions,
                                std::span<const LabeledSample> samples);

/// Predicts every sample and times the regression stage
/// over latency_iters warm iterations.
EvalReport evaluate(const RegressorModel& m, std::span<const LabeledSample> test_set, int eye_crop = 0,
                    int latency_iters = 100);

// FTKMDL: "FTKMDL1 <n_layers>\n", then per layer "<rows> <cols>\n" with
// rows = fan_in, cols = fan_out, followed by rows*cols little-endian
// float32 weights (row-major) and cols float32 biases.
void save_model(const RegressorModel& m, const std::filesystem::path& path);
RegressorModel load_model(const std::filesystem::path& path);

/// Model with every parameter rounded to float32 (what FTKMDL stores).
RegressorModel quantize_f32(RegressorModel m);

}  // namespace flattrack::regress
