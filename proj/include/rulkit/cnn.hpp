#pragma once

#include "rulkit/common.hpp"
#include "rulkit/dei.hpp"
#include "rulkit/run.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace rulkit::cnn {

// Feature maps are dense (length x channels) matrices; the leading unit
// axis of the conventional 1 x length x channels shape is implicit.
using Array3 = MatX;

// 1-D convolution bank. Weight rows are tap-major: row = tap * in_channels
// + channel, one column per filter.
struct ConvLayer {
  MatX weight;
  VecX bias;
  int kernel_size = 0;
  int stride = 1;

  int in_channels() const {
    return kernel_size > 0 ? static_cast<int>(weight.rows()) / kernel_size : 0;
  }
  int out_channels() const { return static_cast<int>(weight.cols()); }
};

struct DenseLayer {
  MatX weight;  // in x out
  VecX bias;    // out
};

// Layer geometry. The defaults are the canonical regression network:
// 1x2560x1 -> conv(64 filters, kernel 100, stride 50) -> 1x50x64
// -> maxpool(2,2) -> 1x25x64 -> conv(64, 2, 1) -> 1x24x64
// -> maxpool(2,2) -> 1x12x64 -> flatten 768 -> dense 100 -> dense 1+sigmoid.
struct Topology {
  int input_length = 2560;
  int conv1_filters = 64;
  int conv1_kernel = 100;
  int conv1_stride = 50;
  int pool_size = 2;
  int pool_stride = 2;
  int conv2_filters = 64;
  int conv2_kernel = 2;
  int conv2_stride = 1;
  int fc1_units = 100;
};

// Valid-convolution output length, floor((input - kernel) / stride) + 1.
int conv_output_length(int input_length, int kernel, int stride);

// Stage-by-stage (length, channels) chain, input through the flatten.
struct ShapeChain {
  int input_length = 0;
  int conv1_length = 0, conv1_channels = 0;
  int pool1_length = 0;
  int conv2_length = 0, conv2_channels = 0;
  int pool2_length = 0;
  int flat = 0;
  int fc1 = 0;
  int out = 1;
};
ShapeChain shape_chain(const Topology& topo);

struct CnnModel {
  Topology topo;
  ConvLayer conv1, conv2;
  DenseLayer fc1, out;
  // Global standardization of raw samples, fixed at training time.
  double input_mean = 0.0;
  double input_std = 1.0;
};

// Uniform Glorot initialization in +-sqrt(6 / (fan_in + fan_out)), zero
// biases; fully determined by the seed.
CnnModel make_model(const Topology& topo, std::uint64_t seed);

Array3 conv_forward(const ConvLayer& layer, const Array3& input);

inline MatX relu(const MatX& x) { return x.cwiseMax(0.0); }
inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct PoolResult {
  Array3 output;
  Eigen::MatrixXi argmax;  // winning input row per (pooled row, channel)
};
PoolResult maxpool_forward(const Array3& input, int size, int stride);

// Network output in (0, 1) for one raw snapshot (standardizes internally).
double forward(const CnnModel& model, const Eigen::Ref<const ArrX>& samples);
double forward(const CnnModel& model, const VibrationSnapshot& snapshot);

// Forward pass on an already standardized (length x 1) input.
double forward_std(const CnnModel& model, const Array3& input);

double mse_loss(const Eigen::Ref<const VecX>& predicted,
                const Eigen::Ref<const VecX>& labels);

struct Gradients {
  MatX conv1_w;
  VecX conv1_b;
  MatX conv2_w;
  VecX conv2_b;
  MatX fc1_w;
  VecX fc1_b;
  MatX out_w;
  VecX out_b;
};
Gradients zero_gradients(const CnnModel& model);

// Exact gradient of the MSE loss over the batch with respect to every
// parameter; standardized inputs, accumulation in batch order. Also yields
// the per-sample predictions and the loss.
Gradients backward(const CnnModel& model, const std::vector<Array3>& inputs,
                   const Eigen::Ref<const VecX>& labels,
                   VecX* predictions = nullptr, double* loss = nullptr);

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update; `step` counts from 1.
template <typename Tensor>
void adam_step(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
               long step, const AdamConfig& cfg) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v.array() = cfg.beta2 * v.array() + (1.0 - cfg.beta2) * grad.array().square();
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  param.array() -= cfg.learning_rate * (m.array() / bc1) /
                   ((v.array() / bc2).sqrt() + cfg.epsilon);
}

struct AdamState {
  Gradients m, v;
  long step = 0;
};
AdamState make_adam_state(const CnnModel& model);
void adam_update(CnnModel& model, const Gradients& grads, AdamState& state,
                 const AdamConfig& cfg);

struct TrainConfig {
  AdamConfig adam;          // learning rate default 1e-5
  int iterations = 1000;    // full-batch gradient steps
  int batch_size = 0;       // 0 = full batch
  std::uint64_t seed = 0;
  Topology topology;
};

struct TrainLogEntry {
  int iteration = 0;
  double loss = 0.0;
};

// Deterministic for a fixed seed. Labels must be the normalized indicator
// series of the run, one value per snapshot.
CnnModel train(const BearingRun& run, const DeiSeries& labels,
               const TrainConfig& config,
               std::vector<TrainLogEntry>* log = nullptr);

// Per-snapshot forward in index order; the result is flagged normalized
// (sigmoid output lives in (0,1)).
DeiSeries estimate_dei(const CnnModel& model, const BearingRun& run);

// Versioned self-describing text format, parameters at full precision.
void save_model(const std::filesystem::path& file, const CnnModel& model);
CnnModel load_model(const std::filesystem::path& file);

}  // namespace rulkit::cnn
