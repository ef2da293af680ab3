#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "abrac/dataset.hpp"
#include "abrac/matrix.hpp"
#include "abrac/rng.hpp"

namespace abrac {

enum class Activation { kTanh, kLinear };

struct FeatureNetConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_layers{50, 50};
  std::size_t output_dim = 20;

  bool operator==(const FeatureNetConfig&) const = default;
};

/// Per-dimension affine map from [lo_i, hi_i] onto [-1, 1].
struct InputScaling {
  std::vector<double> lo;
  std::vector<double> hi;

  std::vector<double> apply(std::span<const double> x) const;

  bool operator==(const InputScaling&) const = default;
};

struct Layer {
  DenseMatrix weights;  // output_dim x input_dim
  std::vector<double> bias;
  Activation activation = Activation::kTanh;

  bool operator==(const Layer&) const = default;
};

struct TrainConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  int epochs = 500;
  bool nested_dropout = true;
  std::uint64_t seed = 0;
};

/// Fully-connected feature extractor: tanh hidden layers, linear output.
/// The output units are the basis functions; nested-dropout training makes
/// them importance-ordered, so a leading slice is itself a usable feature set.
class FeatureNet {
 public:
  FeatureNet() = default;

  /// Weights drawn from Normal(0, 1/sqrt(fan_in)), biases zero.
  static FeatureNet initialize(const FeatureNetConfig& config,
                               const InputScaling& x_scale, RngStream& rng);

  /// Raw forward pass; callers apply input scaling themselves.
  std::vector<double> forward(std::span<const double> x) const;

  std::size_t input_dim() const { return config_.input_dim; }
  std::size_t output_dim() const { return config_.output_dim; }
  const FeatureNetConfig& config() const { return config_; }
  const InputScaling& x_scale() const { return x_scale_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  /// JSON model file; load(save(n)) reproduces n bit-exactly.
  std::string save() const;
  static FeatureNet load(const std::string& bytes);

  bool operator==(const FeatureNet&) const = default;

 private:
  FeatureNetConfig config_;
  InputScaling x_scale_;
  std::vector<Layer> layers_;
};

struct TruncatedFeatures {
  std::vector<double> values;   // length d, entries >= b zeroed
  std::size_t truncation = 0;   // b, in 1..d
};

/// Keeps the leading b entries, masks the rest with zero. b == d is the
/// identity. Throws std::invalid_argument for b outside 1..d.
TruncatedFeatures truncate(std::span<const double> features, std::size_t b);

/// Gradient of the squared-error loss, shaped like the net plus head.
struct NetGradient {
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;
  std::vector<double> head;
};

NetGradient zero_gradient(const FeatureNet& net);

struct BackwardResult {
  double loss = 0.0;
  double prediction = 0.0;
  NetGradient gradient;
};

/// Loss (pred - target)^2 with pred = <truncate(forward(net, x), b), head>,
/// differentiated with respect to every net parameter and the head weights.
BackwardResult backward_mse(const FeatureNet& net, std::span<const double> x,
                            double target, std::span<const double> head,
                            std::size_t b);

struct TrainResult {
  FeatureNet net;
  /// One plain linear head per task, in the trainer's standardized target
  /// space. Kept for diagnostics; only the trunk transfers to new tasks.
  std::vector<std::vector<double>> task_heads;
  /// Full-truncation train MSE (standardized targets, averaged over tasks)
  /// after each epoch.
  std::vector<double> epoch_mse;
};

/// SGD-with-momentum training over all tasks jointly, one linear head per
/// task. When nested_dropout is on, a truncation b ~ Uniform{1..d} is drawn
/// per sample in each mini-batch. Inputs are scaled via net.x_scale();
/// targets are standardized per task. Learning rate halves every 200 epochs.
/// Throws TrainingDivergedError if the epoch loss becomes non-finite.
TrainResult train_offline(const FeatureNet& net,
                          const std::vector<TaskDataset>& tasks,
                          const TrainConfig& cfg);

/// Mean over tasks of the truncated predictor's train MSE at truncation b,
/// in the same standardized space the trainer used.
double truncated_train_mse(const FeatureNet& net,
                           const std::vector<TaskDataset>& tasks,
                           const std::vector<std::vector<double>>& heads,
                           std::size_t b);

}  // namespace abrac
