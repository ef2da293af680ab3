#include "abrac/feature_net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "abrac/errors.hpp"
#include "abrac/textio.hpp"

namespace abrac {

namespace {

const char* activation_name(Activation a) {
  return a == Activation::kTanh ? "tanh" : "linear";
}

Activation activation_from_name(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "linear") return Activation::kLinear;
  throw std::runtime_error("model validation error: unknown activation '" + s +
                           "'");
}

struct Workspace {
  // activations[0] is the input; activations[k+1] the output of layer k
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> deltas;  // dL/dz per layer

  void resize(const FeatureNet& net) {
    const auto& layers = net.layers();
    activations.resize(layers.size() + 1);
    deltas.resize(layers.size());
    activations[0].resize(net.input_dim());
    for (std::size_t k = 0; k < layers.size(); ++k) {
      activations[k + 1].resize(layers[k].weights.rows());
      deltas[k].resize(layers[k].weights.rows());
    }
  }
};

void forward_into(const FeatureNet& net, std::span<const double> x,
                  Workspace& ws) {
  std::copy(x.begin(), x.end(), ws.activations[0].begin());
  const auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const Layer& layer = layers[k];
    const auto& in = ws.activations[k];
    auto& out = ws.activations[k + 1];
    for (std::size_t i = 0; i < layer.weights.rows(); ++i) {
      double z = layer.bias[i] + dot(layer.weights.row(i), in);
      out[i] = layer.activation == Activation::kTanh ? std::tanh(z) : z;
    }
  }
}

/// Backpropagates one sample into `acc` (net) and `head_acc`; returns the
/// squared-error loss. `prediction_out`, when non-null, receives the masked
/// prediction.
double backward_accumulate(const FeatureNet& net, std::span<const double> x,
                           double target, std::span<const double> head,
                           std::size_t b, Workspace& ws, NetGradient& acc,
                           std::span<double> head_acc,
                           double* prediction_out = nullptr) {
  const auto& layers = net.layers();
  const std::size_t d = net.output_dim();
  forward_into(net, x, ws);

  const auto& features = ws.activations.back();
  double pred = 0.0;
  for (std::size_t i = 0; i < b; ++i) pred += features[i] * head[i];
  const double err = pred - target;
  const double dpred = 2.0 * err;
  if (prediction_out != nullptr) *prediction_out = pred;

  // Output layer delta: masked units get exactly zero gradient everywhere.
  auto& out_delta = ws.deltas.back();
  for (std::size_t i = 0; i < d; ++i) {
    if (i < b) {
      head_acc[i] += dpred * features[i];
      double da = dpred * head[i];
      out_delta[i] = layers.back().activation == Activation::kTanh
                         ? da * (1.0 - features[i] * features[i])
                         : da;
    } else {
      out_delta[i] = 0.0;
    }
  }

  for (std::size_t k = layers.size(); k-- > 0;) {
    const Layer& layer = layers[k];
    const auto& in = ws.activations[k];
    const auto& delta = ws.deltas[k];
    DenseMatrix& wgrad = acc.weights[k];
    auto& bgrad = acc.biases[k];
    for (std::size_t i = 0; i < layer.weights.rows(); ++i) {
      const double di = delta[i];
      if (di == 0.0) continue;
      bgrad[i] += di;
      auto grow = wgrad.row(i);
      for (std::size_t j = 0; j < layer.weights.cols(); ++j) {
        grow[j] += di * in[j];
      }
    }
    if (k == 0) break;
    // dL/da_{k-1} = W_k^T delta_k, then through the previous activation
    auto& prev_delta = ws.deltas[k - 1];
    std::fill(prev_delta.begin(), prev_delta.end(), 0.0);
    for (std::size_t i = 0; i < layer.weights.rows(); ++i) {
      const double di = delta[i];
      if (di == 0.0) continue;
      auto wrow = layer.weights.row(i);
      for (std::size_t j = 0; j < layer.weights.cols(); ++j) {
        prev_delta[j] += wrow[j] * di;
      }
    }
    const Layer& prev = layers[k - 1];
    if (prev.activation == Activation::kTanh) {
      const auto& a = ws.activations[k];
      for (std::size_t j = 0; j < prev_delta.size(); ++j) {
        prev_delta[j] *= 1.0 - a[j] * a[j];
      }
    }
  }
  return err * err;
}

struct TaskScaling {
  double mean = 0.0;
  double std = 1.0;
};

TaskScaling standardize_stats(const std::vector<double>& y) {
  TaskScaling s;
  if (y.empty()) return s;
  double sum = 0.0;
  for (double v : y) sum += v;
  s.mean = sum / static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - s.mean) * (v - s.mean);
  var /= static_cast<double>(y.size());
  s.std = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

}  // namespace

std::vector<double> InputScaling::apply(std::span<const double> x) const {
  if (x.size() != lo.size()) {
    throw std::invalid_argument("InputScaling: dimension mismatch");
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = 2.0 * (x[i] - lo[i]) / (hi[i] - lo[i]) - 1.0;
  }
  return out;
}

FeatureNet FeatureNet::initialize(const FeatureNetConfig& config,
                                  const InputScaling& x_scale,
                                  RngStream& rng) {
  if (config.input_dim < 1 || config.output_dim < 1) {
    throw std::invalid_argument("FeatureNet: dimensions must be >= 1");
  }
  for (std::size_t w : config.hidden_layers) {
    if (w < 1) throw std::invalid_argument("FeatureNet: hidden width >= 1");
  }
  if (x_scale.lo.size() != config.input_dim ||
      x_scale.hi.size() != config.input_dim) {
    throw std::invalid_argument("FeatureNet: x_scale dimension mismatch");
  }

  FeatureNet net;
  net.config_ = config;
  net.x_scale_ = x_scale;
  std::vector<std::size_t> sizes;
  sizes.push_back(config.input_dim);
  for (std::size_t w : config.hidden_layers) sizes.push_back(w);
  sizes.push_back(config.output_dim);

  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    Layer layer;
    layer.weights = DenseMatrix(sizes[k + 1], sizes[k]);
    layer.bias.assign(sizes[k + 1], 0.0);
    layer.activation = (k + 2 == sizes.size()) ? Activation::kLinear
                                               : Activation::kTanh;
    const double std = 1.0 / std::sqrt(static_cast<double>(sizes[k]));
    for (double& w : layer.weights.data()) w = rng.normal(0.0, std);
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

std::vector<double> FeatureNet::forward(std::span<const double> x) const {
  if (x.size() != config_.input_dim) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  std::vector<double> cur(x.begin(), x.end());
  for (const Layer& layer : layers_) {
    std::vector<double> next(layer.weights.rows());
    for (std::size_t i = 0; i < layer.weights.rows(); ++i) {
      double z = layer.bias[i] + dot(layer.weights.row(i), cur);
      next[i] = layer.activation == Activation::kTanh ? std::tanh(z) : z;
    }
    cur = std::move(next);
  }
  return cur;
}

TruncatedFeatures truncate(std::span<const double> features, std::size_t b) {
  if (b < 1 || b > features.size()) {
    throw std::invalid_argument("truncate: b must be in 1..d");
  }
  TruncatedFeatures out;
  out.values.assign(features.begin(), features.end());
  std::fill(out.values.begin() + static_cast<std::ptrdiff_t>(b),
            out.values.end(), 0.0);
  out.truncation = b;
  return out;
}

NetGradient zero_gradient(const FeatureNet& net) {
  NetGradient g;
  for (const Layer& layer : net.layers()) {
    g.weights.emplace_back(layer.weights.rows(), layer.weights.cols());
    g.biases.emplace_back(layer.bias.size(), 0.0);
  }
  g.head.assign(net.output_dim(), 0.0);
  return g;
}

BackwardResult backward_mse(const FeatureNet& net, std::span<const double> x,
                            double target, std::span<const double> head,
                            std::size_t b) {
  if (x.size() != net.input_dim()) {
    throw std::invalid_argument("backward_mse: input dimension mismatch");
  }
  if (head.size() != net.output_dim()) {
    throw std::invalid_argument("backward_mse: head dimension mismatch");
  }
  if (b < 1 || b > net.output_dim()) {
    throw std::invalid_argument("backward_mse: b must be in 1..d");
  }
  BackwardResult res;
  res.gradient = zero_gradient(net);
  Workspace ws;
  ws.resize(net);
  res.loss = backward_accumulate(net, x, target, head, b, ws, res.gradient,
                                 res.gradient.head, &res.prediction);
  return res;
}

TrainResult train_offline(const FeatureNet& net,
                          const std::vector<TaskDataset>& tasks,
                          const TrainConfig& cfg) {
  if (tasks.empty()) {
    throw std::invalid_argument("train_offline: no tasks");
  }
  for (const TaskDataset& t : tasks) {
    if (t.size() == 0) {
      throw std::invalid_argument("train_offline: empty task " +
                                  std::to_string(t.task_id));
    }
    if (t.input_dim() != net.input_dim()) {
      throw std::invalid_argument("train_offline: input dimension mismatch");
    }
  }
  if (cfg.learning_rate <= 0.0 || cfg.momentum < 0.0 || cfg.momentum >= 1.0 ||
      cfg.batch_size < 1 || cfg.epochs < 0) {
    throw std::invalid_argument("train_offline: bad config");
  }

  const std::size_t d = net.output_dim();
  const std::size_t num_tasks = tasks.size();
  RngStream rng(cfg.seed);

  // Scale inputs and standardize targets once, up front.
  std::vector<DenseMatrix> xs(num_tasks);
  std::vector<std::vector<double>> ys(num_tasks);
  for (std::size_t t = 0; t < num_tasks; ++t) {
    const TaskDataset& task = tasks[t];
    xs[t] = DenseMatrix(task.size(), task.input_dim());
    for (std::size_t n = 0; n < task.size(); ++n) {
      auto scaled = net.x_scale().apply(task.x.row(n));
      std::copy(scaled.begin(), scaled.end(), xs[t].row(n).begin());
    }
    const TaskScaling s = standardize_stats(task.y);
    ys[t].resize(task.size());
    for (std::size_t n = 0; n < task.size(); ++n) {
      ys[t][n] = (task.y[n] - s.mean) / s.std;
    }
  }

  TrainResult result;
  result.net = net;
  result.task_heads.assign(num_tasks, std::vector<double>(d, 0.0));
  const double head_std = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto& head : result.task_heads) {
    for (double& h : head) h = rng.normal(0.0, head_std);
  }
  if (cfg.epochs == 0) return result;

  std::vector<std::pair<std::size_t, std::size_t>> samples;
  for (std::size_t t = 0; t < num_tasks; ++t) {
    for (std::size_t n = 0; n < tasks[t].size(); ++n) samples.emplace_back(t, n);
  }
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  NetGradient grad = zero_gradient(result.net);
  NetGradient velocity = zero_gradient(result.net);
  std::vector<std::vector<double>> head_grad(num_tasks,
                                             std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> head_velocity(num_tasks,
                                                 std::vector<double>(d, 0.0));
  Workspace ws;
  ws.resize(result.net);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate * std::pow(0.5, epoch / 200);

    // Fisher-Yates on our own stream, for cross-platform determinism.
    for (std::size_t i = order.size(); i-- > 1;) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(i)));
      std::swap(order[i], order[j]);
    }

    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      const double inv_batch = 1.0 / static_cast<double>(end - start);

      for (auto& w : grad.weights) std::fill(w.data().begin(), w.data().end(), 0.0);
      for (auto& bg : grad.biases) std::fill(bg.begin(), bg.end(), 0.0);
      for (auto& hg : head_grad) std::fill(hg.begin(), hg.end(), 0.0);

      for (std::size_t idx = start; idx < end; ++idx) {
        const auto [t, n] = samples[order[idx]];
        const std::size_t b =
            cfg.nested_dropout
                ? static_cast<std::size_t>(
                      rng.uniform_int(1, static_cast<std::int64_t>(d)))
                : d;
        backward_accumulate(result.net, xs[t].row(n), ys[t][n],
                            result.task_heads[t], b, ws, grad, head_grad[t]);
      }

      for (std::size_t k = 0; k < result.net.layers().size(); ++k) {
        Layer& layer = result.net.layers()[k];
        auto& wv = velocity.weights[k].data();
        const auto& wg = grad.weights[k].data();
        auto& wp = layer.weights.data();
        for (std::size_t i = 0; i < wp.size(); ++i) {
          wv[i] = cfg.momentum * wv[i] + wg[i] * inv_batch;
          wp[i] -= lr * wv[i];
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
          velocity.biases[k][i] =
              cfg.momentum * velocity.biases[k][i] + grad.biases[k][i] * inv_batch;
          layer.bias[i] -= lr * velocity.biases[k][i];
        }
      }
      for (std::size_t t = 0; t < num_tasks; ++t) {
        for (std::size_t i = 0; i < d; ++i) {
          head_velocity[t][i] =
              cfg.momentum * head_velocity[t][i] + head_grad[t][i] * inv_batch;
          result.task_heads[t][i] -= lr * head_velocity[t][i];
        }
      }
    }

    // Full-truncation train MSE, averaged over tasks.
    double mse = 0.0;
    for (std::size_t t = 0; t < num_tasks; ++t) {
      double task_mse = 0.0;
      for (std::size_t n = 0; n < ys[t].size(); ++n) {
        forward_into(result.net, xs[t].row(n), ws);
        const double pred = dot(ws.activations.back(), result.task_heads[t]);
        const double e = pred - ys[t][n];
        task_mse += e * e;
      }
      mse += task_mse / static_cast<double>(ys[t].size());
    }
    mse /= static_cast<double>(num_tasks);
    if (!std::isfinite(mse)) {
      throw TrainingDivergedError(epoch, lr);
    }
    result.epoch_mse.push_back(mse);
  }
  return result;
}

double truncated_train_mse(const FeatureNet& net,
                           const std::vector<TaskDataset>& tasks,
                           const std::vector<std::vector<double>>& heads,
                           std::size_t b) {
  if (heads.size() != tasks.size()) {
    throw std::invalid_argument("truncated_train_mse: heads/tasks mismatch");
  }
  double mse = 0.0;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const TaskDataset& task = tasks[t];
    const TaskScaling s = standardize_stats(task.y);
    double task_mse = 0.0;
    for (std::size_t n = 0; n < task.size(); ++n) {
      const auto scaled = net.x_scale().apply(task.x.row(n));
      const auto features = net.forward(scaled);
      double pred = 0.0;
      for (std::size_t i = 0; i < b; ++i) pred += features[i] * heads[t][i];
      const double e = pred - (task.y[n] - s.mean) / s.std;
      task_mse += e * e;
    }
    mse += task_mse / static_cast<double>(task.size());
  }
  return mse / static_cast<double>(tasks.size());
}

std::string FeatureNet::save() const {
  std::ostringstream out;
  out << "{\n";
  out << "  \"input_dim\": " << config_.input_dim << ",\n";
  out << "  \"output_dim\": " << config_.output_dim << ",\n";
  out << "  \"x_scale\": [";
  for (std::size_t i = 0; i < x_scale_.lo.size(); ++i) {
    if (i) out << ", ";
    out << "{\"lo\": " << format_double(x_scale_.lo[i])
        << ", \"hi\": " << format_double(x_scale_.hi[i]) << "}";
  }
  out << "],\n";
  out << "  \"layers\": [\n";
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const Layer& layer = layers_[k];
    out << "    {\"rows\": " << layer.weights.rows()
        << ", \"cols\": " << layer.weights.cols() << ", \"activation\": \""
        << activation_name(layer.activation) << "\",\n     \"weights\": [";
    const auto& w = layer.weights.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (i) out << ", ";
      out << format_double(w[i]);
    }
    out << "],\n     \"bias\": [";
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      if (i) out << ", ";
      out << format_double(layer.bias[i]);
    }
    out << "]}";
    if (k + 1 < layers_.size()) out << ",";
    out << "\n";
  }
  out << "  ]\n}\n";
  return out.str();
}

FeatureNet FeatureNet::load(const std::string& bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("model parse error: ") + e.what());
  }

  auto fail = [](const std::string& msg) -> FeatureNet {
    throw std::runtime_error("model validation error: " + msg);
  };

  if (!j.is_object() || !j.contains("input_dim") || !j.contains("output_dim") ||
      !j.contains("x_scale") || !j.contains("layers")) {
    return fail("missing required keys");
  }

  FeatureNet net;
  net.config_.input_dim = j.at("input_dim").get<std::size_t>();
  net.config_.output_dim = j.at("output_dim").get<std::size_t>();
  net.config_.hidden_layers.clear();

  for (const auto& dim : j.at("x_scale")) {
    net.x_scale_.lo.push_back(dim.at("lo").get<double>());
    net.x_scale_.hi.push_back(dim.at("hi").get<double>());
  }
  if (net.x_scale_.lo.size() != net.config_.input_dim) {
    return fail("x_scale length does not match input_dim");
  }

  std::size_t expected_in = net.config_.input_dim;
  const auto& jlayers = j.at("layers");
  if (!jlayers.is_array() || jlayers.empty()) return fail("layers missing");
  for (std::size_t k = 0; k < jlayers.size(); ++k) {
    const auto& jl = jlayers[k];
    Layer layer;
    const auto rows = jl.at("rows").get<std::size_t>();
    const auto cols = jl.at("cols").get<std::size_t>();
    layer.activation = activation_from_name(jl.at("activation").get<std::string>());
    const auto& w = jl.at("weights");
    const auto& bias = jl.at("bias");
    if (cols != expected_in) return fail("layer input dimension mismatch");
    if (w.size() != rows * cols) return fail("weights length mismatch");
    if (bias.size() != rows) return fail("bias length mismatch");
    layer.weights = DenseMatrix(rows, cols, w.get<std::vector<double>>());
    layer.bias = bias.get<std::vector<double>>();
    if (!layer.weights.all_finite()) return fail("non-finite weight");
    for (double v : layer.bias) {
      if (!std::isfinite(v)) return fail("non-finite bias");
    }
    if (k + 1 < jlayers.size()) {
      if (layer.activation != Activation::kTanh) {
        return fail("hidden layers must use tanh");
      }
      net.config_.hidden_layers.push_back(rows);
    } else {
      if (layer.activation != Activation::kLinear) {
        return fail("output layer must be linear");
      }
      if (rows != net.config_.output_dim) {
        return fail("output layer does not match output_dim");
      }
    }
    expected_in = rows;
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

}  // namespace abrac
