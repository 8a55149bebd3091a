#pragma once

// Two-layer plausibility classifier over concatenated triple embeddings:
//
//   p(x) = sigmoid(w2 . act(W1 x + b1) + b2),   act = tanh (default) or relu
//
// trained with mean binary cross-entropy and hand-derived gradients.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "svo/embeddings.hpp"
#include "svo/errors.hpp"
#include "svo/rng.hpp"
#include "svo/text.hpp"

namespace svo {

enum class Activation : std::uint64_t { tanh = 0, relu = 1 };
enum class Optimizer { sgd, adam };

struct MlpParams {
  std::size_t hidden = 0;
  std::size_t dim = 0;  // per-slot embedding width; input width is 3*dim
  Activation activation = Activation::tanh;
  std::vector<double> w1;  // hidden x input, row-major
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  std::size_t input() const { return 3 * dim; }

  static MlpParams zeros(std::size_t hidden, std::size_t dim, Activation act = Activation::tanh) {
    MlpParams p;
    p.hidden = hidden;
    p.dim = dim;
    p.activation = act;
    p.w1.assign(hidden * 3 * dim, 0.0);
    p.b1.assign(hidden, 0.0);
    p.w2.assign(hidden, 0.0);
    return p;
  }

  bool shapes_consistent() const {
    return hidden >= 1 && dim >= 1 && w1.size() == hidden * input() && b1.size() == hidden &&
           w2.size() == hidden;
  }

  bool all_finite() const {
    auto fin = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return fin(w1) && fin(b1) && fin(w2) && std::isfinite(b2);
  }

  bool operator==(const MlpParams&) const = default;
};

/// Glorot-uniform weights, zero biases. W1 is drawn row-major, then w2.
inline MlpParams init_params(std::uint64_t seed, std::size_t hidden, std::size_t dim,
                             Activation act = Activation::tanh) {
  if (hidden == 0 || dim == 0) throw std::invalid_argument("hidden and dim must be >= 1");
  MlpParams p = MlpParams::zeros(hidden, dim, act);
  Xoshiro256 rng(seed);
  const double r1 = std::sqrt(6.0 / static_cast<double>(3 * dim + hidden));
  const double r2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  for (double& w : p.w1) w = rng.uniform(-r1, r1);
  for (double& w : p.w2) w = rng.uniform(-r2, r2);
  return p;
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace detail {

inline double activate(Activation a, double z) {
  return a == Activation::tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// Derivative expressed through the pre-activation and activation value.
inline double activate_grad(Activation a, double z, double act) {
  return a == Activation::tanh ? 1.0 - act * act : (z > 0.0 ? 1.0 : 0.0);
}

// Fills pre/act (length hidden) and returns the output logit.
inline double forward_hidden(const MlpParams& p, std::span<const double> x, std::span<double> pre,
                             std::span<double> act) {
  const std::size_t in = p.input();
  double z2 = p.b2;
  for (std::size_t j = 0; j < p.hidden; ++j) {
    const double* row = p.w1.data() + j * in;
    double z = p.b1[j];
    for (std::size_t i = 0; i < in; ++i) z += row[i] * x[i];
    pre[j] = z;
    act[j] = activate(p.activation, z);
    z2 += p.w2[j] * act[j];
  }
  return z2;
}

}  // namespace detail

inline double forward(const MlpParams& p, std::span<const double> x) {
  if (x.size() != p.input()) throw std::invalid_argument("input width mismatch");
  std::vector<double> pre(p.hidden), act(p.hidden);
  return sigmoid(detail::forward_hidden(p, x, pre, act));
}

struct Sample {
  std::span<const double> x;
  int label = 0;
};

inline constexpr double kLogClamp = 1e-12;

struct LossAndGradients {
  double loss = 0.0;
  MlpParams grad;
};

/// Mean binary cross-entropy over the batch and its exact gradient. The
/// log arguments are clamped below by 1e-12; where the clamp is active the
/// corresponding derivative is zero.
inline LossAndGradients loss_and_gradients(const MlpParams& p, std::span<const Sample> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  LossAndGradients out{0.0, MlpParams::zeros(p.hidden, p.dim, p.activation)};
  MlpParams& g = out.grad;
  const std::size_t in = p.input();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> pre(p.hidden), act(p.hidden);
  for (const Sample& s : batch) {
    if (s.x.size() != in) throw std::invalid_argument("input width mismatch");
    const double z2 = detail::forward_hidden(p, s.x, pre, act);
    const double prob = sigmoid(z2);
    double dz2;
    if (s.label == 1) {
      out.loss -= std::log(std::max(prob, kLogClamp));
      dz2 = prob > kLogClamp ? prob - 1.0 : 0.0;
    } else {
      out.loss -= std::log(std::max(1.0 - prob, kLogClamp));
      dz2 = 1.0 - prob > kLogClamp ? prob : 0.0;
    }
    dz2 *= inv_n;
    g.b2 += dz2;
    for (std::size_t j = 0; j < p.hidden; ++j) {
      g.w2[j] += dz2 * act[j];
      const double dz1 = dz2 * p.w2[j] * detail::activate_grad(p.activation, pre[j], act[j]);
      if (dz1 == 0.0) continue;
      g.b1[j] += dz1;
      double* grow = g.w1.data() + j * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += dz1 * s.x[i];
    }
  }
  out.loss *= inv_n;
  if (!std::isfinite(out.loss) || !g.all_finite())
    throw NonFiniteLoss(0, "loss or gradient is not finite");
  return out;
}

/// Applies fn(param_ref, grad_value) over every parameter in a fixed order.
template <typename Fn>
void for_each_param(MlpParams& p, const MlpParams& g, Fn&& fn) {
  for (std::size_t i = 0; i < p.w1.size(); ++i) fn(i, p.w1[i], g.w1[i]);
  std::size_t off = p.w1.size();
  for (std::size_t i = 0; i < p.b1.size(); ++i) fn(off + i, p.b1[i], g.b1[i]);
  off += p.b1.size();
  for (std::size_t i = 0; i < p.w2.size(); ++i) fn(off + i, p.w2[i], g.w2[i]);
  off += p.w2.size();
  fn(off, p.b2, g.b2);
}

inline std::size_t param_count(const MlpParams& p) {
  return p.w1.size() + p.b1.size() + p.w2.size() + 1;
}

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  double epochs = 20.0;
  std::uint64_t seed = 0;
  std::size_t hidden = 100;
  Optimizer optimizer = Optimizer::adam;
  Activation activation = Activation::tanh;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw std::invalid_argument("learning_rate must be positive");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (!(epochs > 0.0) || !std::isfinite(epochs)) throw std::invalid_argument("epochs must be > 0");
    if (hidden == 0) throw std::invalid_argument("hidden must be >= 1");
  }
};

struct TrainResult {
  MlpParams params;
  std::vector<double> loss_curve;  // one entry per batch update
};

/// Number of batch updates the schedule performs for n examples.
inline std::size_t scheduled_updates(std::size_t n, const TrainConfig& cfg) {
  const std::size_t n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const double whole = std::floor(cfg.epochs);
  const auto partial = static_cast<std::size_t>(std::lround((cfg.epochs - whole) * static_cast<double>(n_batches)));
  return static_cast<std::size_t>(whole) * n_batches + partial;
}

/// Mini-batch training. Each epoch reshuffles with derive_seed(seed, 1 + epoch);
/// a fractional final epoch runs the first round(fraction * n_batches) batches
/// of its shuffle. Initial weights come from init_params(seed, ...) unless
/// `init` is given.
inline TrainResult train(const FeatureSet& data, const TrainConfig& cfg,
                         const MlpParams* init = nullptr) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("empty training set");
  if (data.width % 3 != 0) throw std::invalid_argument("feature width must be 3*dim");
  const std::size_t dim = data.width / 3;

  TrainResult r;
  r.params = init ? *init : init_params(cfg.seed, cfg.hidden, dim, cfg.activation);
  if (r.params.input() != data.width) throw std::invalid_argument("init params do not match data");
  MlpParams& p = r.params;

  const std::size_t n = data.size();
  const std::size_t n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const double whole = std::floor(cfg.epochs);
  const auto full_epochs = static_cast<std::size_t>(whole);
  const auto partial = static_cast<std::size_t>(std::lround((cfg.epochs - whole) * static_cast<double>(n_batches)));
  const std::size_t epoch_count = full_epochs + (partial > 0 ? 1 : 0);

  std::vector<double> m, v;
  if (cfg.optimizer == Optimizer::adam) {
    m.assign(param_count(p), 0.0);
    v.assign(param_count(p), 0.0);
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t step = 0;

  std::vector<std::size_t> order(n);
  std::vector<Sample> batch;
  r.loss_curve.reserve(scheduled_updates(n, cfg));
  for (std::size_t epoch = 0; epoch < epoch_count; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Xoshiro256 rng(derive_seed(cfg.seed, 1 + epoch));
    shuffle(std::span<std::size_t>(order), rng);
    const std::size_t batches = epoch < full_epochs ? n_batches : partial;
    for (std::size_t b = 0; b < batches; ++b) {
      batch.clear();
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      for (std::size_t k = lo; k < hi; ++k) batch.push_back({data.row(order[k]), data.y[order[k]]});
      LossAndGradients lg;
      try {
        lg = loss_and_gradients(p, batch);
      } catch (const NonFiniteLoss&) {
        throw NonFiniteLoss(r.loss_curve.size(), "training diverged");
      }
      r.loss_curve.push_back(lg.loss);
      ++step;
      if (cfg.optimizer == Optimizer::sgd) {
        for_each_param(p, lg.grad, [&](std::size_t, double& w, double gw) { w -= cfg.learning_rate * gw; });
      } else {
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for_each_param(p, lg.grad, [&](std::size_t i, double& w, double gw) {
          m[i] = beta1 * m[i] + (1.0 - beta1) * gw;
          v[i] = beta2 * v[i] + (1.0 - beta2) * gw * gw;
          w -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        });
      }
    }
  }
  return r;
}

struct Prediction {
  int label = 0;
  double probability = 0.0;
};

/// label = 1 iff p >= 0.5.
inline Prediction classify(double probability) { return {probability >= 0.5 ? 1 : 0, probability}; }

inline std::optional<Prediction> predict(const MlpParams& p, const EmbeddingTable& table,
                                         const Triple& t) {
  auto x = embed_triple(table, t);
  if (!x) return std::nullopt;
  return classify(forward(p, *x));
}

/// Probabilities for every row of a feature matrix.
inline std::vector<double> predict_proba(const MlpParams& p, const FeatureSet& data) {
  if (data.width != p.input()) throw std::invalid_argument("input width mismatch");
  std::vector<double> out(data.size());
  std::vector<double> pre(p.hidden), act(p.hidden);
  for (std::size_t i = 0; i < data.size(); ++i)
    out[i] = sigmoid(detail::forward_hidden(p, data.row(i), pre, act));
  return out;
}

inline double accuracy(const MlpParams& p, const FeatureSet& data) {
  if (data.size() == 0) return 0.0;
  const auto probs = predict_proba(p, data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (classify(probs[i]).label == data.y[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// Checkpoint: "SVOMLPv1", then u64 hidden, u64 dim, u64 activation, then
// W1 (row-major), b1, w2, b2 as little-endian IEEE-754 doubles.

inline constexpr char kCheckpointMagic[8] = {'S', 'V', 'O', 'M', 'L', 'P', 'v', '1'};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const MlpParams& p) {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u64(out, p.hidden);
  detail::put_u64(out, p.dim);
  detail::put_u64(out, static_cast<std::uint64_t>(p.activation));
  for (double w : p.w1) detail::put_f64(out, w);
  for (double w : p.b1) detail::put_f64(out, w);
  for (double w : p.w2) detail::put_f64(out, w);
  detail::put_f64(out, p.b2);
}

inline MlpParams read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw FormatError("not a model checkpoint (bad magic)");
  const auto hidden = detail::get_u64(in);
  const auto dim = detail::get_u64(in);
  const auto act = detail::get_u64(in);
  if (hidden == 0 || dim == 0 || hidden > (1u << 20) || dim > (1u << 20) || act > 1)
    throw FormatError("implausible checkpoint header");
  MlpParams p = MlpParams::zeros(hidden, dim, static_cast<Activation>(act));
  for (double& w : p.w1) w = detail::get_f64(in);
  for (double& w : p.b1) w = detail::get_f64(in);
  for (double& w : p.w2) w = detail::get_f64(in);
  p.b2 = detail::get_f64(in);
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in checkpoint");
  return p;
}

inline void save_checkpoint(const MlpParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  write_checkpoint(out, p);
}

inline MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path.string());
  return read_checkpoint(in);
}

inline void write_loss_csv(std::ostream& out, std::span<const double> curve) {
  out << "batch_index,loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) out << i << ',' << text::format_double(curve[i]) << '\n';
}

}  // namespace svo
