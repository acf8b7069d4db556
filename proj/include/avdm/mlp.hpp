#ifndef AVDM_MLP_HPP
#define AVDM_MLP_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "avdm/rng.hpp"
#include "json.hpp"

namespace avdm {

enum class Activation { Tanh, Relu, Sigmoid, Linear };
enum class InitScheme { UniformFanIn, SmallFinal };
enum class OptimKind { Adam, Sgd };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    default: return "linear";
  }
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "linear") return Activation::Linear;
  throw std::invalid_argument("unknown activation: " + s);
}

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MlpSpec {
  std::vector<int> layer_sizes;           // input ... output
  std::vector<Activation> activations;    // one per non-input layer
  InitScheme init = InitScheme::UniformFanIn;
  double l2_coeff = 0.0;

  void validate() const {
    if (layer_sizes.size() < 2)
      throw std::invalid_argument("mlp: need at least input and output layers");
    for (int n : layer_sizes) {
      if (n < 1) throw std::invalid_argument("mlp: layer sizes must be >= 1");
    }
    if (activations.size() != layer_sizes.size() - 1)
      throw std::invalid_argument("mlp: one activation per non-input layer");
    if (l2_coeff < 0.0) throw std::invalid_argument("mlp: l2_coeff must be >= 0");
  }
};

/// Per-layer parameter gradients plus the gradient with respect to the input.
/// Reused across backward calls; gradients accumulate until zeroed.
struct MlpGrads {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;
  std::vector<double> input;

  void zero() {
    for (auto& m : w) std::fill(m.begin(), m.end(), 0.0);
    for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
    std::fill(input.begin(), input.end(), 0.0);
  }
};

/// Scratch space for a cached forward pass (per-layer pre- and
/// post-activation values). One cache per concurrent evaluation.
struct MlpCache {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
};

/// Dense feed-forward network with manual backpropagation and a built-in
/// Adam (default) or plain-SGD update rule. Parameters, optimizer moments
/// and the step counter round-trip exactly through the JSON checkpoint.
class Mlp {
 public:
  Mlp(MlpSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    init_storage();
    Rng rng(seed);
    int last = static_cast<int>(layer_count()) - 1;
    for (int l = 0; l <= last; ++l) {
      double bound = 1.0 / std::sqrt(static_cast<double>(spec_.layer_sizes[l]));
      if (spec_.init == InitScheme::SmallFinal && l == last) bound = 3e-3;
      for (auto& x : w_[l]) x = rng.uniform(-bound, bound);
      for (auto& x : b_[l]) x = rng.uniform(-bound, bound);
    }
  }

  const MlpSpec& spec() const { return spec_; }
  int input_size() const { return spec_.layer_sizes.front(); }
  int output_size() const { return spec_.layer_sizes.back(); }
  std::size_t layer_count() const { return spec_.activations.size(); }

  void set_optimizer(OptimKind k) { optimizer_ = k; }
  OptimKind optimizer() const { return optimizer_; }

  /// Pure evaluation; never mutates parameters.
  std::vector<double> forward(std::span<const double> input) const {
    MlpCache cache;
    forward_cached(input, cache);
    return cache.post.back();
  }

  void forward_cached(std::span<const double> input, MlpCache& cache) const {
    if (static_cast<int>(input.size()) != input_size())
      throw std::invalid_argument("mlp forward: input size mismatch");
    cache.input.assign(input.begin(), input.end());
    cache.pre.resize(layer_count());
    cache.post.resize(layer_count());
    const std::vector<double>* prev = &cache.input;
    for (std::size_t l = 0; l < layer_count(); ++l) {
      int rows = spec_.layer_sizes[l + 1];
      int cols = spec_.layer_sizes[l];
      cache.pre[l].resize(rows);
      cache.post[l].resize(rows);
      const double* wl = w_[l].data();
      for (int r = 0; r < rows; ++r) {
        double acc = b_[l][r];
        const double* row = wl + static_cast<std::size_t>(r) * cols;
        const double* in = prev->data();
        for (int c = 0; c < cols; ++c) acc += row[c] * in[c];
        cache.pre[l][r] = acc;
        cache.post[l][r] = activate(spec_.activations[l], acc);
      }
      prev = &cache.post[l];
    }
  }

  /// Accumulates into `grads` the exact gradients of (upstream . output) with
  /// respect to every parameter and the input. When l2_coeff > 0 the weight
  /// gradients additionally receive l2_coeff * w per call.
  void backward(const MlpCache& cache, std::span<const double> upstream,
                MlpGrads& grads) const {
    if (static_cast<int>(upstream.size()) != output_size())
      throw std::invalid_argument("mlp backward: upstream size mismatch");
    ensure_grads(grads);
    std::vector<double> delta(upstream.begin(), upstream.end());
    std::vector<double> delta_prev;
    for (int l = static_cast<int>(layer_count()) - 1; l >= 0; --l) {
      int rows = spec_.layer_sizes[l + 1];
      int cols = spec_.layer_sizes[l];
      for (int r = 0; r < rows; ++r)
        delta[r] *= activate_grad(spec_.activations[l], cache.pre[l][r],
                                  cache.post[l][r]);
      const std::vector<double>& below =
          l == 0 ? cache.input : cache.post[static_cast<std::size_t>(l) - 1];
      double* gw = grads.w[l].data();
      const double* wl = w_[l].data();
      delta_prev.assign(cols, 0.0);
      for (int r = 0; r < rows; ++r) {
        double d = delta[r];
        grads.b[l][r] += d;
        double* grow = gw + static_cast<std::size_t>(r) * cols;
        const double* wrow = wl + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) {
          grow[c] += d * below[c];
          delta_prev[c] += d * wrow[c];
        }
      }
      delta.swap(delta_prev);
    }
    for (int c = 0; c < input_size(); ++c) grads.input[c] += delta[c];
    if (spec_.l2_coeff > 0.0) {
      for (std::size_t l = 0; l < layer_count(); ++l) {
        for (std::size_t i = 0; i < w_[l].size(); ++i)
          grads.w[l][i] += spec_.l2_coeff * w_[l][i];
      }
    }
  }

  /// Descent step along `grads` (negate upstream for ascent). Throws
  /// NumericError on non-finite gradients, leaving parameters untouched.
  void apply_update(const MlpGrads& grads, double learning_rate) {
    for (std::size_t l = 0; l < layer_count(); ++l) {
      for (double g : grads.w[l])
        if (!std::isfinite(g)) throw NumericError("mlp update: non-finite gradient");
      for (double g : grads.b[l])
        if (!std::isfinite(g)) throw NumericError("mlp update: non-finite gradient");
    }
    ++step_;
    if (optimizer_ == OptimKind::Sgd) {
      for (std::size_t l = 0; l < layer_count(); ++l) {
        for (std::size_t i = 0; i < w_[l].size(); ++i)
          w_[l][i] -= learning_rate * grads.w[l][i];
        for (std::size_t i = 0; i < b_[l].size(); ++i)
          b_[l][i] -= learning_rate * grads.b[l][i];
      }
      return;
    }
    double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
    for (std::size_t l = 0; l < layer_count(); ++l) {
      adam_on(w_[l], grads.w[l], mw_[l], vw_[l], learning_rate, bc1, bc2);
      adam_on(b_[l], grads.b[l], mb_[l], vb_[l], learning_rate, bc1, bc2);
    }
  }

  /// target <- (1 - tau) * target + tau * online, elementwise over
  /// parameters. Optimizer state is not touched.
  static void soft_update(Mlp& target, const Mlp& online, double tau) {
    if (target.spec_.layer_sizes != online.spec_.layer_sizes)
      throw std::invalid_argument("soft_update: shape mismatch");
    if (tau <= 0.0 || tau > 1.0)
      throw std::invalid_argument("soft_update: tau must be in (0, 1]");
    for (std::size_t l = 0; l < target.layer_count(); ++l) {
      for (std::size_t i = 0; i < target.w_[l].size(); ++i)
        target.w_[l][i] += tau * (online.w_[l][i] - target.w_[l][i]);
      for (std::size_t i = 0; i < target.b_[l].size(); ++i)
        target.b_[l][i] += tau * (online.b_[l][i] - target.b_[l][i]);
    }
  }

  std::uint64_t update_steps() const { return step_; }

  // direct parameter access (tests, hand-built fixtures)
  std::vector<std::vector<double>>& weights() { return w_; }
  std::vector<std::vector<double>>& biases() { return b_; }
  const std::vector<std::vector<double>>& weights() const { return w_; }
  const std::vector<std::vector<double>>& biases() const { return b_; }

  nlohmann::json to_json() const {
    nlohmann::json spec;
    spec["layers"] = spec_.layer_sizes;
    std::vector<std::string> acts;
    for (auto a : spec_.activations) acts.push_back(to_string(a));
    spec["activations"] = acts;
    spec["init"] = spec_.init == InitScheme::SmallFinal ? "small_final" : "fan_in";
    spec["l2"] = spec_.l2_coeff;
    nlohmann::json j;
    j["format"] = "avdm-mlp";
    j["version"] = 1;
    j["spec"] = spec;
    j["optimizer"] = optimizer_ == OptimKind::Adam ? "adam" : "sgd";
    j["step"] = step_;
    j["w"] = w_;
    j["b"] = b_;
    j["mw"] = mw_;
    j["vw"] = vw_;
    j["mb"] = mb_;
    j["vb"] = vb_;
    return j;
  }

  static Mlp from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "avdm-mlp" || j.value("version", 0) != 1)
      throw std::invalid_argument("mlp checkpoint: unknown format/version");
    MlpSpec spec;
    spec.layer_sizes = j.at("spec").at("layers").get<std::vector<int>>();
    for (const auto& a : j.at("spec").at("activations"))
      spec.activations.push_back(activation_from_string(a.get<std::string>()));
    spec.init = j.at("spec").value("init", "fan_in") == std::string("small_final")
                    ? InitScheme::SmallFinal
                    : InitScheme::UniformFanIn;
    spec.l2_coeff = j.at("spec").value("l2", 0.0);
    Mlp net(spec, 0);
    net.optimizer_ =
        j.value("optimizer", "adam") == std::string("sgd") ? OptimKind::Sgd
                                                           : OptimKind::Adam;
    net.step_ = j.at("step").get<std::uint64_t>();
    net.w_ = j.at("w").get<std::vector<std::vector<double>>>();
    net.b_ = j.at("b").get<std::vector<std::vector<double>>>();
    net.mw_ = j.at("mw").get<std::vector<std::vector<double>>>();
    net.vw_ = j.at("vw").get<std::vector<std::vector<double>>>();
    net.mb_ = j.at("mb").get<std::vector<std::vector<double>>>();
    net.vb_ = j.at("vb").get<std::vector<std::vector<double>>>();
    net.check_shapes();
    return net;
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os << to_json().dump(1) << "\n";
  }

  static Mlp load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
    nlohmann::json j;
    is >> j;
    return from_json(j);
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kAdamEps = 1e-8;

  static double activate(Activation a, double z) {
    switch (a) {
      case Activation::Tanh: return std::tanh(z);
      case Activation::Relu: return z > 0.0 ? z : 0.0;
      case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
      default: return z;
    }
  }

  static double activate_grad(Activation a, double z, double post) {
    switch (a) {
      case Activation::Tanh: return 1.0 - post * post;
      case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
      case Activation::Sigmoid: return post * (1.0 - post);
      default: return 1.0;
    }
  }

  void adam_on(std::vector<double>& w, const std::vector<double>& g,
               std::vector<double>& m, std::vector<double>& v, double lr,
               double bc1, double bc2) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
    }
  }

  void init_storage() {
    std::size_t n = layer_count();
    w_.resize(n);
    b_.resize(n);
    mw_.resize(n);
    vw_.resize(n);
    mb_.resize(n);
    vb_.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
      std::size_t wn = static_cast<std::size_t>(spec_.layer_sizes[l + 1]) *
                       static_cast<std::size_t>(spec_.layer_sizes[l]);
      std::size_t bn = static_cast<std::size_t>(spec_.layer_sizes[l + 1]);
      w_[l].assign(wn, 0.0);
      b_[l].assign(bn, 0.0);
      mw_[l].assign(wn, 0.0);
      vw_[l].assign(wn, 0.0);
      mb_[l].assign(bn, 0.0);
      vb_[l].assign(bn, 0.0);
    }
  }

  void check_shapes() const {
    spec_.validate();
    for (std::size_t l = 0; l < layer_count(); ++l) {
      std::size_t wn = static_cast<std::size_t>(spec_.layer_sizes[l + 1]) *
                       static_cast<std::size_t>(spec_.layer_sizes[l]);
      std::size_t bn = static_cast<std::size_t>(spec_.layer_sizes[l + 1]);
      if (w_[l].size() != wn || b_[l].size() != bn || mw_[l].size() != wn ||
          vw_[l].size() != wn || mb_[l].size() != bn || vb_[l].size() != bn)
        throw std::invalid_argument("mlp checkpoint: tensor shape mismatch");
    }
  }

  void ensure_grads(MlpGrads& g) const {
    if (g.w.size() == layer_count() && !g.input.empty()) return;
    g.w.resize(layer_count());
    g.b.resize(layer_count());
    for (std::size_t l = 0; l < layer_count(); ++l) {
      g.w[l].assign(w_[l].size(), 0.0);
      g.b[l].assign(b_[l].size(), 0.0);
    }
    g.input.assign(static_cast<std::size_t>(input_size()), 0.0);
  }

  MlpSpec spec_;
  OptimKind optimizer_ = OptimKind::Adam;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> w_, b_;
  std::vector<std::vector<double>> mw_, vw_, mb_, vb_;
};

}  // namespace avdm

#endif  // AVDM_MLP_HPP
