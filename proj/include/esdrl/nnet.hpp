#pragma once

// Dense MLPs with LayerNorm, reverse-mode gradients and Adam. Samples are
// stored column-wise: an input batch is (input_dim x batch).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace esdrl::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class OutputActivation { identity, tanh_scaled };

inline constexpr double kLayerNormEps = 1e-5;

struct DenseLayer {
  Matrix W;           // out x in
  Vector b;           // out
  Vector ln_gain;     // out; empty on the output layer
  Vector ln_bias;     // out; empty on the output layer
};

/// Parameters (or gradients, or optimizer moments) for one network.
struct MlpParams {
  std::vector<DenseLayer> layers;

  template <class F>
  void for_each(F&& f) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& L = layers[l];
      const std::string p = "layer" + std::to_string(l) + ".";
      f(p + "W", Eigen::Map<Vector>(L.W.data(), L.W.size()));
      f(p + "b", Eigen::Map<Vector>(L.b.data(), L.b.size()));
      if (L.ln_gain.size()) {
        f(p + "ln_gain", Eigen::Map<Vector>(L.ln_gain.data(), L.ln_gain.size()));
        f(p + "ln_bias", Eigen::Map<Vector>(L.ln_bias.data(), L.ln_bias.size()));
      }
    }
  }

  template <class F>
  void for_each(F&& f) const {
    const_cast<MlpParams*>(this)->for_each([&](const std::string& name, Eigen::Map<Vector> v) {
      f(name, Eigen::Map<const Vector>(v.data(), v.size()));
    });
  }

  MlpParams zeros_like() const {
    MlpParams z = *this;
    z.for_each([](const std::string&, Eigen::Map<Vector> v) { v.setZero(); });
    return z;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, Eigen::Map<const Vector> v) { n += static_cast<std::size_t>(v.size()); });
    return n;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(count());
    for_each([&](const std::string&, Eigen::Map<const Vector> v) { out.insert(out.end(), v.data(), v.data() + v.size()); });
    return out;
  }

  void assign_flat(const std::vector<double>& flat) {
    if (flat.size() != count()) throw std::invalid_argument("assign_flat: size mismatch");
    std::size_t off = 0;
    for_each([&](const std::string&, Eigen::Map<Vector> v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = flat[off++];
    });
  }
};

struct MlpSpec {
  std::vector<int> layer_sizes;  // input, hidden..., output
  OutputActivation output_activation = OutputActivation::identity;
  std::vector<double> output_scale;  // per output coordinate, tanh_scaled only
  bool layer_norm = true;
};

/// Intermediate values kept by forward() for backward().
struct MlpTape {
  Matrix input;
  std::vector<Matrix> pre;     // affine outputs per layer
  std::vector<Matrix> normed;  // LayerNorm z-hat per hidden layer
  std::vector<Vector> inv_std; // per hidden layer, per sample
  std::vector<Matrix> relu_in; // ReLU inputs (post-LayerNorm) per hidden layer
  std::vector<Matrix> act;     // post-ReLU activations per hidden layer
  Matrix out_tanh;             // tanh(pre) for tanh_scaled output
  Matrix output;
};

class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(MlpSpec spec) : spec_(std::move(spec)) {
    if (spec_.layer_sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    for (int s : spec_.layer_sizes)
      if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
    if (spec_.output_activation == OutputActivation::tanh_scaled) {
      const auto out = static_cast<std::size_t>(spec_.layer_sizes.back());
      if (spec_.output_scale.empty()) spec_.output_scale.assign(out, 1.0);
      if (spec_.output_scale.size() != out) throw std::invalid_argument("Mlp: output_scale size mismatch");
      for (double s : spec_.output_scale)
        if (!(s > 0) || !std::isfinite(s)) throw std::invalid_argument("Mlp: output_scale must be finite and positive");
    }
    const std::size_t n = spec_.layer_sizes.size() - 1;
    params_.layers.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
      auto& L = params_.layers[l];
      L.W = Matrix::Zero(spec_.layer_sizes[l + 1], spec_.layer_sizes[l]);
      L.b = Vector::Zero(spec_.layer_sizes[l + 1]);
      if (spec_.layer_norm && l + 1 < n) {
        L.ln_gain = Vector::Ones(spec_.layer_sizes[l + 1]);
        L.ln_bias = Vector::Zero(spec_.layer_sizes[l + 1]);
      }
    }
  }

  /// Uniform fan-in init on hidden layers; the output layer uses +-final_scale.
  void initialize(std::mt19937_64& rng, double final_scale) {
    const std::size_t n = params_.layers.size();
    for (std::size_t l = 0; l < n; ++l) {
      auto& L = params_.layers[l];
      const double lim = l + 1 < n ? 1.0 / std::sqrt(static_cast<double>(L.W.cols())) : final_scale;
      std::uniform_real_distribution<double> dist(-lim, lim);
      for (Eigen::Index i = 0; i < L.W.size(); ++i) L.W.data()[i] = dist(rng);
      for (Eigen::Index i = 0; i < L.b.size(); ++i) L.b[i] = dist(rng);
      if (L.ln_gain.size()) {
        L.ln_gain.setOnes();
        L.ln_bias.setZero();
      }
    }
  }

  const MlpSpec& spec() const { return spec_; }
  MlpParams& params() { return params_; }
  const MlpParams& params() const { return params_; }
  int input_dim() const { return spec_.layer_sizes.front(); }
  int output_dim() const { return spec_.layer_sizes.back(); }

  Matrix forward(const Matrix& input) const {
    MlpTape tape;
    forward(input, tape);
    return std::move(tape.output);
  }

  Vector forward(const Vector& input) const { return forward(Matrix(input)).col(0); }

  void forward(const Matrix& input, MlpTape& tape) const {
    if (input.rows() != input_dim())
      throw std::invalid_argument("Mlp::forward: input has " + std::to_string(input.rows()) + " rows, expected " +
                                  std::to_string(input_dim()));
    const std::size_t n = params_.layers.size();
    tape.input = input;
    tape.pre.assign(n, Matrix());
    tape.normed.assign(n, Matrix());
    tape.inv_std.assign(n, Vector());
    tape.relu_in.assign(n, Matrix());
    tape.act.assign(n, Matrix());
    const Matrix* x = &tape.input;
    for (std::size_t l = 0; l < n; ++l) {
      const auto& L = params_.layers[l];
      tape.pre[l].noalias() = L.W * (*x);
      tape.pre[l].colwise() += L.b;
      if (l + 1 == n) break;
      Matrix y;
      if (L.ln_gain.size()) {
        const Eigen::Index m = tape.pre[l].rows();
        Matrix zhat = tape.pre[l];
        Vector inv(zhat.cols());
        for (Eigen::Index c = 0; c < zhat.cols(); ++c) {
          auto col = zhat.col(c);
          const double mean = col.mean();
          col.array() -= mean;
          const double var = col.squaredNorm() / static_cast<double>(m);
          inv[c] = 1.0 / std::sqrt(var + kLayerNormEps);
          col *= inv[c];
        }
        y = (zhat.array().colwise() * L.ln_gain.array()).colwise() + L.ln_bias.array();
        tape.normed[l] = std::move(zhat);
        tape.inv_std[l] = std::move(inv);
      } else {
        y = tape.pre[l];
      }
      tape.act[l] = y.cwiseMax(0.0);
      tape.relu_in[l] = std::move(y);
      x = &tape.act[l];
    }
    const Matrix& last = tape.pre[n - 1];
    if (spec_.output_activation == OutputActivation::tanh_scaled) {
      static const double kBelowOne = std::nextafter(1.0, 0.0);
      tape.out_tanh = last.array().tanh().min(kBelowOne).max(-kBelowOne).matrix();
      tape.output = tape.out_tanh;
      for (Eigen::Index r = 0; r < tape.output.rows(); ++r) tape.output.row(r) *= spec_.output_scale[r];
    } else {
      tape.output = last;
    }
  }

  /// Gradients of sum_samples <upstream, output> with respect to every
  /// parameter; optionally also with respect to the input.
  MlpParams backward(const MlpTape& tape, const Matrix& upstream, Matrix* input_grad = nullptr) const {
    const std::size_t n = params_.layers.size();
    if (upstream.rows() != output_dim() || upstream.cols() != tape.output.cols())
      throw std::invalid_argument("Mlp::backward: upstream shape mismatch");
    MlpParams g = params_.zeros_like();
    Matrix delta = upstream;
    if (spec_.output_activation == OutputActivation::tanh_scaled) {
      const Matrix d = (1.0 - tape.out_tanh.array().square()).matrix();
      for (Eigen::Index r = 0; r < delta.rows(); ++r) delta.row(r) *= spec_.output_scale[r];
      delta = delta.cwiseProduct(d);
    }
    for (std::size_t li = n; li-- > 0;) {
      const auto& L = params_.layers[li];
      const Matrix& x = li == 0 ? tape.input : tape.act[li - 1];
      g.layers[li].W.noalias() = delta * x.transpose();
      g.layers[li].b = delta.rowwise().sum();
      if (li == 0 && !input_grad) break;
      Matrix dx;
      dx.noalias() = L.W.transpose() * delta;
      if (li == 0) {
        *input_grad = std::move(dx);
        break;
      }
      // Back through ReLU then LayerNorm of layer li-1.
      const auto& P = params_.layers[li - 1];
      const Matrix& y = tape.relu_in[li - 1];
      Matrix dy = (y.array() > 0.0).select(dx, 0.0);
      if (P.ln_gain.size()) {
        const Matrix& zhat = tape.normed[li - 1];
        g.layers[li - 1].ln_gain = (dy.cwiseProduct(zhat)).rowwise().sum();
        g.layers[li - 1].ln_bias = dy.rowwise().sum();
        Matrix dzhat = dy.array().colwise() * P.ln_gain.array();
        const double m = static_cast<double>(dzhat.rows());
        for (Eigen::Index c = 0; c < dzhat.cols(); ++c) {
          const double mean_d = dzhat.col(c).sum() / m;
          const double mean_dz = dzhat.col(c).dot(zhat.col(c)) / m;
          dzhat.col(c) = tape.inv_std[li - 1][c] *
                         (dzhat.col(c).array() - mean_d - zhat.col(c).array() * mean_dz).matrix();
        }
        delta = std::move(dzhat);
      } else {
        delta = std::move(dy);
      }
    }
    return g;
  }

 private:
  MlpSpec spec_;
  MlpParams params_;
};

}  // namespace esdrl::nn
