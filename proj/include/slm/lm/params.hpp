#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "slm/error.hpp"
#include "slm/lm/config.hpp"
#include "slm/random.hpp"

namespace slm::lm {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

// Only Weight tensors are regularized and drawn at random.
enum class TensorKind { Weight, Bias, Gain };

struct Tensor {
  Matrix value;
  TensorKind kind = TensorKind::Weight;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.kind == b.kind && a.value.rows() == b.value.rows() &&
           a.value.cols() == b.value.cols() && a.value == b.value;
  }
};

struct TensorSpec {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
  TensorKind kind;
};

using Gradients = std::map<std::string, Matrix>;

struct ModelParams {
  ModelConfig config;
  std::map<std::string, Tensor> tensors;

  const Matrix& operator[](const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("missing parameter tensor '" + name + "'");
    return it->second.value;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

namespace detail {

inline void add_attention(std::vector<TensorSpec>& out, const std::string& prefix,
                          Eigen::Index d, Eigen::Index h) {
  out.push_back({prefix + ".wq", d, h, TensorKind::Weight});
  out.push_back({prefix + ".wk", d, h, TensorKind::Weight});
  out.push_back({prefix + ".wv", d, h, TensorKind::Weight});
  out.push_back({prefix + ".wo", h, d, TensorKind::Weight});
}

inline void add_layer_norm(std::vector<TensorSpec>& out, const std::string& prefix,
                           Eigen::Index d) {
  out.push_back({prefix + ".gain", 1, d, TensorKind::Gain});
  out.push_back({prefix + ".bias", 1, d, TensorKind::Bias});
}

inline void add_feed_forward(std::vector<TensorSpec>& out, const std::string& prefix,
                             Eigen::Index d, Eigen::Index h) {
  out.push_back({prefix + ".w1", d, h, TensorKind::Weight});
  out.push_back({prefix + ".b1", 1, h, TensorKind::Bias});
  out.push_back({prefix + ".w2", h, d, TensorKind::Weight});
  out.push_back({prefix + ".b2", 1, d, TensorKind::Bias});
}

inline void add_lstm(std::vector<TensorSpec>& out, const std::string& prefix, Eigen::Index d,
                     Eigen::Index h) {
  out.push_back({prefix + ".w", d, 4 * h, TensorKind::Weight});
  out.push_back({prefix + ".u", h, 4 * h, TensorKind::Weight});
  out.push_back({prefix + ".b", 1, 4 * h, TensorKind::Bias});
}

}  // namespace detail

/// Every tensor of the configured backbone, in initialization order.
inline std::vector<TensorSpec> tensor_specs(const ModelConfig& c) {
  const auto d = static_cast<Eigen::Index>(c.dim);
  const auto h = static_cast<Eigen::Index>(c.hidden);
  std::vector<TensorSpec> specs;
  if (c.backbone == Backbone::UniversalTransformer) {
    for (const std::string block : {"enc", "dec"}) {
      detail::add_attention(specs, block + ".attn", d, h);
      detail::add_layer_norm(specs, block + ".ln1", d);
      detail::add_feed_forward(specs, block + ".ff", d, h);
      detail::add_layer_norm(specs, block + ".ln2", d);
    }
    specs.push_back({"out.w", d, d, TensorKind::Weight});
  } else {
    detail::add_lstm(specs, "lstm.fwd", d, h);
    detail::add_lstm(specs, "lstm.bwd", d, h);
    specs.push_back({"out.w", 2 * h, d, TensorKind::Weight});
  }
  specs.push_back({"out.b", 1, d, TensorKind::Bias});
  return specs;
}

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = rows; biases 0,
/// layer-norm gains 1.
inline ModelParams init_params(const ModelConfig& config) {
  validate(config);
  ModelParams p{config, {}};
  Rng rng(config.seed);
  for (const auto& spec : tensor_specs(config)) {
    Tensor t{Matrix::Zero(spec.rows, spec.cols), spec.kind};
    if (spec.kind == TensorKind::Gain) {
      t.value.setOnes();
    } else if (spec.kind == TensorKind::Weight) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(spec.rows));
      // column-major fill order is part of the reproducibility contract
      for (Eigen::Index col = 0; col < spec.cols; ++col)
        for (Eigen::Index row = 0; row < spec.rows; ++row) t.value(row, col) = rng.symmetric(scale);
    }
    p.tensors.emplace(spec.name, std::move(t));
  }
  return p;
}

inline Gradients zero_gradients(const ModelParams& p) {
  Gradients g;
  for (const auto& [name, t] : p.tensors) g.emplace(name, Matrix::Zero(t.value.rows(), t.value.cols()));
  return g;
}

inline double squared_weight_norm(const ModelParams& p) {
  double s = 0.0;
  for (const auto& [name, t] : p.tensors)
    if (t.kind == TensorKind::Weight) s += t.value.squaredNorm();
  return s;
}

inline std::size_t parameter_count(const ModelParams& p) {
  std::size_t n = 0;
  for (const auto& [name, t] : p.tensors) n += static_cast<std::size_t>(t.value.size());
  return n;
}

inline bool all_finite(const ModelParams& p) {
  for (const auto& [name, t] : p.tensors)
    if (!t.value.allFinite()) return false;
  return true;
}

}  // namespace slm::lm
