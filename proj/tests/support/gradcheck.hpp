#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "slm/language_model.hpp"

namespace slm::testing {

inline std::vector<lm::Matrix> random_batch(std::size_t stories, Eigen::Index n, Eigen::Index d,
                                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<lm::Matrix> batch;
  for (std::size_t s = 0; s < stories; ++s) {
    lm::Matrix m(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < d; ++k) m(i, k) = rng.symmetric(1.0);
    batch.push_back(m);
  }
  return batch;
}

// Perturbs biases and gains away from their init so their gradients are
// exercised at a generic point.
inline lm::ModelParams generic_params(const lm::ModelConfig& config) {
  auto p = lm::init_params(config);
  Rng rng(config.seed + 99);
  for (auto& [name, t] : p.tensors)
    if (t.kind != lm::TensorKind::Weight)
      for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] += rng.symmetric(0.3);
  return p;
}

// Central differences over every scalar parameter. Returns, per tensor,
// |g_analytic - g_numeric| / max(|g_analytic|, |g_numeric|).
inline std::map<std::string, double> gradient_errors(const lm::ModelConfig& config,
                                                     Eigen::Index n = 5, double step = 1e-5,
                                                     double l2 = 1e-3) {
  const auto params = generic_params(config);
  const auto batch = random_batch(2, n, static_cast<Eigen::Index>(config.dim), 17);
  const auto analytic = lm::objective(params, batch, l2).gradients;

  std::map<std::string, double> errors;
  for (const auto& [name, tensor] : params.tensors) {
    lm::Matrix numeric(tensor.value.rows(), tensor.value.cols());
    for (Eigen::Index i = 0; i < tensor.value.size(); ++i) {
      auto plus = params, minus = params;
      plus.tensors.at(name).value.data()[i] += step;
      minus.tensors.at(name).value.data()[i] -= step;
      numeric.data()[i] =
          (lm::objective(plus, batch, l2).loss - lm::objective(minus, batch, l2).loss) / (2.0 * step);
    }
    const lm::Matrix& a = analytic.at(name);
    const double denom = std::max({a.norm(), numeric.norm(), 1e-12});
    errors[name] = (a - numeric).norm() / denom;
  }
  return errors;
}

}  // namespace slm::testing
