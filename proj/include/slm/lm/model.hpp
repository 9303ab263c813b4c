#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "slm/embedding_io.hpp"
#include "slm/error.hpp"
#include "slm/lm/bilstm.hpp"
#include "slm/lm/params.hpp"
#include "slm/lm/universal_transformer.hpp"

namespace slm::lm {

using embedding::Vector;

/// Row i is the predicted embedding of the sentence that follows sentence i.
using CandidateSet = std::vector<Vector>;

inline Matrix to_matrix(const std::vector<Vector>& rows, std::size_t dim) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) {
      throw ValidationError("dimension mismatch: vector of length " +
                            std::to_string(rows[i].size()) + ", model dim " +
                            std::to_string(dim));
    }
    for (std::size_t k = 0; k < dim; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

inline CandidateSet to_rows(const Matrix& m) {
  CandidateSet out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const RowVector row = m.row(i);
    out.emplace_back(row.data(), row.data() + row.size());
  }
  return out;
}

/// Model inputs are the L2-normalized sentence embeddings.
inline Matrix prepare_inputs(const std::vector<Vector>& embeddings, std::size_t dim) {
  if (embeddings.empty()) throw ValidationError("model input is empty");
  Matrix m = to_matrix(embeddings, dim);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (!(norm > 0.0)) throw ValidationError("zero-norm sentence embedding");
    m.row(i) /= norm;
  }
  return m;
}

struct ForwardCache {
  ut::ForwardCache ut;
  bilstm::ForwardCache lstm;
};

inline Matrix forward(const ModelParams& p, const Matrix& inputs, ForwardCache& cache) {
  if (inputs.cols() != static_cast<Eigen::Index>(p.config.dim)) {
    throw ValidationError("dimension mismatch: inputs have dim " + std::to_string(inputs.cols()) +
                          ", model dim " + std::to_string(p.config.dim));
  }
  if (inputs.rows() == 0) throw ValidationError("model input is empty");
  return p.config.backbone == Backbone::UniversalTransformer
             ? ut::forward(p, inputs, cache.ut)
             : bilstm::forward(p, inputs, cache.lstm);
}

inline Matrix forward(const ModelParams& p, const Matrix& inputs) {
  ForwardCache cache;
  return forward(p, inputs, cache);
}

inline void backward(const ModelParams& p, const ForwardCache& cache, const Matrix& d_out,
                     Gradients& g) {
  if (p.config.backbone == Backbone::UniversalTransformer) ut::backward(p, cache.ut, d_out, g);
  else bilstm::backward(p, cache.lstm, d_out, g);
}

// Raw forward passes over the given rows (no normalization).
inline CandidateSet ut_forward(const ModelParams& p, const std::vector<Vector>& inputs) {
  if (p.config.backbone != Backbone::UniversalTransformer) {
    throw ValidationError("ut_forward called with a " + to_string(p.config.backbone) + " model");
  }
  return to_rows(forward(p, to_matrix(inputs, p.config.dim)));
}

inline CandidateSet bilstm_forward(const ModelParams& p, const std::vector<Vector>& inputs) {
  if (p.config.backbone != Backbone::BiLstm) {
    throw ValidationError("bilstm_forward called with a " + to_string(p.config.backbone) +
                          " model");
  }
  return to_rows(forward(p, to_matrix(inputs, p.config.dim)));
}

/// Candidate successors for every sentence of a (possibly shuffled) story,
/// computed in one pass over the whole set.
inline CandidateSet candidate_next(const ModelParams& p, const std::vector<Vector>& embeddings) {
  return to_rows(forward(p, prepare_inputs(embeddings, p.config.dim)));
}

inline CandidateSet candidate_next(const ModelParams& p, const embedding::EmbeddedStory& story) {
  return candidate_next(p, story.embeddings);
}

/// Reference candidates c_i = e_{next(i)} read off the gold order; the last
/// sentence gets its own embedding. Used to test the search and evaluation
/// path independently of any trained model.
inline CandidateSet gold_next_candidates(const embedding::EmbeddedStory& story) {
  const std::size_t n = story.size();
  std::vector<std::size_t> at_gold(n);
  for (std::size_t k = 0; k < n; ++k) {
    at_gold[story.gold_perm ? story.gold_perm->at(k) : k] = k;
  }
  CandidateSet out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t pos = story.gold_perm ? story.gold_perm->at(k) : k;
    out[k] = story.embeddings[pos + 1 < n ? at_gold[pos + 1] : k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objective

namespace detail {

// 1 - cos(c, t) and its gradient with respect to c.
inline double cosine_distance(const RowVector& c, const RowVector& t, RowVector* grad) {
  const double cn = c.norm(), tn = t.norm();
  if (!std::isfinite(cn)) {
    if (grad) grad->setZero(c.size());
    return std::numeric_limits<double>::quiet_NaN();
  }
  if (!(cn > 0.0) || !(tn > 0.0)) throw ValidationError("cosine loss on a zero-norm vector");
  const double cos = c.dot(t) / (cn * tn);
  if (grad) *grad = -(t / (cn * tn) - cos * c / (cn * cn));
  return 1.0 - cos;
}

}  // namespace detail

/// Teacher-forced sequence loss for one gold-ordered story: candidate i is
/// compared with gold sentence i + 1, the last candidate has no target.
///   loss = mean_i (1 - cos(c_i, e_{i+1})) + l2 * sum of squared weights
inline double loss(const CandidateSet& candidates, const std::vector<Vector>& gold,
                   const ModelParams& p, double l2) {
  if (candidates.size() != gold.size()) {
    throw ValidationError("loss: candidate count differs from sentence count");
  }
  if (gold.size() < 2) throw ValidationError("loss needs at least two sentences");
  double data = 0.0;
  for (std::size_t i = 0; i + 1 < gold.size(); ++i) {
    const Eigen::Map<const RowVector> c(candidates[i].data(),
                                        static_cast<Eigen::Index>(candidates[i].size()));
    const Eigen::Map<const RowVector> t(gold[i + 1].data(),
                                        static_cast<Eigen::Index>(gold[i + 1].size()));
    data += detail::cosine_distance(c, t, nullptr);
  }
  return data / static_cast<double>(gold.size() - 1) + l2 * squared_weight_norm(p);
}

/// Data term of `loss` for one story, accumulating its gradient into `g`
/// scaled by `weight`.
inline double accumulate_story_gradient(const ModelParams& p, const Matrix& gold_inputs,
                                        double weight, Gradients& g) {
  const Eigen::Index n = gold_inputs.rows();
  if (n < 2) throw ValidationError("training stories need at least two sentences");
  ForwardCache cache;
  const Matrix out = forward(p, gold_inputs, cache);
  Matrix d_out = Matrix::Zero(out.rows(), out.cols());
  double data = 0.0;
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    RowVector grad;
    data += detail::cosine_distance(out.row(i), gold_inputs.row(i + 1), &grad);
    d_out.row(i) = grad * (inv * weight);
  }
  backward(p, cache, d_out, g);
  return data * inv;
}

struct ObjectiveValue {
  double loss = 0.0;
  Gradients gradients;
};

/// Mean story loss over `batch` plus the L2 term, with the full gradient.
inline ObjectiveValue objective(const ModelParams& p, std::span<const Matrix> batch, double l2) {
  if (batch.empty()) throw ValidationError("objective over an empty batch");
  ObjectiveValue v{0.0, zero_gradients(p)};
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto& story : batch) v.loss += w * accumulate_story_gradient(p, story, w, v.gradients);
  v.loss += l2 * squared_weight_norm(p);
  for (const auto& [name, t] : p.tensors)
    if (t.kind == TensorKind::Weight) v.gradients[name] += 2.0 * l2 * t.value;
  return v;
}

}  // namespace slm::lm
