#pragma once

// Differentiable building blocks. Rows of every activation matrix are sequence
// positions. Each forward fills a cache; the matching backward accumulates
// parameter gradients into a Gradients map and returns input gradients.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "slm/lm/params.hpp"

namespace slm::lm::layers {

inline constexpr double kLayerNormEps = 1e-6;

// ---------------------------------------------------------------------------
// Affine map  y = x W + b

inline Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

inline Matrix affine_backward(const Matrix& x, const Matrix& w, const Matrix& dy, Matrix& dw,
                              Matrix& db) {
  dw.noalias() += x.transpose() * dy;
  db += dy.colwise().sum();
  return dy * w.transpose();
}

// ---------------------------------------------------------------------------
// Layer normalization over each row

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd inv_std;
};

inline Matrix layer_norm(const ModelParams& p, const std::string& prefix, const Matrix& x,
                         LayerNormCache& cache) {
  const auto& gain = p[prefix + ".gain"];
  const auto& bias = p[prefix + ".bias"];
  const auto d = static_cast<double>(x.cols());
  cache.xhat.resize(x.rows(), x.cols());
  cache.inv_std.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / d;
    RowVector centered = x.row(r).array() - mean;
    const double var = centered.squaredNorm() / d;
    cache.inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.xhat.row(r) = centered * cache.inv_std(r);
  }
  Matrix y = cache.xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

inline Matrix layer_norm_backward(const ModelParams& p, const std::string& prefix,
                                  const LayerNormCache& cache, const Matrix& dy, Gradients& g) {
  const auto& gain = p[prefix + ".gain"];
  g[prefix + ".gain"] += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  g[prefix + ".bias"] += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  const auto d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_dxhat = dxhat.row(r).sum() / d;
    const double mean_dxhat_xhat = dxhat.row(r).dot(cache.xhat.row(r)) / d;
    dx.row(r) = cache.inv_std(r) *
                (dxhat.row(r).array() - mean_dxhat - cache.xhat.row(r).array() * mean_dxhat_xhat)
                    .matrix();
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Position-wise transition: relu(x W1 + b1) W2 + b2

struct FeedForwardCache {
  Matrix x, pre, act;
};

inline Matrix feed_forward(const ModelParams& p, const std::string& prefix, const Matrix& x,
                           FeedForwardCache& cache) {
  cache.x = x;
  cache.pre = affine(x, p[prefix + ".w1"], p[prefix + ".b1"]);
  cache.act = cache.pre.cwiseMax(0.0);
  return affine(cache.act, p[prefix + ".w2"], p[prefix + ".b2"]);
}

inline Matrix feed_forward_backward(const ModelParams& p, const std::string& prefix,
                                    const FeedForwardCache& cache, const Matrix& dy,
                                    Gradients& g) {
  Matrix dact = affine_backward(cache.act, p[prefix + ".w2"], dy, g[prefix + ".w2"],
                                g[prefix + ".b2"]);
  const Matrix dpre = (cache.pre.array() > 0.0).select(dact, 0.0);
  return affine_backward(cache.x, p[prefix + ".w1"], dpre, g[prefix + ".w1"], g[prefix + ".b1"]);
}

// ---------------------------------------------------------------------------
// Multi-head scaled dot-product attention. Queries come from `xq`, keys and
// values from `xkv`; no mask, every query sees every position.

struct AttentionCache {
  Matrix xq, xkv, q, k, v, o;
  std::vector<Matrix> probs;  // one (queries x keys) matrix per head
};

inline void softmax_rows(Matrix& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

inline Matrix attention(const ModelParams& p, const std::string& prefix, std::size_t heads,
                        const Matrix& xq, const Matrix& xkv, AttentionCache& cache) {
  cache.xq = xq;
  cache.xkv = xkv;
  cache.q = xq * p[prefix + ".wq"];
  cache.k = xkv * p[prefix + ".wk"];
  cache.v = xkv * p[prefix + ".wv"];
  const Eigen::Index width = cache.q.cols();
  const Eigen::Index hd = width / static_cast<Eigen::Index>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  cache.o.resize(xq.rows(), width);
  cache.probs.assign(heads, Matrix{});
  for (std::size_t head = 0; head < heads; ++head) {
    const Eigen::Index off = static_cast<Eigen::Index>(head) * hd;
    Matrix s = cache.q.middleCols(off, hd) * cache.k.middleCols(off, hd).transpose() * scale;
    softmax_rows(s);
    cache.o.middleCols(off, hd) = s * cache.v.middleCols(off, hd);
    cache.probs[head] = std::move(s);
  }
  return cache.o * p[prefix + ".wo"];
}

// Returns (d xq, d xkv).
inline std::pair<Matrix, Matrix> attention_backward(const ModelParams& p,
                                                    const std::string& prefix,
                                                    const AttentionCache& cache, const Matrix& dy,
                                                    Gradients& g) {
  const auto& wo = p[prefix + ".wo"];
  g[prefix + ".wo"].noalias() += cache.o.transpose() * dy;
  const Matrix d_o = dy * wo.transpose();

  const Eigen::Index width = cache.q.cols();
  const auto heads = static_cast<Eigen::Index>(cache.probs.size());
  const Eigen::Index hd = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Matrix dq(cache.q.rows(), width), dk(cache.k.rows(), width), dv(cache.v.rows(), width);
  for (Eigen::Index head = 0; head < heads; ++head) {
    const Eigen::Index off = head * hd;
    const Matrix& prob = cache.probs[static_cast<std::size_t>(head)];
    const Matrix d_oh = d_o.middleCols(off, hd);
    const Matrix dprob = d_oh * cache.v.middleCols(off, hd).transpose();
    dv.middleCols(off, hd) = prob.transpose() * d_oh;
    const Eigen::VectorXd row_dot = (dprob.array() * prob.array()).rowwise().sum();
    const Matrix ds = (prob.array() * (dprob.colwise() - row_dot).array()).matrix() * scale;
    dq.middleCols(off, hd) = ds * cache.k.middleCols(off, hd);
    dk.middleCols(off, hd) = ds.transpose() * cache.q.middleCols(off, hd);
  }
  g[prefix + ".wq"].noalias() += cache.xq.transpose() * dq;
  g[prefix + ".wk"].noalias() += cache.xkv.transpose() * dk;
  g[prefix + ".wv"].noalias() += cache.xkv.transpose() * dv;
  Matrix dxq = dq * p[prefix + ".wq"].transpose();
  Matrix dxkv = dk * p[prefix + ".wk"].transpose() + dv * p[prefix + ".wv"].transpose();
  return {std::move(dxq), std::move(dxkv)};
}

}  // namespace slm::lm::layers
