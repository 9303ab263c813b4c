#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "slm/lm/layers.hpp"
#include "slm/lm/params.hpp"

namespace slm::lm {

/// Sinusoidal embedding of the refinement step `step` (1-based), added to
/// every position before each encoder step. There is deliberately no
/// embedding of sentence position.
inline RowVector timestep_embedding(std::size_t step, std::size_t dim) {
  RowVector e(static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < dim; ++k) {
    const double pair = static_cast<double>(k / 2) * 2.0;
    const double angle =
        static_cast<double>(step) / std::pow(10000.0, pair / static_cast<double>(dim));
    e(static_cast<Eigen::Index>(k)) = (k % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
  return e;
}

namespace ut {

// attention -> add & norm -> transition -> add & norm
struct BlockCache {
  layers::AttentionCache attn;
  layers::LayerNormCache ln1, ln2;
  layers::FeedForwardCache ff;
};

struct ForwardCache {
  std::vector<BlockCache> steps;  // shared encoder weights, one cache per step
  BlockCache decoder;
  Matrix decoded;  // decoder output before the projection
};

inline Matrix block(const ModelParams& p, const std::string& prefix, const Matrix& x,
                    BlockCache& cache) {
  const Matrix a = layers::attention(p, prefix + ".attn", p.config.heads, x, x, cache.attn);
  const Matrix x1 = layers::layer_norm(p, prefix + ".ln1", x + a, cache.ln1);
  const Matrix f = layers::feed_forward(p, prefix + ".ff", x1, cache.ff);
  return layers::layer_norm(p, prefix + ".ln2", x1 + f, cache.ln2);
}

inline Matrix block_backward(const ModelParams& p, const std::string& prefix,
                             const BlockCache& cache, const Matrix& dy, Gradients& g) {
  const Matrix dr2 = layers::layer_norm_backward(p, prefix + ".ln2", cache.ln2, dy, g);
  const Matrix dx1 = dr2 + layers::feed_forward_backward(p, prefix + ".ff", cache.ff, dr2, g);
  const Matrix dr1 = layers::layer_norm_backward(p, prefix + ".ln1", cache.ln1, dx1, g);
  auto [dxq, dxkv] = layers::attention_backward(p, prefix + ".attn", cache.attn, dr1, g);
  return dr1 + dxq + dxkv;
}

/// Encoder: depth_steps applications of one shared block. Decoder: every
/// refined position queries all encoder outputs, followed by a transition and
/// a d -> d projection. Row i of the result is the candidate successor of
/// input row i.
inline Matrix forward(const ModelParams& p, const Matrix& inputs, ForwardCache& cache) {
  Matrix x = inputs;
  cache.steps.assign(p.config.depth_steps, BlockCache{});
  for (std::size_t t = 0; t < p.config.depth_steps; ++t) {
    x.rowwise() += timestep_embedding(t + 1, p.config.dim);
    x = block(p, "enc", x, cache.steps[t]);
  }
  cache.decoded = block(p, "dec", x, cache.decoder);
  return layers::affine(cache.decoded, p["out.w"], p["out.b"]);
}

inline void backward(const ModelParams& p, const ForwardCache& cache, const Matrix& d_out,
                     Gradients& g) {
  Matrix dx = layers::affine_backward(cache.decoded, p["out.w"], d_out, g["out.w"], g["out.b"]);
  dx = block_backward(p, "dec", cache.decoder, dx, g);
  for (std::size_t t = p.config.depth_steps; t-- > 0;) {
    dx = block_backward(p, "enc", cache.steps[t], dx, g);
  }
}

}  // namespace ut
}  // namespace slm::lm
