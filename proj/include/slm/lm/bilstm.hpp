#pragma once

#include <string>
#include <vector>

#include "slm/lm/layers.hpp"
#include "slm/lm/params.hpp"

namespace slm::lm::bilstm {

inline RowVector sigmoid(const RowVector& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

struct StepCache {
  RowVector x, h_prev, c_prev, in, forget, cell, out, c, tanh_c;
};

struct ForwardCache {
  std::vector<StepCache> fwd, bwd;  // bwd[t] belongs to input position t
  Matrix states;                    // n x 2h: [forward | backward]
};

// Gate layout along the 4h axis: input, forget, cell candidate, output.
inline StepCache lstm_step(const ModelParams& p, const std::string& prefix, const RowVector& x,
                           const RowVector& h_prev, const RowVector& c_prev) {
  const auto h = static_cast<Eigen::Index>(p.config.hidden);
  const RowVector z = x * p[prefix + ".w"] + h_prev * p[prefix + ".u"] + p[prefix + ".b"];
  StepCache s;
  s.x = x;
  s.h_prev = h_prev;
  s.c_prev = c_prev;
  s.in = sigmoid(z.segment(0, h));
  s.forget = sigmoid(z.segment(h, h));
  s.cell = z.segment(2 * h, h).array().tanh();
  s.out = sigmoid(z.segment(3 * h, h));
  s.c = s.forget.cwiseProduct(c_prev) + s.in.cwiseProduct(s.cell);
  s.tanh_c = s.c.array().tanh();
  return s;
}

inline RowVector hidden_of(const StepCache& s) { return s.out.cwiseProduct(s.tanh_c); }

inline Matrix forward(const ModelParams& p, const Matrix& inputs, ForwardCache& cache) {
  const Eigen::Index n = inputs.rows();
  const auto h = static_cast<Eigen::Index>(p.config.hidden);
  cache.fwd.assign(static_cast<std::size_t>(n), StepCache{});
  cache.bwd.assign(static_cast<std::size_t>(n), StepCache{});
  cache.states.resize(n, 2 * h);

  RowVector hs = RowVector::Zero(h), cs = RowVector::Zero(h);
  for (Eigen::Index t = 0; t < n; ++t) {
    auto& s = cache.fwd[static_cast<std::size_t>(t)];
    s = lstm_step(p, "lstm.fwd", inputs.row(t), hs, cs);
    hs = hidden_of(s);
    cs = s.c;
    cache.states.row(t).head(h) = hs;
  }
  hs.setZero();
  cs.setZero();
  for (Eigen::Index t = n; t-- > 0;) {
    auto& s = cache.bwd[static_cast<std::size_t>(t)];
    s = lstm_step(p, "lstm.bwd", inputs.row(t), hs, cs);
    hs = hidden_of(s);
    cs = s.c;
    cache.states.row(t).tail(h) = hs;
  }
  return layers::affine(cache.states, p["out.w"], p["out.b"]);
}

namespace detail {

// Backpropagation through time for one direction. `d_hidden.row(t)` is the
// loss gradient on the state emitted at position t; `steps` are visited in
// reverse processing order.
template <typename Order>
void direction_backward(const ModelParams& p, const std::string& prefix,
                        const std::vector<StepCache>& steps, const Matrix& d_hidden,
                        const Order& processing_order, Gradients& g) {
  const auto h = static_cast<Eigen::Index>(p.config.hidden);
  const auto& u = p[prefix + ".u"];
  auto& gw = g[prefix + ".w"];
  auto& gu = g[prefix + ".u"];
  auto& gb = g[prefix + ".b"];
  RowVector dh_next = RowVector::Zero(h), dc_next = RowVector::Zero(h);
  for (auto it = processing_order.rbegin(); it != processing_order.rend(); ++it) {
    const auto t = *it;
    const StepCache& s = steps[static_cast<std::size_t>(t)];
    const RowVector dh = d_hidden.row(t) + dh_next;
    const RowVector d_out = dh.cwiseProduct(s.tanh_c);
    const RowVector dc = dh.cwiseProduct(s.out).cwiseProduct(
                             (1.0 - s.tanh_c.array().square()).matrix()) +
                         dc_next;
    RowVector dz(4 * h);
    dz.segment(0, h) = dc.cwiseProduct(s.cell).cwiseProduct(
        s.in.cwiseProduct((1.0 - s.in.array()).matrix()));
    dz.segment(h, h) = dc.cwiseProduct(s.c_prev).cwiseProduct(
        s.forget.cwiseProduct((1.0 - s.forget.array()).matrix()));
    dz.segment(2 * h, h) =
        dc.cwiseProduct(s.in).cwiseProduct((1.0 - s.cell.array().square()).matrix());
    dz.segment(3 * h, h) =
        d_out.cwiseProduct(s.out.cwiseProduct((1.0 - s.out.array()).matrix()));
    gw.noalias() += s.x.transpose() * dz;
    gu.noalias() += s.h_prev.transpose() * dz;
    gb += dz;
    dh_next = dz * u.transpose();
    dc_next = dc.cwiseProduct(s.forget);
  }
}

}  // namespace detail

inline void backward(const ModelParams& p, const ForwardCache& cache, const Matrix& d_out,
                     Gradients& g) {
  const auto h = static_cast<Eigen::Index>(p.config.hidden);
  const Eigen::Index n = cache.states.rows();
  const Matrix d_states =
      layers::affine_backward(cache.states, p["out.w"], d_out, g["out.w"], g["out.b"]);
  std::vector<Eigen::Index> forward_order(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) forward_order[static_cast<std::size_t>(t)] = t;
  const std::vector<Eigen::Index> backward_order(forward_order.rbegin(), forward_order.rend());
  detail::direction_backward(p, "lstm.fwd", cache.fwd, d_states.leftCols(h), forward_order, g);
  detail::direction_backward(p, "lstm.bwd", cache.bwd, d_states.rightCols(h), backward_order, g);
}

}  // namespace slm::lm::bilstm
