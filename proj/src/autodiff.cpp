#include "gv/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace gv::ad {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<EMat>;
using MapConst = Eigen::Map<const EMat>;

void require(bool cond, const std::string& what) {
  if (!cond) throw NumericError(what);
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(n, 0.0);
  return t;
}

Tensor Tensor::vec(std::vector<double> v) {
  Tensor t;
  t.shape = {static_cast<int>(v.size())};
  t.data = std::move(v);
  return t;
}

Tensor Tensor::mat(int rows, int cols, std::vector<double> v) {
  require(static_cast<std::size_t>(rows) * cols == v.size(), "Tensor::mat: data size mismatch");
  Tensor t;
  t.shape = {rows, cols};
  t.data = std::move(v);
  return t;
}

int Tape::check(Var v) const {
  require(v.id >= 0 && v.id < static_cast<int>(nodes_.size()), "Tape: invalid Var handle");
  return v.id;
}

Tensor& Tape::grad_buf(int id) {
  Node& node = nodes_[id];
  if (!node.grad_live) {
    node.grad = Tensor::zeros(node.value.shape);
    node.grad_live = true;
  }
  return node.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_[check(v)];
  if (node.grad_live) return node.grad;
  return Tensor::zeros(node.value.shape);
}

Var Tape::emit(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop, const char* op) {
  if (opts_.check_finite) {
    for (double x : value.data)
      if (!std::isfinite(x)) throw NumericError(std::string("non-finite value produced by op '") + op + "'");
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad && opts_.grad_enabled;
  nodes_.push_back(std::move(node));
  Var out{static_cast<int>(nodes_.size()) - 1};
  if (nodes_.back().requires_grad) nodes_.back().backprop = std::move(backprop);
  return out;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  return emit(std::move(value), requires_grad, nullptr, "leaf");
}

Var Tape::param(Tensor* storage, bool trainable) {
  Var v = leaf(*storage, trainable);
  params_.push_back({storage, v, trainable});
  return v;
}

void Tape::backward(Var output) {
  const Tensor& out_val = value(output);
  require(out_val.numel() == 1, "backward: output must be a scalar");
  grad_buf(output.id).data[0] = 1.0;
  for (int id = output.id; id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.grad_live || !node.backprop) continue;
    node.backprop(*this);
  }
}

// Every op captures its own output id by emitting first with a placeholder,
// then binding the closure; `out` below is always valid inside the closure.

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rank() == 2 && tb.rank() == 2, "matmul: both inputs must be rank-2");
  require(ta.cols() == tb.rows(), "matmul: inner dimensions disagree");
  const int M = ta.rows(), K = ta.cols(), N = tb.cols();
  Tensor out = Tensor::zeros({M, N});
  MapMat(out.data.data(), M, N).noalias() =
      MapConst(ta.data.data(), M, K) * MapConst(tb.data.data(), K, N);
  const bool rg = wants_grad(a) || wants_grad(b);
  Var o = emit(std::move(out), rg, nullptr, "matmul");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [a, b, o, M, K, N](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      if (t.wants_grad(a)) {
        MapMat(t.grad_buf(a.id).data.data(), M, K).noalias() +=
            MapConst(g.data.data(), M, N) * MapConst(t.value(b).data.data(), K, N).transpose();
      }
      if (t.wants_grad(b)) {
        MapMat(t.grad_buf(b.id).data.data(), K, N).noalias() +=
            MapConst(t.value(a).data.data(), M, K).transpose() * MapConst(g.data.data(), M, N);
      }
    };
  }
  return o;
}

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.shape == tb.shape, "add: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += tb.data[i];
  const bool rg = wants_grad(a) || wants_grad(b);
  Var o = emit(std::move(out), rg, nullptr, "add");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [a, b, o](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      if (t.wants_grad(a)) {
        Tensor& ga = t.grad_buf(a.id);
        for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
      }
      if (t.wants_grad(b)) {
        Tensor& gb = t.grad_buf(b.id);
        for (std::size_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i];
      }
    };
  }
  return o;
}

Var Tape::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.shape == tb.shape, "sub: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= tb.data[i];
  const bool rg = wants_grad(a) || wants_grad(b);
  Var o = emit(std::move(out), rg, nullptr, "sub");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [a, b, o](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      if (t.wants_grad(a)) {
        Tensor& ga = t.grad_buf(a.id);
        for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
      }
      if (t.wants_grad(b)) {
        Tensor& gb = t.grad_buf(b.id);
        for (std::size_t i = 0; i < g.numel(); ++i) gb.data[i] -= g.data[i];
      }
    };
  }
  return o;
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.shape == tb.shape, "mul: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= tb.data[i];
  const bool rg = wants_grad(a) || wants_grad(b);
  Var o = emit(std::move(out), rg, nullptr, "mul");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [a, b, o](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      if (t.wants_grad(a)) {
        Tensor& ga = t.grad_buf(a.id);
        const Tensor& vb = t.value(b);
        for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * vb.data[i];
      }
      if (t.wants_grad(b)) {
        Tensor& gb = t.grad_buf(b.id);
        const Tensor& va = t.value(a);
        for (std::size_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i] * va.data[i];
      }
    };
  }
  return o;
}

Var Tape::add_rowvec(Var mat, Var vec) {
  const Tensor& tm = value(mat);
  const Tensor& tv = value(vec);
  require(tm.rank() == 2 && tv.rank() == 1, "add_rowvec: need (R,C) matrix and (C,) vector");
  require(tm.cols() == static_cast<int>(tv.numel()), "add_rowvec: width mismatch");
  const int R = tm.rows(), C = tm.cols();
  Tensor out = tm;
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) out.data[static_cast<std::size_t>(r) * C + c] += tv.data[c];
  const bool rg = wants_grad(mat) || wants_grad(vec);
  Var o = emit(std::move(out), rg, nullptr, "add_rowvec");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [mat, vec, o, R, C](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      if (t.wants_grad(mat)) {
        Tensor& gm = t.grad_buf(mat.id);
        for (std::size_t i = 0; i < g.numel(); ++i) gm.data[i] += g.data[i];
      }
      if (t.wants_grad(vec)) {
        Tensor& gv = t.grad_buf(vec.id);
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c) gv.data[c] += g.data[static_cast<std::size_t>(r) * C + c];
      }
    };
  }
  return o;
}

Var Tape::broadcast_rows(Var row, int rows) {
  const Tensor& tr = value(row);
  require(tr.rank() == 2 && tr.rows() == 1, "broadcast_rows: need a (1,C) input");
  require(rows >= 1, "broadcast_rows: rows must be >= 1");
  const int C = tr.cols();
  Tensor out = Tensor::zeros({rows, C});
  for (int r = 0; r < rows; ++r)
    std::copy(tr.data.begin(), tr.data.end(), out.data.begin() + static_cast<std::size_t>(r) * C);
  const bool rg = wants_grad(row);
  Var o = emit(std::move(out), rg, nullptr, "broadcast_rows");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [row, o, rows, C](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      Tensor& gr = t.grad_buf(row.id);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < C; ++c) gr.data[c] += g.data[static_cast<std::size_t>(r) * C + c];
    };
  }
  return o;
}

Var Tape::sum_rows(Var mat) {
  const Tensor& tm = value(mat);
  require(tm.rank() == 2, "sum_rows: need a rank-2 input");
  const int R = tm.rows(), C = tm.cols();
  Tensor out = Tensor::zeros({1, C});
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) out.data[c] += tm.data[static_cast<std::size_t>(r) * C + c];
  const bool rg = wants_grad(mat);
  Var o = emit(std::move(out), rg, nullptr, "sum_rows");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [mat, o, R, C](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      Tensor& gm = t.grad_buf(mat.id);
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) gm.data[static_cast<std::size_t>(r) * C + c] += g.data[c];
    };
  }
  return o;
}

Var Tape::scale(Var x, double c) {
  Tensor out = value(x);
  for (double& v : out.data) v *= c;
  const bool rg = wants_grad(x);
  Var o = emit(std::move(out), rg, nullptr, "scale");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, o, c](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      Tensor& gx = t.grad_buf(x.id);
      for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += c * g.data[i];
    };
  }
  return o;
}

Var Tape::affine(Var x, double mul, double shift) {
  Tensor out = value(x);
  for (double& v : out.data) v = mul * v + shift;
  const bool rg = wants_grad(x);
  Var o = emit(std::move(out), rg, nullptr, "affine");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, o, mul](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      Tensor& gx = t.grad_buf(x.id);
      for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += mul * g.data[i];
    };
  }
  return o;
}

Var Tape::neg(Var x) { return scale(x, -1.0); }

Var Tape::log(Var x) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::log(v);
  const bool rg = wants_grad(x);
  Var o = emit(std::move(out), rg, nullptr, "log");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, o](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      const Tensor& vx = t.value(x);
      Tensor& gx = t.grad_buf(x.id);
      for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i] / vx.data[i];
    };
  }
  return o;
}

Var Tape::sigmoid(Var x) {
  Tensor out = value(x);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  const bool rg = wants_grad(x);
  Var o = emit(std::move(out), rg, nullptr, "sigmoid");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, o](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      const Tensor& y = t.value(o);
      Tensor& gx = t.grad_buf(x.id);
      for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
    };
  }
  return o;
}

Var Tape::relu(Var x) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::max(v, 0.0);
  const bool rg = wants_grad(x);
  Var o = emit(std::move(out), rg, nullptr, "relu");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, o](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      const Tensor& vx = t.value(x);
      Tensor& gx = t.grad_buf(x.id);
      for (std::size_t i = 0; i < g.numel(); ++i)
        if (vx.data[i] > 0.0) gx.data[i] += g.data[i];
    };
  }
  return o;
}

Var Tape::leaky_relu(Var x, double slope) {
  Tensor out = value(x);
  for (double& v : out.data) v = v >= 0.0 ? v : slope * v;
  const bool rg = wants_grad(x);
  Var o = emit(std::move(out), rg, nullptr, "leaky_relu");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, o, slope](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      const Tensor& vx = t.value(x);
      Tensor& gx = t.grad_buf(x.id);
      for (std::size_t i = 0; i < g.numel(); ++i)
        gx.data[i] += g.data[i] * (vx.data[i] >= 0.0 ? 1.0 : slope);
    };
  }
  return o;
}

Var Tape::clamp_min(Var x, double lo) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::max(v, lo);
  const bool rg = wants_grad(x);
  Var o = emit(std::move(out), rg, nullptr, "clamp_min");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, o, lo](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      const Tensor& vx = t.value(x);
      Tensor& gx = t.grad_buf(x.id);
      for (std::size_t i = 0; i < g.numel(); ++i)
        if (vx.data[i] >= lo) gx.data[i] += g.data[i];
    };
  }
  return o;
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& tx = value(x);
  const Tensor& tg = value(gain);
  const Tensor& tb = value(bias);
  require(tx.rank() == 2, "layer_norm: need a rank-2 input");
  const int R = tx.rows(), C = tx.cols();
  require(tg.rank() == 1 && static_cast<int>(tg.numel()) == C, "layer_norm: gain must be (C,)");
  require(tb.rank() == 1 && static_cast<int>(tb.numel()) == C, "layer_norm: bias must be (C,)");

  Tensor out = Tensor::zeros({R, C});
  Tensor xhat = Tensor::zeros({R, C});
  std::vector<double> inv_std(R);
  for (int r = 0; r < R; ++r) {
    const double* row = tx.data.data() + static_cast<std::size_t>(r) * C;
    double mu = 0.0;
    for (int c = 0; c < C; ++c) mu += row[c];
    mu /= C;
    double var = 0.0;
    for (int c = 0; c < C; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= C;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (int c = 0; c < C; ++c) {
      const double xh = (row[c] - mu) * inv;
      xhat.data[static_cast<std::size_t>(r) * C + c] = xh;
      out.data[static_cast<std::size_t>(r) * C + c] = xh * tg.data[c] + tb.data[c];
    }
  }
  const bool rg = wants_grad(x) || wants_grad(gain) || wants_grad(bias);
  Var o = emit(std::move(out), rg, nullptr, "layer_norm");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, gain, bias, o, R, C, xhat = std::move(xhat),
                             inv_std = std::move(inv_std)](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      const Tensor& tg2 = t.value(gain);
      if (t.wants_grad(gain)) {
        Tensor& gg = t.grad_buf(gain.id);
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * C + c;
            gg.data[c] += g.data[i] * xhat.data[i];
          }
      }
      if (t.wants_grad(bias)) {
        Tensor& gb = t.grad_buf(bias.id);
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c) gb.data[c] += g.data[static_cast<std::size_t>(r) * C + c];
      }
      if (t.wants_grad(x)) {
        Tensor& gx = t.grad_buf(x.id);
        std::vector<double> w(C);
        for (int r = 0; r < R; ++r) {
          double mean_w = 0.0, mean_wx = 0.0;
          for (int c = 0; c < C; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * C + c;
            w[c] = g.data[i] * tg2.data[c];
            mean_w += w[c];
            mean_wx += w[c] * xhat.data[i];
          }
          mean_w /= C;
          mean_wx /= C;
          for (int c = 0; c < C; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * C + c;
            gx.data[i] += inv_std[r] * (w[c] - mean_w - xhat.data[i] * mean_wx);
          }
        }
      }
    };
  }
  return o;
}

Var Tape::softmax(Var logits) {
  const Tensor& tl = value(logits);
  require(tl.rank() == 1 && tl.numel() >= 1, "softmax: need a nonempty rank-1 input");
  Tensor out = tl;
  const double hi = *std::max_element(out.data.begin(), out.data.end());
  double z = 0.0;
  for (double& v : out.data) {
    v = std::exp(v - hi);
    z += v;
  }
  for (double& v : out.data) v /= z;
  const bool rg = wants_grad(logits);
  Var o = emit(std::move(out), rg, nullptr, "softmax");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [logits, o](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      const Tensor& y = t.value(o);
      Tensor& gx = t.grad_buf(logits.id);
      double dotp = 0.0;
      for (std::size_t i = 0; i < g.numel(); ++i) dotp += g.data[i] * y.data[i];
      for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += y.data[i] * (g.data[i] - dotp);
    };
  }
  return o;
}

Var Tape::softmax_masked(Var logits, const std::vector<std::uint8_t>& mask) {
  const Tensor& tl = value(logits);
  require(tl.rank() == 1, "softmax_masked: need a rank-1 input");
  require(mask.size() == tl.numel(), "softmax_masked: mask length mismatch");
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) hi = std::max(hi, tl.data[i]);
  require(std::isfinite(hi), "softmax_masked: all positions are masked");
  Tensor out = Tensor::zeros(tl.shape);
  double z = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    out.data[i] = std::exp(tl.data[i] - hi);
    z += out.data[i];
  }
  for (std::size_t i = 0; i < mask.size(); ++i) out.data[i] /= z;
  const bool rg = wants_grad(logits);
  Var o = emit(std::move(out), rg, nullptr, "softmax_masked");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [logits, o, mask](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      const Tensor& y = t.value(o);
      Tensor& gx = t.grad_buf(logits.id);
      double dotp = 0.0;
      for (std::size_t i = 0; i < g.numel(); ++i)
        if (mask[i]) dotp += g.data[i] * y.data[i];
      for (std::size_t i = 0; i < g.numel(); ++i)
        if (mask[i]) gx.data[i] += y.data[i] * (g.data[i] - dotp);
    };
  }
  return o;
}

Var Tape::segment_sum(Var x, std::vector<int> segments, int num_segments) {
  const Tensor& tx = value(x);
  require(tx.rank() == 2, "segment_sum: need a rank-2 input");
  require(static_cast<int>(segments.size()) == tx.rows(), "segment_sum: one segment id per row");
  const int C = tx.cols();
  for (int s : segments) require(s >= 0 && s < num_segments, "segment_sum: segment id out of range");
  Tensor out = Tensor::zeros({num_segments, C});
  for (std::size_t r = 0; r < segments.size(); ++r) {
    const double* src = tx.data.data() + r * C;
    double* dst = out.data.data() + static_cast<std::size_t>(segments[r]) * C;
    for (int c = 0; c < C; ++c) dst[c] += src[c];
  }
  const bool rg = wants_grad(x);
  Var o = emit(std::move(out), rg, nullptr, "segment_sum");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, o, C, segments = std::move(segments)](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      Tensor& gx = t.grad_buf(x.id);
      for (std::size_t r = 0; r < segments.size(); ++r) {
        const double* src = g.data.data() + static_cast<std::size_t>(segments[r]) * C;
        double* dst = gx.data.data() + r * C;
        for (int c = 0; c < C; ++c) dst[c] += src[c];
      }
    };
  }
  return o;
}

Var Tape::gather_rows(Var x, std::vector<int> indices) {
  const Tensor& tx = value(x);
  require(tx.rank() == 2, "gather_rows: need a rank-2 input");
  const int R = tx.rows(), C = tx.cols();
  for (int i : indices) require(i >= 0 && i < R, "gather_rows: index out of range");
  Tensor out = Tensor::zeros({static_cast<int>(indices.size()), C});
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::copy_n(tx.data.data() + static_cast<std::size_t>(indices[r]) * C, C, out.data.data() + r * C);
  const bool rg = wants_grad(x);
  Var o = emit(std::move(out), rg, nullptr, "gather_rows");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, o, C, indices = std::move(indices)](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      Tensor& gx = t.grad_buf(x.id);
      for (std::size_t r = 0; r < indices.size(); ++r) {
        const double* src = g.data.data() + r * C;
        double* dst = gx.data.data() + static_cast<std::size_t>(indices[r]) * C;
        for (int c = 0; c < C; ++c) dst[c] += src[c];
      }
    };
  }
  return o;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const int C = value(parts[0]).cols();
  int R = 0;
  bool rg = false;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    require(tp.rank() == 2 && tp.cols() == C, "concat_rows: column mismatch");
    R += tp.rows();
    rg = rg || wants_grad(p);
  }
  Tensor out = Tensor::zeros({R, C});
  std::vector<int> offsets;
  offsets.reserve(parts.size());
  int at = 0;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    offsets.push_back(at);
    std::copy(tp.data.begin(), tp.data.end(), out.data.begin() + static_cast<std::size_t>(at) * C);
    at += tp.rows();
  }
  Var o = emit(std::move(out), rg, nullptr, "concat_rows");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [parts, offsets, o, C](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      for (std::size_t k = 0; k < parts.size(); ++k) {
        if (!t.wants_grad(parts[k])) continue;
        Tensor& gp = t.grad_buf(parts[k].id);
        const std::size_t base = static_cast<std::size_t>(offsets[k]) * C;
        for (std::size_t i = 0; i < gp.numel(); ++i) gp.data[i] += g.data[base + i];
      }
    };
  }
  return o;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const int R = value(parts[0]).rows();
  int C = 0;
  bool rg = false;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    require(tp.rank() == 2 && tp.rows() == R, "concat_cols: row mismatch");
    C += tp.cols();
    rg = rg || wants_grad(p);
  }
  Tensor out = Tensor::zeros({R, C});
  std::vector<int> offsets;
  offsets.reserve(parts.size());
  int at = 0;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    offsets.push_back(at);
    const int pc = tp.cols();
    for (int r = 0; r < R; ++r)
      std::copy_n(tp.data.data() + static_cast<std::size_t>(r) * pc, pc,
                  out.data.data() + static_cast<std::size_t>(r) * C + at);
    at += pc;
  }
  Var o = emit(std::move(out), rg, nullptr, "concat_cols");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [parts, offsets, o, R, C](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      for (std::size_t k = 0; k < parts.size(); ++k) {
        if (!t.wants_grad(parts[k])) continue;
        Tensor& gp = t.grad_buf(parts[k].id);
        const int pc = gp.cols();
        for (int r = 0; r < R; ++r) {
          const double* src = g.data.data() + static_cast<std::size_t>(r) * C + offsets[k];
          double* dst = gp.data.data() + static_cast<std::size_t>(r) * pc;
          for (int c = 0; c < pc; ++c) dst[c] += src[c];
        }
      }
    };
  }
  return o;
}

Var Tape::concat_vec(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_vec: no inputs");
  int total = 0;
  bool rg = false;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    require(tp.rank() == 1, "concat_vec: need rank-1 inputs");
    total += static_cast<int>(tp.numel());
    rg = rg || wants_grad(p);
  }
  Tensor out = Tensor::zeros({total});
  std::vector<int> offsets;
  offsets.reserve(parts.size());
  int at = 0;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    offsets.push_back(at);
    std::copy(tp.data.begin(), tp.data.end(), out.data.begin() + at);
    at += static_cast<int>(tp.numel());
  }
  Var o = emit(std::move(out), rg, nullptr, "concat_vec");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [parts, offsets, o](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      for (std::size_t k = 0; k < parts.size(); ++k) {
        if (!t.wants_grad(parts[k])) continue;
        Tensor& gp = t.grad_buf(parts[k].id);
        for (std::size_t i = 0; i < gp.numel(); ++i) gp.data[i] += g.data[offsets[k] + i];
      }
    };
  }
  return o;
}

Var Tape::slice_rows(Var x, int row_begin, int row_end) {
  const Tensor& tx = value(x);
  require(tx.rank() == 2, "slice_rows: need a rank-2 input");
  require(0 <= row_begin && row_begin < row_end && row_end <= tx.rows(), "slice_rows: bad range");
  const int C = tx.cols();
  Tensor out = Tensor::zeros({row_end - row_begin, C});
  std::copy_n(tx.data.data() + static_cast<std::size_t>(row_begin) * C,
              static_cast<std::size_t>(row_end - row_begin) * C, out.data.data());
  const bool rg = wants_grad(x);
  Var o = emit(std::move(out), rg, nullptr, "slice_rows");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, o, row_begin, C](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      Tensor& gx = t.grad_buf(x.id);
      double* dst = gx.data.data() + static_cast<std::size_t>(row_begin) * C;
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g.data[i];
    };
  }
  return o;
}

Var Tape::slice_vec(Var x, int begin, int end) {
  const Tensor& tx = value(x);
  require(tx.rank() == 1, "slice_vec: need a rank-1 input");
  require(0 <= begin && begin < end && end <= static_cast<int>(tx.numel()), "slice_vec: bad range");
  Tensor out = Tensor::zeros({end - begin});
  std::copy_n(tx.data.data() + begin, end - begin, out.data.data());
  const bool rg = wants_grad(x);
  Var o = emit(std::move(out), rg, nullptr, "slice_vec");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, o, begin](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      Tensor& gx = t.grad_buf(x.id);
      for (std::size_t i = 0; i < g.numel(); ++i) gx.data[begin + i] += g.data[i];
    };
  }
  return o;
}

Var Tape::select(Var v, int index) {
  const Tensor& tv = value(v);
  require(tv.rank() == 1, "select: need a rank-1 input");
  require(index >= 0 && index < static_cast<int>(tv.numel()), "select: index out of range");
  return slice_vec(v, index, index + 1);
}

Var Tape::reshape(Var x, std::vector<int> shape) {
  const Tensor& tx = value(x);
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  require(n == tx.numel(), "reshape: element count mismatch");
  Tensor out;
  out.shape = shape;
  out.data = tx.data;
  const bool rg = wants_grad(x);
  Var o = emit(std::move(out), rg, nullptr, "reshape");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, o](Tape& t) {
      const Tensor& g = t.nodes_[o.id].grad;
      Tensor& gx = t.grad_buf(x.id);
      for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i];
    };
  }
  return o;
}

Var Tape::sum(Var x) {
  const Tensor& tx = value(x);
  double total = 0.0;
  for (double v : tx.data) total += v;
  const bool rg = wants_grad(x);
  Var o = emit(Tensor::scalar(total), rg, nullptr, "sum");
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backprop = [x, o](Tape& t) {
      const double g = t.nodes_[o.id].grad.data[0];
      Tensor& gx = t.grad_buf(x.id);
      for (double& v : gx.data) v += g;
    };
  }
  return o;
}

Var Tape::mean(Var x) {
  const Tensor& tx = value(x);
  require(tx.numel() > 0, "mean: empty input");
  return scale(sum(x), 1.0 / static_cast<double>(tx.numel()));
}

Var Tape::stop_gradient(Var x) { return leaf(value(x), false); }

double fd_max_rel_error(const std::vector<Tensor>& analytic_grads,
                        const std::function<double(const std::vector<Tensor>&)>& f,
                        const std::vector<Tensor>& point, double eps) {
  require(analytic_grads.size() == point.size(), "fd_max_rel_error: grad/point size mismatch");
  std::vector<Tensor> probe = point;
  double worst = 0.0;
  for (std::size_t t = 0; t < point.size(); ++t) {
    for (std::size_t k = 0; k < point[t].numel(); ++k) {
      const double saved = probe[t].data[k];
      probe[t].data[k] = saved + eps;
      const double fp = f(probe);
      probe[t].data[k] = saved - eps;
      const double fm = f(probe);
      probe[t].data[k] = saved;
      require(std::isfinite(fp) && std::isfinite(fm), "fd_max_rel_error: non-finite evaluation");
      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic = analytic_grads[t].data[k];
      const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double check_gradients(const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                       const std::vector<Tensor>& point, double eps) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const Tensor& t : point) leaves.push_back(tape.leaf(t, true));
  Var out = build(tape, leaves);
  require(tape.value(out).numel() == 1, "check_gradients: function must be scalar-valued");
  tape.backward(out);
  std::vector<Tensor> grads;
  grads.reserve(leaves.size());
  for (Var v : leaves) grads.push_back(tape.grad(v));

  auto eval = [&build](const std::vector<Tensor>& x) {
    Tape t(Tape::Options{.grad_enabled = false, .check_finite = true});
    std::vector<Var> vars;
    vars.reserve(x.size());
    for (const Tensor& xt : x) vars.push_back(t.leaf(xt, false));
    Var out_var = build(t, vars);
    return t.value(out_var).data[0];
  };
  return fd_max_rel_error(grads, eval, point, eps);
}

}  // namespace gv::ad
