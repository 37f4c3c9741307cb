#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gv::ad {

// Dense row-major tensor of doubles, rank 1 or 2.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  static Tensor zeros(std::vector<int> shape);
  static Tensor scalar(double v) { return Tensor{{1}, {v}}; }
  static Tensor vec(std::vector<double> v);
  static Tensor mat(int rows, int cols, std::vector<double> v);

  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const { return shape[0]; }
  int cols() const { return rank() == 2 ? shape[1] : 1; }
  std::size_t numel() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
};

// Raised when an op produces NaN/Inf or receives invalid shapes at runtime.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Handle to a tape node.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense tensors. Ops append records in topological
// order; backward() walks them once in reverse. A tape is single-owner: one
// forward/backward per instance, no sharing across threads.
class Tape {
 public:
  struct Options {
    bool grad_enabled = true;
    bool check_finite = true;
  };

  Tape() = default;
  explicit Tape(Options opts) : opts_(opts) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Registers an externally owned parameter tensor. The leaf sees a copy of
  // the current value; gradients are read back through grad().
  Var param(Tensor* storage, bool trainable = true);

  struct ParamRecord {
    Tensor* storage;
    Var var;
    bool trainable;
  };
  const std::vector<ParamRecord>& params() const { return params_; }

  // --- primitive ops ---
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_rowvec(Var mat, Var vec);        // (R,C) + (C,) broadcast over rows
  Var broadcast_rows(Var row, int rows);   // (1,C) -> (rows,C)
  Var sum_rows(Var mat);                   // (R,C) -> (1,C)
  Var scale(Var x, double c);
  Var affine(Var x, double mul, double shift);  // mul * x + shift elementwise
  Var neg(Var x);
  Var log(Var x);
  Var sigmoid(Var x);
  Var relu(Var x);
  Var leaky_relu(Var x, double slope);
  Var clamp_min(Var x, double lo);
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);  // feature axis
  Var softmax(Var logits);                                       // rank-1
  Var softmax_masked(Var logits, const std::vector<std::uint8_t>& mask);
  Var segment_sum(Var x, std::vector<int> segments, int num_segments);
  Var gather_rows(Var x, std::vector<int> indices);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_vec(const std::vector<Var>& parts);
  Var slice_rows(Var x, int row_begin, int row_end);
  Var slice_vec(Var x, int begin, int end);
  Var select(Var v, int index);  // rank-1 -> scalar
  Var reshape(Var x, std::vector<int> shape);
  Var sum(Var x);
  Var mean(Var x);
  Var dot(Var a, Var b) { return sum(mul(a, b)); }
  Var stop_gradient(Var x);

  // Seeds the scalar output with gradient 1 and replays the tape in reverse.
  // Throws NumericError if output is not a scalar.
  void backward(Var output);

  const Tensor& value(Var v) const { return nodes_[check(v)].value; }
  // Gradient accumulated for v; zeros if backward never reached it.
  Tensor grad(Var v) const;

  bool grad_enabled() const { return opts_.grad_enabled; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_live = false;
    std::function<void(Tape&)> backprop;
  };

  int check(Var v) const;
  Var emit(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop, const char* op);
  Tensor& grad_buf(int id);
  bool wants_grad(Var v) const { return opts_.grad_enabled && nodes_[check(v)].requires_grad; }

  Options opts_;
  std::vector<Node> nodes_;
  std::vector<ParamRecord> params_;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|),
// where the central difference of `f` is taken coordinate-wise at `point`.
double fd_max_rel_error(const std::vector<Tensor>& analytic_grads,
                        const std::function<double(const std::vector<Tensor>&)>& f,
                        const std::vector<Tensor>& point, double eps);

// Gradient checker: builds the scalar function on a fresh tape, computes
// analytic gradients w.r.t. every point tensor, and compares against central
// finite differences. The point must avoid activation kinks.
double check_gradients(const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                       const std::vector<Tensor>& point, double eps = 1e-5);

}  // namespace gv::ad
