#pragma once

#include <array>
#include <functional>
#include <vector>

#include "p2pi/numerics/rng.hpp"
#include "p2pi/numerics/tensor.hpp"

namespace p2pi::numerics {

/// Reverse-mode autodiff over a dynamically built op graph. Each op
/// materializes its output and records a closure that scatters the output
/// gradient back to its parents. One forward build + one backward sweep per
/// tape; broadcasting is limited to the trailing-suffix case the model needs.
template <typename T>
class Tape {
 public:
  struct Var {
    int id = -1;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Constant leaf; gradients are not tracked through it.
  Var input(Tensor<T> value);

  /// Differentiable leaf.
  Var param(Tensor<T> value);

  const Tensor<T>& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient accumulated by backward(); zeros if the node was never reached.
  const Tensor<T>& grad(Var v);
  const Shape& shape(Var v) const { return nodes_[v.id].value.shape(); }
  std::size_t node_count() const { return nodes_.size(); }

  // --- ops -----------------------------------------------------------------
  Var matmul(Var a, Var b);  // [m,k]x[k,n] -> [m,n]
  Var bmm(Var a, Var b);     // [B,m,k]x[B,k,n] -> [B,m,n]
  Var add(Var a, Var b);     // same shape
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  /// a[..., suffix] + p[suffix]; p's shape must be a trailing suffix of a's.
  Var add_bcast(Var a, Var p);
  Var scale(Var a, T factor);
  Var reshape(Var a, Shape shape);
  /// Materializing axis permutation; perm has `rank` entries.
  Var permute(Var a, std::array<int, 4> perm);
  /// Softmax along the last axis, max-subtracted. -inf inputs get weight 0.
  Var softmax(Var a);
  /// Normalize over the last axis to zero mean / unit variance, then affine.
  Var layer_norm(Var a, Var gain, Var bias, T eps = T(1e-5));
  Var gelu(Var a);  // exact erf form
  /// Training: zero with prob `rate`, scale survivors by 1/(1-rate).
  /// Inference (training=false) or rate==0: identity. rate >= 1 throws.
  Var dropout(Var a, T rate, RngStream& rng, bool training);
  Var mean_all(Var a);  // scalar, shape {1}
  Var sum_all(Var a);
  Var square(Var a);

  /// Seeds d(root)/d(root) = 1 (root must be scalar) and runs the reverse
  /// sweep. Call at most once per tape.
  void backward(Var root);

  /// Reverse sweep from `node` with an externally supplied gradient (the
  /// loss layer lives outside the tape).
  void backward_seed(Var node, Tensor<T> seed);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily, zero-filled
    std::function<void()> backprop;
    bool needs_grad = false;
  };

  Var emit(Tensor<T> value, bool needs_grad, std::function<void()> backprop);
  Tensor<T>& grad_buf(int id);
  void run_backward(int from);

  std::vector<Node> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace p2pi::numerics
