#include "p2pi/numerics/tape.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>

namespace p2pi::numerics {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

template <typename T>
using MatMap =
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// c (+)= op_a(a) * op_b(b); dims are those of the *effective* operands.
template <typename T>
void gemm(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n,
          bool trans_a, bool trans_b, bool accumulate) {
  ConstMatMap<T> ma(a, trans_a ? k : m, trans_a ? m : k);
  ConstMatMap<T> mb(b, trans_b ? n : k, trans_b ? k : n);
  MatMap<T> mc(c, m, n);
  if (trans_a && trans_b) {
    if (accumulate)
      mc.noalias() += ma.transpose() * mb.transpose();
    else
      mc.noalias() = ma.transpose() * mb.transpose();
  } else if (trans_a) {
    if (accumulate)
      mc.noalias() += ma.transpose() * mb;
    else
      mc.noalias() = ma.transpose() * mb;
  } else if (trans_b) {
    if (accumulate)
      mc.noalias() += ma * mb.transpose();
    else
      mc.noalias() = ma * mb.transpose();
  } else {
    if (accumulate)
      mc.noalias() += ma * mb;
    else
      mc.noalias() = ma * mb;
  }
}

// Strides of a row-major shape.
std::array<std::int64_t, 4> strides_of(const Shape& s) {
  std::array<std::int64_t, 4> st{{0, 0, 0, 0}};
  std::int64_t acc = 1;
  for (int i = s.rank() - 1; i >= 0; --i) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

}  // namespace

template <typename T>
typename Tape<T>::Var Tape<T>::input(Tensor<T> value) {
  return emit(std::move(value), false, nullptr);
}

template <typename T>
typename Tape<T>::Var Tape<T>::param(Tensor<T> value) {
  return emit(std::move(value), true, nullptr);
}

template <typename T>
typename Tape<T>::Var Tape<T>::emit(Tensor<T> value, bool needs_grad,
                                    std::function<void()> backprop) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Tensor<T>& Tape<T>::grad_buf(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>::zeros(n.value.shape());
  return n.grad;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) {
  return grad_buf(v.id);
}

template <typename T>
typename Tape<T>::Var Tape<T>::matmul(Var a, Var b) {
  const Tensor<T>& va = nodes_[a.id].value;
  const Tensor<T>& vb = nodes_[b.id].value;
  if (va.shape().rank() != 2 || vb.shape().rank() != 2 || va.shape()[1] != vb.shape()[0]) {
    throw ShapeError("matmul shapes " + va.shape().str() + " x " + vb.shape().str());
  }
  const std::int64_t m = va.shape()[0], k = va.shape()[1], n = vb.shape()[1];
  Tensor<T> out({m, n});
  gemm(va.data(), vb.data(), out.data(), m, k, n, false, false, false);
  const bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, b, self, m, k, n]() {
    const Tensor<T>& dc = grad_buf(self.id);
    if (nodes_[a.id].needs_grad) {
      gemm(dc.data(), nodes_[b.id].value.data(), grad_buf(a.id).data(), m, n, k, false,
           true, true);  // dA += dC * B^T
    }
    if (nodes_[b.id].needs_grad) {
      gemm(nodes_[a.id].value.data(), dc.data(), grad_buf(b.id).data(), k, m, n, true,
           false, true);  // dB += A^T * dC
    }
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::bmm(Var a, Var b) {
  const Tensor<T>& va = nodes_[a.id].value;
  const Tensor<T>& vb = nodes_[b.id].value;
  if (va.shape().rank() != 3 || vb.shape().rank() != 3 || va.shape()[0] != vb.shape()[0] ||
      va.shape()[2] != vb.shape()[1]) {
    throw ShapeError("bmm shapes " + va.shape().str() + " x " + vb.shape().str());
  }
  const std::int64_t batch = va.shape()[0], m = va.shape()[1], k = va.shape()[2],
                     n = vb.shape()[2];
  Tensor<T> out({batch, m, n});
  for (std::int64_t i = 0; i < batch; ++i) {
    gemm(va.data() + i * m * k, vb.data() + i * k * n, out.data() + i * m * n, m, k, n,
         false, false, false);
  }
  const bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, b, self, batch, m, k, n]() {
    const Tensor<T>& dc = grad_buf(self.id);
    for (std::int64_t i = 0; i < batch; ++i) {
      if (nodes_[a.id].needs_grad) {
        gemm(dc.data() + i * m * n, nodes_[b.id].value.data() + i * k * n,
             grad_buf(a.id).data() + i * m * k, m, n, k, false, true, true);
      }
      if (nodes_[b.id].needs_grad) {
        gemm(nodes_[a.id].value.data() + i * m * k, dc.data() + i * m * n,
             grad_buf(b.id).data() + i * k * n, k, m, n, true, false, true);
      }
    }
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::add(Var a, Var b) {
  const Tensor<T>& va = nodes_[a.id].value;
  const Tensor<T>& vb = nodes_[b.id].value;
  if (va.shape() != vb.shape()) {
    throw ShapeError("add shapes " + va.shape().str() + " vs " + vb.shape().str());
  }
  Tensor<T> out(va.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  const bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, b, self]() {
    const Tensor<T>& dc = grad_buf(self.id);
    for (Var p : {a, b}) {
      if (!nodes_[p.id].needs_grad) continue;
      Tensor<T>& dp = grad_buf(p.id);
      for (std::int64_t i = 0; i < dc.size(); ++i) dp[i] += dc[i];
    }
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::sub(Var a, Var b) {
  const Tensor<T>& va = nodes_[a.id].value;
  const Tensor<T>& vb = nodes_[b.id].value;
  if (va.shape() != vb.shape()) {
    throw ShapeError("sub shapes " + va.shape().str() + " vs " + vb.shape().str());
  }
  Tensor<T> out(va.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
  const bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, b, self]() {
    const Tensor<T>& dc = grad_buf(self.id);
    if (nodes_[a.id].needs_grad) {
      Tensor<T>& da = grad_buf(a.id);
      for (std::int64_t i = 0; i < dc.size(); ++i) da[i] += dc[i];
    }
    if (nodes_[b.id].needs_grad) {
      Tensor<T>& db = grad_buf(b.id);
      for (std::int64_t i = 0; i < dc.size(); ++i) db[i] -= dc[i];
    }
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::mul(Var a, Var b) {
  const Tensor<T>& va = nodes_[a.id].value;
  const Tensor<T>& vb = nodes_[b.id].value;
  if (va.shape() != vb.shape()) {
    throw ShapeError("mul shapes " + va.shape().str() + " vs " + vb.shape().str());
  }
  Tensor<T> out(va.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  const bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, b, self]() {
    const Tensor<T>& dc = grad_buf(self.id);
    if (nodes_[a.id].needs_grad) {
      Tensor<T>& da = grad_buf(a.id);
      const Tensor<T>& vb2 = nodes_[b.id].value;
      for (std::int64_t i = 0; i < dc.size(); ++i) da[i] += dc[i] * vb2[i];
    }
    if (nodes_[b.id].needs_grad) {
      Tensor<T>& db = grad_buf(b.id);
      const Tensor<T>& va2 = nodes_[a.id].value;
      for (std::int64_t i = 0; i < dc.size(); ++i) db[i] += dc[i] * va2[i];
    }
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::add_bcast(Var a, Var p) {
  const Tensor<T>& va = nodes_[a.id].value;
  const Tensor<T>& vp = nodes_[p.id].value;
  const int ra = va.shape().rank(), rp = vp.shape().rank();
  if (rp >= ra) throw ShapeError("add_bcast needs a lower-rank second operand");
  for (int i = 0; i < rp; ++i) {
    if (vp.shape()[i] != va.shape()[ra - rp + i]) {
      throw ShapeError("add_bcast: " + vp.shape().str() + " is not a suffix of " +
                       va.shape().str());
    }
  }
  const std::int64_t inner = vp.shape().numel();
  const std::int64_t outer = va.shape().numel() / inner;
  Tensor<T> out(va.shape());
  for (std::int64_t o = 0; o < outer; ++o) {
    const T* src = va.data() + o * inner;
    T* dst = out.data() + o * inner;
    for (std::int64_t i = 0; i < inner; ++i) dst[i] = src[i] + vp[i];
  }
  const bool ng = nodes_[a.id].needs_grad || nodes_[p.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, p, self, outer, inner]() {
    const Tensor<T>& dc = grad_buf(self.id);
    if (nodes_[a.id].needs_grad) {
      Tensor<T>& da = grad_buf(a.id);
      for (std::int64_t i = 0; i < dc.size(); ++i) da[i] += dc[i];
    }
    if (nodes_[p.id].needs_grad) {
      Tensor<T>& dp = grad_buf(p.id);
      for (std::int64_t o = 0; o < outer; ++o) {
        const T* src = dc.data() + o * inner;
        for (std::int64_t i = 0; i < inner; ++i) dp[i] += src[i];
      }
    }
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::scale(Var a, T factor) {
  const Tensor<T>& va = nodes_[a.id].value;
  Tensor<T> out(va.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = va[i] * factor;
  const bool ng = nodes_[a.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, self, factor]() {
    if (!nodes_[a.id].needs_grad) return;
    const Tensor<T>& dc = grad_buf(self.id);
    Tensor<T>& da = grad_buf(a.id);
    for (std::int64_t i = 0; i < dc.size(); ++i) da[i] += dc[i] * factor;
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::reshape(Var a, Shape shape) {
  const Tensor<T>& va = nodes_[a.id].value;
  Tensor<T> out = va.reshaped(shape);
  const bool ng = nodes_[a.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, self]() {
    if (!nodes_[a.id].needs_grad) return;
    const Tensor<T>& dc = grad_buf(self.id);
    Tensor<T>& da = grad_buf(a.id);
    for (std::int64_t i = 0; i < dc.size(); ++i) da[i] += dc[i];
  });
}

namespace {

template <typename T>
Tensor<T> permute_copy(const Tensor<T>& in, const std::array<int, 4>& perm) {
  const Shape& s = in.shape();
  const int rank = s.rank();
  std::array<std::int64_t, 4> od{{1, 1, 1, 1}};
  for (int i = 0; i < rank; ++i) od[i] = s[perm[i]];
  Shape out_shape;
  switch (rank) {
    case 2:
      out_shape = {od[0], od[1]};
      break;
    case 3:
      out_shape = {od[0], od[1], od[2]};
      break;
    case 4:
      out_shape = {od[0], od[1], od[2], od[3]};
      break;
    default:
      throw ShapeError("permute supports rank 2..4");
  }
  Tensor<T> out(out_shape);
  const auto in_strides = strides_of(s);
  std::array<std::int64_t, 4> idx{{0, 0, 0, 0}};
  const std::int64_t n = in.size();
  for (std::int64_t flat = 0; flat < n; ++flat) {
    // idx enumerates the *output* index space.
    std::int64_t src = 0;
    for (int i = 0; i < rank; ++i) src += idx[i] * in_strides[perm[i]];
    out[flat] = in[src];
    for (int i = rank - 1; i >= 0; --i) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

}  // namespace

template <typename T>
typename Tape<T>::Var Tape<T>::permute(Var a, std::array<int, 4> perm) {
  const Tensor<T>& va = nodes_[a.id].value;
  const int rank = va.shape().rank();
  Tensor<T> out = permute_copy(va, perm);
  std::array<int, 4> inv{{0, 0, 0, 0}};
  for (int i = 0; i < rank; ++i) inv[perm[i]] = i;
  const bool ng = nodes_[a.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, self, inv]() {
    if (!nodes_[a.id].needs_grad) return;
    Tensor<T> da_inc = permute_copy(grad_buf(self.id), inv);
    Tensor<T>& da = grad_buf(a.id);
    for (std::int64_t i = 0; i < da.size(); ++i) da[i] += da_inc[i];
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::softmax(Var a) {
  const Tensor<T>& va = nodes_[a.id].value;
  const int rank = va.shape().rank();
  if (rank < 1) throw ShapeError("softmax needs rank >= 1");
  const std::int64_t width = va.shape()[rank - 1];
  const std::int64_t rows = va.size() / width;
  Tensor<T> out(va.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* x = va.data() + r * width;
    T* y = out.data() + r * width;
    T mx = x[0];
    for (std::int64_t i = 1; i < width; ++i) mx = std::max(mx, x[i]);
    T sum = 0;
    for (std::int64_t i = 0; i < width; ++i) {
      // exp(-inf - mx) handled: -inf input stays 0 weight.
      y[i] = std::exp(x[i] - mx);
      sum += y[i];
    }
    const T inv = T(1) / sum;
    for (std::int64_t i = 0; i < width; ++i) y[i] *= inv;
  }
  const bool ng = nodes_[a.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, self, rows, width]() {
    if (!nodes_[a.id].needs_grad) return;
    const Tensor<T>& y = nodes_[self.id].value;
    const Tensor<T>& dy = grad_buf(self.id);
    Tensor<T>& dx = grad_buf(a.id);
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* yr = y.data() + r * width;
      const T* dyr = dy.data() + r * width;
      T* dxr = dx.data() + r * width;
      T dot = 0;
      for (std::int64_t i = 0; i < width; ++i) dot += dyr[i] * yr[i];
      for (std::int64_t i = 0; i < width; ++i) dxr[i] += yr[i] * (dyr[i] - dot);
    }
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::layer_norm(Var a, Var gain, Var bias, T eps) {
  const Tensor<T>& va = nodes_[a.id].value;
  const Tensor<T>& vg = nodes_[gain.id].value;
  const Tensor<T>& vb = nodes_[bias.id].value;
  const int rank = va.shape().rank();
  const std::int64_t width = va.shape()[rank - 1];
  if (vg.shape().rank() != 1 || vg.shape()[0] != width || vb.shape() != vg.shape()) {
    throw ShapeError("layer_norm affine shapes must be [width]");
  }
  const std::int64_t rows = va.size() / width;
  Tensor<T> out(va.shape());
  Tensor<T> xhat(va.shape());
  Tensor<T> inv_std({rows});
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* x = va.data() + r * width;
    T mean = 0;
    for (std::int64_t i = 0; i < width; ++i) mean += x[i];
    mean /= static_cast<T>(width);
    T var = 0;
    for (std::int64_t i = 0; i < width; ++i) {
      const T d = x[i] - mean;
      var += d * d;
    }
    var /= static_cast<T>(width);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    T* xh = xhat.data() + r * width;
    T* y = out.data() + r * width;
    for (std::int64_t i = 0; i < width; ++i) {
      xh[i] = (x[i] - mean) * is;
      y[i] = vg[i] * xh[i] + vb[i];
    }
  }
  const bool ng =
      nodes_[a.id].needs_grad || nodes_[gain.id].needs_grad || nodes_[bias.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng,
              [this, a, gain, bias, self, rows, width, xhat = std::move(xhat),
               inv_std = std::move(inv_std)]() {
                const Tensor<T>& dy = grad_buf(self.id);
                const Tensor<T>& vg = nodes_[gain.id].value;
                if (nodes_[gain.id].needs_grad) {
                  Tensor<T>& dg = grad_buf(gain.id);
                  for (std::int64_t r = 0; r < rows; ++r) {
                    const T* dyr = dy.data() + r * width;
                    const T* xh = xhat.data() + r * width;
                    for (std::int64_t i = 0; i < width; ++i) dg[i] += dyr[i] * xh[i];
                  }
                }
                if (nodes_[bias.id].needs_grad) {
                  Tensor<T>& db = grad_buf(bias.id);
                  for (std::int64_t r = 0; r < rows; ++r) {
                    const T* dyr = dy.data() + r * width;
                    for (std::int64_t i = 0; i < width; ++i) db[i] += dyr[i];
                  }
                }
                if (nodes_[a.id].needs_grad) {
                  Tensor<T>& dx = grad_buf(a.id);
                  for (std::int64_t r = 0; r < rows; ++r) {
                    const T* dyr = dy.data() + r * width;
                    const T* xh = xhat.data() + r * width;
                    T* dxr = dx.data() + r * width;
                    T sum_g = 0, sum_gx = 0;
                    for (std::int64_t i = 0; i < width; ++i) {
                      const T g = vg[i] * dyr[i];
                      sum_g += g;
                      sum_gx += g * xh[i];
                    }
                    const T mean_g = sum_g / static_cast<T>(width);
                    const T mean_gx = sum_gx / static_cast<T>(width);
                    const T is = inv_std[r];
                    for (std::int64_t i = 0; i < width; ++i) {
                      const T g = vg[i] * dyr[i];
                      dxr[i] += is * (g - mean_g - xh[i] * mean_gx);
                    }
                  }
                }
              });
}

template <typename T>
typename Tape<T>::Var Tape<T>::gelu(Var a) {
  const Tensor<T>& va = nodes_[a.id].value;
  Tensor<T> out(va.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) {
    const double x = static_cast<double>(va[i]);
    out[i] = static_cast<T>(0.5 * x * (1.0 + std::erf(x * kInvSqrt2)));
  }
  const bool ng = nodes_[a.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, self]() {
    if (!nodes_[a.id].needs_grad) return;
    const Tensor<T>& dc = grad_buf(self.id);
    const Tensor<T>& va2 = nodes_[a.id].value;
    Tensor<T>& da = grad_buf(a.id);
    for (std::int64_t i = 0; i < dc.size(); ++i) {
      const double x = static_cast<double>(va2[i]);
      const double d =
          0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      da[i] += dc[i] * static_cast<T>(d);
    }
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::dropout(Var a, T rate, RngStream& rng, bool training) {
  if (rate < T(0) || rate >= T(1)) throw ParameterError("dropout rate must be in [0,1)");
  if (!training || rate == T(0)) return a;
  const Tensor<T>& va = nodes_[a.id].value;
  Tensor<T> mask(va.shape());
  const T keep_scale = T(1) / (T(1) - rate);
  for (std::int64_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng.uniform() < static_cast<double>(rate) ? T(0) : keep_scale;
  }
  Tensor<T> out(va.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = va[i] * mask[i];
  const bool ng = nodes_[a.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, self, mask = std::move(mask)]() {
    if (!nodes_[a.id].needs_grad) return;
    const Tensor<T>& dc = grad_buf(self.id);
    Tensor<T>& da = grad_buf(a.id);
    for (std::int64_t i = 0; i < dc.size(); ++i) da[i] += dc[i] * mask[i];
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::mean_all(Var a) {
  const Tensor<T>& va = nodes_[a.id].value;
  const std::int64_t n = va.size();
  T sum = 0;
  for (std::int64_t i = 0; i < n; ++i) sum += va[i];
  Tensor<T> out({1});
  out[0] = sum / static_cast<T>(n);
  const bool ng = nodes_[a.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, self, n]() {
    if (!nodes_[a.id].needs_grad) return;
    const T g = grad_buf(self.id)[0] / static_cast<T>(n);
    Tensor<T>& da = grad_buf(a.id);
    for (std::int64_t i = 0; i < n; ++i) da[i] += g;
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::sum_all(Var a) {
  const Tensor<T>& va = nodes_[a.id].value;
  const std::int64_t n = va.size();
  T sum = 0;
  for (std::int64_t i = 0; i < n; ++i) sum += va[i];
  Tensor<T> out({1});
  out[0] = sum;
  const bool ng = nodes_[a.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, self, n]() {
    if (!nodes_[a.id].needs_grad) return;
    const T g = grad_buf(self.id)[0];
    Tensor<T>& da = grad_buf(a.id);
    for (std::int64_t i = 0; i < n; ++i) da[i] += g;
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::square(Var a) {
  const Tensor<T>& va = nodes_[a.id].value;
  Tensor<T> out(va.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = va[i] * va[i];
  const bool ng = nodes_[a.id].needs_grad;
  Var self{static_cast<int>(nodes_.size())};
  return emit(std::move(out), ng, [this, a, self]() {
    if (!nodes_[a.id].needs_grad) return;
    const Tensor<T>& dc = grad_buf(self.id);
    const Tensor<T>& va2 = nodes_[a.id].value;
    Tensor<T>& da = grad_buf(a.id);
    for (std::int64_t i = 0; i < dc.size(); ++i) da[i] += T(2) * va2[i] * dc[i];
  });
}

template <typename T>
void Tape<T>::backward(Var root) {
  if (nodes_[root.id].value.size() != 1) {
    throw ShapeError("backward root must be scalar");
  }
  Tensor<T> seed({1});
  seed[0] = T(1);
  backward_seed(root, std::move(seed));
}

template <typename T>
void Tape<T>::backward_seed(Var node, Tensor<T> seed) {
  if (seed.shape() != nodes_[node.id].value.shape()) {
    throw ShapeError("backward seed shape mismatch");
  }
  Tensor<T>& g = grad_buf(node.id);
  for (std::int64_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  run_backward(node.id);
}

template <typename T>
void Tape<T>::run_backward(int from) {
  for (int i = from; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.backprop && !n.grad.empty()) n.backprop();
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace p2pi::numerics
