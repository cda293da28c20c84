#include "p2pi/numerics/tensor.hpp"

#include <cmath>
#include <sstream>

namespace p2pi::numerics {

Shape::Shape(std::initializer_list<std::int64_t> dims) {
  if (dims.size() > 4) throw ShapeError("tensors support at most 4 axes");
  rank_ = static_cast<int>(dims.size());
  int i = 0;
  for (auto d : dims) {
    if (d < 0) throw ShapeError("negative dimension");
    dims_[i++] = d;
  }
}

std::int64_t Shape::numel() const {
  std::int64_t n = 1;
  for (int i = 0; i < rank_; ++i) n *= dims_[i];
  return n;
}

bool Shape::operator==(const Shape& o) const {
  if (rank_ != o.rank_) return false;
  for (int i = 0; i < rank_; ++i) {
    if (dims_[i] != o.dims_[i]) return false;
  }
  return true;
}

std::string Shape::str() const {
  std::ostringstream out;
  out << "[";
  for (int i = 0; i < rank_; ++i) out << (i ? "," : "") << dims_[i];
  out << "]";
  return out.str();
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (const T& v : data_) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace p2pi::numerics
