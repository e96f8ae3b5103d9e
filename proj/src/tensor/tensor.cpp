#include "acmf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace acmf {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {
  if (shape_.size() > 4) throw ShapeError("tensor rank " + std::to_string(shape_.size()) + " exceeds 4");
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.size() > 4) throw ShapeError("tensor rank " + std::to_string(shape_.size()) + " exceeds 4");
  if (numel(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + to_string(shape_) + " needs " + std::to_string(numel(shape_)) +
                     " values, got " + std::to_string(data_.size()));
  }
}

template <typename T>
std::size_t Tensor<T>::offset4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  if (shape_.size() != 4) throw ShapeError("4-axis access on tensor " + to_string(shape_));
  return ((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
}

template <typename T>
T& Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  return data_[offset4(n, c, h, w)];
}

template <typename T>
const T& Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  return data_[offset4(n, c, h, w)];
}

template <typename T>
T Tensor<T>::item() const {
  if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + to_string(shape_));
  return data_[0];
}

template <typename T>
bool Tensor<T>::all_finite() const {
  // v - v is 0 exactly when v is finite; the integer reduction vectorizes.
  int ok = 1;
  for (const T v : data_) ok &= static_cast<int>(v - v == T(0));
  return ok != 0;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

template class Tensor<float>;
template class Tensor<double>;
template double max_abs_diff(const Tensor<float>&, const Tensor<float>&);
template double max_abs_diff(const Tensor<double>&, const Tensor<double>&);

}  // namespace acmf
