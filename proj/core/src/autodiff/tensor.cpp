#include "mdeeg/autodiff/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace mdeeg::ad {
inline namespace MDEEG_AD_ABI {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, real_t fill, bool requires_grad) : data_(std::make_shared<TensorData>()) {
  data_->value.assign(ad::numel(shape), fill);
  data_->shape = std::move(shape);
  data_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<real_t> values, bool requires_grad) : data_(std::make_shared<TensorData>()) {
  if (values.size() != ad::numel(shape)) {
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) + " values for shape " + to_string(shape));
  }
  data_->shape = std::move(shape);
  data_->value = std::move(values);
  data_->requires_grad = requires_grad;
}

real_t Tensor::item() const {
  if (numel() != 1) throw std::domain_error("item() on tensor of shape " + to_string(shape()));
  return data_->value[0];
}

std::span<real_t> Tensor::grad() {
  data_->ensure_grad();
  return data_->grad;
}

std::span<const real_t> Tensor::grad() const {
  data_->ensure_grad();
  return data_->grad;
}

void Tensor::zero_grad() {
  if (!data_->grad.empty()) std::fill(data_->grad.begin(), data_->grad.end(), real_t(0));
}

Tensor Tensor::clone() const { return Tensor(data_->shape, data_->value, false); }

}  // namespace MDEEG_AD_ABI
}  // namespace mdeeg::ad
