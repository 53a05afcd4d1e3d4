#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mdeeg/autodiff/real.hpp"

namespace mdeeg::ad {
inline namespace MDEEG_AD_ABI {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct TensorData {
  Shape shape;
  std::vector<real_t> value;
  std::vector<real_t> grad;  // empty until first needed
  bool requires_grad = false;
  bool is_leaf = true;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), real_t(0));
  }
};

/// Shared handle to a dense row-major array plus its gradient. Copies alias.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, real_t fill = 0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<real_t> values, bool requires_grad = false);

  static Tensor scalar(real_t v, bool requires_grad = false) { return Tensor({1}, {v}, requires_grad); }

  bool defined() const { return static_cast<bool>(data_); }
  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t dim(std::size_t i) const { return data_->shape.at(i); }
  std::size_t numel() const { return data_->value.size(); }

  std::span<real_t> data() { return data_->value; }
  std::span<const real_t> data() const { return data_->value; }
  real_t& operator[](std::size_t i) { return data_->value[i]; }
  real_t operator[](std::size_t i) const { return data_->value[i]; }
  real_t item() const;

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool on) { data_->requires_grad = on; }
  bool is_leaf() const { return data_->is_leaf; }
  bool has_grad() const { return data_->grad.size() == data_->value.size() && !data_->value.empty(); }
  /// Gradient view; allocates zeros on first access.
  std::span<real_t> grad();
  std::span<const real_t> grad() const;
  void zero_grad();

  /// Deep copy of the values, detached from any graph.
  Tensor clone() const;

  const std::shared_ptr<TensorData>& impl() const { return data_; }
  explicit Tensor(std::shared_ptr<TensorData> data) : data_(std::move(data)) {}

 private:
  std::shared_ptr<TensorData> data_;
};

}  // namespace MDEEG_AD_ABI
}  // namespace mdeeg::ad
