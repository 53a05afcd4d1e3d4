#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mdeeg/autodiff/tensor.hpp"

namespace mdeeg::ad {
inline namespace MDEEG_AD_ABI {

/// Tape of op records in creation (topological) order. Ops append a backward
/// closure when recording is on and any input requires a gradient. A Graph is
/// confined to one thread.
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  void record(std::vector<std::shared_ptr<TensorData>> outputs, std::function<void()> backward);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded rule once in reverse order.
  /// Intermediate gradients are reset first; leaf gradients accumulate across calls.
  /// Throws std::domain_error when loss is not a scalar.
  void backward(const Tensor& loss);

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::vector<std::shared_ptr<TensorData>> outputs;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
  bool recording_;
};

}  // namespace MDEEG_AD_ABI
}  // namespace mdeeg::ad
