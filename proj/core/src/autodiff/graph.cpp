#include "mdeeg/autodiff/graph.hpp"

#include <algorithm>
#include <stdexcept>

namespace mdeeg::ad {
inline namespace MDEEG_AD_ABI {

void Graph::record(std::vector<std::shared_ptr<TensorData>> outputs, std::function<void()> backward) {
  for (auto& o : outputs) {
    o->is_leaf = false;
    o->requires_grad = true;
  }
  nodes_.push_back({std::move(outputs), std::move(backward)});
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::domain_error("backward: loss must be a scalar, got shape " +
                            (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) throw std::domain_error("backward: loss does not depend on any tracked tensor");

  for (auto& node : nodes_) {
    for (auto& o : node.outputs) {
      o->ensure_grad();
      std::fill(o->grad.begin(), o->grad.end(), real_t(0));
    }
  }
  loss.impl()->ensure_grad();
  loss.impl()->grad[0] += real_t(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
}

}  // namespace MDEEG_AD_ABI
}  // namespace mdeeg::ad
