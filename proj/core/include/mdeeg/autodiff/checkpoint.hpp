#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mdeeg/autodiff/tensor.hpp"

namespace mdeeg::ad {
inline namespace MDEEG_AD_ABI {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Parameter file layout:
///   MDEEG-CKPT 1
///   meta <key> <value>          (zero or more)
///   tensor <name> <rank> <dims...>   (one per tensor, in order)
///   end
/// followed by the float32 little-endian values of every tensor in the same order.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> tensors;
};

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt);
/// Throws mdeeg::DataError on a malformed or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& file);

/// Copies values into `targets` by position; names and shapes must match exactly
/// (mdeeg::DataError otherwise).
void restore_tensors(const Checkpoint& ckpt, std::span<const NamedTensor> targets);

}  // namespace MDEEG_AD_ABI
}  // namespace mdeeg::ad
