#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mdeeg/autodiff/checkpoint.hpp"
#include "mdeeg/autodiff/ops.hpp"

namespace mdeeg::model {
inline namespace MDEEG_AD_ABI {

using ad::Graph;
using ad::Mode;
using ad::real_t;
using ad::Shape;
using ad::Tensor;

/// How the two domain embeddings are combined.
enum class Fusion {
  Attention,  // sigmoid gate blending tanh(E_freq) and tanh(E_time)
  Concat,     // [E_time, E_freq] -> FC(2M -> M)
  RawOnly,    // tanh(E_time); no topography encoder
  TopoOnly,   // tanh(E_freq); no raw encoder
};

std::string to_string(Fusion f);
Fusion parse_fusion(const std::string& s);  // std::invalid_argument on unknown names

struct ModelConfig {
  std::size_t raw_inputs = 4;
  std::array<std::size_t, 3> raw_channels{64, 128, 256};
  std::array<std::size_t, 3> raw_kernels{32, 16, 8};
  std::size_t topo_inputs = 15;
  std::array<std::size_t, 3> topo_channels{64, 128, 256};
  std::size_t topo_kernel = 3;
  std::size_t classifier_hidden = 128;
  double dropout = 0.5;
  Fusion fusion = Fusion::Attention;

  /// Full-width network: 64/128/256 channels, 256-dim embeddings, 128-unit head.
  static ModelConfig full();
  /// Same topology with 8/16/32 channels (32-dim embeddings, 16-unit head), sized
  /// for single-core training runs.
  static ModelConfig desk();

  /// Embedding width M; both encoders end in M channels.
  std::size_t embedding() const { return raw_channels[2]; }
  bool uses_raw() const { return fusion != Fusion::TopoOnly; }
  bool uses_topo() const { return fusion != Fusion::RawOnly; }
  /// Shortest raw input the kernel chain accepts.
  std::size_t min_raw_length() const;
  /// Throws std::invalid_argument when the widths are inconsistent.
  void validate() const;

  std::map<std::string, std::string> to_meta() const;
  static ModelConfig from_meta(const std::map<std::string, std::string>& meta);
  bool operator==(const ModelConfig&) const = default;
};

/// Blends two embeddings with a per-dimension gate: a * tanh(e_freq) + (1 - a) * tanh(e_time).
Tensor gate_fuse(Graph& g, const Tensor& gate, const Tensor& e_time, const Tensor& e_freq);

struct OrthogonalityLoss {
  Tensor loss;                   // scalar
  std::size_t excluded_rows = 0; // vectors with norm <= 1e-12, whose pairs were dropped
};

/// 1 - sum over same-class pairs i<j of cos(E_i, E_j) + sum over cross-class pairs of cos(E_i, E_k).
/// With pair_mean each sum is divided by its pair count. Throws std::domain_error for N < 2.
OrthogonalityLoss orthogonality_loss(Graph& g, const Tensor& fused, std::span<const int> labels,
                                     bool pair_mean = false);

struct LossTerms {
  double l_ce = 0;
  double l_oc = 0;
  double beta = 0;
  double l_total = 0;
};

/// l_total = l_ce + beta * l_oc. Throws std::domain_error for negative beta.
LossTerms total_loss(double l_ce, double l_oc, double beta);

class Model {
 public:
  explicit Model(ModelConfig config, std::uint64_t seed = 0);
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;  // tensors are shared handles; copies would alias
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }

  /// Trainable tensors in registration order.
  std::vector<ad::NamedTensor> parameters() const;
  /// Trainable tensors followed by batch-norm running statistics.
  std::vector<ad::NamedTensor> state() const;
  std::size_t parameter_count() const;

  /// [N, 4, L] -> [N, M]. std::domain_error when L is too short for the kernels.
  Tensor encode_raw(Graph& g, const Tensor& x, Mode mode);
  /// [N, 15, H, W] -> [N, M]. std::domain_error on a wrong plane count.
  Tensor encode_topo(Graph& g, const Tensor& x, Mode mode);

  struct Fused {
    Tensor fused;  // [N, M]
    Tensor gate;   // [N, M]; undefined unless fusion is Attention
  };
  /// Fusion per config; the unused embedding may be undefined for single-stream models.
  Fused fuse(Graph& g, const Tensor& e_time, const Tensor& e_freq);
  /// Attention fusion with the gate replaced by a constant.
  Tensor fuse_with_gate(Graph& g, const Tensor& e_time, const Tensor& e_freq, double gate);

  /// [N, M] -> logits [N, 2].
  Tensor classify(Graph& g, const Tensor& fused, Mode mode, std::uint64_t dropout_seed);

  struct Output {
    Tensor e_time, e_freq, fused, gate, logits;
  };
  /// Full forward pass. Streams the config does not use may be passed undefined.
  Output forward(Graph& g, const Tensor& raw, const Tensor& topo, Mode mode, std::uint64_t dropout_seed);

  void save(const std::filesystem::path& file) const;
  static Model load(const std::filesystem::path& file);

 private:
  struct ConvBlock {
    std::array<Tensor, 2> kernel, gamma, beta;
    std::array<ad::BatchNormStats, 2> stats;
  };
  struct Dense {
    Tensor w, b;
  };

  Tensor run_block(Graph& g, const Tensor& x, ConvBlock& block, Mode mode, bool two_d);
  void register_param(const std::string& name, Tensor t);

  ModelConfig config_;
  std::vector<ConvBlock> raw_blocks_, topo_blocks_;
  Dense att1_, att2_, concat_, cls1_, cls2_;
  std::vector<ad::NamedTensor> params_;
  std::vector<ad::NamedTensor> buffers_;
};

}  // namespace MDEEG_AD_ABI
}  // namespace mdeeg::model
