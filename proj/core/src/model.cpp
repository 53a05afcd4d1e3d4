#include "mdeeg/model.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mdeeg/error.hpp"
#include "mdeeg/rng.hpp"

namespace mdeeg::model {
inline namespace MDEEG_AD_ABI {
namespace {

std::string join(const std::array<std::size_t, 3>& v) {
  return std::to_string(v[0]) + "," + std::to_string(v[1]) + "," + std::to_string(v[2]);
}

std::array<std::size_t, 3> split3(const std::string& s) {
  std::array<std::size_t, 3> out{};
  std::istringstream is(s);
  char comma = 0;
  if (!(is >> out[0] >> comma >> out[1] >> comma >> out[2])) throw DataError("bad width list '" + s + "'");
  return out;
}

const std::string& meta_at(const std::map<std::string, std::string>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("checkpoint meta missing '" + key + "'");
  return it->second;
}

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t(std::move(shape));
  for (real_t& v : t.data()) v = static_cast<real_t>(u(rng));
  t.set_requires_grad(true);
  return t;
}

Tensor filled(std::size_t n, real_t v) { return Tensor({n}, v, true); }

}  // namespace

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::Attention: return "attention";
    case Fusion::Concat: return "concat";
    case Fusion::RawOnly: return "raw_only";
    case Fusion::TopoOnly: return "topo_only";
  }
  return "?";
}

Fusion parse_fusion(const std::string& s) {
  for (Fusion f : {Fusion::Attention, Fusion::Concat, Fusion::RawOnly, Fusion::TopoOnly}) {
    if (to_string(f) == s) return f;
  }
  throw std::invalid_argument("unknown fusion '" + s + "'");
}

ModelConfig ModelConfig::full() { return ModelConfig{}; }

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.raw_channels = {8, 16, 32};
  c.topo_channels = {8, 16, 32};
  c.classifier_hidden = 16;
  return c;
}

std::size_t ModelConfig::min_raw_length() const {
  // Work backwards from a pooled length of 1 at the end of the last block.
  std::size_t len = 1;
  for (std::size_t b = 3; b-- > 0;) len = 2 * len + 2 * (raw_kernels[b] - 1);
  return len;
}

void ModelConfig::validate() const {
  auto positive = [](const std::array<std::size_t, 3>& a) { return a[0] && a[1] && a[2]; };
  if (!raw_inputs || !topo_inputs || !classifier_hidden || !positive(raw_channels) || !positive(topo_channels) ||
      !positive(raw_kernels)) {
    throw std::invalid_argument("model config: widths and kernels must be positive");
  }
  if (topo_kernel % 2 == 0) throw std::invalid_argument("model config: topography kernel must be odd");
  if (raw_channels[2] != topo_channels[2]) {
    throw std::invalid_argument("model config: both encoders must end in the same embedding width");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("model config: dropout must be in [0, 1)");
}

std::map<std::string, std::string> ModelConfig::to_meta() const {
  std::ostringstream dp;
  dp.precision(17);
  dp << dropout;
  return {{"raw_inputs", std::to_string(raw_inputs)},
          {"raw_channels", join(raw_channels)},
          {"raw_kernels", join(raw_kernels)},
          {"topo_inputs", std::to_string(topo_inputs)},
          {"topo_channels", join(topo_channels)},
          {"topo_kernel", std::to_string(topo_kernel)},
          {"classifier_hidden", std::to_string(classifier_hidden)},
          {"dropout", dp.str()},
          {"fusion", to_string(fusion)}};
}

ModelConfig ModelConfig::from_meta(const std::map<std::string, std::string>& meta) {
  ModelConfig c;
  try {
    c.raw_inputs = std::stoul(meta_at(meta, "raw_inputs"));
    c.raw_channels = split3(meta_at(meta, "raw_channels"));
    c.raw_kernels = split3(meta_at(meta, "raw_kernels"));
    c.topo_inputs = std::stoul(meta_at(meta, "topo_inputs"));
    c.topo_channels = split3(meta_at(meta, "topo_channels"));
    c.topo_kernel = std::stoul(meta_at(meta, "topo_kernel"));
    c.classifier_hidden = std::stoul(meta_at(meta, "classifier_hidden"));
    c.dropout = std::stod(meta_at(meta, "dropout"));
    c.fusion = parse_fusion(meta_at(meta, "fusion"));
    c.validate();
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("checkpoint meta: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------

Tensor gate_fuse(Graph& g, const Tensor& gate, const Tensor& e_time, const Tensor& e_freq) {
  Tensor tf = ad::tanh(g, e_freq);
  Tensor tt = ad::tanh(g, e_time);
  return ad::add(g, ad::mul(g, gate, tf), ad::mul(g, ad::one_minus(g, gate), tt));
}

OrthogonalityLoss orthogonality_loss(Graph& g, const Tensor& fused, std::span<const int> labels, bool pair_mean) {
  if (fused.rank() != 2) throw std::invalid_argument("orthogonality_loss: expected [N, M]");
  const std::size_t n = fused.dim(0), m = fused.dim(1);
  if (n < 2) throw std::domain_error("orthogonality_loss: needs at least 2 vectors");
  if (labels.size() != n) throw std::invalid_argument("orthogonality_loss: label count does not match batch");

  constexpr double kNormFloor = 1e-12;
  std::vector<bool> usable(n);
  OrthogonalityLoss out;
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (std::size_t k = 0; k < m; ++k) ss += static_cast<double>(fused[i * m + k]) * fused[i * m + k];
    usable[i] = std::sqrt(ss) > kNormFloor;
    if (!usable[i]) ++out.excluded_rows;
  }

  std::size_t same = 0, cross = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!usable[i] || !usable[j]) continue;
      (labels[i] == labels[j] ? same : cross) += 1;
    }
  }
  const double w_same = pair_mean && same ? 1.0 / static_cast<double>(same) : 1.0;
  const double w_cross = pair_mean && cross ? 1.0 / static_cast<double>(cross) : 1.0;

  std::vector<real_t> weights(n * n, real_t(0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!usable[i] || !usable[j]) continue;
      weights[i * n + j] = static_cast<real_t>(labels[i] == labels[j] ? -w_same : w_cross);
    }
  }
  Tensor cosines = ad::gram(g, ad::l2_normalize_rows(g, fused, kNormFloor));
  out.loss = ad::add_constant(g, ad::weighted_sum(g, cosines, weights), 1.0);
  return out;
}

LossTerms total_loss(double l_ce, double l_oc, double beta) {
  if (!(beta >= 0.0)) throw std::domain_error("total_loss: beta must be >= 0");
  return {l_ce, l_oc, beta, l_ce + beta * l_oc};
}

// ---------------------------------------------------------------------------

void Model::register_param(const std::string& name, Tensor t) { params_.push_back({name, std::move(t)}); }

Model::Model(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(derive_seed(seed, {hash_string("model-init")}));
  const std::size_t m = config_.embedding();

  auto make_blocks = [&](const std::string& prefix, std::size_t inputs, const std::array<std::size_t, 3>& widths,
                         auto kernel_shape, std::vector<ConvBlock>& blocks) {
    std::size_t cin = inputs;
    for (std::size_t b = 0; b < 3; ++b) {
      ConvBlock blk;
      for (std::size_t l = 0; l < 2; ++l) {
        const std::string base = prefix + ".b" + std::to_string(b + 1) + "." + std::to_string(l + 1);
        const std::size_t in = l == 0 ? cin : widths[b];
        Shape shape = kernel_shape(widths[b], in, b);
        const std::size_t fan_in = ad::numel(shape) / widths[b];
        blk.kernel[l] = kaiming_uniform(shape, fan_in, rng);
        blk.gamma[l] = filled(widths[b], real_t(1));
        blk.beta[l] = filled(widths[b], real_t(0));
        blk.stats[l] = ad::BatchNormStats(widths[b]);
        register_param(base + ".conv", blk.kernel[l]);
        register_param(base + ".bn_gamma", blk.gamma[l]);
        register_param(base + ".bn_beta", blk.beta[l]);
        buffers_.push_back({base + ".bn_mean", blk.stats[l].running_mean});
        buffers_.push_back({base + ".bn_var", blk.stats[l].running_var});
      }
      blocks.push_back(std::move(blk));
      cin = widths[b];
    }
  };
  auto make_dense = [&](const std::string& name, std::size_t in, std::size_t out) {
    Dense d{kaiming_uniform({in, out}, in, rng), filled(out, real_t(0))};
    register_param(name + ".w", d.w);
    register_param(name + ".b", d.b);
    return d;
  };

  if (config_.uses_raw()) {
    make_blocks(
        "raw", config_.raw_inputs, config_.raw_channels,
        [&](std::size_t out, std::size_t in, std::size_t b) { return Shape{out, in, config_.raw_kernels[b]}; },
        raw_blocks_);
  }
  if (config_.uses_topo()) {
    const std::size_t k = config_.topo_kernel;
    make_blocks(
        "topo", config_.topo_inputs, config_.topo_channels,
        [&](std::size_t out, std::size_t in, std::size_t) { return Shape{out, in, k, k}; }, topo_blocks_);
  }
  if (config_.fusion == Fusion::Attention) {
    att1_ = make_dense("att.fc1", 2 * m, m);
    att2_ = make_dense("att.fc2", m, m);
  } else if (config_.fusion == Fusion::Concat) {
    concat_ = make_dense("concat.fc", 2 * m, m);
  }
  cls1_ = make_dense("cls.fc1", m, config_.classifier_hidden);
  cls2_ = make_dense("cls.fc2", config_.classifier_hidden, 2);
}

std::vector<ad::NamedTensor> Model::parameters() const { return params_; }

std::vector<ad::NamedTensor> Model::state() const {
  std::vector<ad::NamedTensor> all = params_;
  all.insert(all.end(), buffers_.begin(), buffers_.end());
  return all;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

Tensor Model::run_block(Graph& g, const Tensor& x, ConvBlock& block, Mode mode, bool two_d) {
  Tensor h = x;
  for (std::size_t l = 0; l < 2; ++l) {
    h = two_d ? ad::conv2d_same(g, h, block.kernel[l]) : ad::conv1d(g, h, block.kernel[l]);
    h = ad::batchnorm(g, h, block.gamma[l], block.beta[l], block.stats[l], mode);
    h = ad::relu(g, h);
  }
  return two_d ? ad::maxpool2d(g, h) : ad::maxpool1d(g, h);
}

Tensor Model::encode_raw(Graph& g, const Tensor& x, Mode mode) {
  if (!config_.uses_raw()) throw std::logic_error("encode_raw: model has no raw encoder");
  if (x.rank() != 3 || x.dim(1) != config_.raw_inputs) {
    throw std::domain_error("encode_raw: expected [N, " + std::to_string(config_.raw_inputs) + ", L], got " +
                            ad::to_string(x.shape()));
  }
  if (x.dim(2) < config_.min_raw_length()) {
    throw std::domain_error("encode_raw: input length " + std::to_string(x.dim(2)) + " shorter than " +
                            std::to_string(config_.min_raw_length()));
  }
  Tensor h = x;
  for (auto& blk : raw_blocks_) h = run_block(g, h, blk, mode, false);
  return ad::global_avg_pool(g, h);
}

Tensor Model::encode_topo(Graph& g, const Tensor& x, Mode mode) {
  if (!config_.uses_topo()) throw std::logic_error("encode_topo: model has no topography encoder");
  if (x.rank() != 4 || x.dim(1) != config_.topo_inputs) {
    throw std::domain_error("encode_topo: expected [N, " + std::to_string(config_.topo_inputs) +
                            ", H, W], got " + ad::to_string(x.shape()));
  }
  Tensor h = x;
  for (auto& blk : topo_blocks_) h = run_block(g, h, blk, mode, true);
  return ad::global_avg_pool(g, h);
}

Model::Fused Model::fuse(Graph& g, const Tensor& e_time, const Tensor& e_freq) {
  switch (config_.fusion) {
    case Fusion::Attention: {
      Tensor joint = ad::concat_columns(g, e_time, e_freq);
      Tensor h = ad::relu(g, ad::fc(g, joint, att1_.w, att1_.b));
      Tensor gate = ad::sigmoid(g, ad::fc(g, h, att2_.w, att2_.b));
      return {gate_fuse(g, gate, e_time, e_freq), gate};
    }
    case Fusion::Concat:
      return {ad::fc(g, ad::concat_columns(g, e_time, e_freq), concat_.w, concat_.b), Tensor()};
    case Fusion::RawOnly:
      return {ad::tanh(g, e_time), Tensor()};
    case Fusion::TopoOnly:
      return {ad::tanh(g, e_freq), Tensor()};
  }
  throw std::logic_error("fuse: unknown fusion");
}

Tensor Model::fuse_with_gate(Graph& g, const Tensor& e_time, const Tensor& e_freq, double gate) {
  if (e_time.shape() != e_freq.shape()) throw std::invalid_argument("fuse_with_gate: embedding shapes differ");
  return gate_fuse(g, Tensor(e_time.shape(), static_cast<real_t>(gate)), e_time, e_freq);
}

Tensor Model::classify(Graph& g, const Tensor& fused, Mode mode, std::uint64_t dropout_seed) {
  Tensor h = ad::relu(g, ad::fc(g, fused, cls1_.w, cls1_.b));
  h = ad::dropout(g, h, config_.dropout, mode, dropout_seed);
  return ad::fc(g, h, cls2_.w, cls2_.b);
}

Model::Output Model::forward(Graph& g, const Tensor& raw, const Tensor& topo, Mode mode,
                             std::uint64_t dropout_seed) {
  Output out;
  if (config_.uses_raw()) out.e_time = encode_raw(g, raw, mode);
  if (config_.uses_topo()) out.e_freq = encode_topo(g, topo, mode);
  if (out.e_time.defined() && out.e_freq.defined() && out.e_time.dim(0) != out.e_freq.dim(0)) {
    throw std::invalid_argument("forward: raw and topography batches differ in size");
  }
  Fused f = fuse(g, out.e_time, out.e_freq);
  out.fused = f.fused;
  out.gate = f.gate;
  out.logits = classify(g, out.fused, mode, dropout_seed);
  return out;
}

void Model::save(const std::filesystem::path& file) const {
  ad::Checkpoint ckpt;
  ckpt.meta = config_.to_meta();
  ckpt.tensors = state();
  ad::save_checkpoint(file, ckpt);
}

Model Model::load(const std::filesystem::path& file) {
  ad::Checkpoint ckpt = ad::load_checkpoint(file);
  Model m(ModelConfig::from_meta(ckpt.meta));
  ad::restore_tensors(ckpt, m.state());
  return m;
}

}  // namespace MDEEG_AD_ABI
}  // namespace mdeeg::model
