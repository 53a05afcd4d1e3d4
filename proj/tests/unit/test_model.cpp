#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "mdeeg/error.hpp"
#include "mdeeg/model.hpp"

using namespace mdeeg;
using namespace mdeeg::model;

namespace {

Tensor random_tensor(ad::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<real_t> v(n);
  for (auto& x : v) x = static_cast<real_t>(u(rng));
  return Tensor(std::move(shape), std::move(v));
}

double loc(const std::vector<real_t>& rows, std::size_t m, std::vector<int> labels, bool pair_mean = false) {
  Graph g(false);
  return orthogonality_loss(g, Tensor({labels.size(), m}, rows), labels, pair_mean).loss.item();
}

// Independent pairwise-cosine evaluation of the orthogonality loss.
double loc_oracle(const Tensor& e, const std::vector<int>& labels, bool pair_mean) {
  const std::size_t n = e.dim(0), m = e.dim(1);
  double same = 0, cross = 0;
  int ns = 0, nc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = 0, a = 0, b = 0;
      for (std::size_t k = 0; k < m; ++k) {
        d += double(e[i * m + k]) * e[j * m + k];
        a += double(e[i * m + k]) * e[i * m + k];
        b += double(e[j * m + k]) * e[j * m + k];
      }
      const double c = d / std::sqrt(a * b);
      if (labels[i] == labels[j]) same += c, ++ns;
      else cross += c, ++nc;
    }
  }
  if (pair_mean) {
    if (ns) same /= ns;
    if (nc) cross /= nc;
  }
  return 1.0 - same + cross;
}

}  // namespace

TEST(Model, ForwardShapes) {
  for (Fusion f : {Fusion::Attention, Fusion::Concat, Fusion::RawOnly, Fusion::TopoOnly}) {
    ModelConfig cfg = ModelConfig::desk();
    cfg.fusion = f;
    Model m(cfg, 3);
    Graph g(false);
    const Tensor raw = random_tensor({2, 4, 256}, 1), topo = random_tensor({2, 15, 32, 32}, 2, 0.0, 1.0);
    const auto out = m.forward(g, cfg.uses_raw() ? raw : Tensor(), cfg.uses_topo() ? topo : Tensor(), Mode::Eval, 0);
    EXPECT_EQ(out.fused.shape(), (ad::Shape{2, 32})) << to_string(f);
    EXPECT_EQ(out.logits.shape(), (ad::Shape{2, 2}));
    EXPECT_EQ(out.gate.defined(), f == Fusion::Attention);
    if (cfg.uses_raw()) {
      EXPECT_EQ(out.e_time.shape(), (ad::Shape{2, 32}));
    }
    if (cfg.uses_topo()) {
      EXPECT_EQ(out.e_freq.shape(), (ad::Shape{2, 32}));
    }
  }
}

TEST(Model, ShortRawInputIsRejected) {
  const ModelConfig cfg = ModelConfig::desk();
  EXPECT_EQ(cfg.min_raw_length(), 186u);
  Model m(cfg, 0);
  Graph g(false);
  EXPECT_NO_THROW(m.encode_raw(g, random_tensor({2, 4, 186}, 1), Mode::Eval));
  EXPECT_THROW(m.encode_raw(g, random_tensor({2, 4, 185}, 1), Mode::Eval), std::domain_error);
  EXPECT_THROW(m.encode_topo(g, random_tensor({2, 14, 32, 32}, 1), Mode::Eval), std::domain_error);
}

TEST(Model, ConfigValidationAndNames) {
  ModelConfig bad = ModelConfig::desk();
  bad.topo_channels[2] = 16;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_THROW(parse_fusion("sum"), std::invalid_argument);
  for (Fusion f : {Fusion::Attention, Fusion::Concat, Fusion::RawOnly, Fusion::TopoOnly}) {
    EXPECT_EQ(parse_fusion(to_string(f)), f);
  }
  EXPECT_EQ(ModelConfig::from_meta(ModelConfig::desk().to_meta()), ModelConfig::desk());
}

TEST(OrthogonalityLoss, CrossPairClosedForms) {
  EXPECT_NEAR(loc({1, 0, 0, 1}, 2, {0, 1}), 1.0, 1e-6);
  EXPECT_NEAR(loc({1, 2, 1, 2}, 2, {0, 1}), 2.0, 1e-6);
  EXPECT_NEAR(loc({1, 2, -1, -2}, 2, {0, 1}), 0.0, 1e-6);
  EXPECT_NEAR(loc({1, 2, 3, 6}, 2, {1, 1}), 0.0, 1e-6);
}

TEST(OrthogonalityLoss, MatchesPairwiseOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor e = random_tensor({6, 5}, seed);
    std::vector<int> labels = {0, 1, 1, 0, int(seed % 2), 1};
    for (bool pm : {false, true}) {
      Graph g(false);
      EXPECT_NEAR(orthogonality_loss(g, e, labels, pm).loss.item(), loc_oracle(e, labels, pm), 1e-5);
    }
  }
}

TEST(OrthogonalityLoss, InvariantToEmbeddingScale) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor e = random_tensor({5, 8}, seed);
    const std::vector<int> labels = {0, 1, 0, 1, 1};
    Graph g(false);
    const double base = orthogonality_loss(g, e, labels).loss.item();
    for (double lambda : {0.1, 10.0}) {
      EXPECT_NEAR(orthogonality_loss(g, ad::scale(g, e, lambda), labels).loss.item(), base, 1e-5);
    }
  }
}

TEST(OrthogonalityLoss, ZeroRowsAreExcluded) {
  Graph g(false);
  const auto r = orthogonality_loss(g, Tensor({3, 2}, {1, 0, 0, 0, 0, 1}), std::vector<int>{0, 1, 1});
  EXPECT_EQ(r.excluded_rows, 1u);
  EXPECT_NEAR(r.loss.item(), 1.0, 1e-6);
  EXPECT_THROW(orthogonality_loss(g, Tensor({1, 2}, {1, 0}), std::vector<int>{0}), std::domain_error);
}

TEST(Loss, TotalCombinesTerms) {
  const LossTerms t = total_loss(0.7, 1.5, 0.4);
  EXPECT_NEAR(t.l_total, 0.7 + 0.4 * 1.5, 1e-12);
  EXPECT_THROW(total_loss(0.7, 1.5, -0.1), std::domain_error);
}

TEST(Fusion, GateExtremesSelectOneStream) {
  Model m(ModelConfig::desk(), 1);
  const Tensor et = random_tensor({3, 32}, 4, 0.0, 3.0), ef = random_tensor({3, 32}, 5, 0.0, 3.0);
  Graph g(false);
  const Tensor all_freq = m.fuse_with_gate(g, et, ef, 1.0), all_time = m.fuse_with_gate(g, et, ef, 0.0);
  for (std::size_t i = 0; i < et.numel(); ++i) {
    EXPECT_NEAR(all_freq[i], std::tanh(double(ef[i])), 1e-6);
    EXPECT_NEAR(all_time[i], std::tanh(double(et[i])), 1e-6);
  }
  const Tensor gate({3, 32}, real_t(0.25));
  const Tensor mix = gate_fuse(g, gate, et, ef);
  for (std::size_t i = 0; i < et.numel(); ++i) {
    EXPECT_NEAR(mix[i], 0.25 * std::tanh(double(ef[i])) + 0.75 * std::tanh(double(et[i])), 1e-6);
  }
}

TEST(Fusion, AttentionGateInUnitInterval) {
  Model m(ModelConfig::desk(), 2);
  const Tensor et = random_tensor({4, 32}, 6, 0.0, 3.0), ef = random_tensor({4, 32}, 7, 0.0, 3.0);
  Graph g(false);
  const auto f = m.fuse(g, et, ef);
  for (std::size_t i = 0; i < f.gate.numel(); ++i) {
    EXPECT_GT(f.gate[i], 0.0f);
    EXPECT_LT(f.gate[i], 1.0f);
  }
}

TEST(Model, SeedDeterminesInitialization) {
  Model a(ModelConfig::desk(), 11), b(ModelConfig::desk(), 11), c(ModelConfig::desk(), 12);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  EXPECT_EQ(a.parameter_count(), b.parameter_count());
  bool differs = false;
  for (std::size_t t = 0; t < pa.size(); ++t) {
    for (std::size_t i = 0; i < pa[t].tensor.numel(); ++i) {
      ASSERT_EQ(pa[t].tensor[i], pb[t].tensor[i]);
      differs |= pa[t].tensor[i] != pc[t].tensor[i];
    }
  }
  EXPECT_TRUE(differs);
}

TEST(Model, SaveLoadReproducesLogits) {
  Model m(ModelConfig::desk(), 5);
  const Tensor raw = random_tensor({2, 4, 256}, 8), topo = random_tensor({2, 15, 32, 32}, 9, 0.0, 1.0);
  {
    Graph g(false);
    m.forward(g, raw, topo, Mode::Train, 1);  // moves the running statistics
  }
  const auto file = std::filesystem::temp_directory_path() / "mdeeg_model_roundtrip.ckpt";
  m.save(file);
  Model back = Model::load(file);
  EXPECT_EQ(back.config(), m.config());
  Graph g(false);
  const Tensor a = m.forward(g, raw, topo, Mode::Eval, 0).logits, b = back.forward(g, raw, topo, Mode::Eval, 0).logits;
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a[i], b[i]);
  std::filesystem::remove(file);
}
