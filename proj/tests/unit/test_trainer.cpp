#include <gtest/gtest.h>

#include <cmath>

#include "mdeeg/error.hpp"
#include "mdeeg/trainer.hpp"

using namespace mdeeg;
using namespace mdeeg::train;
using ad::real_t;
using ad::Tensor;

namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.raw_channels = {4, 4, 4};
  c.raw_kernels = {9, 5, 3};
  c.topo_channels = {4, 4, 4};
  c.classifier_hidden = 4;
  c.dropout = 0.2;
  return c;
}

TrainConfig quick_train(std::size_t epochs = 4) {
  TrainConfig t;
  t.batch_size = 4;
  t.lr = 1e-2;
  t.epochs = epochs;
  t.seed = 5;
  return t;
}

const std::vector<features::SegmentFeatures>& rows() {
  static const std::vector<features::SegmentFeatures> r = [] {
    const auto segs = synth_generate(3, 6, 31);
    return features::extract_all(features::prepare_segments(recordings_from_segments(segs)).segments);
  }();
  return r;
}

std::vector<features::Sample> all_samples() {
  const auto norm = features::FeatureNormalizer::fit(rows(), std::vector<std::string>{"S01", "S02", "S03"});
  return features::make_samples(rows(), norm);
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRateAgainstGradient) {
  Tensor p({3}, {1.0f, -2.0f, 0.5f}, true);
  const std::vector<real_t> g = {0.3f, -4.0f, 1e-3f};
  for (std::size_t i = 0; i < 3; ++i) p.grad()[i] = g[i];
  Adam opt({{"p", p}});
  ASSERT_TRUE(opt.step(0.01));
  const std::vector<double> start = {1.0, -2.0, 0.5};
  for (std::size_t i = 0; i < 3; ++i) {
    // m_hat = g, v_hat = g^2 after one bias-corrected step.
    const double expected = start[i] - 0.01 * g[i] / (std::abs(double(g[i])) + 1e-8);
    EXPECT_NEAR(p[i], expected, 1e-6);
  }
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, MinimizesQuadraticBowl) {
  Tensor p({2}, {5.0f, -3.0f}, true);
  Adam opt({{"p", p}});
  for (int it = 0; it < 2000; ++it) {
    p.zero_grad();
    p.grad()[0] = 2.0f * (p[0] - 1.0f);
    p.grad()[1] = 2.0f * 4.0f * (p[1] + 2.0f);
    opt.step(0.05);
  }
  EXPECT_NEAR(p[0], 1.0, 1e-2);
  EXPECT_NEAR(p[1], -2.0, 1e-2);
}

TEST(Adam, NonFiniteGradientSkipsUpdate) {
  Tensor p({2}, {1.0f, 1.0f}, true);
  p.grad()[0] = NAN;
  Adam opt({{"p", p}});
  EXPECT_FALSE(opt.step(0.1));
  EXPECT_EQ(p[0], 1.0f);
  EXPECT_EQ(p[1], 1.0f);
  EXPECT_EQ(opt.skipped(), 1u);
  EXPECT_EQ(opt.steps(), 0u);
}

TEST(Scheduler, DecaysAfterPatienceOfFlatEpochs) {
  PlateauScheduler s(1e-3, 0.1, 10);
  for (int e = 0; e < 10; ++e) s.step(1.0);
  EXPECT_EQ(s.decays(), 0u);
  s.step(1.0);
  EXPECT_EQ(s.decays(), 1u);
  EXPECT_NEAR(s.lr(), 1e-4, 1e-15);
  for (int e = 0; e < 10; ++e) s.step(1.0);
  EXPECT_EQ(s.decays(), 2u);
  EXPECT_NEAR(s.lr(), 1e-5, 1e-16);
}

TEST(Scheduler, ImprovementResetsPatience) {
  PlateauScheduler s(1.0, 0.5, 3);
  double loss = 10.0;
  for (int e = 0; e < 50; ++e) s.step(loss -= 0.1);
  EXPECT_EQ(s.decays(), 0u);
  s.step(loss);
  s.step(loss * (1.0 - 1e-6));  // below the relative threshold
  s.step(loss);
  EXPECT_EQ(s.decays(), 1u);
  EXPECT_THROW(s.step(NAN), std::domain_error);
}

TEST(Metrics, ConfusionCounts) {
  const std::vector<int> truth = {1, 1, 1, 0, 0, 0, 0, 1};
  const std::vector<int> pred = {1, 0, 1, 0, 1, 0, 0, 1};
  const Metrics m = compute_metrics(truth, pred);
  EXPECT_EQ(m.confusion.tp, 3u);
  EXPECT_EQ(m.confusion.fn, 1u);
  EXPECT_EQ(m.confusion.fp, 1u);
  EXPECT_EQ(m.confusion.tn, 3u);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(m.f1, 0.75);
  EXPECT_DOUBLE_EQ(m.macro_f1, 0.75);

  const Metrics none = compute_metrics(std::vector<int>{0, 0, 1}, std::vector<int>{0, 0, 0});
  EXPECT_DOUBLE_EQ(none.f1, 0.0);
  EXPECT_DOUBLE_EQ(none.macro_f1, 0.5 * (0.0 + 0.8));
  EXPECT_THROW(compute_metrics(std::vector<int>{}, std::vector<int>{}), std::domain_error);
  EXPECT_THROW(compute_metrics(std::vector<int>{1}, std::vector<int>{1, 0}), std::domain_error);
}

TEST(Metrics, MeanStdAndFormatting) {
  const std::vector<double> v = {0.9, 0.8, 1.0};
  const MeanStd s = mean_std(v);
  EXPECT_NEAR(s.mean, 0.9, 1e-12);
  EXPECT_NEAR(s.stddev, std::sqrt(2.0 / 300.0), 1e-12);
  EXPECT_EQ(format_percent({0.9, 0.0816}), "90.00(8.16)");
}

TEST(FoldSeed, DependsOnlyOnRunSeedAndSubject) {
  EXPECT_EQ(fold_seed(3, "S01"), fold_seed(3, "S01"));
  EXPECT_NE(fold_seed(3, "S01"), fold_seed(3, "S02"));
  EXPECT_NE(fold_seed(3, "S01"), fold_seed(4, "S01"));
}

TEST(Train, LossDecreasesOnSeparableData) {
  const auto samples = all_samples();
  const auto fold = train_fold(samples, tiny_model(), quick_train(12));
  ASSERT_EQ(fold.log.size(), 12u);
  EXPECT_LT(fold.log.back().l_ce, fold.log.front().l_ce);
  for (const auto& e : fold.log) EXPECT_NEAR(e.l_total, e.l_ce + 0.4 * e.l_oc, 1e-9);
}

TEST(Train, IsBitReproducible) {
  const auto samples = all_samples();
  auto a = train_fold(samples, tiny_model(), quick_train());
  auto b = train_fold(samples, tiny_model(), quick_train());
  const auto ea = evaluate(a.model, samples), eb = evaluate(b.model, samples);
  EXPECT_EQ(ea.p_high, eb.p_high);
  for (std::size_t e = 0; e < a.log.size(); ++e) EXPECT_EQ(a.log[e].l_total, b.log[e].l_total);
}

TEST(Train, RejectsSingleClassTraining) {
  auto samples = all_samples();
  std::erase_if(samples, [](const features::Sample& s) { return s.label == 1; });
  EXPECT_THROW(train_fold(samples, tiny_model(), quick_train()), DataError);
  TrainConfig bad = quick_train();
  bad.batch_size = 1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Evaluate, KeepsEmbeddingsAndGates) {
  const auto samples = all_samples();
  auto fold = train_fold(samples, tiny_model(), quick_train(1));
  const auto ev = evaluate(fold.model, samples, true);
  ASSERT_EQ(ev.fused.size(), samples.size());
  ASSERT_EQ(ev.gates.size(), samples.size());
  EXPECT_EQ(ev.fused[0].size(), 4u);
  for (double p : ev.p_high) EXPECT_TRUE(p >= 0.0 && p <= 1.0);
  const double xcos = mean_cross_class_cosine(ev);
  EXPECT_GE(xcos, -1.0 - 1e-9);
  EXPECT_LE(xcos, 1.0 + 1e-9);
  EXPECT_THROW(evaluate(fold.model, std::span<const features::Sample>{}), std::domain_error);
}

TEST(Loso, OneFoldPerSubjectWithoutLeakage) {
  LosoOptions opt;
  opt.model = tiny_model();
  opt.train = quick_train(2);
  const LosoResult r = run_loso(rows(), opt);
  ASSERT_EQ(r.folds.size(), 3u);
  EXPECT_EQ(r.summary.folds_ok, 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& f = r.folds[i];
    EXPECT_EQ(f.subject, synth_subject_id(i));
    EXPECT_TRUE(f.ok) << f.error;
    EXPECT_EQ(f.n_test, 6u);
    EXPECT_EQ(f.n_train, 12u);
    EXPECT_EQ(f.seed, fold_seed(5, f.subject));
    ASSERT_TRUE(f.normalizer.has_value());
    EXPECT_FALSE(f.normalizer->was_fitted_on(f.subject));
    EXPECT_EQ(f.normalizer->fitted_subjects().size(), 2u);
  }
  std::vector<features::SegmentFeatures> one(rows().begin(), rows().begin() + 6);
  EXPECT_THROW(run_loso(one, opt), std::domain_error);
}
