#include <gtest/gtest.h>

#include "gradcheck.hpp"

namespace {

constexpr std::uint64_t kInstances = 20;

class GradCheck : public ::testing::TestWithParam<gradcheck::Case> {};

TEST_P(GradCheck, MatchesCentralDifferences) {
  const auto& c = GetParam();
  for (std::uint64_t seed = 1; seed <= kInstances; ++seed) {
    const auto r = c.run(seed);
    EXPECT_GT(r.entries, 0u);
    EXPECT_LT(r.max_rel, c.tolerance) << c.name << " instance " << seed;
  }
}

std::string case_name(const ::testing::TestParamInfo<gradcheck::Case>& info) { return info.param.name; }

INSTANTIATE_TEST_SUITE_P(Ops, GradCheck, ::testing::ValuesIn(gradcheck::op_cases()), case_name);
INSTANTIATE_TEST_SUITE_P(Composed, GradCheck, ::testing::ValuesIn(gradcheck::composed_cases()), case_name);

TEST(GradCheckHarness, DetectsAWrongGradient) {
  // A function whose recorded gradient is deliberately off: x * x computed as
  // mul(x, detached copy of x) yields half the true derivative.
  gradcheck::Rng rng(3);
  gradcheck::Tensor x = gradcheck::uniform({3}, rng, 0.5, 1.0);
  const auto r = gradcheck::check(
      [&](gradcheck::Graph& g) { return mdeeg::ad::sum(g, mdeeg::ad::mul(g, x, x.clone())); }, {x});
  EXPECT_GT(r.max_rel, 0.4);
}

}  // namespace
