#include <gtest/gtest.h>

#include "mdeeg/config.hpp"
#include "mdeeg/error.hpp"

using namespace mdeeg;

TEST(RunConfig, UnknownKeyAndBadValuesAreUsageErrors) {
  RunConfig c;
  EXPECT_THROW(c.set("learning_rate", "0.1"), UsageError);
  EXPECT_THROW(c.set("model", "huge"), UsageError);
  EXPECT_THROW(c.set("epochs", "ten"), UsageError);
  EXPECT_THROW(c.set("no_oc", "maybe"), UsageError);
  EXPECT_THROW(c.set("features", "wavelet"), UsageError);
  EXPECT_THROW(c.parse("epochs 10\n"), UsageError);
}

TEST(RunConfig, TextRoundTrip) {
  RunConfig c;
  c.parse("# comment\nsynthetic=true\nsubjects=3  # inline\nlr=0.00123\nbeta = 0.7\nno_attention=true\nfeatures=de\n");
  EXPECT_TRUE(c.synthetic);
  EXPECT_EQ(c.subjects, 3u);
  EXPECT_DOUBLE_EQ(c.beta, 0.7);
  RunConfig back;
  back.parse(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.run_id(), c.run_id());
  EXPECT_DOUBLE_EQ(back.lr, 0.00123);
  for (const auto& key : RunConfig::keys()) EXPECT_NE(c.to_text().find(key + "="), std::string::npos) << key;
}

TEST(RunConfig, RunIdIgnoresJobsOnly) {
  RunConfig a;
  a.synthetic = true;
  RunConfig b = a;
  b.jobs = 4;
  EXPECT_EQ(a.run_id(), b.run_id());
  b.seed = 1;
  EXPECT_NE(a.run_id(), b.run_id());
}

TEST(RunConfig, AblationFlagsMapToModelAndLoss) {
  RunConfig c;
  c.synthetic = true;
  EXPECT_EQ(c.fusion(), model::Fusion::Attention);
  EXPECT_DOUBLE_EQ(c.effective_beta(), 0.4);
  c.no_oc = true;
  EXPECT_DOUBLE_EQ(c.effective_beta(), 0.0);
  c.no_oc = false;
  c.no_attention = true;
  EXPECT_EQ(c.model_config().fusion, model::Fusion::Concat);
  c.raw_only = true;
  EXPECT_EQ(c.fusion(), model::Fusion::RawOnly);
  EXPECT_DOUBLE_EQ(c.train_config().beta, 0.0);
  c.topo_only = true;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(RunConfig, ValidateRequiresADataSource) {
  RunConfig c;
  EXPECT_THROW(c.validate(), UsageError);
  c.data = "/some/where";
  EXPECT_NO_THROW(c.validate());
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), UsageError);
}
