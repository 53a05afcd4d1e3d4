#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(MDEEG_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) {
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "mdeeg_cli_test";
    fs::remove_all(root_);
    const Result r = run("--seed 1 --out " + root_.string() +
                         " run --synthetic --subjects 2 --segments 4 --model desk --epochs 1 --batch-size 4");
    ASSERT_EQ(r.code, 0) << r.out;
    for (const auto& e : fs::directory_iterator(root_)) run_dir_ = e.path();
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static inline fs::path root_, run_dir_;
};

}  // namespace

TEST_F(Cli, RunWritesArtifacts) {
  for (const char* f : {"config.txt", "summary.json", "summary.tsv", "fold_S01.json", "fold_S01.ckpt", "fold_S02.norm"}) {
    EXPECT_TRUE(fs::exists(run_dir_ / f)) << f;
  }
  EXPECT_NE(slurp(run_dir_ / "config.txt").find("seed=1"), std::string::npos);
}

TEST_F(Cli, RobustnessHasCleanRowPlusFractions) {
  const Result r = run("robustness --run " + run_dir_.string());
  ASSERT_EQ(r.code, 0);
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 1u + 5u);
  EXPECT_EQ(rows[1].substr(0, 4), "0.00");
  EXPECT_EQ(lines(slurp(run_dir_ / "robustness.tsv")).size(), 1u + 5u * 2u);
}

TEST_F(Cli, ImportanceHasOneRowPerUnit) {
  const Result ch = run("importance --run " + run_dir_.string() + " --axis channel");
  ASSERT_EQ(ch.code, 0);
  EXPECT_EQ(lines(ch.out).size(), 1u + 4u);
  const Result band = run("importance --run " + run_dir_.string() + " --axis band");
  ASSERT_EQ(band.code, 0);
  EXPECT_EQ(lines(band.out).size(), 1u + 5u);
  EXPECT_EQ(run("importance --run " + run_dir_.string() + " --axis lobe").code, 2);
}

TEST_F(Cli, AttentionExportHasOneRowPerTestSample) {
  ASSERT_EQ(run("attention-export --run " + run_dir_.string()).code, 0);
  const auto rows = lines(slurp(run_dir_ / "attention.tsv"));
  ASSERT_EQ(rows.size(), 1u + 8u);
  EXPECT_EQ(rows[0].substr(0, 24), "subject\twindow\tlabel\tmea");
}

TEST(CliExit, UsageErrors) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("bogus").code, 2);
  EXPECT_EQ(run("run --synthetic --raw-only --topo-only").code, 2);
  EXPECT_EQ(run("run --synthetic --set learning_rate=1").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(CliExit, DataErrors) {
  EXPECT_EQ(run("run --data /nonexistent/mdeeg").code, 3);
  EXPECT_EQ(run("robustness --run /nonexistent/mdeeg").code, 3);
}

TEST(CliExit, DivergenceIsNumerical) {
  const fs::path out = fs::temp_directory_path() / "mdeeg_cli_diverge";
  EXPECT_EQ(run("--out " + out.string() +
                " run --synthetic --subjects 2 --segments 4 --model desk --epochs 2 --batch-size 4 --lr 1e30")
                .code,
            4);
  fs::remove_all(out);
}

TEST(CliExit, SynthThenRunFromDisk) {
  const fs::path data = fs::temp_directory_path() / "mdeeg_cli_synth";
  const fs::path out = fs::temp_directory_path() / "mdeeg_cli_synth_out";
  fs::remove_all(data);
  ASSERT_EQ(run("--out " + data.string() + " synth --subjects 2 --segments 4").code, 0);
  EXPECT_TRUE(fs::exists(data / "S01"));
  EXPECT_EQ(run("--out " + out.string() + " run --data " + data.string() +
                " --model desk --epochs 1 --batch-size 4").code,
            0);
  fs::remove_all(data);
  fs::remove_all(out);
}
