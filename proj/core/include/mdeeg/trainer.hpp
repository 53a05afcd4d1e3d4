#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdeeg/features.hpp"
#include "mdeeg/model.hpp"

namespace mdeeg::train {

using model::Model;
using model::ModelConfig;

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 1e-4;
  std::size_t epochs = 200;
  double beta = 0.4;
  double scheduler_factor = 0.1;
  std::size_t scheduler_patience = 10;
  double scheduler_threshold = 1e-4;
  bool pair_mean = false;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on non-positive sizes/rates or negative beta.
  void validate() const;
};

/// Bias-corrected Adam over a fixed parameter list.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit Adam(std::vector<ad::NamedTensor> params);

  /// Applies one update from the parameters' current gradients. If any gradient
  /// is non-finite nothing changes, the skip counter increments and false is returned.
  bool step(double lr);

  std::size_t steps() const { return steps_; }
  std::size_t skipped() const { return skipped_; }

 private:
  std::vector<ad::NamedTensor> params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t steps_ = 0;
  std::size_t skipped_ = 0;
};

/// Reduce-on-plateau for a minimized quantity: an epoch improves when
/// loss < best - |best| * threshold; after `patience` consecutive epochs without
/// improvement the rate is multiplied by `factor` and the counter restarts.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor = 0.1, std::size_t patience = 10, double threshold = 1e-4);

  /// Feeds one epoch's monitored loss and returns the rate for the next epoch.
  /// Throws std::domain_error on a non-finite loss.
  double step(double loss);

  double lr() const { return lr_; }
  std::size_t decays() const { return decays_; }
  std::size_t bad_epochs() const { return bad_epochs_; }

 private:
  double lr_, factor_, threshold_;
  std::size_t patience_;
  double best_;
  std::size_t bad_epochs_ = 0;
  std::size_t decays_ = 0;
};

struct Confusion {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t total() const { return tp + tn + fp + fn; }
};

struct Metrics {
  double accuracy = 0;
  double f1 = 0;        // positive class High
  double macro_f1 = 0;  // mean of the High and Low F1 scores
  Confusion confusion;
};

/// Labels: 1 High, 0 Low. Throws std::domain_error on empty or mismatched input.
Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double l_ce = 0, l_oc = 0, l_total = 0;  // means over the epoch's batches
  double lr = 0;                           // rate used during the epoch
  std::size_t skipped_steps = 0;
};

struct TrainedFold {
  Model model;
  std::vector<EpochLog> log;
};

/// Trains a fresh model. Throws mdeeg::DataError when the training set has a
/// single class or fewer than 2 samples, mdeeg::NumericalError when an epoch's loss is not finite.
TrainedFold train_fold(std::span<const features::Sample> train, const ModelConfig& model_config,
                       const TrainConfig& config);

struct Evaluation {
  Metrics metrics;
  std::vector<int> truth;
  std::vector<int> predicted;
  std::vector<double> p_high;             // softmax probability of High
  std::vector<std::vector<float>> fused;  // filled when requested
  std::vector<std::vector<float>> gates;  // filled when requested and the model has a gate
};

/// Eval-mode inference (running batch-norm stats, no dropout).
/// Throws std::domain_error on an empty test set.
Evaluation evaluate(Model& model, std::span<const features::Sample> test, bool keep_embeddings = false);

/// Mean of cos(E_i, E_k) over all cross-class pairs of fused embeddings.
double mean_cross_class_cosine(const Evaluation& eval);

struct FoldResult {
  std::string subject;
  bool ok = false;
  bool numerical_failure = false;  // training diverged rather than bad data
  std::string error;
  std::uint64_t seed = 0;
  std::size_t n_train = 0, n_test = 0;
  std::vector<EpochLog> log;
  Evaluation eval;
  std::optional<Model> model;
  std::optional<features::FeatureNormalizer> normalizer;
};

struct MeanStd {
  double mean = 0;
  double stddev = 0;  // population
};

/// Population mean/std; "mean(std)" in percent with two decimals.
MeanStd mean_std(std::span<const double> values);
std::string format_percent(const MeanStd& s);

struct LosoSummary {
  MeanStd accuracy, f1, macro_f1;
  std::size_t folds_ok = 0, folds_failed = 0;
  std::size_t folds_diverged = 0;  // subset of folds_failed
};

struct LosoResult {
  std::vector<FoldResult> folds;  // sorted by subject
  LosoSummary summary;
};

struct LosoOptions {
  ModelConfig model = ModelConfig::full();
  TrainConfig train;
  std::size_t jobs = 1;
  bool keep_embeddings = false;
};

/// Seed of a fold: derived from the run seed and the held-out subject only, so
/// results do not depend on scheduling.
std::uint64_t fold_seed(std::uint64_t run_seed, const std::string& subject);

/// One fold per subject: normalizer fitted on the training subjects, model
/// trained on them, evaluated on the held-out subject. A failing fold is
/// recorded and the others continue. Throws std::domain_error for < 2 subjects.
LosoResult run_loso(std::span<const features::SegmentFeatures> rows, const LosoOptions& options);

LosoSummary summarize(std::span<const FoldResult> folds);

}  // namespace mdeeg::train
