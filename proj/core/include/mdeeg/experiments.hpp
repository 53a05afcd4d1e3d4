#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mdeeg/config.hpp"
#include "mdeeg/features.hpp"
#include "mdeeg/trainer.hpp"

// Experiment drivers shared by the CLI and the acceptance tests. Every driver
// writes plain JSON/TSV without timestamps so identical inputs give identical files.
namespace mdeeg::exp {

namespace fs = std::filesystem;

/// Filtered, labeled segments for a config: generated when `synthetic` is set,
/// read from `data` otherwise.
features::PreparedSegments load_segments(const RunConfig& config);

struct RunArtifacts {
  fs::path dir;  // <out>/<run-id>
  train::LosoResult result;
};

/// Full LOSO run. Writes config.txt, fold_<subject>.json, fold_<subject>.ckpt,
/// fold_<subject>.norm, summary.json and summary.tsv under <out_root>/<run-id>.
RunArtifacts cmd_run(const RunConfig& config, const fs::path& out_root);

struct SweepRow {
  std::string name;
  RunConfig config;
  std::string run_id;
  train::LosoSummary summary;
};

/// The six module-ablation configurations: full, without L_OC, without attention,
/// without both, raw stream only, topography stream only. Writes ablation.tsv.
std::vector<SweepRow> cmd_ablation_suite(const RunConfig& base, const fs::path& out_root);

/// beta in `betas` crossed with attention on/off, all with the base seed. Writes beta_sweep.tsv.
std::vector<SweepRow> cmd_beta_sweep(const RunConfig& base, const fs::path& out_root,
                                     const std::vector<double>& betas = {0.4, 0.7, 1.0});

struct FoldMetricsRow {
  std::string unit;     // noise fraction, channel or band name
  std::string subject;
  train::Metrics metrics;
  std::vector<double> p_high;
};

/// Loads the config of a finished run directory.
RunConfig load_run_config(const fs::path& run_dir);

/// Evaluates every fold checkpoint on its test subject with Gaussian noise of
/// each fraction (plus the clean fraction 0) added to the filtered signal before
/// feature extraction. Writes robustness.tsv in the run directory.
std::vector<FoldMetricsRow> cmd_robustness(const fs::path& run_dir,
                                           const std::vector<double>& fractions = {0.1, 0.3, 0.5, 0.7});

enum class ImportanceAxis { Channel, Band };
ImportanceAxis parse_axis(const std::string& s);  // mdeeg::UsageError on unknown names

/// Mask keeping exactly one unit of the axis. Throws std::invalid_argument unless
/// exactly one entry of `keep` is set (4 entries for channels, 5 for bands).
features::Mask keep_mask(ImportanceAxis axis, const std::vector<bool>& keep);

/// Evaluates each fold with all but one channel (or band) zero-masked, once per
/// unit. Writes importance_<axis>.tsv in the run directory.
std::vector<FoldMetricsRow> cmd_importance(const fs::path& run_dir, ImportanceAxis axis);

/// Per test sample: subject, window, label, mean gate, then the gate vector.
/// Writes attention.tsv in the run directory and returns the row count.
std::size_t cmd_attention_export(const fs::path& run_dir);

/// Mean and population std per unit across subjects, as "mean(std)" percentages.
std::string unit_summary_tsv(const std::vector<FoldMetricsRow>& rows, bool macro_f1 = false);

}  // namespace mdeeg::exp
