#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mdeeg/dsp.hpp"
#include "mdeeg/features.hpp"
#include "mdeeg/model.hpp"
#include "mdeeg/trainer.hpp"

namespace mdeeg {

/// Everything a command needs to reproduce a run. Serialized as `key=value`
/// lines; `#` starts a comment. Parsing rejects unknown keys and malformed values
/// with mdeeg::UsageError.
struct RunConfig {
  std::string data;  // dataset root (one directory per subject); empty with synthetic
  bool synthetic = false;
  std::size_t subjects = 6;
  std::size_t segments = 40;

  std::string model = "full";  // full | desk
  std::size_t batch_size = 32;
  double lr = 1e-4;
  std::size_t epochs = 200;
  double beta = 0.4;
  double scheduler_factor = 0.1;
  std::size_t scheduler_patience = 10;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;  // scheduling only; excluded from the run id

  features::FeatureKind features = features::FeatureKind::Psd;
  bool no_oc = false;
  bool no_attention = false;
  bool raw_only = false;
  bool topo_only = false;
  bool zero_phase = false;
  bool linear_power = false;
  bool pair_mean = false;
  bool macro_f1 = false;

  /// Applies one `key=value` assignment.
  void set(const std::string& key, const std::string& value);
  /// Parses a whole file body on top of the current values.
  void parse(const std::string& text);
  static RunConfig from_file(const std::string& path);

  /// Throws mdeeg::UsageError on inconsistent settings (e.g. raw_only with topo_only).
  void validate() const;

  /// Canonical `key=value` text of every setting, in a fixed order.
  std::string to_text() const;
  /// Hex digest of the settings that affect results (everything but jobs).
  std::string run_id() const;

  model::Fusion fusion() const;
  /// beta after the ablation flags: 0 with no_oc or a single stream.
  double effective_beta() const;
  model::ModelConfig model_config() const;
  train::TrainConfig train_config() const;
  features::FeatureOptions feature_options() const;
  dsp::FilterMode filter_mode() const { return zero_phase ? dsp::FilterMode::ZeroPhase : dsp::FilterMode::Causal; }

  static const std::vector<std::string>& keys();
};

}  // namespace mdeeg
