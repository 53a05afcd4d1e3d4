#include "mdeeg/experiments.hpp"

#include <bit>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"
#include "mdeeg/error.hpp"
#include "mdeeg/io.hpp"
#include "mdeeg/rng.hpp"

#ifndef MDEEG_VERSION
#define MDEEG_VERSION "unknown"
#endif

namespace mdeeg::exp {
namespace {

using json = nlohmann::ordered_json;

void write_text(const fs::path& file, const std::string& body) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw DataError("cannot write " + file.string());
  os << body;
  if (!os) throw DataError("failed writing " + file.string());
}

std::string read_text(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("cannot read " + file.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

json metrics_json(const train::Metrics& m, bool macro) {
  json j;
  j["accuracy"] = m.accuracy;
  j["f1"] = m.f1;
  if (macro) j["macro_f1"] = m.macro_f1;
  j["confusion"] = {{"tp", m.confusion.tp}, {"tn", m.confusion.tn}, {"fp", m.confusion.fp}, {"fn", m.confusion.fn}};
  return j;
}

std::string ablation_name(const RunConfig& c) {
  if (c.raw_only) return "raw_only";
  if (c.topo_only) return "topo_only";
  if (c.no_oc && c.no_attention) return "no_oc_no_attention";
  if (c.no_oc) return "no_oc";
  if (c.no_attention) return "no_attention";
  return "full";
}

json fold_json(const train::FoldResult& f, const std::vector<std::size_t>& windows, bool macro) {
  json j;
  j["subject"] = f.subject;
  j["seed"] = f.seed;
  j["ok"] = f.ok;
  if (!f.ok) {
    j["error"] = f.error;
    return j;
  }
  j["n_train"] = f.n_train;
  j["n_test"] = f.n_test;
  j["metrics"] = metrics_json(f.eval.metrics, macro);
  if (!f.eval.fused.empty()) {
    try {
      j["mean_cross_class_cosine"] = train::mean_cross_class_cosine(f.eval);
    } catch (const std::domain_error&) {
      j["mean_cross_class_cosine"] = nullptr;
    }
  }
  json epochs = json::array();
  for (const auto& e : f.log) {
    epochs.push_back({{"epoch", e.epoch},
                      {"l_ce", e.l_ce},
                      {"l_oc", e.l_oc},
                      {"l_total", e.l_total},
                      {"lr", e.lr},
                      {"skipped_steps", e.skipped_steps}});
  }
  j["epochs"] = std::move(epochs);
  json preds = json::array();
  for (std::size_t i = 0; i < f.eval.truth.size(); ++i) {
    preds.push_back({{"window", windows.at(i)},
                     {"label", f.eval.truth[i]},
                     {"predicted", f.eval.predicted[i]},
                     {"p_high", f.eval.p_high[i]}});
  }
  j["predictions"] = std::move(preds);
  return j;
}

std::string summary_tsv(const std::string& row, const train::LosoSummary& s, bool macro) {
  std::string out = macro ? "method\taccuracy\tf1\tmacro_f1\n" : "method\taccuracy\tf1\n";
  out += row + "\t" + train::format_percent(s.accuracy) + "\t" + train::format_percent(s.f1);
  if (macro) out += "\t" + train::format_percent(s.macro_f1);
  return out + "\n";
}

struct FoldArtifacts {
  model::Model model;
  features::FeatureNormalizer norm;
};

FoldArtifacts load_fold(const fs::path& run_dir, const std::string& subject) {
  const fs::path ckpt = run_dir / ("fold_" + subject + ".ckpt");
  const fs::path norm = run_dir / ("fold_" + subject + ".norm");
  if (!fs::exists(ckpt) || !fs::exists(norm)) {
    throw UsageError("missing checkpoint for subject " + subject + " in " + run_dir.string());
  }
  FoldArtifacts a{model::Model::load(ckpt), features::FeatureNormalizer::load(norm)};
  a.norm.assert_excludes(subject);
  return a;
}

std::map<std::string, std::vector<const EegSegment*>> by_subject(const std::vector<EegSegment>& segments) {
  std::map<std::string, std::vector<const EegSegment*>> out;
  for (const auto& s : segments) out[s.subject_id()].push_back(&s);
  return out;
}

// Evaluates every fold of a finished run on features produced by `extract`.
template <typename Extract>
std::vector<FoldMetricsRow> evaluate_variants(const fs::path& run_dir, const std::vector<std::string>& units,
                                              Extract extract) {
  const RunConfig config = load_run_config(run_dir);
  const auto prepared = load_segments(config);
  const auto groups = by_subject(prepared.segments);
  std::vector<FoldMetricsRow> rows;
  for (const auto& [subject, segs] : groups) {
    FoldArtifacts fold = load_fold(run_dir, subject);
    for (std::size_t u = 0; u < units.size(); ++u) {
      std::vector<features::SegmentFeatures> feats;
      features::Mask mask;
      for (const EegSegment* s : segs) feats.push_back(extract(*s, u, mask));
      const auto samples = features::make_samples(feats, fold.norm, mask);
      auto ev = train::evaluate(fold.model, samples);
      rows.push_back({units[u], subject, ev.metrics, ev.p_high});
    }
  }
  return rows;
}

std::string rows_tsv(const std::vector<FoldMetricsRow>& rows, const std::string& unit_header) {
  std::ostringstream os;
  os << unit_header << "\tsubject\taccuracy\tf1\tmacro_f1\n";
  for (const auto& r : rows) {
    os << r.unit << '\t' << r.subject << '\t' << fixed(r.metrics.accuracy) << '\t' << fixed(r.metrics.f1) << '\t'
       << fixed(r.metrics.macro_f1) << '\n';
  }
  return os.str();
}

}  // namespace

features::PreparedSegments load_segments(const RunConfig& config) {
  config.validate();
  std::vector<EegRecording> recordings;
  if (config.synthetic) {
    const auto segs = synth_generate(config.subjects, config.segments, config.seed);
    recordings = recordings_from_segments(segs);
  } else {
    recordings = io::read_dataset(config.data);
  }
  auto prepared = features::prepare_segments(recordings, config.filter_mode());
  if (prepared.segments.empty()) throw DataError("no labeled segments in the dataset");
  return prepared;
}

RunArtifacts cmd_run(const RunConfig& config, const fs::path& out_root) {
  config.validate();
  const auto prepared = load_segments(config);
  const auto rows = features::extract_all(prepared.segments, config.feature_options());

  train::LosoOptions opt;
  opt.model = config.model_config();
  opt.train = config.train_config();
  opt.jobs = config.jobs;
  opt.keep_embeddings = true;

  RunArtifacts art;
  art.dir = out_root / config.run_id();
  fs::create_directories(art.dir);
  art.result = train::run_loso(rows, opt);

  RunConfig resolved = config;
  resolved.jobs = 1;
  write_text(art.dir / "config.txt", resolved.to_text());

  json folds = json::array();
  for (const auto& f : art.result.folds) {
    std::vector<std::size_t> windows;
    for (const auto& r : rows) {
      if (r.subject == f.subject) windows.push_back(r.window_index);
    }
    write_text(art.dir / ("fold_" + f.subject + ".json"), fold_json(f, windows, config.macro_f1).dump(2) + "\n");
    if (f.ok) {
      f.model->save(art.dir / ("fold_" + f.subject + ".ckpt"));
      f.normalizer->save(art.dir / ("fold_" + f.subject + ".norm"));
    }
    json fj = {{"subject", f.subject}, {"ok", f.ok}};
    if (f.ok) {
      fj["accuracy"] = f.eval.metrics.accuracy;
      fj["f1"] = f.eval.metrics.f1;
      if (config.macro_f1) fj["macro_f1"] = f.eval.metrics.macro_f1;
    }
    folds.push_back(std::move(fj));
  }

  const auto& s = art.result.summary;
  json summary;
  summary["run_id"] = config.run_id();
  summary["artifact_version"] = MDEEG_VERSION;
  summary["method"] = ablation_name(config);
  summary["seed"] = config.seed;
  summary["effective_beta"] = config.effective_beta();
  summary["fusion"] = model::to_string(config.fusion());
  summary["missing_label_windows"] = prepared.missing_label_windows;
  summary["folds"] = std::move(folds);
  summary["folds_ok"] = s.folds_ok;
  summary["folds_failed"] = s.folds_failed;
  summary["accuracy"] = {{"mean", s.accuracy.mean}, {"std", s.accuracy.stddev}, {"text", train::format_percent(s.accuracy)}};
  summary["f1"] = {{"mean", s.f1.mean}, {"std", s.f1.stddev}, {"text", train::format_percent(s.f1)}};
  if (config.macro_f1) {
    summary["macro_f1"] = {
        {"mean", s.macro_f1.mean}, {"std", s.macro_f1.stddev}, {"text", train::format_percent(s.macro_f1)}};
  }
  write_text(art.dir / "summary.json", summary.dump(2) + "\n");
  write_text(art.dir / "summary.tsv", summary_tsv(ablation_name(config), s, config.macro_f1));
  return art;
}

namespace {

std::vector<SweepRow> run_sweep(std::vector<SweepRow> rows, const fs::path& out_root, const std::string& table,
                                bool with_beta) {
  std::ostringstream os;
  os << "name\trun_id\tseed\t" << (with_beta ? "beta\tattention\t" : "") << "accuracy\tf1\n";
  for (auto& row : rows) {
    const auto art = cmd_run(row.config, out_root);
    row.run_id = row.config.run_id();
    row.summary = art.result.summary;
    os << row.name << '\t' << row.run_id << '\t' << row.config.seed << '\t';
    if (with_beta) os << row.config.beta << '\t' << (row.config.no_attention ? "off" : "on") << '\t';
    os << train::format_percent(row.summary.accuracy) << '\t' << train::format_percent(row.summary.f1) << '\n';
  }
  fs::create_directories(out_root);
  write_text(out_root / table, os.str());
  return rows;
}

}  // namespace

std::vector<SweepRow> cmd_ablation_suite(const RunConfig& base, const fs::path& out_root) {
  base.validate();
  RunConfig clean = base;
  clean.no_oc = clean.no_attention = clean.raw_only = clean.topo_only = false;
  std::vector<SweepRow> rows;
  auto add = [&](bool no_oc, bool no_att, bool raw, bool topo) {
    RunConfig c = clean;
    c.no_oc = no_oc;
    c.no_attention = no_att;
    c.raw_only = raw;
    c.topo_only = topo;
    rows.push_back({ablation_name(c), c, {}, {}});
  };
  add(false, false, false, false);
  add(true, false, false, false);
  add(false, true, false, false);
  add(true, true, false, false);
  add(false, false, true, false);
  add(false, false, false, true);
  return run_sweep(std::move(rows), out_root, "ablation.tsv", false);
}

std::vector<SweepRow> cmd_beta_sweep(const RunConfig& base, const fs::path& out_root, const std::vector<double>& betas) {
  base.validate();
  std::vector<SweepRow> rows;
  for (bool attention : {true, false}) {
    for (double beta : betas) {
      RunConfig c = base;
      c.no_oc = c.raw_only = c.topo_only = false;
      c.no_attention = !attention;
      c.beta = beta;
      std::ostringstream name;
      name << "beta=" << beta << (attention ? "+attention" : "+concat");
      rows.push_back({name.str(), c, {}, {}});
    }
  }
  return run_sweep(std::move(rows), out_root, "beta_sweep.tsv", true);
}

RunConfig load_run_config(const fs::path& run_dir) {
  RunConfig c;
  c.parse(read_text(run_dir / "config.txt"));
  return c;
}

std::vector<FoldMetricsRow> cmd_robustness(const fs::path& run_dir, const std::vector<double>& fractions) {
  std::vector<double> all{0.0};
  for (double f : fractions) {
    if (!(f > 0.0) || !std::isfinite(f)) throw UsageError("noise fractions must be positive");
    all.push_back(f);
  }
  std::vector<std::string> units;
  for (double f : all) units.push_back(fixed(f, 2));
  const RunConfig config = load_run_config(run_dir);
  const auto opts = config.feature_options();
  auto rows = evaluate_variants(run_dir, units, [&](const EegSegment& s, std::size_t u, features::Mask&) {
    const std::uint64_t seed = derive_seed(config.seed, {hash_string("noise"), std::bit_cast<std::uint64_t>(all[u]),
                                                         hash_string(s.subject_id()), s.window_index()});
    return features::extract_features(dsp::add_noise(s, {all[u], seed}), opts);
  });
  write_text(run_dir / "robustness.tsv", rows_tsv(rows, "noise_fraction"));
  return rows;
}

ImportanceAxis parse_axis(const std::string& s) {
  if (s == "channel") return ImportanceAxis::Channel;
  if (s == "band") return ImportanceAxis::Band;
  throw UsageError("unknown importance axis '" + s + "' (expected channel or band)");
}

features::Mask keep_mask(ImportanceAxis axis, const std::vector<bool>& keep) {
  const std::size_t expected = axis == ImportanceAxis::Channel ? kNumChannels : spectral::kNumBands;
  if (keep.size() != expected) throw std::invalid_argument("keep mask has the wrong number of units");
  std::size_t kept = 0, which = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) {
      ++kept;
      which = i;
    }
  }
  if (kept == 0) throw std::invalid_argument("masking every unit leaves nothing to evaluate");
  if (kept > 1) throw std::invalid_argument("importance masks keep exactly one unit");
  features::Mask m;
  if (axis == ImportanceAxis::Channel) m.keep_channel = which;
  else m.keep_band = static_cast<spectral::Band>(which);
  return m;
}

std::vector<FoldMetricsRow> cmd_importance(const fs::path& run_dir, ImportanceAxis axis) {
  std::vector<std::string> units;
  if (axis == ImportanceAxis::Channel) {
    units.assign(kChannelNames.begin(), kChannelNames.end());
  } else {
    for (const auto& b : spectral::kBands) units.emplace_back(b.name);
  }
  const RunConfig config = load_run_config(run_dir);
  const auto opts = config.feature_options();
  auto rows = evaluate_variants(run_dir, units, [&](const EegSegment& s, std::size_t u, features::Mask& mask) {
    std::vector<bool> keep(units.size(), false);
    keep[u] = true;
    mask = keep_mask(axis, keep);
    return features::extract_masked(s, opts, mask);
  });
  const std::string name = axis == ImportanceAxis::Channel ? "channel" : "band";
  write_text(run_dir / ("importance_" + name + ".tsv"), rows_tsv(rows, name));
  return rows;
}

std::size_t cmd_attention_export(const fs::path& run_dir) {
  const RunConfig config = load_run_config(run_dir);
  if (config.fusion() != model::Fusion::Attention) throw UsageError("run has no attention module to export");
  const auto prepared = load_segments(config);
  const auto opts = config.feature_options();
  std::ostringstream gates, embeddings;
  std::size_t count = 0;
  bool header = false;
  for (const auto& [subject, segs] : by_subject(prepared.segments)) {
    FoldArtifacts fold = load_fold(run_dir, subject);
    std::vector<features::SegmentFeatures> feats;
    for (const EegSegment* s : segs) feats.push_back(features::extract_features(*s, opts));
    const auto samples = features::make_samples(feats, fold.norm);
    const auto ev = train::evaluate(fold.model, samples, true);
    const std::size_t m = ev.gates.front().size();
    if (!header) {
      gates << "subject\twindow\tlabel\tmean_gate";
      embeddings << "subject\twindow\tlabel";
      for (std::size_t d = 0; d < m; ++d) {
        gates << "\tg" << d;
        embeddings << "\te" << d;
      }
      gates << '\n';
      embeddings << '\n';
      header = true;
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
      double mean = 0;
      for (float g : ev.gates[i]) mean += g;
      mean /= static_cast<double>(m);
      const std::string key = subject + "\t" + std::to_string(samples[i].window_index) + "\t" +
                              (samples[i].label ? "High" : "Low");
      gates << key << '\t' << fixed(mean, 8);
      embeddings << key;
      for (std::size_t d = 0; d < m; ++d) {
        gates << '\t' << fixed(ev.gates[i][d], 8);
        embeddings << '\t' << fixed(ev.fused[i][d], 8);
      }
      gates << '\n';
      embeddings << '\n';
      ++count;
    }
  }
  write_text(run_dir / "attention.tsv", gates.str());
  write_text(run_dir / "embeddings.tsv", embeddings.str());
  return count;
}

std::string unit_summary_tsv(const std::vector<FoldMetricsRow>& rows, bool macro_f1) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const FoldMetricsRow*>> groups;
  for (const auto& r : rows) {
    if (!groups.contains(r.unit)) order.push_back(r.unit);
    groups[r.unit].push_back(&r);
  }
  std::ostringstream os;
  os << "unit\taccuracy\tf1" << (macro_f1 ? "\tmacro_f1" : "") << '\n';
  for (const auto& u : order) {
    std::vector<double> acc, f1, mf1;
    for (const auto* r : groups[u]) {
      acc.push_back(r->metrics.accuracy);
      f1.push_back(r->metrics.f1);
      mf1.push_back(r->metrics.macro_f1);
    }
    os << u << '\t' << train::format_percent(train::mean_std(acc)) << '\t' << train::format_percent(train::mean_std(f1));
    if (macro_f1) os << '\t' << train::format_percent(train::mean_std(mf1));
    os << '\n';
  }
  return os.str();
}

}  // namespace mdeeg::exp
