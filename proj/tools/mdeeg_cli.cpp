// mdeeg: command-line front end for the EEG cognitive-load pipeline.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mdeeg/config.hpp"
#include "mdeeg/error.hpp"
#include "mdeeg/experiments.hpp"
#include "mdeeg/io.hpp"
#include "mdeeg/topomap.hpp"

namespace fs = std::filesystem;
using namespace mdeeg;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

struct Globals {
  std::string config_file;
  std::string out;
  std::vector<std::string> overrides;  // key=value, applied after the config file
};

struct DataFlags {
  std::string data;
  bool synthetic = false;
  std::size_t subjects = 0, segments = 0;
};

void add_data_flags(CLI::App* cmd, DataFlags& f) {
  cmd->add_option("--data", f.data, "Dataset root (one directory per subject)");
  cmd->add_flag("--synthetic", f.synthetic, "Use the synthetic class-conditional generator");
  cmd->add_option("--subjects", f.subjects, "Synthetic subject count");
  cmd->add_option("--segments", f.segments, "Synthetic segments per subject");
}

void push_data_flags(const DataFlags& f, std::vector<std::string>& kv) {
  if (!f.data.empty()) kv.push_back("data=" + f.data);
  if (f.synthetic) kv.push_back("synthetic=true");
  if (f.subjects) kv.push_back("subjects=" + std::to_string(f.subjects));
  if (f.segments) kv.push_back("segments=" + std::to_string(f.segments));
}

struct RunFlags {
  DataFlags data;
  std::string model, features;
  std::size_t epochs = 0, batch_size = 0;
  std::string lr, beta;
  bool no_oc = false, no_attention = false, raw_only = false, topo_only = false;
  bool zero_phase = false, linear_power = false, pair_mean = false, macro_f1 = false;
  std::vector<std::string> set;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  add_data_flags(cmd, f.data);
  cmd->add_option("--model", f.model, "Network width: full or desk");
  cmd->add_option("--features", f.features, "Band feature variant: psd or de");
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--batch-size", f.batch_size, "Mini-batch size");
  cmd->add_option("--lr", f.lr, "Initial learning rate");
  cmd->add_option("--beta", f.beta, "Weight of the orthogonality loss");
  cmd->add_flag("--no-oc", f.no_oc, "Drop the orthogonality loss (beta = 0)");
  cmd->add_flag("--no-attention", f.no_attention, "Fuse by concatenation + FC instead of the gate");
  cmd->add_flag("--raw-only", f.raw_only, "Raw-signal stream only");
  cmd->add_flag("--topo-only", f.topo_only, "Topography stream only");
  cmd->add_flag("--zero-phase", f.zero_phase, "Forward-backward filtering");
  cmd->add_flag("--linear-power", f.linear_power, "Skip the log10 of band powers");
  cmd->add_flag("--pair-mean", f.pair_mean, "Average the orthogonality sums over pairs");
  cmd->add_flag("--macro-f1", f.macro_f1, "Also report macro-F1");
  cmd->add_option("--set", f.set, "Extra key=value config assignments");
}

std::vector<std::string> run_overrides(const RunFlags& f) {
  std::vector<std::string> kv;
  push_data_flags(f.data, kv);
  if (!f.model.empty()) kv.push_back("model=" + f.model);
  if (!f.features.empty()) kv.push_back("features=" + f.features);
  if (f.epochs) kv.push_back("epochs=" + std::to_string(f.epochs));
  if (f.batch_size) kv.push_back("batch_size=" + std::to_string(f.batch_size));
  if (!f.lr.empty()) kv.push_back("lr=" + f.lr);
  if (!f.beta.empty()) kv.push_back("beta=" + f.beta);
  if (f.no_oc) kv.push_back("no_oc=true");
  if (f.no_attention) kv.push_back("no_attention=true");
  if (f.raw_only) kv.push_back("raw_only=true");
  if (f.topo_only) kv.push_back("topo_only=true");
  if (f.zero_phase) kv.push_back("zero_phase=true");
  if (f.linear_power) kv.push_back("linear_power=true");
  if (f.pair_mean) kv.push_back("pair_mean=true");
  if (f.macro_f1) kv.push_back("macro_f1=true");
  kv.insert(kv.end(), f.set.begin(), f.set.end());
  return kv;
}

RunConfig resolve(const Globals& g, const std::vector<std::string>& extra) {
  RunConfig c = g.config_file.empty() ? RunConfig{} : RunConfig::from_file(g.config_file);
  std::vector<std::string> all = g.overrides;
  all.insert(all.end(), extra.begin(), extra.end());
  for (const auto& kv : all) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("expected key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return c;
}

void print_summary(const std::string& name, const train::LosoSummary& s) {
  std::cout << name << "\taccuracy " << train::format_percent(s.accuracy) << "\tf1 " << train::format_percent(s.f1)
            << "\tfolds " << s.folds_ok << " ok, " << s.folds_failed << " failed\n";
}

int cmd_featurize(const RunConfig& c, const fs::path& out) {
  const auto prepared = exp::load_segments(c);
  const auto rows = features::extract_all(prepared.segments, c.feature_options());
  fs::create_directories(out);
  std::ofstream os(out / "features.tsv");
  const std::string kind = features::to_string(c.features);
  os << "subject\twindow_index\tlabel";
  for (std::size_t ch = 0; ch < kNumChannels; ++ch) {
    for (const auto& b : spectral::kBands) os << '\t' << kChannelNames[ch] << '_' << b.name << '_' << kind;
  }
  os << '\n' << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.subject << '\t' << r.window_index << '\t' << (r.label ? "High" : "Low");
    for (double v : r.values) os << '\t' << v;
    os << '\n';
  }
  if (!os) throw DataError("failed writing features.tsv");
  std::cout << rows.size() << " rows -> " << (out / "features.tsv").string() << '\n';
  return kOk;
}

int cmd_topomap(const RunConfig& c, const fs::path& out, std::size_t limit) {
  const auto prepared = exp::load_segments(c);
  const auto rows = features::extract_all(prepared.segments, c.feature_options());
  std::vector<std::string> subjects;
  for (const auto& r : rows) subjects.push_back(r.subject);
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  // Maps for inspection use statistics over every subject; training folds refit per fold.
  const auto norm = features::FeatureNormalizer::fit(rows, subjects);
  const auto layout = topo::ElectrodeLayout::standard();
  std::map<std::string, std::size_t> written;
  std::size_t total = 0;
  for (const auto& r : rows) {
    if (limit && written[r.subject] >= limit) continue;
    auto z = norm.apply(r.values);
    const auto map = topo::build_map_from_values(z, layout, true);
    const fs::path dir = out / "maps" / r.subject;
    fs::create_directories(dir);
    const std::string stem = std::to_string(r.window_index);
    io::write_f32le_file(dir / (stem + ".f32le"), map.values);
    for (std::size_t b = 0; b < spectral::kNumBands; ++b) {
      std::ofstream ppm(dir / (stem + "_" + std::string(spectral::kBands[b].name) + ".ppm"), std::ios::binary);
      ppm << topo::band_ppm(map, b);
    }
    ++written[r.subject];
    ++total;
  }
  std::cout << total << " maps -> " << (out / "maps").string() << '\n';
  return kOk;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "' in list '" + s + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG cognitive-load pipeline: preprocessing, topography maps, dual-stream training, experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::string seed, jobs;
  app.add_option("--config", g.config_file, "key=value configuration file");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--jobs", jobs, "Concurrent LOSO folds");
  app.add_option("--out", g.out, "Output directory");

  DataFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset (one directory per subject)");
  synth->add_option("--subjects", synth_flags.subjects, "Subject count")->default_val(6);
  synth->add_option("--segments", synth_flags.segments, "Segments per subject")->default_val(40);

  std::string csv, subject, labels;
  double sample_rate = kDefaultSampleRate;
  auto* import = app.add_subcommand("import-csv", "Import a CSV recording into the dataset layout");
  import->add_option("--csv", csv, "CSV with header t,ch1,ch2,ch3,ch4")->required();
  import->add_option("--subject", subject, "Subject id")->required();
  import->add_option("--labels", labels, "TSV of window_index, paas_score")->required();
  import->add_option("--sample-rate", sample_rate, "Sampling rate in Hz");

  RunFlags feat_flags;
  auto* featurize = app.add_subcommand("featurize", "Write per-segment band features to features.tsv");
  add_run_flags(featurize, feat_flags);

  RunFlags topo_flags;
  std::size_t limit = 0;
  auto* topomap = app.add_subcommand("topomap", "Dump multi-spectral maps as float32 tensors and PPM previews");
  add_run_flags(topomap, topo_flags);
  topomap->add_option("--limit", limit, "Maps per subject (0 = all)");

  RunFlags run_flags;
  bool ablation = false;
  auto* run = app.add_subcommand("run", "Leave-one-subject-out training and evaluation");
  add_run_flags(run, run_flags);
  run->add_flag("--ablation-suite", ablation, "Run the six module-ablation configurations");

  RunFlags sweep_flags;
  std::string betas = "0.4,0.7,1.0";
  auto* sweep = app.add_subcommand("beta-sweep", "beta values crossed with attention on/off");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--betas", betas, "Comma-separated beta values");

  std::string run_dir, fractions = "0.1,0.3,0.5,0.7", axis;
  auto* robust = app.add_subcommand("robustness", "Evaluate a finished run under additive Gaussian noise");
  robust->add_option("--run", run_dir, "Run directory")->required();
  robust->add_option("--fractions", fractions, "Comma-separated noise fractions");
  auto* importance = app.add_subcommand("importance", "Evaluate a finished run with one channel or band kept");
  importance->add_option("--run", run_dir, "Run directory")->required();
  importance->add_option("--axis", axis, "channel or band")->required();
  auto* attention = app.add_subcommand("attention-export", "Export per-sample gate vectors of a finished run");
  attention->add_option("--run", run_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (!seed.empty()) g.overrides.push_back("seed=" + seed);
    if (!jobs.empty()) g.overrides.push_back("jobs=" + jobs);
    const fs::path out = g.out.empty() ? fs::path("results") : fs::path(g.out);

    if (synth->parsed()) {
      const RunConfig c = resolve(g, {});
      const auto segs = synth_generate(synth_flags.subjects, synth_flags.segments, c.seed);
      io::write_dataset(out, recordings_from_segments(segs));
      std::cout << segs.size() << " segments -> " << out.string() << '\n';
      return kOk;
    }
    if (import->parsed()) {
      const auto rec = io::import_csv(csv, subject, sample_rate, io::read_labels(labels));
      io::write_recording(out / subject, rec);
      std::cout << rec.num_samples() << " samples -> " << (out / subject).string() << '\n';
      return kOk;
    }
    if (featurize->parsed()) return cmd_featurize(resolve(g, run_overrides(feat_flags)), out);
    if (topomap->parsed()) return cmd_topomap(resolve(g, run_overrides(topo_flags)), out, limit);
    if (run->parsed()) {
      const RunConfig c = resolve(g, run_overrides(run_flags));
      if (ablation) {
        for (const auto& row : exp::cmd_ablation_suite(c, out)) print_summary(row.name, row.summary);
        return kOk;
      }
      const auto art = exp::cmd_run(c, out);
      print_summary(art.dir.string(), art.result.summary);
      const auto& sum = art.result.summary;
      if (sum.folds_diverged) return kNumerical;
      return sum.folds_failed ? kData : kOk;
    }
    if (sweep->parsed()) {
      const RunConfig c = resolve(g, run_overrides(sweep_flags));
      for (const auto& row : exp::cmd_beta_sweep(c, out, parse_list(betas))) print_summary(row.name, row.summary);
      return kOk;
    }
    if (robust->parsed()) {
      const auto rows = exp::cmd_robustness(run_dir, parse_list(fractions));
      std::cout << exp::unit_summary_tsv(rows);
      return kOk;
    }
    if (importance->parsed()) {
      const auto rows = exp::cmd_importance(run_dir, exp::parse_axis(axis));
      std::cout << exp::unit_summary_tsv(rows);
      return kOk;
    }
    if (attention->parsed()) {
      std::cout << exp::cmd_attention_export(run_dir) << " rows -> " << (fs::path(run_dir) / "attention.tsv").string()
                << '\n';
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::domain_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsage;
}
