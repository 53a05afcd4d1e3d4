#include "mdeeg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mdeeg/error.hpp"
#include "mdeeg/rng.hpp"

namespace mdeeg {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw UsageError("config: " + key + "=" + value + " (expected " + expected + ")");
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v, "a number");
  }
  if (used != v.size() || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::string fmt_real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "data",         "synthetic",  "subjects",     "segments",   "model",     "batch_size",
      "lr",           "epochs",     "beta",         "scheduler_factor",        "scheduler_patience",
      "seed",         "jobs",       "features",     "no_oc",      "no_attention",
      "raw_only",     "topo_only",  "zero_phase",   "linear_power",            "pair_mean",
      "macro_f1"};
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "data") data = v;
  else if (key == "synthetic") synthetic = parse_bool(key, v);
  else if (key == "subjects") subjects = parse_count(key, v);
  else if (key == "segments") segments = parse_count(key, v);
  else if (key == "model") {
    if (v != "full" && v != "desk") bad_value(key, v, "full or desk");
    model = v;
  } else if (key == "batch_size") batch_size = parse_count(key, v);
  else if (key == "lr") lr = parse_real(key, v);
  else if (key == "epochs") epochs = parse_count(key, v);
  else if (key == "beta") beta = parse_real(key, v);
  else if (key == "scheduler_factor") scheduler_factor = parse_real(key, v);
  else if (key == "scheduler_patience") scheduler_patience = parse_count(key, v);
  else if (key == "seed") seed = parse_u64(key, v);
  else if (key == "jobs") jobs = parse_count(key, v);
  else if (key == "features") {
    try {
      features = features::parse_feature_kind(v);
    } catch (const std::invalid_argument&) {
      bad_value(key, v, "psd or de");
    }
  } else if (key == "no_oc") no_oc = parse_bool(key, v);
  else if (key == "no_attention") no_attention = parse_bool(key, v);
  else if (key == "raw_only") raw_only = parse_bool(key, v);
  else if (key == "topo_only") topo_only = parse_bool(key, v);
  else if (key == "zero_phase") zero_phase = parse_bool(key, v);
  else if (key == "linear_power") linear_power = parse_bool(key, v);
  else if (key == "pair_mean") pair_mean = parse_bool(key, v);
  else if (key == "macro_f1") macro_f1 = parse_bool(key, v);
  else throw UsageError("config: unknown key '" + key + "'");
}

void RunConfig::parse(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read config file " + path);
  std::ostringstream body;
  body << is.rdbuf();
  RunConfig c;
  c.parse(body.str());
  return c;
}

void RunConfig::validate() const {
  if (raw_only && topo_only) throw UsageError("raw_only and topo_only cannot both be set");
  if (!synthetic && data.empty()) throw UsageError("either a dataset path or synthetic=true is required");
  if (synthetic && (subjects < 2 || segments < 2)) throw UsageError("synthetic runs need >= 2 subjects and segments");
  if (jobs == 0) throw UsageError("jobs must be >= 1");
  try {
    train_config().validate();
    model_config().validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "data=" << data << '\n'
     << "synthetic=" << b(synthetic) << '\n'
     << "subjects=" << subjects << '\n'
     << "segments=" << segments << '\n'
     << "model=" << model << '\n'
     << "batch_size=" << batch_size << '\n'
     << "lr=" << fmt_real(lr) << '\n'
     << "epochs=" << epochs << '\n'
     << "beta=" << fmt_real(beta) << '\n'
     << "scheduler_factor=" << fmt_real(scheduler_factor) << '\n'
     << "scheduler_patience=" << scheduler_patience << '\n'
     << "seed=" << seed << '\n'
     << "jobs=" << jobs << '\n'
     << "features=" << features::to_string(features) << '\n'
     << "no_oc=" << b(no_oc) << '\n'
     << "no_attention=" << b(no_attention) << '\n'
     << "raw_only=" << b(raw_only) << '\n'
     << "topo_only=" << b(topo_only) << '\n'
     << "zero_phase=" << b(zero_phase) << '\n'
     << "linear_power=" << b(linear_power) << '\n'
     << "pair_mean=" << b(pair_mean) << '\n'
     << "macro_f1=" << b(macro_f1) << '\n';
  return os.str();
}

std::string RunConfig::run_id() const {
  RunConfig c = *this;
  c.jobs = 1;
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << hash_string(c.to_text());
  return os.str();
}

model::Fusion RunConfig::fusion() const {
  if (raw_only) return model::Fusion::RawOnly;
  if (topo_only) return model::Fusion::TopoOnly;
  if (no_attention) return model::Fusion::Concat;
  return model::Fusion::Attention;
}

double RunConfig::effective_beta() const { return no_oc || raw_only || topo_only ? 0.0 : beta; }

model::ModelConfig RunConfig::model_config() const {
  auto mc = model == "desk" ? model::ModelConfig::desk() : model::ModelConfig::full();
  mc.fusion = fusion();
  return mc;
}

train::TrainConfig RunConfig::train_config() const {
  train::TrainConfig tc;
  tc.batch_size = batch_size;
  tc.lr = lr;
  tc.epochs = epochs;
  tc.beta = effective_beta();
  tc.scheduler_factor = scheduler_factor;
  tc.scheduler_patience = scheduler_patience;
  tc.pair_mean = pair_mean;
  tc.seed = seed;
  return tc;
}

features::FeatureOptions RunConfig::feature_options() const {
  return {features, !linear_power};
}

}  // namespace mdeeg
