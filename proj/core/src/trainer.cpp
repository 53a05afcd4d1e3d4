#include "mdeeg/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "mdeeg/error.hpp"
#include "mdeeg/rng.hpp"

namespace mdeeg::train {

using ad::real_t;
using ad::Tensor;
using features::Sample;

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be positive");
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be >= 0");
  if (!(scheduler_factor > 0.0 && scheduler_factor < 1.0)) throw std::invalid_argument("scheduler factor must be in (0, 1)");
  if (scheduler_patience == 0) throw std::invalid_argument("scheduler patience must be positive");
  if (!(scheduler_threshold >= 0.0)) throw std::invalid_argument("scheduler threshold must be >= 0");
}

// ---------------------------------------------------------------------------

Adam::Adam(std::vector<ad::NamedTensor> params) : params_(std::move(params)) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

bool Adam::step(double lr) {
  for (auto& p : params_) {
    for (real_t gv : p.tensor.grad()) {
      if (!std::isfinite(gv)) {
        ++skipped_;
        return false;
      }
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(kBeta1, t);
  const double c2 = 1.0 - std::pow(kBeta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor p = params_[i].tensor;
    auto value = p.data();
    auto grad = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double gk = grad[k];
      m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * gk;
      v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * gk * gk;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      value[k] = static_cast<real_t>(value[k] - lr * mhat / (std::sqrt(vhat) + kEps));
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

PlateauScheduler::PlateauScheduler(double lr, double factor, std::size_t patience, double threshold)
    : lr_(lr), factor_(factor), threshold_(threshold), patience_(patience),
      best_(std::numeric_limits<double>::infinity()) {}

double PlateauScheduler::step(double loss) {
  if (!std::isfinite(loss)) throw std::domain_error("scheduler: monitored loss is not finite");
  if (std::isinf(best_) || loss < best_ - std::abs(best_) * threshold_) {
    best_ = loss;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ >= patience_) {
    lr_ *= factor_;
    ++decays_;
    bad_epochs_ = 0;
  }
  return lr_;
}

// ---------------------------------------------------------------------------

Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.empty()) throw std::domain_error("metrics: empty label set");
  if (truth.size() != predicted.size()) throw std::domain_error("metrics: truth and prediction sizes differ");
  Metrics m;
  auto& c = m.confusion;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == 1, p = predicted[i] == 1;
    if (t && p) ++c.tp;
    else if (!t && !p) ++c.tn;
    else if (p) ++c.fp;
    else ++c.fn;
  }
  auto f1 = [](std::size_t tp, std::size_t fp, std::size_t fn) {
    const double denom = static_cast<double>(2 * tp + fp + fn);
    return denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
  };
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.f1 = f1(c.tp, c.fp, c.fn);
  m.macro_f1 = 0.5 * (m.f1 + f1(c.tn, c.fn, c.fp));
  return m;
}

// ---------------------------------------------------------------------------

namespace {

Tensor raw_batch(std::span<const Sample> samples, std::span<const std::size_t> idx) {
  const std::size_t len = samples[idx[0]].num_samples;
  Tensor t({idx.size(), kNumChannels, len});
  auto out = t.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& s = samples[idx[i]];
    if (s.num_samples != len) throw DataError("samples in a batch differ in length");
    std::copy(s.raw.begin(), s.raw.end(), out.begin() + static_cast<std::ptrdiff_t>(i * kNumChannels * len));
  }
  return t;
}

Tensor topo_batch(std::span<const Sample> samples, std::span<const std::size_t> idx) {
  constexpr std::size_t plane = topo::kMapPlanes * topo::kGridSize * topo::kGridSize;
  Tensor t({idx.size(), topo::kMapPlanes, topo::kGridSize, topo::kGridSize});
  auto out = t.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& s = samples[idx[i]];
    std::copy(s.topo.begin(), s.topo.end(), out.begin() + static_cast<std::ptrdiff_t>(i * plane));
  }
  return t;
}

struct Inputs {
  Tensor raw, topo;
};

Inputs batch_inputs(const Model& model, std::span<const Sample> samples, std::span<const std::size_t> idx) {
  Inputs in;
  if (model.config().uses_raw()) in.raw = raw_batch(samples, idx);
  if (model.config().uses_topo()) in.topo = topo_batch(samples, idx);
  return in;
}

}  // namespace

TrainedFold train_fold(std::span<const Sample> train, const ModelConfig& model_config, const TrainConfig& config) {
  config.validate();
  if (train.size() < 2) throw DataError("training set needs at least 2 samples");
  const bool has_low = std::any_of(train.begin(), train.end(), [](const Sample& s) { return s.label == 0; });
  const bool has_high = std::any_of(train.begin(), train.end(), [](const Sample& s) { return s.label == 1; });
  if (!has_low || !has_high) throw DataError("training set contains a single class");

  TrainedFold out{Model(model_config, config.seed), {}};
  Model& model = out.model;
  const auto params = model.parameters();
  Adam adam(params);
  PlateauScheduler sched(config.lr, config.scheduler_factor, config.scheduler_patience, config.scheduler_threshold);

  std::vector<std::size_t> order(train.size());
  std::vector<int> labels;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, {hash_string("shuffle"), epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochLog log;
    log.epoch = epoch;
    log.lr = sched.lr();
    const std::size_t skipped_before = adam.skipped();
    double sum_ce = 0, sum_oc = 0, sum_total = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      if (end - start < 2) break;
      std::span<const std::size_t> idx(order.data() + start, end - start);
      labels.clear();
      for (std::size_t i : idx) labels.push_back(train[i].label);

      Inputs in = batch_inputs(model, train, idx);
      ad::Graph g;
      const auto seed = derive_seed(config.seed, {hash_string("dropout"), epoch, start});
      auto fwd = model.forward(g, in.raw, in.topo, ad::Mode::Train, seed);
      Tensor ce = ad::softmax_cross_entropy(g, fwd.logits, labels);
      Tensor total = ce;
      double l_oc;
      if (config.beta > 0.0) {
        Tensor oc = model::orthogonality_loss(g, fwd.fused, labels, config.pair_mean).loss;
        total = ad::add(g, ce, ad::scale(g, oc, config.beta));
        l_oc = oc.item();
      } else {
        ad::Graph untracked(false);
        l_oc = model::orthogonality_loss(untracked, fwd.fused, labels, config.pair_mean).loss.item();
      }
      for (const auto& p : params) Tensor(p.tensor).zero_grad();
      g.backward(total);
      adam.step(sched.lr());

      const auto terms = model::total_loss(ce.item(), l_oc, config.beta);
      sum_ce += terms.l_ce;
      sum_oc += terms.l_oc;
      sum_total += terms.l_total;
      ++batches;
    }
    const double nb = static_cast<double>(batches);
    log.l_ce = sum_ce / nb;
    log.l_oc = sum_oc / nb;
    log.l_total = sum_total / nb;
    log.skipped_steps = adam.skipped() - skipped_before;
    if (!std::isfinite(log.l_total)) {
      throw NumericalError("epoch " + std::to_string(epoch) + ": training loss is not finite");
    }
    out.log.push_back(log);
    sched.step(log.l_total);
  }
  return out;
}

Evaluation evaluate(Model& model, std::span<const Sample> test, bool keep_embeddings) {
  if (test.empty()) throw std::domain_error("evaluate: empty test set");
  constexpr std::size_t kEvalBatch = 64;
  Evaluation ev;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < test.size(); start += kEvalBatch) {
    const std::size_t end = std::min(test.size(), start + kEvalBatch);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Inputs in = batch_inputs(model, test, idx);
    ad::Graph g(false);
    auto fwd = model.forward(g, in.raw, in.topo, ad::Mode::Eval, 0);
    const std::size_t m = fwd.fused.dim(1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double l0 = fwd.logits[2 * i], l1 = fwd.logits[2 * i + 1];
      ev.truth.push_back(test[idx[i]].label);
      ev.predicted.push_back(l1 > l0 ? 1 : 0);
      ev.p_high.push_back(1.0 / (1.0 + std::exp(l0 - l1)));
      if (keep_embeddings) {
        auto row = fwd.fused.data().subspan(i * m, m);
        ev.fused.emplace_back(row.begin(), row.end());
        if (fwd.gate.defined()) {
          auto gate = fwd.gate.data().subspan(i * m, m);
          ev.gates.emplace_back(gate.begin(), gate.end());
        }
      }
    }
  }
  ev.metrics = compute_metrics(ev.truth, ev.predicted);
  return ev;
}

double mean_cross_class_cosine(const Evaluation& eval) {
  if (eval.fused.size() != eval.truth.size()) throw std::invalid_argument("evaluation holds no embeddings");
  std::vector<double> norms;
  for (const auto& v : eval.fused) {
    double ss = 0;
    for (float x : v) ss += static_cast<double>(x) * x;
    norms.push_back(std::sqrt(ss));
  }
  double sum = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < eval.fused.size(); ++i) {
    for (std::size_t k = i + 1; k < eval.fused.size(); ++k) {
      if (eval.truth[i] == eval.truth[k] || norms[i] <= 1e-12 || norms[k] <= 1e-12) continue;
      double dot = 0;
      for (std::size_t d = 0; d < eval.fused[i].size(); ++d) dot += static_cast<double>(eval.fused[i][d]) * eval.fused[k][d];
      sum += dot / (norms[i] * norms[k]);
      ++pairs;
    }
  }
  if (pairs == 0) throw std::domain_error("no cross-class pairs");
  return sum / static_cast<double>(pairs);
}

// ---------------------------------------------------------------------------

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  double s = 0;
  for (double v : values) s += v;
  const double mean = s / static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

std::string format_percent(const MeanStd& s) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << 100.0 * s.mean << '(' << 100.0 * s.stddev << ')';
  return os.str();
}

std::uint64_t fold_seed(std::uint64_t run_seed, const std::string& subject) {
  return derive_seed(run_seed, {hash_string("fold"), hash_string(subject)});
}

LosoSummary summarize(std::span<const FoldResult> folds) {
  LosoSummary s;
  std::vector<double> acc, f1, mf1;
  for (const auto& f : folds) {
    if (!f.ok) {
      ++s.folds_failed;
      if (f.numerical_failure) ++s.folds_diverged;
      continue;
    }
    ++s.folds_ok;
    acc.push_back(f.eval.metrics.accuracy);
    f1.push_back(f.eval.metrics.f1);
    mf1.push_back(f.eval.metrics.macro_f1);
  }
  s.accuracy = mean_std(acc);
  s.f1 = mean_std(f1);
  s.macro_f1 = mean_std(mf1);
  return s;
}

namespace {

FoldResult run_fold(std::span<const features::SegmentFeatures> rows, const LosoSplit& split, const LosoOptions& opt) {
  FoldResult fr;
  fr.subject = split.test_subject;
  fr.seed = fold_seed(opt.train.seed, split.test_subject);
  try {
    auto norm = features::FeatureNormalizer::fit(rows, split.train_subjects);
    norm.assert_excludes(split.test_subject);
    std::vector<features::SegmentFeatures> train_rows, test_rows;
    for (const auto& r : rows) (r.subject == split.test_subject ? test_rows : train_rows).push_back(r);
    const auto train = features::make_samples(train_rows, norm);
    const auto test = features::make_samples(test_rows, norm);
    fr.n_train = train.size();
    fr.n_test = test.size();

    TrainConfig tc = opt.train;
    tc.seed = fr.seed;
    TrainedFold trained = train_fold(train, opt.model, tc);
    fr.log = std::move(trained.log);
    fr.eval = evaluate(trained.model, test, opt.keep_embeddings);
    fr.model.emplace(std::move(trained.model));
    fr.normalizer = std::move(norm);
    fr.ok = true;
  } catch (const NumericalError& e) {
    fr.numerical_failure = true;
    fr.error = e.what();
  } catch (const std::exception& e) {
    fr.error = e.what();
  }
  return fr;
}

}  // namespace

LosoResult run_loso(std::span<const features::SegmentFeatures> rows, const LosoOptions& options) {
  options.train.validate();
  options.model.validate();
  std::vector<std::string> subjects;
  for (const auto& r : rows) subjects.push_back(r.subject);
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  const auto splits = loso_splits(subjects);

  LosoResult result;
  result.folds.resize(splits.size());
  const std::size_t workers = std::clamp<std::size_t>(options.jobs, 1, splits.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < splits.size();) result.folds[i] = run_fold(rows, splits[i], options);
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  result.summary = summarize(result.folds);
  return result;
}

}  // namespace mdeeg::train
