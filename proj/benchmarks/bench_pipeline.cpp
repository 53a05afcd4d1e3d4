#include <benchmark/benchmark.h>

#include "mdeeg/data.hpp"
#include "mdeeg/dsp.hpp"
#include "mdeeg/features.hpp"
#include "mdeeg/spectral.hpp"
#include "mdeeg/topomap.hpp"

namespace {

using namespace mdeeg;

const EegSegment& sample_segment() {
  static const auto segs = synth_generate(1, 2, 11);
  return segs.front();
}

void BM_Preprocess(benchmark::State& state) {
  const dsp::Preprocessor pre(kDefaultSampleRate);
  for (auto _ : state) benchmark::DoNotOptimize(pre(sample_segment()).data().data());
}
BENCHMARK(BM_Preprocess);

void BM_BandPowers(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(spectral::band_powers(sample_segment()));
}
BENCHMARK(BM_BandPowers);

void BM_DifferentialEntropy(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(spectral::de_features(sample_segment()));
}
BENCHMARK(BM_DifferentialEntropy);

void BM_MultiSpectralMap(benchmark::State& state) {
  const auto powers = spectral::band_powers(sample_segment());
  const auto layout = topo::ElectrodeLayout::standard();
  for (auto _ : state) benchmark::DoNotOptimize(topo::build_multispectral_map(powers, layout).values.data());
}
BENCHMARK(BM_MultiSpectralMap);

void BM_ExtractFeatures(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(features::extract_features(sample_segment()).raw.data());
}
BENCHMARK(BM_ExtractFeatures);

}  // namespace
BENCHMARK_MAIN();
