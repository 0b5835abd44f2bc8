#include <benchmark/benchmark.h>

#include <random>

#include "csiloc/csi_data.hpp"
#include "csiloc/hynn.hpp"
#include "csiloc/image_synth.hpp"
#include "csiloc/pipeline.hpp"
#include "csiloc/sim_harness.hpp"
#include "csiloc/state_est.hpp"

namespace {

using namespace csiloc;

const FingerprintTable& desk_table() {
  static const FingerprintTable table = [] {
    const PipelineConfig c;
    const AntennaArray array = c.scenario.array.build();
    ScatterModel model = c.scenario.scatter;
    std::vector<CsiMatrix> samples;
    for (const auto& p : grid_positions(c.scenario.x_span, c.scenario.y_span, c.scenario.grid_step_mm))
      samples.push_back(synth_csi(p, array, model));
    return build_table(array, samples);
  }();
  return table;
}

void BM_SynthCsi(benchmark::State& state) {
  const PipelineConfig c;
  const AntennaArray array = c.scenario.array.build();
  const ScatterModel model = c.scenario.scatter;
  double x = 10.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(synth_csi({x, 250.0}, array, model));
    x = x > 490.0 ? 10.0 : x + 1.0;
  }
}
BENCHMARK(BM_SynthCsi);

void BM_FitLayout(benchmark::State& state) {
  const FingerprintTable sub = subset_antennas(desk_table(), static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_layout(sub, 35));
}
BENCHMARK(BM_FitLayout)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Render(benchmark::State& state) {
  const FingerprintTable sub = subset_antennas(desk_table(), static_cast<int>(state.range(0)));
  const FeatureLayout layout = fit_layout(sub, 35);
  const auto row = sub.features(7);
  for (auto _ : state) benchmark::DoNotOptimize(render(row, layout, BlurSpec{1.0}));
}
BENCHMARK(BM_Render)->Arg(4)->Arg(8)->Arg(16);

// Single-sample inference of one axis model, the unit the FPS table is built from.
void BM_Forward(benchmark::State& state) {
  const int antennas = static_cast<int>(state.range(0));
  const PipelineConfig c;
  const FingerprintTable sub = subset_antennas(desk_table(), antennas);
  const FeatureLayout layout = fit_layout(sub, c.image.side);
  const HynnParams params = init_params(c.architecture_for(antennas), 1);
  const auto row = sub.features(3);
  const SyntheticImage image = render(row, layout, c.blur());
  const auto normalised = layout.normalise(row);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, image, normalised, true));
}
BENCHMARK(BM_Forward)->Arg(4)->Arg(8)->Arg(16)->Arg(64);

void BM_Backward(benchmark::State& state) {
  const PipelineConfig c;
  const int batch = static_cast<int>(state.range(0));
  const FingerprintTable sub = subset_antennas(desk_table(), 16);
  const FeatureLayout layout = fit_layout(sub, c.image.side);
  const HynnDataset data = make_dataset(sub, layout, c.blur(), 0);
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i) cols[static_cast<std::size_t>(i)] = i;
  const HynnDataset b = data.gather(cols);
  HynnParams params = init_params(c.architecture_for(16), 1);
  params.target_offset = 250.0;
  params.target_scale = 150.0;
  for (auto _ : state) benchmark::DoNotOptimize(backward(params, b.images, b.features, b.targets, 9));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_Backward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_AssociateCsi(benchmark::State& state) {
  const FingerprintTable& table = desk_table();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 500.0);
  for (auto _ : state) benchmark::DoNotOptimize(associate_csi({u(rng), u(rng)}, table, 9));
}
BENCHMARK(BM_AssociateCsi);

void BM_KalmanTrack(benchmark::State& state) {
  const KalmanConfig config = PipelineConfig::default_kalman();
  std::vector<TimedPoint> track;
  for (int i = 0; i < 300; ++i) track.push_back({0.2 * i, {4.0 * i, 100.0 + 2.0 * i}});
  for (auto _ : state) benchmark::DoNotOptimize(run_filter(track, config));
  state.SetItemsProcessed(state.iterations() * 300);
}
BENCHMARK(BM_KalmanTrack);

}  // namespace

BENCHMARK_MAIN();
