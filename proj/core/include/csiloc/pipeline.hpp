#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csiloc/csi_data.hpp"
#include "csiloc/error.hpp"
#include "csiloc/hynn.hpp"
#include "csiloc/sim_harness.hpp"
#include "csiloc/state_est.hpp"

namespace csiloc {

struct ArrayConfig {
  int antennas = 16;
  PointMm first{-181.25, -250.0};
  PointMm step{57.5, 0.0};  // half a wavelength at the default carrier
  double carrier_hz = 2.61e9;
  double subcarrier_spacing_hz = 20e6;
  int subcarriers = 4;

  AntennaArray build() const;
};

/// External measurements to ingest instead of synthesising the channel.
struct IngestSource {
  std::filesystem::path data;
  std::filesystem::path layout;
};

struct ScenarioConfig {
  Interval x_span{0.0, 500.0};
  Interval y_span{0.0, 500.0};
  double grid_step_mm = 25.0;
  ArrayConfig array;
  ScatterModel scatter = default_scatter();
  std::optional<IngestSource> ingest;

  Bounds bounds() const { return {x_span, y_span}; }
  static ScatterModel default_scatter();
};

struct ImageConfig {
  int side = kDefaultImageSide;
  double blur_sigma = 1.0;
};

struct SimulationConfig {
  std::vector<int> experiments{1, 2, 3};
  std::vector<NoiseLevel> noise_levels{NoiseLevel::None, NoiseLevel::Low, NoiseLevel::Medium, NoiseLevel::High};
  std::vector<bool> kalman{false, true};
  int k_neighbours = 9;
  RouteOptions route{0.2, 100.0, 0.032};
};

struct SeedConfig {
  std::uint64_t channel = 7;
  std::uint64_t split = 1;
  std::uint64_t training = 1;
  std::uint64_t route = 1;
  std::uint64_t noise = 1;
};

/// Single source of truth for every stage. Defaults describe the desk-scale
/// scenario (500 x 500 mm at 25 mm, 16-element ULA, subsets 4/8/16).
struct PipelineConfig {
  ScenarioConfig scenario;
  ImageConfig image;
  std::vector<int> antenna_counts{4, 8, 16};
  HynnArchitecture network;  // num_features is derived per antenna count
  TrainConfig training{1e-2, 0.9, 16, 50, 15, 1};
  KalmanConfig kalman = default_kalman();
  SimulationConfig simulation;
  FpsTable fps_table{{{4, 5}, {8, 4}, {16, 4}}};
  SeedConfig seeds;
  std::filesystem::path output_dir = "csiloc_out";

  /// Throws ConfigError naming the offending field path.
  void validate() const;

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
  std::string dump() const;
  std::string hash() const;

  HynnArchitecture architecture_for(int antennas) const;
  TrainConfig training_for(int axis) const;
  BlurSpec blur() const { return {image.blur_sigma}; }

  static KalmanConfig default_kalman();
};

PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const PipelineConfig& config, const std::filesystem::path& path);

/// Rows the configured grid would produce, without generating it.
std::size_t planned_row_count(const PipelineConfig& config);

/// Artifact locations, all under the output directory.
struct ArtifactPaths {
  std::filesystem::path root;

  std::filesystem::path table() const { return root / "fingerprints.csv"; }
  std::filesystem::path gen_manifest() const { return root / "manifest_gen.json"; }
  std::filesystem::path model_dir(int antennas) const { return root / "models" / ("a" + std::to_string(antennas)); }
  std::filesystem::path layout(int antennas) const { return model_dir(antennas) / "layout.json"; }
  std::filesystem::path model(int antennas, int axis) const {
    return model_dir(antennas) / (axis == 0 ? "model_x.json" : "model_y.json");
  }
  std::filesystem::path metrics_json() const { return root / "metrics.json"; }
  std::filesystem::path metrics_csv() const { return root / "metrics.csv"; }
  std::filesystem::path train_manifest() const { return root / "manifest_train.json"; }
  std::filesystem::path bench() const { return root / "bench.json"; }
  std::filesystem::path trace(int experiment, const ReportKey& key) const;
  std::filesystem::path report_csv(int experiment) const;
  std::filesystem::path report_json(int experiment) const;
  std::filesystem::path sim_manifest() const { return root / "manifest_sim.json"; }
  std::filesystem::path summary() const { return root / "report.md"; }
};

struct GenDataResult {
  std::filesystem::path table;
  std::size_t rows = 0;
};

GenDataResult cmd_gen_data(const PipelineConfig& config, std::ostream& log);

struct TrainMetrics {
  std::map<int, double> test_mean_error;  // antennas -> mm
  std::map<int, double> validation_mse_x;
  std::map<int, double> validation_mse_y;
};

/// `table` defaults to the gen-data output.
TrainMetrics cmd_train(const PipelineConfig& config, std::optional<std::filesystem::path> table, std::ostream& log);

struct BenchEntry {
  int antennas;
  int samples;
  double min_s;
  double median_s;
  double max_s;
  int fps;
};

std::vector<BenchEntry> cmd_bench(const PipelineConfig& config, int samples, std::ostream& log);
std::string bench_to_json(const std::vector<BenchEntry>& entries);

std::map<int, EvalReport> cmd_simulate(const PipelineConfig& config, std::ostream& log);

/// One experiment run against the trained artifacts with explicit route and
/// noise seeds. The returned route is the one that was driven.
struct CellRun {
  Route route;
  ExperimentResult result;
};

CellRun simulate_cell(const PipelineConfig& config, int experiment, int antennas, NoiseLevel level,
                      std::uint64_t route_seed, std::uint64_t noise_seed);

/// Merges the per-experiment reports (plus metrics and bench results when
/// present) into one markdown document.
std::string cmd_report(const PipelineConfig& config, std::ostream& log);

/// 0 success, 1 validation, 2 runtime, 3 integrity mismatch.
int exit_code_for(ErrorCode code) noexcept;

}  // namespace csiloc
