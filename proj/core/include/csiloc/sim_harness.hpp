#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csiloc/csi_data.hpp"
#include "csiloc/geometry.hpp"
#include "csiloc/hynn.hpp"
#include "csiloc/image_synth.hpp"
#include "csiloc/state_est.hpp"

namespace csiloc {

enum class RouteKind { UniformMotion, ObstacleAvoidance, Kidnap };

std::string_view to_string(RouteKind kind) noexcept;
RouteKind route_kind_for_experiment(int experiment);

/// Path length of each route kind at full scale, mm (teleport excluded).
double declared_route_length(RouteKind kind) noexcept;

struct KidnapEvent {
  double time_s;
  PointMm target;
};

struct RouteOptions {
  double scale = 1.0;          // applied to lengths and speed
  double speed_mm_s = 100.0;   // nominal speed before scaling
  double timestep_s = 0.032;
};

/// Waypoint polyline with per-segment speeds and the timed ground truth sampled
/// at the simulator timestep. For Kidnap routes the robot is teleported from
/// waypoint `jump_after` to waypoint `jump_after + 1` without traversing the gap.
struct Route {
  RouteKind kind = RouteKind::UniformMotion;
  std::vector<PointMm> waypoints;
  std::vector<double> segment_speeds;  // one per waypoint gap, mm/s (0 for the teleport gap)
  std::optional<KidnapEvent> kidnap;
  std::optional<std::size_t> jump_after;
  double timestep_s = 0.032;
  double declared_length_mm = 0.0;
  std::vector<TimedPoint> samples;

  /// Travelled polyline length, excluding the teleport.
  double length() const;
  double duration() const { return samples.empty() ? 0.0 : samples.back().t; }
};

Route generate_route(RouteKind kind, const Bounds& bounds, std::uint64_t seed, const RouteOptions& options = {});

/// Mean of the k nearest fingerprint rows (Euclidean, ties by row index).
/// Moduli are averaged arithmetically, arguments circularly. Neighbours are
/// accumulated in ascending row order.
std::vector<double> associate_csi(PointMm pos, const FingerprintTable& table, int k = 9);

/// Antenna count -> predictions per second.
struct FpsTable {
  std::map<int, int> fps;

  int at(int antennas) const;
  void validate() const;

  /// 8/16/32/64 antennas -> 5/4/4/3 predictions per second.
  static FpsTable paper();
};

std::vector<TimedPoint> subsample(const Route& route, int antennas, const FpsTable& fps_table);

enum class NoiseLevel { None, Low, Medium, High };

double noise_fraction(NoiseLevel level) noexcept;
std::string_view to_string(NoiseLevel level) noexcept;
NoiseLevel parse_noise_level(std::string_view name);

struct NoiseSpec {
  NoiseLevel level = NoiseLevel::None;
  std::uint64_t seed = 0;
};

struct FeatureRange {
  double min;
  double max;
};

std::vector<FeatureRange> feature_ranges(const FingerprintTable& table);

/// Raw zero-mean Gaussian perturbation, std = level * (max - min) per feature,
/// before clamping or wrapping. `stream` separates independent draws under one spec.
std::vector<double> draw_noise(std::size_t num_features, const NoiseSpec& spec, std::span<const FeatureRange> ranges,
                               std::uint64_t stream = 0);

/// `row` + draw_noise(...); moduli clamped at 0, arguments wrapped into (-pi, pi].
std::vector<double> add_noise(std::span<const double> row, const NoiseSpec& spec, std::span<const FeatureRange> ranges,
                              std::uint64_t stream = 0);

struct PredictionInput {
  double t;
  PointMm truth;
  std::span<const double> features;    // noisy polar row
  std::span<const double> normalised;  // same row through the layout's min-max scaling
  const SyntheticImage& image;
};

using Predictor = std::function<PointMm(const PredictionInput&)>;

Predictor hynn_predictor(HynnParams model_x, HynnParams model_y);

struct ExperimentInputs {
  const Route* route = nullptr;
  const FingerprintTable* table = nullptr;  // already subset to the antenna count
  const FeatureLayout* layout = nullptr;
  BlurSpec blur;
  FpsTable fps;
  KalmanConfig kalman;
  int k_neighbours = 9;
  Predictor predictor;
};

struct TraceRow {
  double t;
  PointMm truth;
  PointMm prediction;
  PointMm filtered;
};

struct ExperimentResult {
  std::vector<TraceRow> trace;
  double mean_error = 0.0;  // mm, over the raw or filtered column depending on use_kalman
};

/// Per prediction instant: associate -> add noise -> render -> predict, then
/// the Kalman filter over the whole prediction sequence.
ExperimentResult run_experiment(const ExperimentInputs& inputs, int antennas, const NoiseSpec& noise, bool use_kalman);

/// (1/N) * sum ||p - p_hat||.
double mean_error(std::span<const PointMm> truth, std::span<const PointMm> estimate);
double mean_error(std::span<const TraceRow> trace, bool use_kalman);

std::string trace_to_csv(std::span<const TraceRow> trace);
std::vector<TraceRow> trace_from_csv(std::string_view text);

struct ReportKey {
  NoiseLevel noise;
  bool kalman;
  int antennas;

  auto operator<=>(const ReportKey&) const = default;
};

std::string to_string(const ReportKey& key);

/// Mean-error grid: rows (noise level, Kalman off/on), columns antenna counts.
struct EvalReport {
  int experiment = 1;
  std::vector<NoiseLevel> noise_levels;
  std::vector<bool> kalman;
  std::vector<int> antennas;
  std::map<ReportKey, double> cells;

  double at(NoiseLevel noise, bool use_kalman, int antennas) const;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

EvalReport build_report(int experiment, const std::map<ReportKey, double>& results, std::vector<NoiseLevel> noise_levels,
                        std::vector<bool> kalman, std::vector<int> antennas);

/// Cells with 6 significant digits.
std::string report_to_csv(const EvalReport& report);
EvalReport report_from_csv(std::string_view text, int experiment);
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(std::string_view text);
std::string report_to_markdown(const EvalReport& report);

}  // namespace csiloc
