#include "csiloc/sim_harness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "csiloc/error.hpp"
#include "csiloc/io_util.hpp"

namespace csiloc {
namespace {

struct RouteTemplate {
  std::vector<PointMm> points;
  std::vector<double> speed_factors;  // per gap
  std::optional<std::size_t> jump_after;
};

// Unit-frame polylines; generate_route rescales them to the declared length.
RouteTemplate route_template(RouteKind kind) {
  switch (kind) {
    case RouteKind::UniformMotion:
      return {{{0.0, 0.0}, {1.0, 0.0}}, {1.0}, std::nullopt};
    case RouteKind::ObstacleAvoidance:
      // weaves around three implicit obstacles, slowing on the turns
      return {{{0.0, 0.0}, {0.9, 0.0}, {1.3, 0.5}, {2.2, 0.5}, {2.6, 0.0}, {3.2, 0.0}, {3.5, 0.4}},
              {1.0, 0.5, 1.0, 0.5, 1.0, 0.6},
              std::nullopt};
    case RouteKind::Kidnap:
      return {{{0.0, 0.0}, {1.0, 0.0}, {1.3, 0.4}, {2.0, 0.4}, {2.0, 3.0}, {2.6, 3.0}, {2.9, 2.6}, {3.5, 2.6}},
              {1.0, 0.5, 1.0, 0.0, 1.0, 0.5, 1.0},
              std::size_t{3}};
  }
  return {};
}

double travelled_length(const std::vector<PointMm>& pts, std::optional<std::size_t> jump_after) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (jump_after && *jump_after == i) continue;
    len += distance(pts[i], pts[i + 1]);
  }
  return len;
}

// Circular mean in (-pi, pi].
double circular_mean(double sum_sin, double sum_cos) {
  double a = std::atan2(sum_sin, sum_cos);
  if (a <= -std::numbers::pi) a = std::numbers::pi;
  return a;
}

const char* kalman_label(bool on) { return on ? "Yes" : "No"; }

}  // namespace

std::string_view to_string(RouteKind kind) noexcept {
  switch (kind) {
    case RouteKind::UniformMotion: return "UniformMotion";
    case RouteKind::ObstacleAvoidance: return "ObstacleAvoidance";
    case RouteKind::Kidnap: return "Kidnap";
  }
  return "?";
}

RouteKind route_kind_for_experiment(int experiment) {
  switch (experiment) {
    case 1: return RouteKind::UniformMotion;
    case 2: return RouteKind::ObstacleAvoidance;
    case 3: return RouteKind::Kidnap;
    default: throw Error(ErrorCode::ConfigError, "experiment must be 1, 2 or 3, got " + std::to_string(experiment));
  }
}

double declared_route_length(RouteKind kind) noexcept {
  switch (kind) {
    case RouteKind::UniformMotion: return 1429.0;
    case RouteKind::ObstacleAvoidance: return 1880.0;
    case RouteKind::Kidnap: return 1779.0;
  }
  return 0.0;
}

double Route::length() const { return travelled_length(waypoints, jump_after); }

Route generate_route(RouteKind kind, const Bounds& bounds, std::uint64_t seed, const RouteOptions& options) {
  if (!(options.scale > 0.0) || !(options.speed_mm_s > 0.0) || !(options.timestep_s > 0.0))
    throw Error(ErrorCode::InvalidRoute, "scale, speed and timestep must be > 0");
  const RouteTemplate tpl = route_template(kind);
  const double target_len = declared_route_length(kind) * options.scale;
  const double unit = target_len / travelled_length(tpl.points, tpl.jump_after);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> unit_u(0.0, 1.0);
  std::vector<PointMm> pts;
  bool placed = false;
  for (int attempt = 0; attempt < 256 && !placed; ++attempt) {
    const double th = angle(rng);
    const double c = std::cos(th);
    const double s = std::sin(th);
    pts.clear();
    for (const auto& p : tpl.points) pts.push_back({unit * (c * p.x - s * p.y), unit * (s * p.x + c * p.y)});
    double min_x = pts[0].x, max_x = pts[0].x, min_y = pts[0].y, max_y = pts[0].y;
    for (const auto& p : pts) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
    const double free_x = bounds.x.length() - (max_x - min_x);
    const double free_y = bounds.y.length() - (max_y - min_y);
    if (free_x < 0.0 || free_y < 0.0) continue;
    const double ox = bounds.x.lo - min_x + unit_u(rng) * free_x;
    const double oy = bounds.y.lo - min_y + unit_u(rng) * free_y;
    for (auto& p : pts) {
      p.x = std::clamp(p.x + ox, bounds.x.lo, bounds.x.hi);
      p.y = std::clamp(p.y + oy, bounds.y.lo, bounds.y.hi);
    }
    placed = true;
  }
  if (!placed)
    throw Error(ErrorCode::OutOfBounds, std::string(to_string(kind)) + " route of " + io::format_double(target_len) +
                                            " mm does not fit the scenario bounds");

  Route r;
  r.kind = kind;
  r.waypoints = pts;
  r.jump_after = tpl.jump_after;
  r.timestep_s = options.timestep_s;
  r.declared_length_mm = target_len;
  const double speed = options.speed_mm_s * options.scale;
  for (double f : tpl.speed_factors) r.segment_speeds.push_back(f * speed);

  // cumulative time at each waypoint; the teleport gap takes no time
  std::vector<double> t_at(pts.size(), 0.0);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const bool jump = tpl.jump_after && *tpl.jump_after == i;
    t_at[i + 1] = t_at[i] + (jump ? 0.0 : distance(pts[i], pts[i + 1]) / r.segment_speeds[i]);
  }
  if (tpl.jump_after) r.kidnap = KidnapEvent{t_at[*tpl.jump_after], pts[*tpl.jump_after + 1]};

  const double total = t_at.back();
  const auto n_steps = static_cast<std::size_t>(std::floor(total / options.timestep_s + 1e-9));
  r.samples.reserve(n_steps + 1);
  std::size_t seg = 0;
  for (std::size_t i = 0; i <= n_steps; ++i) {
    const double t = static_cast<double>(i) * options.timestep_s;
    while (seg + 2 < pts.size() && (t > t_at[seg + 1] || t_at[seg + 1] == t_at[seg])) ++seg;
    const double span = t_at[seg + 1] - t_at[seg];
    const double f = span > 0.0 ? std::clamp((t - t_at[seg]) / span, 0.0, 1.0) : 0.0;
    r.samples.push_back({t, {pts[seg].x + f * (pts[seg + 1].x - pts[seg].x), pts[seg].y + f * (pts[seg + 1].y - pts[seg].y)}});
  }
  return r;
}

std::vector<double> associate_csi(PointMm pos, const FingerprintTable& table, int k) {
  if (table.num_rows() == 0) throw Error(ErrorCode::EmptyTable, "fingerprint table is empty");
  if (k < 9) throw Error(ErrorCode::ConfigError, "k must be >= 9, got " + std::to_string(k));
  const std::size_t n = table.num_rows();
  const std::size_t take = std::min(n, static_cast<std::size_t>(k));

  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PointMm p = table.position(i);
    const double dx = p.x - pos.x;
    const double dy = p.y - pos.y;
    dist[i] = {dx * dx + dy * dy, i};
  }
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take - 1), dist.end());
  std::vector<std::size_t> chosen;
  chosen.reserve(take);
  for (std::size_t i = 0; i < take; ++i) chosen.push_back(dist[i].second);
  std::sort(chosen.begin(), chosen.end());

  const std::size_t nf = table.num_features();
  std::vector<double> sum(nf, 0.0);
  std::vector<double> sum_sin(nf, 0.0);
  std::vector<double> sum_cos(nf, 0.0);
  for (std::size_t r : chosen) {
    const auto f = table.features(r);
    for (std::size_t j = 0; j < nf; ++j) {
      if (FingerprintTable::is_argument_column(j)) {
        sum_sin[j] += std::sin(f[j]);
        sum_cos[j] += std::cos(f[j]);
      } else {
        sum[j] += f[j];
      }
    }
  }
  std::vector<double> out(nf);
  for (std::size_t j = 0; j < nf; ++j)
    out[j] = FingerprintTable::is_argument_column(j) ? circular_mean(sum_sin[j], sum_cos[j])
                                                     : sum[j] / static_cast<double>(take);
  return out;
}

int FpsTable::at(int antennas) const {
  const auto it = fps.find(antennas);
  if (it == fps.end())
    throw Error(ErrorCode::UnknownAntennaCount, "no FPS entry for " + std::to_string(antennas) + " antennas");
  return it->second;
}

void FpsTable::validate() const {
  for (const auto& [a, f] : fps)
    if (a < 1 || f < 1) throw Error(ErrorCode::ConfigError, "FPS table entries must be positive integers");
}

FpsTable FpsTable::paper() { return {{{8, 5}, {16, 4}, {32, 4}, {64, 3}}}; }

std::vector<TimedPoint> subsample(const Route& route, int antennas, const FpsTable& fps_table) {
  const int fps = fps_table.at(antennas);
  if (route.samples.empty()) return {};
  const double duration = route.duration();
  const auto count = static_cast<std::size_t>(std::floor(duration * fps + 1e-9)) + 1;
  std::vector<TimedPoint> out;
  out.reserve(count);
  std::size_t j = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / fps;
    while (j + 1 < route.samples.size() &&
           std::abs(route.samples[j + 1].t - t) <= std::abs(route.samples[j].t - t))
      ++j;
    out.push_back({t, route.samples[j].position});
  }
  return out;
}

double noise_fraction(NoiseLevel level) noexcept {
  switch (level) {
    case NoiseLevel::None: return 0.0;
    case NoiseLevel::Low: return 0.10;
    case NoiseLevel::Medium: return 0.20;
    case NoiseLevel::High: return 0.30;
  }
  return 0.0;
}

std::string_view to_string(NoiseLevel level) noexcept {
  switch (level) {
    case NoiseLevel::None: return "None";
    case NoiseLevel::Low: return "Low";
    case NoiseLevel::Medium: return "Medium";
    case NoiseLevel::High: return "High";
  }
  return "?";
}

NoiseLevel parse_noise_level(std::string_view name) {
  for (auto l : {NoiseLevel::None, NoiseLevel::Low, NoiseLevel::Medium, NoiseLevel::High})
    if (to_string(l) == name) return l;
  throw Error(ErrorCode::ConfigError, "unknown noise level '" + std::string(name) + "'");
}

std::vector<FeatureRange> feature_ranges(const FingerprintTable& table) {
  std::vector<FeatureRange> ranges;
  if (table.num_rows() == 0) return ranges;
  const auto first = table.features(0);
  for (double v : first) ranges.push_back({v, v});
  for (std::size_t r = 1; r < table.num_rows(); ++r) {
    const auto f = table.features(r);
    for (std::size_t j = 0; j < f.size(); ++j) {
      ranges[j].min = std::min(ranges[j].min, f[j]);
      ranges[j].max = std::max(ranges[j].max, f[j]);
    }
  }
  return ranges;
}

std::vector<double> draw_noise(std::size_t num_features, const NoiseSpec& spec, std::span<const FeatureRange> ranges,
                               std::uint64_t stream) {
  if (ranges.size() < num_features)
    throw Error(ErrorCode::RangeMissing, "ranges cover " + std::to_string(ranges.size()) + " of " +
                                             std::to_string(num_features) + " features");
  std::vector<double> out(num_features, 0.0);
  const double level = noise_fraction(spec.level);
  if (level == 0.0) return out;
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t j = 0; j < num_features; ++j) out[j] = level * (ranges[j].max - ranges[j].min) * normal(rng);
  return out;
}

std::vector<double> add_noise(std::span<const double> row, const NoiseSpec& spec, std::span<const FeatureRange> ranges,
                              std::uint64_t stream) {
  const auto noise = draw_noise(row.size(), spec, ranges, stream);
  std::vector<double> out(row.begin(), row.end());
  if (spec.level == NoiseLevel::None) return out;
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] += noise[j];
    out[j] = FingerprintTable::is_argument_column(j) ? wrap_angle(out[j]) : std::max(0.0, out[j]);
  }
  return out;
}

Predictor hynn_predictor(HynnParams model_x, HynnParams model_y) {
  auto models = std::make_shared<std::pair<HynnParams, HynnParams>>(std::move(model_x), std::move(model_y));
  return [models](const PredictionInput& in) {
    return predict_position(models->first, models->second, in.image, in.normalised);
  };
}

ExperimentResult run_experiment(const ExperimentInputs& in, int antennas, const NoiseSpec& noise, bool use_kalman) {
  if (!in.route || !in.table || !in.layout || !in.predictor)
    throw Error(ErrorCode::ConfigError, "experiment inputs are incomplete");
  const auto instants = subsample(*in.route, antennas, in.fps);
  const auto ranges = feature_ranges(*in.table);

  ExperimentResult result;
  result.trace.reserve(instants.size());
  std::vector<TimedPoint> measurements;
  measurements.reserve(instants.size());
  for (std::size_t i = 0; i < instants.size(); ++i) {
    try {
      const auto clean = associate_csi(instants[i].position, *in.table, in.k_neighbours);
      const auto noisy = add_noise(clean, noise, ranges, i);
      const auto normalised = in.layout->normalise(noisy);
      const SyntheticImage image = render(noisy, *in.layout, in.blur);
      const PointMm pred = in.predictor({instants[i].t, instants[i].position, noisy, normalised, image});
      result.trace.push_back({instants[i].t, instants[i].position, pred, pred});
      measurements.push_back({instants[i].t, pred});
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(i) + ": " + e.what());
    }
  }
  const auto filtered = run_filter(measurements, in.kalman);
  for (std::size_t i = 0; i < filtered.size(); ++i) result.trace[i].filtered = filtered[i].state.position();
  result.mean_error = mean_error(result.trace, use_kalman);
  return result;
}

double mean_error(std::span<const PointMm> truth, std::span<const PointMm> estimate) {
  if (truth.size() != estimate.size()) throw Error(ErrorCode::ShapeMismatch, "truth and estimate lengths differ");
  if (truth.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) sum += distance(truth[i], estimate[i]);
  return sum / static_cast<double>(truth.size());
}

double mean_error(std::span<const TraceRow> trace, bool use_kalman) {
  std::vector<PointMm> truth, est;
  truth.reserve(trace.size());
  est.reserve(trace.size());
  for (const auto& r : trace) {
    truth.push_back(r.truth);
    est.push_back(use_kalman ? r.filtered : r.prediction);
  }
  return mean_error(truth, est);
}

std::string trace_to_csv(std::span<const TraceRow> trace) {
  std::string out = "t_s,truth_x_mm,truth_y_mm,pred_x_mm,pred_y_mm,kf_x_mm,kf_y_mm\n";
  for (const auto& r : trace) {
    for (double v : {r.t, r.truth.x, r.truth.y, r.prediction.x, r.prediction.y, r.filtered.x}) {
      out += io::format_double(v);
      out.push_back(',');
    }
    out += io::format_double(r.filtered.y);
    out.push_back('\n');
  }
  return out;
}

std::vector<TraceRow> trace_from_csv(std::string_view text) {
  std::vector<TraceRow> rows;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto f = io::split(line, ',');
    double v[7];
    if (f.size() != 7) throw Error(ErrorCode::ParseError, "trace line " + std::to_string(line_no) + ": expected 7 fields");
    for (int i = 0; i < 7; ++i)
      if (!io::parse_double(f[static_cast<std::size_t>(i)], v[i]))
        throw Error(ErrorCode::ParseError, "trace line " + std::to_string(line_no) + ": bad number");
    rows.push_back({v[0], {v[1], v[2]}, {v[3], v[4]}, {v[5], v[6]}});
  }
  return rows;
}

std::string to_string(const ReportKey& key) {
  return std::string(to_string(key.noise)) + "/" + kalman_label(key.kalman) + "/" + std::to_string(key.antennas);
}

double EvalReport::at(NoiseLevel noise, bool use_kalman, int ant) const {
  const auto it = cells.find({noise, use_kalman, ant});
  if (it == cells.end()) throw Error(ErrorCode::IncompleteGrid, "missing cell " + to_string(ReportKey{noise, use_kalman, ant}));
  return it->second;
}

EvalReport build_report(int experiment, const std::map<ReportKey, double>& results, std::vector<NoiseLevel> noise_levels,
                        std::vector<bool> kalman, std::vector<int> antennas) {
  EvalReport r;
  r.experiment = experiment;
  r.noise_levels = std::move(noise_levels);
  r.kalman = std::move(kalman);
  r.antennas = std::move(antennas);
  for (auto n : r.noise_levels)
    for (bool k : r.kalman)
      for (int a : r.antennas) {
        const ReportKey key{n, k, a};
        const auto it = results.find(key);
        if (it == results.end()) throw Error(ErrorCode::IncompleteGrid, "missing cell " + to_string(key));
        if (!std::isfinite(it->second) || it->second < 0.0)
          throw Error(ErrorCode::RangeError, "cell " + to_string(key) + " is not a finite non-negative error");
        r.cells[key] = it->second;
      }
  return r;
}

std::string report_to_csv(const EvalReport& report) {
  std::string out = "noise_level,kalman_filter";
  for (int a : report.antennas) out += "," + std::to_string(a);
  out.push_back('\n');
  for (auto n : report.noise_levels)
    for (bool k : report.kalman) {
      out += std::string(to_string(n)) + "," + kalman_label(k);
      for (int a : report.antennas) out += "," + io::format_significant(report.at(n, k, a), 6);
      out.push_back('\n');
    }
  return out;
}

EvalReport report_from_csv(std::string_view text, int experiment) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    if (end > start) lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  if (lines.empty()) throw Error(ErrorCode::ParseError, "report: empty");
  const auto header = io::split(lines[0], ',');
  if (header.size() < 3 || header[0] != "noise_level" || header[1] != "kalman_filter")
    throw Error(ErrorCode::ParseError, "report: bad header");
  std::vector<int> antennas;
  for (std::size_t i = 2; i < header.size(); ++i) {
    double v;
    if (!io::parse_double(header[i], v)) throw Error(ErrorCode::ParseError, "report: bad antenna column");
    antennas.push_back(static_cast<int>(v));
  }
  std::vector<NoiseLevel> noise;
  std::vector<bool> kalman;
  std::map<ReportKey, double> cells;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = io::split(lines[li], ',');
    if (f.size() != header.size()) throw Error(ErrorCode::ParseError, "report line " + std::to_string(li + 1) + ": field count");
    const NoiseLevel n = parse_noise_level(f[0]);
    bool k;
    if (f[1] == "Yes") k = true;
    else if (f[1] == "No") k = false;
    else throw Error(ErrorCode::ParseError, "report line " + std::to_string(li + 1) + ": kalman must be Yes/No");
    if (std::find(noise.begin(), noise.end(), n) == noise.end()) noise.push_back(n);
    if (std::find(kalman.begin(), kalman.end(), k) == kalman.end()) kalman.push_back(k);
    for (std::size_t i = 0; i < antennas.size(); ++i) {
      double v;
      if (!io::parse_double(f[i + 2], v)) throw Error(ErrorCode::ParseError, "report line " + std::to_string(li + 1) + ": bad number");
      cells[{n, k, antennas[i]}] = v;
    }
  }
  return build_report(experiment, cells, noise, kalman, antennas);
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["experiment"] = report.experiment;
  j["antennas"] = report.antennas;
  auto& rows = j["rows"] = nlohmann::json::array();
  for (auto n : report.noise_levels)
    for (bool k : report.kalman) {
      nlohmann::json row;
      row["noise_level"] = std::string(to_string(n));
      row["kalman_filter"] = kalman_label(k);
      std::vector<double> cells;
      for (int a : report.antennas) cells.push_back(report.at(n, k, a));
      row["mean_error_mm"] = cells;
      rows.push_back(row);
    }
  return j.dump(1);
}

EvalReport report_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto antennas = j.at("antennas").get<std::vector<int>>();
    std::vector<NoiseLevel> noise;
    std::vector<bool> kalman;
    std::map<ReportKey, double> cells;
    for (const auto& row : j.at("rows")) {
      const NoiseLevel n = parse_noise_level(row.at("noise_level").get<std::string>());
      const bool k = row.at("kalman_filter").get<std::string>() == "Yes";
      if (std::find(noise.begin(), noise.end(), n) == noise.end()) noise.push_back(n);
      if (std::find(kalman.begin(), kalman.end(), k) == kalman.end()) kalman.push_back(k);
      const auto v = row.at("mean_error_mm").get<std::vector<double>>();
      if (v.size() != antennas.size()) throw Error(ErrorCode::ParseError, "report: row width mismatch");
      for (std::size_t i = 0; i < antennas.size(); ++i) cells[{n, k, antennas[i]}] = v[i];
    }
    return build_report(j.at("experiment").get<int>(), cells, noise, kalman, antennas);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report: ") + e.what());
  }
}

std::string report_to_markdown(const EvalReport& report) {
  std::string out = "### Experiment " + std::to_string(report.experiment) + " - mean error (mm)\n\n";
  out += "| Noise level | Kalman filter |";
  for (int a : report.antennas) out += " " + std::to_string(a) + " antennas |";
  out += "\n|---|---|";
  for (std::size_t i = 0; i < report.antennas.size(); ++i) out += "---|";
  out.push_back('\n');
  for (auto n : report.noise_levels)
    for (bool k : report.kalman) {
      out += "| " + std::string(to_string(n)) + " | " + kalman_label(k) + " |";
      for (int a : report.antennas) out += " " + io::format_significant(report.at(n, k, a), 6) + " |";
      out.push_back('\n');
    }
  return out;
}

}  // namespace csiloc
