#include <algorithm>
#include <cmath>
#include <set>

#include "csiloc/io_util.hpp"
#include "csiloc/pipeline.hpp"

namespace csiloc {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ConfigError, path + ": " + what);
}

// Reads known keys from one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(at(key), "wrong type (" + std::string(j_.at(key).type_name()) + ")");
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) fail(at(k), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json point_json(PointMm p) { return json::array({p.x, p.y}); }

PointMm point_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) fail(path, "expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json interval_json(Interval i) { return json::array({i.lo, i.hi}); }

Interval interval_from(const json& j, const std::string& path) {
  const PointMm p = point_from(j, path);
  return {p.x, p.y};
}

json complex_json(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

std::complex<double> complex_from(const json& j, const std::string& path) {
  const PointMm p = point_from(j, path);
  return {p.x, p.y};
}

template <int N>
json matrix_json(const Eigen::Matrix<double, N, N>& m) {
  json rows = json::array();
  for (int r = 0; r < N; ++r) {
    json row = json::array();
    for (int c = 0; c < N; ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

template <int N>
Eigen::Matrix<double, N, N> matrix_from(const json& j, const std::string& path) {
  Eigen::Matrix<double, N, N> m;
  if (!j.is_array() || j.size() != N) fail(path, "expected " + std::to_string(N) + " rows");
  for (int r = 0; r < N; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != N) fail(path, "expected " + std::to_string(N) + " columns");
    for (int c = 0; c < N; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) fail(path, "non-numeric entry");
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

}  // namespace

AntennaArray ArrayConfig::build() const {
  return AntennaArray::ula(antennas, first, step, carrier_hz, subcarrier_spacing_hz, subcarriers);
}

ScatterModel ScenarioConfig::default_scatter() {
  ScatterModel m;
  m.reflectors = {{{-300.0, 300.0}, {0.25, 0.1}}, {{800.0, 600.0}, {-0.2, 0.15}}, {{250.0, 900.0}, {0.15, -0.2}}};
  return m;
}

KalmanConfig PipelineConfig::default_kalman() {
  Eigen::Matrix2d r = Eigen::Matrix2d::Identity() * 10000.0;
  return KalmanConfig::from_noise(50.0, r, 400.0);
}

HynnArchitecture PipelineConfig::architecture_for(int antennas) const {
  HynnArchitecture a = network;
  a.image_side = image.side;
  a.num_features = 2 * antennas * scenario.array.subcarriers;
  return a;
}

TrainConfig PipelineConfig::training_for(int axis) const {
  TrainConfig t = training;
  t.seed = seeds.training + static_cast<std::uint64_t>(axis);
  return t;
}

void PipelineConfig::validate() const {
  const auto& s = scenario;
  if (!std::isfinite(s.x_span.lo) || !std::isfinite(s.x_span.hi) || s.x_span.hi < s.x_span.lo)
    fail("scenario.x_span", "expected finite [lo, hi] with lo <= hi");
  if (!std::isfinite(s.y_span.lo) || !std::isfinite(s.y_span.hi) || s.y_span.hi < s.y_span.lo)
    fail("scenario.y_span", "expected finite [lo, hi] with lo <= hi");
  if (!(s.grid_step_mm > 0.0) || !std::isfinite(s.grid_step_mm)) fail("scenario.grid_step_mm", "must be > 0");
  if (s.array.antennas < 1) fail("scenario.array.antennas", "must be >= 1");
  if (s.array.subcarriers < 1) fail("scenario.array.subcarriers", "must be >= 1");
  if (!(s.array.carrier_hz > 0.0)) fail("scenario.array.carrier_hz", "must be > 0");
  try {
    (void)s.array.build();
  } catch (const Error& e) {
    fail("scenario.array", e.what());
  }
  if (!(s.scatter.noise_floor >= 0.0) || !std::isfinite(s.scatter.noise_floor))
    fail("scenario.scatter.noise_floor", "must be finite and >= 0");

  if (image.side < 3) fail("image.side", "must be >= 3");
  if (!(image.blur_sigma > 0.0) || !std::isfinite(image.blur_sigma)) fail("image.blur_sigma", "must be finite and > 0");

  if (antenna_counts.empty()) fail("antenna_counts", "must not be empty");
  for (std::size_t i = 0; i < antenna_counts.size(); ++i) {
    const int n = antenna_counts[i];
    const std::string path = "antenna_counts[" + std::to_string(i) + "]";
    if (n < 1 || n > s.array.antennas || s.array.antennas % n != 0)
      fail(path, std::to_string(n) + " does not divide the array size " + std::to_string(s.array.antennas));
    if (!fps_table.fps.count(n)) fail("fps_table", "no entry for " + std::to_string(n) + " antennas");
  }
  if (std::set<int>(antenna_counts.begin(), antenna_counts.end()).size() != antenna_counts.size())
    fail("antenna_counts", "duplicate entries");

  try {
    architecture_for(antenna_counts.front()).validate();
  } catch (const Error& e) {
    fail("network", e.what());
  }
  try {
    training.validate();
  } catch (const Error& e) {
    fail("training", e.what());
  }
  try {
    kalman.validate();
  } catch (const Error& e) {
    fail("kalman", e.what());
  }
  try {
    fps_table.validate();
  } catch (const Error& e) {
    fail("fps_table", e.what());
  }

  const auto& sim = simulation;
  if (sim.experiments.empty()) fail("simulation.experiments", "must not be empty");
  for (int e : sim.experiments)
    if (e < 1 || e > 3) fail("simulation.experiments", "experiment " + std::to_string(e) + " is not 1, 2 or 3");
  if (sim.noise_levels.empty()) fail("simulation.noise_levels", "must not be empty");
  if (sim.kalman.empty()) fail("simulation.kalman", "must not be empty");
  if (sim.k_neighbours < 9) fail("simulation.k_neighbours", "must be >= 9");
  if (!(sim.route.scale > 0.0)) fail("simulation.route_scale", "must be > 0");
  if (!(sim.route.speed_mm_s > 0.0)) fail("simulation.speed_mm_s", "must be > 0");
  if (!(sim.route.timestep_s > 0.0)) fail("simulation.timestep_s", "must be > 0");
  if (output_dir.empty()) fail("output_dir", "must not be empty");
}

json PipelineConfig::to_json() const {
  json j;
  json reflectors = json::array();
  for (const auto& r : scenario.scatter.reflectors)
    reflectors.push_back({{"position", point_json(r.position)}, {"gain", complex_json(r.gain)}});
  j["scenario"] = {
      {"x_span", interval_json(scenario.x_span)},
      {"y_span", interval_json(scenario.y_span)},
      {"grid_step_mm", scenario.grid_step_mm},
      {"array",
       {{"antennas", scenario.array.antennas},
        {"first", point_json(scenario.array.first)},
        {"step", point_json(scenario.array.step)},
        {"carrier_hz", scenario.array.carrier_hz},
        {"subcarrier_spacing_hz", scenario.array.subcarrier_spacing_hz},
        {"subcarriers", scenario.array.subcarriers}}},
      {"scatter",
       {{"los_gain", complex_json(scenario.scatter.los_gain)},
        {"noise_floor", scenario.scatter.noise_floor},
        {"reflectors", reflectors}}},
  };
  if (scenario.ingest)
    j["scenario"]["ingest"] = {{"data", scenario.ingest->data.generic_string()},
                               {"layout", scenario.ingest->layout.generic_string()}};
  j["image"] = {{"side", image.side}, {"blur_sigma", image.blur_sigma}};
  j["antenna_counts"] = antenna_counts;
  j["network"] = {{"conv1_filters", network.conv1_filters}, {"conv2_filters", network.conv2_filters},
                  {"kernel", network.kernel},               {"dense1", network.dense1},
                  {"dense2", network.dense2},               {"head_width", network.head_width},
                  {"dropout", network.dropout},             {"bn_momentum", network.bn_momentum},
                  {"bn_epsilon", network.bn_epsilon}};
  j["training"] = {{"learning_rate", training.learning_rate},
                   {"momentum", training.momentum},
                   {"batch_size", training.batch_size},
                   {"max_epochs", training.max_epochs},
                   {"patience", training.patience}};
  j["kalman"] = {{"process_noise", kalman.process_noise},
                 {"measurement_noise", matrix_json<2>(kalman.measurement_noise)},
                 {"initial_covariance", matrix_json<4>(kalman.initial_covariance)}};
  json levels = json::array();
  for (auto l : simulation.noise_levels) levels.push_back(std::string(to_string(l)));
  json kalman_flags = json::array();
  for (bool k : simulation.kalman) kalman_flags.push_back(k);
  j["simulation"] = {{"experiments", simulation.experiments},
                     {"noise_levels", levels},
                     {"kalman", kalman_flags},
                     {"k_neighbours", simulation.k_neighbours},
                     {"route_scale", simulation.route.scale},
                     {"speed_mm_s", simulation.route.speed_mm_s},
                     {"timestep_s", simulation.route.timestep_s}};
  json fps = json::object();
  for (const auto& [a, f] : fps_table.fps) fps[std::to_string(a)] = f;
  j["fps_table"] = fps;
  j["seeds"] = {{"channel", seeds.channel},
                {"split", seeds.split},
                {"training", seeds.training},
                {"route", seeds.route},
                {"noise", seeds.noise}};
  j["output_dir"] = output_dir.generic_string();
  return j;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  Section root(j, "");
  if (root.has("scenario")) {
    Section s(root.raw("scenario"), "scenario");
    if (s.has("x_span")) c.scenario.x_span = interval_from(s.raw("x_span"), s.at("x_span"));
    if (s.has("y_span")) c.scenario.y_span = interval_from(s.raw("y_span"), s.at("y_span"));
    s.get("grid_step_mm", c.scenario.grid_step_mm);
    if (s.has("array")) {
      Section a(s.raw("array"), "scenario.array");
      a.get("antennas", c.scenario.array.antennas);
      if (a.has("first")) c.scenario.array.first = point_from(a.raw("first"), a.at("first"));
      if (a.has("step")) c.scenario.array.step = point_from(a.raw("step"), a.at("step"));
      a.get("carrier_hz", c.scenario.array.carrier_hz);
      a.get("subcarrier_spacing_hz", c.scenario.array.subcarrier_spacing_hz);
      a.get("subcarriers", c.scenario.array.subcarriers);
      a.finish();
    }
    if (s.has("scatter")) {
      Section m(s.raw("scatter"), "scenario.scatter");
      if (m.has("los_gain")) c.scenario.scatter.los_gain = complex_from(m.raw("los_gain"), m.at("los_gain"));
      m.get("noise_floor", c.scenario.scatter.noise_floor);
      if (m.has("reflectors")) {
        const auto& list = m.raw("reflectors");
        if (!list.is_array()) fail(m.at("reflectors"), "expected an array");
        c.scenario.scatter.reflectors.clear();
        for (std::size_t i = 0; i < list.size(); ++i) {
          const std::string path = m.at("reflectors") + "[" + std::to_string(i) + "]";
          Section r(list[i], path);
          if (!r.has("position") || !r.has("gain")) fail(path, "needs position and gain");
          c.scenario.scatter.reflectors.push_back(
              {point_from(r.raw("position"), r.at("position")), complex_from(r.raw("gain"), r.at("gain"))});
          r.finish();
        }
      }
      m.finish();
    }
    if (s.has("ingest")) {
      Section in(s.raw("ingest"), "scenario.ingest");
      std::string data, layout;
      in.get("data", data);
      in.get("layout", layout);
      if (data.empty() || layout.empty()) fail("scenario.ingest", "needs data and layout paths");
      c.scenario.ingest = IngestSource{data, layout};
      in.finish();
    }
    s.finish();
  }
  if (root.has("image")) {
    Section s(root.raw("image"), "image");
    s.get("side", c.image.side);
    s.get("blur_sigma", c.image.blur_sigma);
    s.finish();
  }
  root.get("antenna_counts", c.antenna_counts);
  if (root.has("network")) {
    Section s(root.raw("network"), "network");
    s.get("conv1_filters", c.network.conv1_filters);
    s.get("conv2_filters", c.network.conv2_filters);
    s.get("kernel", c.network.kernel);
    s.get("dense1", c.network.dense1);
    s.get("dense2", c.network.dense2);
    s.get("head_width", c.network.head_width);
    s.get("dropout", c.network.dropout);
    s.get("bn_momentum", c.network.bn_momentum);
    s.get("bn_epsilon", c.network.bn_epsilon);
    s.finish();
  }
  if (root.has("training")) {
    Section s(root.raw("training"), "training");
    s.get("learning_rate", c.training.learning_rate);
    s.get("momentum", c.training.momentum);
    s.get("batch_size", c.training.batch_size);
    s.get("max_epochs", c.training.max_epochs);
    s.get("patience", c.training.patience);
    s.finish();
  }
  if (root.has("kalman")) {
    Section s(root.raw("kalman"), "kalman");
    s.get("process_noise", c.kalman.process_noise);
    if (s.has("measurement_noise"))
      c.kalman.measurement_noise = matrix_from<2>(s.raw("measurement_noise"), s.at("measurement_noise"));
    if (s.has("initial_covariance"))
      c.kalman.initial_covariance = matrix_from<4>(s.raw("initial_covariance"), s.at("initial_covariance"));
    s.finish();
  }
  if (root.has("simulation")) {
    Section s(root.raw("simulation"), "simulation");
    s.get("experiments", c.simulation.experiments);
    if (s.has("noise_levels")) {
      std::vector<std::string> names;
      s.get("noise_levels", names);
      c.simulation.noise_levels.clear();
      for (const auto& n : names) {
        try {
          c.simulation.noise_levels.push_back(parse_noise_level(n));
        } catch (const Error&) {
          fail(s.at("noise_levels"), "unknown level '" + n + "'");
        }
      }
    }
    s.get("kalman", c.simulation.kalman);
    s.get("k_neighbours", c.simulation.k_neighbours);
    s.get("route_scale", c.simulation.route.scale);
    s.get("speed_mm_s", c.simulation.route.speed_mm_s);
    s.get("timestep_s", c.simulation.route.timestep_s);
    s.finish();
  }
  if (root.has("fps_table")) {
    const auto& f = root.raw("fps_table");
    if (!f.is_object()) fail("fps_table", "expected an object of antennas -> fps");
    c.fps_table.fps.clear();
    for (const auto& [k, v] : f.items()) {
      double a;
      if (!io::parse_double(k, a) || a != std::floor(a) || !v.is_number_integer())
        fail("fps_table." + k, "expected integer antennas -> integer fps");
      c.fps_table.fps[static_cast<int>(a)] = v.get<int>();
    }
  }
  if (root.has("seeds")) {
    Section s(root.raw("seeds"), "seeds");
    s.get("channel", c.seeds.channel);
    s.get("split", c.seeds.split);
    s.get("training", c.seeds.training);
    s.get("route", c.seeds.route);
    s.get("noise", c.seeds.noise);
    s.finish();
  }
  if (root.has("output_dir")) {
    std::string out;
    root.get("output_dir", out);
    c.output_dir = out;
  }
  root.finish();
  return c;
}

std::string PipelineConfig::dump() const { return to_json().dump(2) + "\n"; }

std::string PipelineConfig::hash() const { return io::sha256_hex(to_json().dump()); }

PipelineConfig load_config(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  PipelineConfig c = PipelineConfig::from_json(j);
  // relative ingest paths are taken from the config's directory
  if (c.scenario.ingest) {
    const auto base = path.parent_path();
    if (c.scenario.ingest->data.is_relative()) c.scenario.ingest->data = base / c.scenario.ingest->data;
    if (c.scenario.ingest->layout.is_relative()) c.scenario.ingest->layout = base / c.scenario.ingest->layout;
  }
  return c;
}

void save_config(const PipelineConfig& config, const std::filesystem::path& path) { io::write_file(path, config.dump()); }

std::size_t planned_row_count(const PipelineConfig& config) {
  return grid_count(config.scenario.x_span, config.scenario.y_span, config.scenario.grid_step_mm);
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IntegrityMismatch:
      return 3;
    case ErrorCode::IoError:
    case ErrorCode::NonFiniteActivation:
    case ErrorCode::NonFiniteGradient:
    case ErrorCode::Diverged:
    case ErrorCode::SingularInnovation:
    case ErrorCode::DegenerateSpread:
    case ErrorCode::DegenerateGeometry:
    case ErrorCode::OutOfBounds:
    case ErrorCode::IncompleteGrid:
      return 2;
    default:
      return 1;
  }
}

}  // namespace csiloc
