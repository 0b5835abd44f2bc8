#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>

#include "csiloc/image_synth.hpp"
#include "csiloc/io_util.hpp"
#include "csiloc/pipeline.hpp"

namespace csiloc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string relative_key(const ArtifactPaths& paths, const fs::path& p) {
  return p.lexically_relative(paths.root).generic_string();
}

void write_manifest(const fs::path& path, const std::string& stage, const PipelineConfig& config, const json& inputs,
                    const json& artifacts) {
  json j;
  j["stage"] = stage;
  j["config_hash"] = config.hash();
  j["seeds"] = config.to_json().at("seeds");
  j["inputs"] = inputs;
  j["artifacts"] = artifacts;
  io::write_file(path, j.dump(2) + "\n");
}

json read_manifest(const fs::path& path) {
  const std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IntegrityMismatch, path.string() + ": unreadable manifest (" + e.what() + ")");
  }
}

void check_hash(const fs::path& file, const std::string& expected, const std::string& label) {
  if (!fs::exists(file)) throw Error(ErrorCode::IntegrityMismatch, label + ": missing file " + file.string());
  const std::string actual = io::sha256_file(file);
  if (actual != expected)
    throw Error(ErrorCode::IntegrityMismatch, label + ": hash mismatch (manifest " + expected + ", file " + actual + ")");
}

// Verifies every artifact recorded by train and returns the table path it consumed.
fs::path verify_train_manifest(const ArtifactPaths& paths) {
  const fs::path manifest_path = paths.train_manifest();
  if (!fs::exists(manifest_path))
    throw Error(ErrorCode::IntegrityMismatch, "missing " + manifest_path.string() + "; run train first");
  const json m = read_manifest(manifest_path);
  try {
    for (const auto& [key, hash] : m.at("artifacts").items()) check_hash(paths.root / key, hash.get<std::string>(), key);
    const auto& table = m.at("inputs").at("table");
    const fs::path table_path = table.at("path").get<std::string>();
    check_hash(table_path, table.at("sha256").get<std::string>(), "table " + table_path.string());
    return table_path;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IntegrityMismatch, manifest_path.string() + ": malformed (" + e.what() + ")");
  }
}

struct LoadedModels {
  FeatureLayout layout;
  HynnParams model_x;
  HynnParams model_y;
};

LoadedModels load_models(const ArtifactPaths& paths, int antennas) {
  LoadedModels m;
  const fs::path layout_path = paths.layout(antennas);
  m.layout = FeatureLayout::from_json(io::read_file(layout_path));
  const std::string hash = io::sha256_file(layout_path);
  if (hash != m.layout.hash())
    throw Error(ErrorCode::IntegrityMismatch, layout_path.string() + ": file is not in canonical form");
  m.model_x = load_checkpoint(paths.model(antennas, 0), hash).params;
  m.model_y = load_checkpoint(paths.model(antennas, 1), hash).params;
  return m;
}

std::uint64_t cell_seed(std::uint64_t base, int experiment, int antennas, NoiseLevel level) {
  std::uint64_t z = base;
  for (std::uint64_t v : {static_cast<std::uint64_t>(experiment), static_cast<std::uint64_t>(antennas),
                          static_cast<std::uint64_t>(level)}) {
    z = (z ^ v) + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
  }
  return z;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

fs::path ArtifactPaths::trace(int experiment, const ReportKey& key) const {
  return root / "traces" / ("exp" + std::to_string(experiment)) /
         (std::string(to_string(key.noise)) + (key.kalman ? "_kf" : "_raw") + "_a" + std::to_string(key.antennas) +
          ".csv");
}

fs::path ArtifactPaths::report_csv(int experiment) const {
  return root / "reports" / ("exp" + std::to_string(experiment) + ".csv");
}

fs::path ArtifactPaths::report_json(int experiment) const {
  return root / "reports" / ("exp" + std::to_string(experiment) + ".json");
}

GenDataResult cmd_gen_data(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  const ArtifactPaths paths{config.output_dir};
  FingerprintTable table;
  if (config.scenario.ingest) {
    log << "ingesting " << config.scenario.ingest->data.string() << "\n";
    table = ingest_external(config.scenario.ingest->data, config.scenario.ingest->layout);
  } else {
    const AntennaArray array = config.scenario.array.build();
    ScatterModel model = config.scenario.scatter;
    model.noise_seed = config.seeds.channel;
    const auto positions = grid_positions(config.scenario.x_span, config.scenario.y_span, config.scenario.grid_step_mm);
    log << "synthesising " << positions.size() << " positions x " << array.num_antennas() << " antennas x "
        << array.num_subcarriers() << " subcarriers\n";
    std::vector<CsiMatrix> samples;
    samples.reserve(positions.size());
    for (const auto& p : positions) samples.push_back(synth_csi(p, array, model));
    table = build_table(array, samples);
  }
  save_table_csv(table, paths.table());
  write_manifest(paths.gen_manifest(), "gen-data", config, json::object(),
                 {{relative_key(paths, paths.table()), io::sha256_file(paths.table())}});
  log << "wrote " << paths.table().string() << " (" << table.num_rows() << " rows)\n";
  return {paths.table(), table.num_rows()};
}

TrainMetrics cmd_train(const PipelineConfig& config, std::optional<fs::path> table_path, std::ostream& log) {
  config.validate();
  const ArtifactPaths paths{config.output_dir};
  const fs::path source = table_path.value_or(paths.table());
  const FingerprintTable table = load_table_csv(source);
  if (table.num_antennas() != config.scenario.array.antennas)
    throw Error(ErrorCode::ConfigError, "scenario.array.antennas: table has " + std::to_string(table.num_antennas()) +
                                            " antennas, config says " + std::to_string(config.scenario.array.antennas));

  TrainMetrics metrics;
  json artifacts = json::object();
  const BlurSpec blur = config.blur();
  for (int a : config.antenna_counts) {
    const FingerprintTable sub = subset_antennas(table, a);
    const TableSplit parts = split(sub, config.seeds.split);
    const FeatureLayout layout = fit_layout(parts.train, config.image.side);
    const std::string layout_text = layout.to_json();
    io::write_file(paths.layout(a), layout_text);
    const std::string layout_hash = io::sha256_hex(layout_text);
    artifacts[relative_key(paths, paths.layout(a))] = layout_hash;

    HynnParams models[2];
    for (int axis = 0; axis < 2; ++axis) {
      const char* name = axis == 0 ? "model_x" : "model_y";
      const HynnDataset train_set = make_dataset(parts.train, layout, blur, axis);
      const HynnDataset val_set = make_dataset(parts.validation, layout, blur, axis);
      TrainResult result;
      try {
        result = train(config.architecture_for(a), train_set, val_set, config.training_for(axis));
      } catch (const Error& e) {
        throw Error(e.code(), "a" + std::to_string(a) + " " + name + ": " + e.what());
      }
      const double best = result.log.at(static_cast<std::size_t>(result.best_epoch - 1)).val_mse;
      (axis == 0 ? metrics.validation_mse_x : metrics.validation_mse_y)[a] = best;
      log << "a" << a << " " << name << ": best epoch " << result.best_epoch << " of " << result.log.size()
          << ", validation RMSE " << io::format_significant(std::sqrt(best), 4) << " mm\n";
      save_checkpoint({result.params, layout_hash, best}, paths.model(a, axis));
      artifacts[relative_key(paths, paths.model(a, axis))] = io::sha256_file(paths.model(a, axis));
      models[axis] = std::move(result.params);
    }

    std::vector<PointMm> truth, estimate;
    for (std::size_t r = 0; r < parts.test.num_rows(); ++r) {
      const auto row = parts.test.features(r);
      const SyntheticImage image = render(row, layout, blur);
      estimate.push_back(predict_position(models[0], models[1], image, layout.normalise(row)));
      truth.push_back(parts.test.position(r));
    }
    metrics.test_mean_error[a] = mean_error(truth, estimate);
    log << "a" << a << ": test ME " << io::format_significant(metrics.test_mean_error[a], 6) << " mm over "
        << truth.size() << " rows\n";
  }

  json mj;
  mj["metric"] = "HyNN ME (mm), test split";
  mj["antennas"] = config.antenna_counts;
  std::vector<double> me, vx, vy;
  std::string csv = "model";
  std::string row = "HyNN ME";
  for (int a : config.antenna_counts) {
    me.push_back(metrics.test_mean_error[a]);
    vx.push_back(metrics.validation_mse_x[a]);
    vy.push_back(metrics.validation_mse_y[a]);
    csv += "," + std::to_string(a);
    row += "," + io::format_significant(metrics.test_mean_error[a], 6);
  }
  mj["test_mean_error_mm"] = me;
  mj["validation_mse_x_mm2"] = vx;
  mj["validation_mse_y_mm2"] = vy;
  io::write_file(paths.metrics_json(), mj.dump(2) + "\n");
  io::write_file(paths.metrics_csv(), csv + "\n" + row + "\n");
  artifacts[relative_key(paths, paths.metrics_json())] = io::sha256_file(paths.metrics_json());
  artifacts[relative_key(paths, paths.metrics_csv())] = io::sha256_file(paths.metrics_csv());

  const json inputs = {{"table", {{"path", source.generic_string()}, {"sha256", io::sha256_file(source)}}}};
  write_manifest(paths.train_manifest(), "train", config, inputs, artifacts);
  return metrics;
}

std::vector<BenchEntry> cmd_bench(const PipelineConfig& config, int samples, std::ostream& log) {
  config.validate();
  if (samples < 100) throw Error(ErrorCode::ConfigError, "bench needs at least 100 samples, got " + std::to_string(samples));
  const ArtifactPaths paths{config.output_dir};
  const BlurSpec blur = config.blur();
  std::vector<BenchEntry> out;
  for (int a : config.antenna_counts) {
    const LoadedModels m = load_models(paths, a);
    std::vector<double> row(m.layout.num_features());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = 0.5 * (m.layout.feature_min[j] + m.layout.feature_max[j]);
    auto once = [&] {
      const SyntheticImage image = render(row, m.layout, blur);
      return predict_position(m.model_x, m.model_y, image, m.layout.normalise(row));
    };
    for (int i = 0; i < 5; ++i) (void)once();
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      const PointMm p = once();
      const auto t1 = std::chrono::steady_clock::now();
      if (!std::isfinite(p.x)) throw Error(ErrorCode::NonFiniteActivation, "bench prediction is not finite");
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    const double med = median(times);
    BenchEntry e{a, samples, *std::min_element(times.begin(), times.end()), med,
                 *std::max_element(times.begin(), times.end()), std::max(1, static_cast<int>(std::floor(1.0 / med)))};
    log << "a" << a << ": median " << io::format_significant(med * 1e3, 4) << " ms -> " << e.fps << " fps\n";
    out.push_back(e);
  }
  io::write_file(paths.bench(), bench_to_json(out));
  return out;
}

std::string bench_to_json(const std::vector<BenchEntry>& entries) {
  json j;
  json list = json::array();
  json fps = json::object();
  for (const auto& e : entries) {
    list.push_back({{"antennas", e.antennas},
                    {"samples", e.samples},
                    {"min_s", e.min_s},
                    {"median_s", e.median_s},
                    {"max_s", e.max_s},
                    {"fps", e.fps}});
    fps[std::to_string(e.antennas)] = e.fps;
  }
  j["entries"] = list;
  j["fps_table"] = fps;
  return j.dump(2) + "\n";
}

std::map<int, EvalReport> cmd_simulate(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  const ArtifactPaths paths{config.output_dir};
  const fs::path table_path = verify_train_manifest(paths);
  const FingerprintTable table = load_table_csv(table_path);

  struct PerAntenna {
    FingerprintTable table;
    LoadedModels models;
    Predictor predictor;
  };
  std::map<int, PerAntenna> per;
  for (int a : config.antenna_counts) {
    if (!fs::exists(paths.layout(a)))
      throw Error(ErrorCode::IntegrityMismatch, "no trained models for " + std::to_string(a) + " antennas");
    LoadedModels m = load_models(paths, a);
    Predictor p = hynn_predictor(m.model_x, m.model_y);
    per.emplace(a, PerAntenna{subset_antennas(table, a), std::move(m), std::move(p)});
  }

  std::map<int, EvalReport> reports;
  json artifacts = json::object();
  for (int e : config.simulation.experiments) {
    const RouteKind kind = route_kind_for_experiment(e);
    const Route route = generate_route(kind, config.scenario.bounds(), config.seeds.route + static_cast<std::uint64_t>(e),
                                       config.simulation.route);
    log << "experiment " << e << " (" << to_string(kind) << "): " << io::format_significant(route.length(), 6)
        << " mm, " << io::format_significant(route.duration(), 4) << " s\n";
    std::map<ReportKey, double> cells;
    for (int a : config.antenna_counts) {
      const PerAntenna& pa = per.at(a);
      ExperimentInputs in;
      in.route = &route;
      in.table = &pa.table;
      in.layout = &pa.models.layout;
      in.blur = config.blur();
      in.fps = config.fps_table;
      in.kalman = config.kalman;
      in.k_neighbours = config.simulation.k_neighbours;
      in.predictor = pa.predictor;
      for (NoiseLevel level : config.simulation.noise_levels) {
        const NoiseSpec noise{level, cell_seed(config.seeds.noise, e, a, level)};
        ExperimentResult result;
        try {
          result = run_experiment(in, a, noise, false);
        } catch (const Error& err) {
          throw Error(err.code(), "experiment " + std::to_string(e) + " cell " +
                                      to_string(ReportKey{level, false, a}) + ": " + err.what());
        }
        const std::string text = trace_to_csv(result.trace);
        for (bool k : config.simulation.kalman) {
          const ReportKey key{level, k, a};
          cells[key] = mean_error(result.trace, k);
          const fs::path trace_path = paths.trace(e, key);
          io::write_file(trace_path, text);
          artifacts[relative_key(paths, trace_path)] = io::sha256_hex(text);
        }
      }
    }
    EvalReport report =
        build_report(e, cells, config.simulation.noise_levels, config.simulation.kalman, config.antenna_counts);
    io::write_file(paths.report_csv(e), report_to_csv(report));
    io::write_file(paths.report_json(e), report_to_json(report));
    artifacts[relative_key(paths, paths.report_csv(e))] = io::sha256_file(paths.report_csv(e));
    artifacts[relative_key(paths, paths.report_json(e))] = io::sha256_file(paths.report_json(e));
    log << report_to_markdown(report) << "\n";
    reports.emplace(e, std::move(report));
  }
  const json inputs = {{relative_key(paths, paths.train_manifest()), io::sha256_file(paths.train_manifest())}};
  write_manifest(paths.sim_manifest(), "simulate", config, inputs, artifacts);
  return reports;
}

CellRun simulate_cell(const PipelineConfig& config, int experiment, int antennas, NoiseLevel level,
                      std::uint64_t route_seed, std::uint64_t noise_seed) {
  config.validate();
  const ArtifactPaths paths{config.output_dir};
  const FingerprintTable table = subset_antennas(load_table_csv(verify_train_manifest(paths)), antennas);
  const LoadedModels m = load_models(paths, antennas);
  CellRun run;
  run.route = generate_route(route_kind_for_experiment(experiment), config.scenario.bounds(), route_seed,
                             config.simulation.route);
  ExperimentInputs in;
  in.route = &run.route;
  in.table = &table;
  in.layout = &m.layout;
  in.blur = config.blur();
  in.fps = config.fps_table;
  in.kalman = config.kalman;
  in.k_neighbours = config.simulation.k_neighbours;
  in.predictor = hynn_predictor(m.model_x, m.model_y);
  run.result = run_experiment(in, antennas, {level, noise_seed}, true);
  return run;
}

std::string cmd_report(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  const ArtifactPaths paths{config.output_dir};
  std::string md = "# Localisation report\n\n";
  if (fs::exists(paths.metrics_csv())) {
    const std::string text = io::read_file(paths.metrics_csv());
    const auto nl = text.find('\n');
    const auto header = io::split(std::string_view(text).substr(0, nl), ',');
    const auto row = io::split(std::string_view(text).substr(nl + 1, text.find('\n', nl + 1) - nl - 1), ',');
    md += "## Test-split mean error (mm)\n\n|";
    for (std::size_t i = 0; i < header.size(); ++i) md += " " + std::string(i == 0 ? "Model" : header[i]) + " |";
    md += "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) md += "---|";
    md += "\n|";
    for (const auto& f : row) md += " " + std::string(f) + " |";
    md += "\n\n";
  }
  if (fs::exists(paths.bench())) {
    const json b = json::parse(io::read_file(paths.bench()));
    md += "## Prediction rate\n\n| Antennas | Median (ms) | FPS |\n|---|---|---|\n";
    for (const auto& e : b.at("entries"))
      md += "| " + std::to_string(e.at("antennas").get<int>()) + " | " +
            io::format_significant(e.at("median_s").get<double>() * 1e3, 4) + " | " +
            std::to_string(e.at("fps").get<int>()) + " |\n";
    md += "\n";
  }
  md += "## Simulation\n\n";
  for (int e : config.simulation.experiments) {
    const fs::path p = paths.report_csv(e);
    if (!fs::exists(p)) throw Error(ErrorCode::IoError, "missing report " + p.string() + "; run simulate first");
    md += report_to_markdown(report_from_csv(io::read_file(p), e)) + "\n";
  }
  io::write_file(paths.summary(), md);
  log << "wrote " << paths.summary().string() << "\n";
  return md;
}

}  // namespace csiloc
