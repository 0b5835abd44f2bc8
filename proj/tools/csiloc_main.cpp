#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "csiloc/pipeline.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::vector<int> antennas;
  std::vector<int> experiments;
};

csiloc::PipelineConfig resolve(const Overrides& o) {
  csiloc::PipelineConfig c = o.config_path.empty() ? csiloc::PipelineConfig{} : csiloc::load_config(o.config_path);
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.seed) c.seeds = {*o.seed, *o.seed, *o.seed, *o.seed, *o.seed};
  if (o.epochs) c.training.max_epochs = *o.epochs;
  if (!o.antennas.empty()) c.antenna_counts = o.antennas;
  if (!o.experiments.empty()) c.simulation.experiments = o.experiments;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSI fingerprinting localisation pipeline"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("-c,--config", o.config_path, "JSON pipeline config (defaults to the desk-scale scenario)");
  app.add_option("-o,--out", o.out, "Output directory (overrides output_dir)");
  app.add_option("--seed", o.seed, "Use this value for every seed");
  app.add_option("--epochs", o.epochs, "Override training.max_epochs");
  app.add_option("--antennas", o.antennas, "Override antenna_counts")->delimiter(',');
  app.add_option("--experiments", o.experiments, "Override simulation.experiments")->delimiter(',');

  auto* config_cmd = app.add_subcommand("config", "Print the resolved configuration");
  auto* gen = app.add_subcommand("gen-data", "Synthesise or ingest the fingerprint table");
  auto* train = app.add_subcommand("train", "Train the X and Y models for every antenna count");
  std::string table;
  train->add_option("--table", table, "Fingerprint CSV (default: <out>/fingerprints.csv)");
  auto* bench = app.add_subcommand("bench", "Measure single-sample prediction rate");
  int samples = 200;
  bench->add_option("--samples", samples, "Inferences per antenna count (>= 100)");
  auto* simulate = app.add_subcommand("simulate", "Run the experiment grid and write traces and reports");
  auto* report = app.add_subcommand("report", "Merge the experiment reports into report.md");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const csiloc::PipelineConfig c = resolve(o);
    if (config_cmd->parsed()) {
      std::cout << c.dump();
    } else if (gen->parsed()) {
      csiloc::cmd_gen_data(c, std::cerr);
    } else if (train->parsed()) {
      std::optional<std::filesystem::path> t;
      if (!table.empty()) t = table;
      const auto metrics = csiloc::cmd_train(c, t, std::cerr);
      for (const auto& [a, me] : metrics.test_mean_error) std::cout << a << " antennas: test ME " << me << " mm\n";
    } else if (bench->parsed()) {
      std::cout << csiloc::bench_to_json(csiloc::cmd_bench(c, samples, std::cerr));
    } else if (simulate->parsed()) {
      csiloc::cmd_simulate(c, std::cerr);
    } else if (report->parsed()) {
      std::cout << csiloc::cmd_report(c, std::cerr);
    }
  } catch (const csiloc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return csiloc::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
