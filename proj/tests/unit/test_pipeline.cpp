#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "csiloc/pipeline.hpp"

using namespace csiloc;
namespace fs = std::filesystem;

namespace {

std::string config_error(const nlohmann::json& j) {
  try {
    PipelineConfig::from_json(j).validate();
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    return e.what();
  }
  FAIL("expected ConfigError");
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CSILOC_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("csiloc_pipeline_" + std::to_string(::getpid()));
  TempDir() {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config: JSON round trip") {
  PipelineConfig c;
  c.antenna_counts = {2, 16};
  c.fps_table.fps[2] = 6;
  c.seeds.noise = 99;
  c.simulation.noise_levels = {NoiseLevel::High};
  c.kalman = KalmanConfig::from_noise(3.5, Eigen::Matrix2d::Identity() * 42.0, 77.0);
  c.scenario.ingest = IngestSource{"data.csv", "layout.json"};
  const PipelineConfig back = PipelineConfig::from_json(c.to_json());
  CHECK(back.dump() == c.dump());
  CHECK(back.hash() == c.hash());
  CHECK(PipelineConfig{}.hash() != c.hash());
  CHECK_NOTHROW(PipelineConfig{}.validate());
  CHECK(planned_row_count(PipelineConfig{}) == 441);
}

TEST_CASE("config: validation names the field") {
  auto j = PipelineConfig{}.to_json();
  j["antenna_counts"] = {4, 3};
  CHECK(config_error(j).find("antenna_counts[1]") != std::string::npos);

  j = PipelineConfig{}.to_json();
  j["antenna_counts"] = {2};
  CHECK(config_error(j).find("fps_table") != std::string::npos);

  j = PipelineConfig{}.to_json();
  j["training"]["bogus"] = 1;
  CHECK(config_error(j).find("training.bogus") != std::string::npos);

  j = PipelineConfig{}.to_json();
  j["simulation"]["k_neighbours"] = 4;
  CHECK(config_error(j).find("simulation.k_neighbours") != std::string::npos);

  j = PipelineConfig{}.to_json();
  j["image"]["blur_sigma"] = "wide";
  CHECK(config_error(j).find("image.blur_sigma") != std::string::npos);

  j = PipelineConfig{}.to_json();
  j["kalman"]["process_noise"] = -1.0;
  CHECK(config_error(j).find("kalman") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ErrorCode::ConfigError) == 1);
  CHECK(exit_code_for(ErrorCode::ParseError) == 1);
  CHECK(exit_code_for(ErrorCode::IoError) == 2);
  CHECK(exit_code_for(ErrorCode::Diverged) == 2);
  CHECK(exit_code_for(ErrorCode::IntegrityMismatch) == 3);
}

TEST_CASE("cli: end to end on a small run") {
  TempDir tmp;
  const fs::path out = tmp.path / "run";
  const fs::path log = tmp.path / "log.txt";
  const std::string common = "-o " + out.string() + " --epochs 2 --antennas 4 --experiments 1,3 ";
  const ArtifactPaths paths{out};

  REQUIRE(run_cli(common + "gen-data", log) == 0);
  CHECK(fs::exists(paths.table()));
  CHECK(load_table_csv(paths.table()).num_rows() == 441);

  REQUIRE(run_cli(common + "train", log) == 0);
  CHECK(slurp(log).find("4 antennas: test ME") != std::string::npos);
  CHECK(fs::exists(paths.model(4, 0)));
  CHECK(fs::exists(paths.model(4, 1)));
  CHECK(fs::exists(paths.layout(4)));

  REQUIRE(run_cli(common + "simulate", log) == 0);
  for (int e : {1, 3}) {
    const EvalReport rep = report_from_json(slurp(paths.report_json(e)));
    CHECK(rep.cells.size() == 8);
    CHECK(fs::exists(paths.trace(e, {NoiseLevel::High, true, 4})));
  }

  REQUIRE(run_cli(common + "bench --samples 100", log) == 0);
  CHECK(fs::exists(paths.bench()));

  REQUIRE(run_cli(common + "report", log) == 0);
  CHECK(slurp(paths.summary()).find("Experiment 3") != std::string::npos);

  REQUIRE(run_cli(common + "config", log) == 0);
  const PipelineConfig printed = PipelineConfig::from_json(nlohmann::json::parse(slurp(log)));
  CHECK(printed.antenna_counts == std::vector<int>{4});
  CHECK(printed.training.max_epochs == 2);

  std::ofstream(paths.layout(4), std::ios::app) << " ";
  CHECK(run_cli(common + "simulate", log) == 3);
  CHECK(slurp(log).find("IntegrityMismatch") != std::string::npos);

  const fs::path bad = tmp.path / "bad.json";
  std::ofstream(bad) << R"({"image": {"side": 2}})";
  CHECK(run_cli("-c " + bad.string() + " -o " + out.string() + " config", log) == 1);
  CHECK(slurp(log).find("image.side") != std::string::npos);
  CHECK(run_cli("--no-such-flag", log) == 1);
}
