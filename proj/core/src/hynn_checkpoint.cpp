#include <nlohmann/json.hpp>

#include "csiloc/error.hpp"
#include "csiloc/hynn.hpp"
#include "csiloc/io_util.hpp"

namespace csiloc {
namespace {

constexpr const char* kFormat = "csiloc-hynn";
constexpr int kVersion = 1;

nlohmann::json arch_json(const HynnArchitecture& a) {
  return {{"image_side", a.image_side},       {"num_features", a.num_features}, {"conv1_filters", a.conv1_filters},
          {"conv2_filters", a.conv2_filters}, {"kernel", a.kernel},             {"dense1", a.dense1},
          {"dense2", a.dense2},               {"head_width", a.head_width},     {"dropout", a.dropout},
          {"bn_momentum", a.bn_momentum},     {"bn_epsilon", a.bn_epsilon}};
}

HynnArchitecture arch_from(const nlohmann::json& j) {
  HynnArchitecture a;
  a.image_side = j.value("image_side", a.image_side);
  a.num_features = j.value("num_features", a.num_features);
  a.conv1_filters = j.value("conv1_filters", a.conv1_filters);
  a.conv2_filters = j.value("conv2_filters", a.conv2_filters);
  a.kernel = j.value("kernel", a.kernel);
  a.dense1 = j.value("dense1", a.dense1);
  a.dense2 = j.value("dense2", a.dense2);
  a.head_width = j.value("head_width", a.head_width);
  a.dropout = j.value("dropout", a.dropout);
  a.bn_momentum = j.value("bn_momentum", a.bn_momentum);
  a.bn_epsilon = j.value("bn_epsilon", a.bn_epsilon);
  return a;
}

}  // namespace

std::string architecture_to_json(const HynnArchitecture& arch) { return arch_json(arch).dump(); }

HynnArchitecture architecture_from_json(std::string_view text) {
  try {
    return arch_from(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("architecture: ") + e.what());
  }
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["architecture"] = arch_json(ckpt.params.arch);
  j["layout_hash"] = ckpt.layout_hash;
  j["validation_mse"] = ckpt.validation_mse;
  j["target_offset"] = ckpt.params.target_offset;
  j["target_scale"] = ckpt.params.target_scale;
  j["values"] = ckpt.params.values;
  j["norm_state"] = ckpt.params.norm_state;
  return j.dump();
}

Checkpoint checkpoint_from_json(std::string_view text) {
  Checkpoint c;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != kFormat) throw Error(ErrorCode::ParseError, "not a csiloc checkpoint");
    if (j.at("version").get<int>() != kVersion)
      throw Error(ErrorCode::ParseError, "unsupported checkpoint version " + j.at("version").dump());
    c.params.arch = arch_from(j.at("architecture"));
    c.layout_hash = j.at("layout_hash").get<std::string>();
    c.validation_mse = j.at("validation_mse").get<double>();
    c.params.target_offset = j.at("target_offset").get<double>();
    c.params.target_scale = j.at("target_scale").get<double>();
    const auto values = j.at("values").get<std::vector<double>>();
    c.params.values.assign(values.begin(), values.end());
    const auto norm_state = j.at("norm_state").get<std::vector<double>>();
    c.params.norm_state.assign(norm_state.begin(), norm_state.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("checkpoint: ") + e.what());
  }
  // shape check against the declared architecture
  const auto slices = param_slices(c.params.arch);
  const auto expected = slices.back().offset + slices.back().size();
  if (c.params.values.size() != expected)
    throw Error(ErrorCode::ShapeMismatch, "checkpoint holds " + std::to_string(c.params.values.size()) +
                                              " values, architecture needs " + std::to_string(expected));
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_layout_hash) {
  Checkpoint c = checkpoint_from_json(io::read_file(path));
  if (c.layout_hash != expected_layout_hash)
    throw Error(ErrorCode::IntegrityMismatch, path.string() + ": layout hash " + c.layout_hash +
                                                  " does not match " + expected_layout_hash);
  return c;
}

}  // namespace csiloc
