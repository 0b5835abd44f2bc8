#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "csiloc/geometry.hpp"
#include "csiloc/image_synth.hpp"

namespace csiloc {

/// Hybrid CNN + MLP regressor with a scalar output.
///
/// CNN branch: two sub-branches over the synthetic image, each
///   conv(k x k, same) -> ELU -> pool 2x2 -> conv(k x k, same) -> ELU -> pool 2x2,
/// the first using max pooling, the second average pooling.
/// MLP branch: two sub-branches over the normalised feature row, each
///   dense -> batch norm -> ELU -> dropout -> dense -> batch norm -> ELU -> dropout.
/// Merge head: concat(all four) -> dense -> ELU -> dense(1), then the frozen
/// target affine y = target_offset + target_scale * out.
struct HynnArchitecture {
  int image_side = kDefaultImageSide;
  int num_features = 0;
  int conv1_filters = 8;
  int conv2_filters = 16;
  int kernel = 3;
  int dense1 = 64;
  int dense2 = 32;
  int head_width = 32;
  double dropout = 0.1;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  void validate() const;

  int pooled1() const noexcept { return image_side / 2; }
  int pooled2() const noexcept { return pooled1() / 2; }
  int cnn_flat() const noexcept { return conv2_filters * pooled2() * pooled2(); }
  int concat_width() const noexcept { return 2 * cnn_flat() + 2 * dense2; }

  friend bool operator==(const HynnArchitecture&, const HynnArchitecture&) = default;
};

enum class LayerKind { ConvWeight, ConvBias, DenseWeight, DenseBias, NormScale, NormShift, HeadWeight, HeadBias, OutputWeight, OutputBias };

/// Location of one tensor inside the flat parameter vector.
struct ParamSlice {
  std::string name;
  LayerKind kind;
  std::size_t offset;
  int rows;
  int cols;

  std::size_t size() const noexcept { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

std::vector<ParamSlice> param_slices(const HynnArchitecture& arch);

/// Flat buffers the kernels map slices of. A fixed base alignment keeps the
/// vectorised reduction order, and so the results, independent of the heap.
using AlignedValues = std::vector<double, Eigen::aligned_allocator<double>>;

/// All trainable weights as one flat vector (slices per `param_slices`), the
/// batch-norm running statistics, and the frozen target affine.
struct HynnParams {
  HynnArchitecture arch;
  AlignedValues values;
  AlignedValues norm_state;  // per norm layer: running mean then running variance
  double target_offset = 0.0;
  double target_scale = 1.0;

  friend bool operator==(const HynnParams&, const HynnParams&) = default;
};

/// Seeded He-uniform (Glorot for the output layer) initialisation, zero biases,
/// unit norm scales, running variance 1.
HynnParams init_params(const HynnArchitecture& arch, std::uint64_t seed);

/// Column-per-sample storage: images are side*side x n, features num_features x n.
struct HynnDataset {
  Eigen::MatrixXd images;
  Eigen::MatrixXd features;
  Eigen::VectorXd targets;

  Eigen::Index size() const noexcept { return images.cols(); }
  HynnDataset gather(std::span<const Eigen::Index> columns) const;
};

/// Batch-norm statistics observed in one training-mode pass, same layout as
/// HynnParams::norm_state.
using NormBatchStats = AlignedValues;

enum class Mode { Train, Inference };

struct ForwardResult {
  Eigen::VectorXd outputs;  // mm
  NormBatchStats batch_stats;
};

/// Batched forward pass. In Train mode dropout masks are drawn from
/// `dropout_seed` and normalisation uses batch statistics; in Inference mode
/// dropout is off and the running statistics are used.
ForwardResult forward_batch(const HynnParams& params, const Eigen::MatrixXd& images, const Eigen::MatrixXd& features,
                            Mode mode, std::uint64_t dropout_seed = 0);

double forward(const HynnParams& params, const SyntheticImage& image, std::span<const double> normalised_features,
               bool inference_mode, std::uint64_t dropout_seed = 0);

struct GradientResult {
  AlignedValues gradient;  // d(mean squared error, mm^2) / d(values)
  double loss = 0.0;       // mean squared error, mm^2
  Eigen::VectorXd outputs;
  NormBatchStats batch_stats;
};

/// Training-mode forward plus reverse pass over one batch. The same
/// `dropout_seed` reproduces the masks of `forward_batch(..., Mode::Train, seed)`.
GradientResult backward(const HynnParams& params, const Eigen::MatrixXd& images, const Eigen::MatrixXd& features,
                        const Eigen::VectorXd& targets, std::uint64_t dropout_seed);

/// Blends batch statistics into the running statistics with the configured momentum.
void update_norm_state(HynnParams& params, const NormBatchStats& batch_stats);

struct TrainConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int batch_size = 16;
  int max_epochs = 60;
  int patience = 8;
  std::uint64_t seed = 1;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochRecord {
  int epoch;
  double train_mse;      // mm^2, mean of training-mode batch losses
  double val_mse;        // mm^2, inference mode
  double best_val_mse;   // best so far
};

struct TrainResult {
  HynnParams params;     // lowest validation MSE seen
  std::vector<EpochRecord> log;
  int best_epoch = 0;
};

/// Mini-batch SGD with momentum on the MSE. Targets are standardised by the
/// training mean/std through the frozen output affine, so the step size is
/// independent of the coordinate range while the loss stays in mm^2.
TrainResult train(const HynnArchitecture& arch, const HynnDataset& train_set, const HynnDataset& val_set,
                  const TrainConfig& config);

double evaluate_mse(const HynnParams& params, const HynnDataset& data);

PointMm predict_position(const HynnParams& model_x, const HynnParams& model_y, const SyntheticImage& image,
                         std::span<const double> normalised_features);

/// Builds a dataset from rendered images and normalised features.
HynnDataset make_dataset(const FingerprintTable& table, const FeatureLayout& layout, const BlurSpec& blur, int axis);

struct Checkpoint {
  HynnParams params;
  std::string layout_hash;
  double validation_mse = 0.0;  // mm^2
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(std::string_view text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Fails with IntegrityMismatch when the stored layout hash differs from `expected_layout_hash`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_layout_hash);

std::string architecture_to_json(const HynnArchitecture& arch);
HynnArchitecture architecture_from_json(std::string_view text);

}  // namespace csiloc
