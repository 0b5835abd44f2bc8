#include <cmath>
#include <numeric>
#include <random>

#include "csiloc/error.hpp"
#include "csiloc/hynn.hpp"

namespace csiloc {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::ConfigError, "learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorCode::ConfigError, "momentum must be in [0, 1)");
  if (batch_size < 1) throw Error(ErrorCode::ConfigError, "batch_size must be >= 1");
  if (max_epochs < 1) throw Error(ErrorCode::ConfigError, "max_epochs must be >= 1");
  if (patience < 1) throw Error(ErrorCode::ConfigError, "patience must be >= 1");
}

double evaluate_mse(const HynnParams& params, const HynnDataset& data) {
  constexpr Eigen::Index kChunk = 32;
  const Eigen::Index n = data.size();
  if (n == 0) throw Error(ErrorCode::EmptyBatch, "evaluation set is empty");
  double sum = 0.0;
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - start);
    const auto r = forward_batch(params, data.images.middleCols(start, len), data.features.middleCols(start, len),
                                 Mode::Inference);
    sum += (r.outputs - data.targets.segment(start, len)).squaredNorm();
  }
  return sum / static_cast<double>(n);
}

TrainResult train(const HynnArchitecture& arch, const HynnDataset& train_set, const HynnDataset& val_set,
                  const TrainConfig& config) {
  config.validate();
  arch.validate();
  if (train_set.size() == 0 || val_set.size() == 0) throw Error(ErrorCode::EmptyBatch, "train and validation sets must be non-empty");

  TrainResult result;
  HynnParams params = init_params(arch, config.seed);
  const double mean = train_set.targets.mean();
  const double var = (train_set.targets.array() - mean).square().mean();
  params.target_offset = mean;
  params.target_scale = var > 1e-12 ? std::sqrt(var) : 1.0;
  // the optimiser steps on the standardised loss
  const double grad_scale = 1.0 / (params.target_scale * params.target_scale);

  AlignedValues velocity(params.values.size(), 0.0);
  std::mt19937_64 rng(config.seed ^ 0x5DEECE66DULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  result.params = params;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t len = std::min(order.size() - start, static_cast<std::size_t>(config.batch_size));
      const HynnDataset batch = train_set.gather(std::span(order).subspan(start, len));
      const std::uint64_t dropout_seed = rng();
      GradientResult g;
      try {
        g = backward(params, batch.images, batch.features, batch.targets, dropout_seed);
      } catch (const Error& e) {
        throw Error(ErrorCode::Diverged, std::string("epoch ") + std::to_string(epoch) + ": " + e.what());
      }
      if (!std::isfinite(g.loss)) throw Error(ErrorCode::Diverged, "training loss is not finite");
      loss_sum += g.loss * static_cast<double>(len);
      for (std::size_t i = 0; i < velocity.size(); ++i) {
        velocity[i] = config.momentum * velocity[i] - config.learning_rate * grad_scale * g.gradient[i];
        params.values[i] += velocity[i];
      }
      update_norm_state(params, g.batch_stats);
    }
    const double train_mse = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(train_mse)) throw Error(ErrorCode::Diverged, "training loss is not finite");
    double val_mse;
    try {
      val_mse = evaluate_mse(params, val_set);
    } catch (const Error& e) {
      throw Error(ErrorCode::Diverged, std::string("validation: ") + e.what());
    }
    if (val_mse < best) {
      best = val_mse;
      since_best = 0;
      result.params = params;
      result.best_epoch = epoch;
    } else {
      ++since_best;
    }
    result.log.push_back({epoch, train_mse, val_mse, best});
    if (since_best >= config.patience) break;
  }
  return result;
}

PointMm predict_position(const HynnParams& model_x, const HynnParams& model_y, const SyntheticImage& image,
                         std::span<const double> normalised_features) {
  return {forward(model_x, image, normalised_features, true), forward(model_y, image, normalised_features, true)};
}

HynnDataset make_dataset(const FingerprintTable& table, const FeatureLayout& layout, const BlurSpec& blur, int axis) {
  const auto n = static_cast<Eigen::Index>(table.num_rows());
  const auto side = static_cast<Eigen::Index>(layout.image_side);
  HynnDataset d;
  d.images.resize(side * side, n);
  d.features.resize(static_cast<Eigen::Index>(layout.num_features()), n);
  d.targets.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto row = table.features(static_cast<std::size_t>(r));
    const SyntheticImage img = render(row, layout, blur);
    d.images.col(r) = Eigen::Map<const Eigen::VectorXd>(img.pixels.data(), side * side);
    const auto norm = layout.normalise(row);
    d.features.col(r) = Eigen::Map<const Eigen::VectorXd>(norm.data(), static_cast<Eigen::Index>(norm.size()));
    const PointMm p = table.position(static_cast<std::size_t>(r));
    d.targets[r] = axis == 0 ? p.x : p.y;
  }
  return d;
}

}  // namespace csiloc
