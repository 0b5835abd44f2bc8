#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "csiloc/csi_data.hpp"

namespace csiloc {

inline constexpr int kDefaultImageSide = 35;

struct PixelCoord {
  int row;
  int col;

  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Where each feature is painted and how its value is normalised.
///
/// Fitted once on the training partition and frozen afterwards; every later
/// row (validation, test, simulation) is rendered with the same layout.
struct FeatureLayout {
  int image_side = kDefaultImageSide;
  std::vector<std::string> feature_names;
  std::vector<PixelCoord> pixels;
  std::vector<double> feature_min;
  std::vector<double> feature_max;

  std::size_t num_features() const noexcept { return pixels.size(); }

  /// Min-max normalised copy of `row`, clamped to [0, 1]. Zero-range features map to 0.
  std::vector<double> normalise(std::span<const double> row) const;

  std::string to_json() const;
  static FeatureLayout from_json(std::string_view text);

  /// SHA-256 of the canonical JSON encoding; checkpoints pin this value.
  std::string hash() const;

  friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;
};

struct BlurSpec {
  double sigma = 1.0;  // pixels

  int radius() const;
};

/// side x side pixels, row-major, values in [0, 1].
struct SyntheticImage {
  int side = 0;
  std::vector<double> pixels;

  double at(int row, int col) const { return pixels[static_cast<std::size_t>(row * side + col)]; }

  friend bool operator==(const SyntheticImage&, const SyntheticImage&) = default;
};

/// PCA over the transposed, min-max normalised training matrix: each feature is
/// an observation whose coordinates are its values over the training rows. The
/// first two principal scores are scaled per axis onto [0, side-1] and rounded.
FeatureLayout fit_layout(const FingerprintTable& train, int image_side = kDefaultImageSide);

/// Same as above on a raw rows x features matrix.
FeatureLayout fit_layout(const Eigen::MatrixXd& rows_by_features, std::vector<std::string> feature_names,
                         int image_side);

/// Truncated 2D Gaussian kernel of side 2*radius+1, row-major, renormalised to sum 1.
std::vector<double> gaussian_kernel(const BlurSpec& blur);

/// Paints normalised values at characteristic pixels (mean over collisions),
/// blurs with zero padding and clamps to [0, 1].
SyntheticImage render(std::span<const double> row, const FeatureLayout& layout, const BlurSpec& blur);

/// Rendering of already-normalised values, before the final clamp. Exposed for
/// mass-conservation checks.
SyntheticImage render_normalised_unclamped(std::span<const double> normalised, const FeatureLayout& layout,
                                           const BlurSpec& blur);

std::vector<SyntheticImage> render_dataset(const FingerprintTable& table, const FeatureLayout& layout,
                                           const BlurSpec& blur);

/// 8-bit grayscale PNG, value = round(255 * pixel).
void write_png(const SyntheticImage& image, const std::filesystem::path& path);

}  // namespace csiloc
