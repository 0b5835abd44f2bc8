#include "csiloc/image_synth.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "csiloc/error.hpp"
#include "csiloc/io_util.hpp"

namespace csiloc {
namespace {

// Largest-magnitude component made positive; first index wins ties.
void fix_sign(Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (v[best] < 0.0) v = -v;
}

// Scores of the first two principal components of the rows of `obs`
// (observations x coordinates). Returns an (n_obs x 2) matrix.
Eigen::MatrixXd principal_scores(const Eigen::MatrixXd& obs) {
  const Eigen::Index n = obs.rows();
  const Eigen::Index d = obs.cols();
  const Eigen::RowVectorXd mean = obs.colwise().mean();
  const Eigen::MatrixXd centred = obs.rowwise() - mean;

  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, 2);
  if (n <= d) {
    // Gram route: eigenvectors of C C^T give scores up to sqrt(lambda).
    const Eigen::MatrixXd gram = centred * centred.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    for (int k = 0; k < 2 && k < n; ++k) {
      const Eigen::Index idx = n - 1 - k;
      const double lambda = solver.eigenvalues()[idx];
      if (!(lambda > 1e-12 * std::max(1.0, solver.eigenvalues()[n - 1]))) continue;
      Eigen::VectorXd loading = centred.transpose() * solver.eigenvectors().col(idx) / std::sqrt(lambda);
      fix_sign(loading);
      scores.col(k) = centred * loading;
    }
  } else {
    const Eigen::MatrixXd cov = centred.transpose() * centred;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    for (int k = 0; k < 2 && k < d; ++k) {
      const Eigen::Index idx = d - 1 - k;
      const double lambda = solver.eigenvalues()[idx];
      if (!(lambda > 1e-12 * std::max(1.0, solver.eigenvalues()[d - 1]))) continue;
      Eigen::VectorXd loading = solver.eigenvectors().col(idx);
      fix_sign(loading);
      scores.col(k) = centred * loading;
    }
  }
  return scores;
}

}  // namespace

std::vector<double> FeatureLayout::normalise(std::span<const double> row) const {
  if (row.size() != num_features())
    throw Error(ErrorCode::LengthMismatch, "row has " + std::to_string(row.size()) + " values, layout expects " +
                                               std::to_string(num_features()));
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double range = feature_max[j] - feature_min[j];
    const double v = range > 0.0 ? (row[j] - feature_min[j]) / range : 0.0;
    out[j] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

std::string FeatureLayout::to_json() const {
  nlohmann::json j;
  j["image_side"] = image_side;
  auto& features = j["features"] = nlohmann::json::array();
  for (std::size_t i = 0; i < num_features(); ++i) {
    features.push_back({{"name", feature_names[i]},
                        {"row", pixels[i].row},
                        {"col", pixels[i].col},
                        {"min", feature_min[i]},
                        {"max", feature_max[i]}});
  }
  return j.dump(1);
}

FeatureLayout FeatureLayout::from_json(std::string_view text) {
  FeatureLayout layout;
  try {
    const auto j = nlohmann::json::parse(text);
    layout.image_side = j.at("image_side").get<int>();
    for (const auto& f : j.at("features")) {
      layout.feature_names.push_back(f.at("name").get<std::string>());
      layout.pixels.push_back({f.at("row").get<int>(), f.at("col").get<int>()});
      layout.feature_min.push_back(f.at("min").get<double>());
      layout.feature_max.push_back(f.at("max").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("layout: ") + e.what());
  }
  for (const auto& p : layout.pixels)
    if (p.row < 0 || p.col < 0 || p.row >= layout.image_side || p.col >= layout.image_side)
      throw Error(ErrorCode::ParseError, "layout: pixel outside image");
  return layout;
}

std::string FeatureLayout::hash() const { return io::sha256_hex(to_json()); }

int BlurSpec::radius() const { return static_cast<int>(std::ceil(3.0 * sigma)); }

FeatureLayout fit_layout(const Eigen::MatrixXd& rows_by_features, std::vector<std::string> feature_names,
                         int image_side) {
  const Eigen::Index n_rows = rows_by_features.rows();
  const Eigen::Index n_features = rows_by_features.cols();
  if (n_rows < 1) throw Error(ErrorCode::DegenerateSpread, "fit_layout needs at least one training row");
  if (n_features < 2) throw Error(ErrorCode::DegenerateSpread, "fit_layout needs at least two features");
  if (image_side < 1) throw Error(ErrorCode::InvalidArchitecture, "image side must be >= 1");
  if (static_cast<Eigen::Index>(feature_names.size()) != n_features)
    throw Error(ErrorCode::LengthMismatch, "feature name count does not match matrix");

  FeatureLayout layout;
  layout.image_side = image_side;
  layout.feature_names = std::move(feature_names);
  layout.feature_min.resize(static_cast<std::size_t>(n_features));
  layout.feature_max.resize(static_cast<std::size_t>(n_features));
  for (Eigen::Index j = 0; j < n_features; ++j) {
    layout.feature_min[static_cast<std::size_t>(j)] = rows_by_features.col(j).minCoeff();
    layout.feature_max[static_cast<std::size_t>(j)] = rows_by_features.col(j).maxCoeff();
  }

  // features become observations; training rows are their coordinates
  Eigen::MatrixXd observations(n_features, n_rows);
  for (Eigen::Index j = 0; j < n_features; ++j) {
    const double lo = layout.feature_min[static_cast<std::size_t>(j)];
    const double range = layout.feature_max[static_cast<std::size_t>(j)] - lo;
    for (Eigen::Index r = 0; r < n_rows; ++r)
      observations(j, r) = range > 0.0 ? (rows_by_features(r, j) - lo) / range : 0.0;
  }

  const Eigen::MatrixXd scores = principal_scores(observations);
  const auto axis_pixels = [&](int k, std::vector<int>& out) {
    const double lo = scores.col(k).minCoeff();
    const double hi = scores.col(k).maxCoeff();
    const double span = hi - lo;
    out.resize(static_cast<std::size_t>(n_features));
    if (!(span > 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi))))) {
      std::fill(out.begin(), out.end(), (image_side - 1) / 2);
      return false;
    }
    for (Eigen::Index j = 0; j < n_features; ++j)
      out[static_cast<std::size_t>(j)] =
          static_cast<int>(std::lround((scores(j, k) - lo) / span * (image_side - 1)));
    return true;
  };
  std::vector<int> cols;
  std::vector<int> rows;
  const bool spread_x = axis_pixels(0, cols);
  const bool spread_y = axis_pixels(1, rows);
  if (!spread_x && !spread_y)
    throw Error(ErrorCode::DegenerateSpread, "all features project to a single point");

  layout.pixels.resize(static_cast<std::size_t>(n_features));
  for (std::size_t j = 0; j < layout.pixels.size(); ++j) layout.pixels[j] = {rows[j], cols[j]};
  return layout;
}

FeatureLayout fit_layout(const FingerprintTable& train, int image_side) {
  const auto n_rows = static_cast<Eigen::Index>(train.num_rows());
  const auto n_features = static_cast<Eigen::Index>(train.num_features());
  if (n_rows < 1) throw Error(ErrorCode::DegenerateSpread, "fit_layout needs a non-empty training table");
  Eigen::MatrixXd m(n_rows, n_features);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto f = train.features(static_cast<std::size_t>(r));
    for (Eigen::Index j = 0; j < n_features; ++j) m(r, j) = f[static_cast<std::size_t>(j)];
  }
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(n_features));
  for (Eigen::Index j = 0; j < n_features; ++j) names.push_back(train.feature_name(static_cast<std::size_t>(j)));
  return fit_layout(m, std::move(names), image_side);
}

std::vector<double> gaussian_kernel(const BlurSpec& blur) {
  const int r = blur.radius();
  const int w = 2 * r + 1;
  std::vector<double> g(static_cast<std::size_t>(w));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    g[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * blur.sigma * blur.sigma));
    sum += g[static_cast<std::size_t>(i + r)];
  }
  for (auto& v : g) v /= sum;
  std::vector<double> k(static_cast<std::size_t>(w * w));
  for (int a = 0; a < w; ++a)
    for (int b = 0; b < w; ++b) k[static_cast<std::size_t>(a * w + b)] = g[static_cast<std::size_t>(a)] * g[static_cast<std::size_t>(b)];
  return k;
}

SyntheticImage render_normalised_unclamped(std::span<const double> normalised, const FeatureLayout& layout,
                                           const BlurSpec& blur) {
  if (normalised.size() != layout.num_features())
    throw Error(ErrorCode::LengthMismatch, "row has " + std::to_string(normalised.size()) +
                                               " values, layout expects " + std::to_string(layout.num_features()));
  if (!(blur.sigma > 0.0) || !std::isfinite(blur.sigma)) throw Error(ErrorCode::InvalidBlur, "sigma must be > 0");

  const int side = layout.image_side;
  const auto n_pix = static_cast<std::size_t>(side * side);
  std::vector<double> sum(n_pix, 0.0);
  std::vector<int> count(n_pix, 0);
  for (std::size_t j = 0; j < normalised.size(); ++j) {
    const auto idx = static_cast<std::size_t>(layout.pixels[j].row * side + layout.pixels[j].col);
    sum[idx] += normalised[j];
    ++count[idx];
  }
  for (std::size_t i = 0; i < n_pix; ++i)
    if (count[i] > 1) sum[i] /= count[i];

  // separable blur: the 2D kernel is the outer product of the normalised 1D one
  const int r = blur.radius();
  std::vector<double> g(static_cast<std::size_t>(2 * r + 1));
  double gs = 0.0;
  for (int i = -r; i <= r; ++i) gs += g[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * blur.sigma * blur.sigma));
  for (auto& v : g) v /= gs;

  std::vector<double> tmp(n_pix, 0.0);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double v = sum[static_cast<std::size_t>(y * side + x)];
      if (v == 0.0) continue;
      for (int d = -r; d <= r; ++d) {
        const int xx = x + d;
        if (xx < 0 || xx >= side) continue;
        tmp[static_cast<std::size_t>(y * side + xx)] += v * g[static_cast<std::size_t>(d + r)];
      }
    }
  SyntheticImage img{side, std::vector<double>(n_pix, 0.0)};
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double v = tmp[static_cast<std::size_t>(y * side + x)];
      if (v == 0.0) continue;
      for (int d = -r; d <= r; ++d) {
        const int yy = y + d;
        if (yy < 0 || yy >= side) continue;
        img.pixels[static_cast<std::size_t>(yy * side + x)] += v * g[static_cast<std::size_t>(d + r)];
      }
    }
  return img;
}

SyntheticImage render(std::span<const double> row, const FeatureLayout& layout, const BlurSpec& blur) {
  SyntheticImage img = render_normalised_unclamped(layout.normalise(row), layout, blur);
  for (auto& p : img.pixels) p = std::clamp(p, 0.0, 1.0);
  return img;
}

std::vector<SyntheticImage> render_dataset(const FingerprintTable& table, const FeatureLayout& layout,
                                           const BlurSpec& blur) {
  std::vector<SyntheticImage> out;
  out.reserve(table.num_rows());
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    try {
      out.push_back(render(table.features(r), layout, blur));
    } catch (const Error& e) {
      throw Error(e.code(), "row " + std::to_string(r) + ": " + e.what());
    }
  }
  return out;
}

void write_png(const SyntheticImage& image, const std::filesystem::path& path) {
  std::unique_ptr<FILE, decltype(&std::fclose)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "libpng initialisation failed");
  }
  std::vector<png_byte> rows(image.pixels.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    rows[i] = static_cast<png_byte>(std::lround(255.0 * std::clamp(image.pixels[i], 0.0, 1.0)));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.side), static_cast<png_uint_32>(image.side), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.side; ++y) png_write_row(png, rows.data() + static_cast<std::size_t>(y * image.side));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace csiloc
