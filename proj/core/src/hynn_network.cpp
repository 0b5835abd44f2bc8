#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <random>

#include "csiloc/error.hpp"
#include "csiloc/hynn.hpp"

namespace csiloc {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMap = Eigen::Map<const MatrixXd>;
using Map = Eigen::Map<MatrixXd>;

constexpr int kBranches = 2;  // sub-branches per branch
constexpr int kLayers = 2;    // conv / dense layers per sub-branch

struct Offsets {
  std::size_t conv_w[kBranches][kLayers];
  std::size_t conv_b[kBranches][kLayers];
  std::size_t dense_w[kBranches][kLayers];
  std::size_t dense_b[kBranches][kLayers];
  std::size_t scale[kBranches][kLayers];
  std::size_t shift[kBranches][kLayers];
  std::size_t head_w, head_b, out_w, out_b;
  std::size_t total;
  std::size_t norm[kBranches][kLayers];  // into norm_state; mean then variance
  std::size_t norm_total;
};

Offsets compute_offsets(const HynnArchitecture& a) {
  Offsets o{};
  std::size_t at = 0;
  const auto take = [&at](std::size_t n) {
    const std::size_t here = at;
    at += n;
    return here;
  };
  const auto k2 = static_cast<std::size_t>(a.kernel * a.kernel);
  const auto c1 = static_cast<std::size_t>(a.conv1_filters);
  const auto c2 = static_cast<std::size_t>(a.conv2_filters);
  for (int b = 0; b < kBranches; ++b) {
    o.conv_w[b][0] = take(c1 * k2);
    o.conv_b[b][0] = take(c1);
    o.conv_w[b][1] = take(c2 * c1 * k2);
    o.conv_b[b][1] = take(c2);
  }
  const std::size_t width[kLayers] = {static_cast<std::size_t>(a.dense1), static_cast<std::size_t>(a.dense2)};
  const std::size_t fan_in[kLayers] = {static_cast<std::size_t>(a.num_features), width[0]};
  for (int m = 0; m < kBranches; ++m) {
    for (int l = 0; l < kLayers; ++l) {
      o.dense_w[m][l] = take(width[l] * fan_in[l]);
      o.dense_b[m][l] = take(width[l]);
      o.scale[m][l] = take(width[l]);
      o.shift[m][l] = take(width[l]);
    }
  }
  o.head_w = take(static_cast<std::size_t>(a.head_width) * static_cast<std::size_t>(a.concat_width()));
  o.head_b = take(static_cast<std::size_t>(a.head_width));
  o.out_w = take(static_cast<std::size_t>(a.head_width));
  o.out_b = take(1);
  o.total = at;

  std::size_t n = 0;
  for (int m = 0; m < kBranches; ++m)
    for (int l = 0; l < kLayers; ++l) {
      o.norm[m][l] = n;
      n += 2 * width[l];
    }
  o.norm_total = n;
  return o;
}

inline double elu(double z) noexcept { return z > 0.0 ? z : std::expm1(z); }
inline double elu_grad(double z) noexcept { return z > 0.0 ? 1.0 : std::exp(z); }

MatrixXd apply_elu(const MatrixXd& z) { return z.unaryExpr([](double v) { return elu(v); }); }

void im2col(const MatrixXd& in, int channels, int n, int k, MatrixXd& col) {
  const int pad = k / 2;
  col.setZero(static_cast<Index>(channels) * k * k, static_cast<Index>(n) * n);
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Index row = (static_cast<Index>(c) * k + ky) * k + kx;
        for (int y = 0; y < n; ++y) {
          const int yy = y + ky - pad;
          if (yy < 0 || yy >= n) continue;
          for (int x = 0; x < n; ++x) {
            const int xx = x + kx - pad;
            if (xx < 0 || xx >= n) continue;
            col(row, static_cast<Index>(y) * n + x) = in(c, static_cast<Index>(yy) * n + xx);
          }
        }
      }
}

void col2im_add(const MatrixXd& dcol, int channels, int n, int k, MatrixXd& din) {
  const int pad = k / 2;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Index row = (static_cast<Index>(c) * k + ky) * k + kx;
        for (int y = 0; y < n; ++y) {
          const int yy = y + ky - pad;
          if (yy < 0 || yy >= n) continue;
          for (int x = 0; x < n; ++x) {
            const int xx = x + kx - pad;
            if (xx < 0 || xx >= n) continue;
            din(c, static_cast<Index>(yy) * n + xx) += dcol(row, static_cast<Index>(y) * n + x);
          }
        }
      }
}

// 2x2 stride-2 pooling, trailing odd row/column dropped.
void pool_forward(const MatrixXd& a, int n, bool use_max, MatrixXd& out, std::vector<Index>& arg) {
  const int m = n / 2;
  const Index channels = a.rows();
  out.resize(channels, static_cast<Index>(m) * m);
  if (use_max) arg.assign(static_cast<std::size_t>(channels * m * m), 0);
  for (Index c = 0; c < channels; ++c)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const Index p00 = static_cast<Index>(2 * i) * n + 2 * j;
        const Index cand[4] = {p00, p00 + 1, p00 + n, p00 + n + 1};
        const Index o = static_cast<Index>(i) * m + j;
        if (use_max) {
          Index best = cand[0];
          for (int q = 1; q < 4; ++q)
            if (a(c, cand[q]) > a(c, best)) best = cand[q];
          out(c, o) = a(c, best);
          arg[static_cast<std::size_t>(c * m * m + o)] = best;
        } else {
          out(c, o) = 0.25 * (a(c, cand[0]) + a(c, cand[1]) + a(c, cand[2]) + a(c, cand[3]));
        }
      }
}

void pool_backward(const MatrixXd& dout, int n, bool use_max, const std::vector<Index>& arg, MatrixXd& da) {
  const int m = n / 2;
  const Index channels = dout.rows();
  da.setZero(channels, static_cast<Index>(n) * n);
  for (Index c = 0; c < channels; ++c)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const Index o = static_cast<Index>(i) * m + j;
        const double g = dout(c, o);
        if (use_max) {
          da(c, arg[static_cast<std::size_t>(c * m * m + o)]) += g;
        } else {
          const Index p00 = static_cast<Index>(2 * i) * n + 2 * j;
          da(c, p00) += 0.25 * g;
          da(c, p00 + 1) += 0.25 * g;
          da(c, p00 + n) += 0.25 * g;
          da(c, p00 + n + 1) += 0.25 * g;
        }
      }
}

struct ConvCache {
  MatrixXd col[kLayers];
  MatrixXd z[kLayers];
  MatrixXd pooled[kLayers];
  std::vector<Index> arg[kLayers];
};

struct DenseCache {
  MatrixXd z;      // pre-normalisation
  MatrixXd xhat;   // normalised
  MatrixXd y;      // after scale/shift (ELU input)
  MatrixXd mask;   // dropout multipliers
  MatrixXd out;    // after ELU and dropout
  VectorXd inv_std;
};

struct Tape {
  std::vector<std::array<ConvCache, kBranches>> conv;  // per sample
  DenseCache dense[kBranches][kLayers];
  MatrixXd h0, zh, ah;
};

struct Net {
  const HynnParams& p;
  const HynnArchitecture& a;
  Offsets o;

  explicit Net(const HynnParams& params) : p(params), a(params.arch), o(compute_offsets(params.arch)) {
    if (p.values.size() != o.total || p.norm_state.size() != o.norm_total)
      throw Error(ErrorCode::ShapeMismatch, "parameter vector does not match architecture");
  }

  ConstMap mat(std::size_t off, Index rows, Index cols) const { return ConstMap(p.values.data() + off, rows, cols); }
  Eigen::Map<const VectorXd> vec(std::size_t off, Index n) const { return Eigen::Map<const VectorXd>(p.values.data() + off, n); }

  int conv_in(int l) const { return l == 0 ? 1 : a.conv1_filters; }
  int conv_out(int l) const { return l == 0 ? a.conv1_filters : a.conv2_filters; }
  int conv_side(int l) const { return l == 0 ? a.image_side : a.pooled1(); }
  int dense_in(int l) const { return l == 0 ? a.num_features : a.dense1; }
  int dense_out(int l) const { return l == 0 ? a.dense1 : a.dense2; }
  Index k2() const { return static_cast<Index>(a.kernel) * a.kernel; }

  // Returns the flattened output of one CNN sub-branch for one sample.
  void conv_forward(int b, const MatrixXd& image_row, ConvCache& cache, double* flat_out) const {
    MatrixXd input = image_row;
    for (int l = 0; l < kLayers; ++l) {
      const int n = conv_side(l);
      im2col(input, conv_in(l), n, a.kernel, cache.col[l]);
      cache.z[l] = mat(o.conv_w[b][l], conv_out(l), conv_in(l) * k2()) * cache.col[l];
      cache.z[l].colwise() += vec(o.conv_b[b][l], conv_out(l));
      pool_forward(apply_elu(cache.z[l]), n, b == 0, cache.pooled[l], cache.arg[l]);
      input = cache.pooled[l];
    }
    Eigen::Map<MatrixXd>(flat_out, cache.pooled[1].rows(), cache.pooled[1].cols()) = cache.pooled[1];
  }

  VectorXd run(const MatrixXd& images, const MatrixXd& features, Mode mode, std::uint64_t seed, Tape& t,
               NormBatchStats& stats) const {
    const Index B = images.cols();
    if (B < 1) throw Error(ErrorCode::EmptyBatch, "batch is empty");
    if (images.rows() != static_cast<Index>(a.image_side) * a.image_side || features.rows() != a.num_features ||
        features.cols() != B)
      throw Error(ErrorCode::ShapeMismatch, "input shapes do not match architecture");

    const Index flat = a.cnn_flat();
    t.h0.resize(a.concat_width(), B);
    t.conv.resize(static_cast<std::size_t>(B));
    for (Index s = 0; s < B; ++s) {
      const MatrixXd image_row = images.col(s).transpose();
      for (int b = 0; b < kBranches; ++b)
        conv_forward(b, image_row, t.conv[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)],
                     t.h0.data() + s * t.h0.rows() + b * flat);
    }

    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(1.0 - a.dropout);
    const double keep_scale = 1.0 / (1.0 - a.dropout);
    stats.assign(o.norm_total, 0.0);
    for (int m = 0; m < kBranches; ++m) {
      const MatrixXd* x = &features;
      for (int l = 0; l < kLayers; ++l) {
        DenseCache& c = t.dense[m][l];
        const Index w = dense_out(l);
        c.z = mat(o.dense_w[m][l], w, dense_in(l)) * (*x);
        c.z.colwise() += vec(o.dense_b[m][l], w);
        VectorXd mean, var;
        if (mode == Mode::Train) {
          mean = c.z.rowwise().mean();
          var = (c.z.colwise() - mean).array().square().rowwise().mean();
          Eigen::Map<VectorXd>(stats.data() + o.norm[m][l], w) = mean;
          Eigen::Map<VectorXd>(stats.data() + o.norm[m][l] + w, w) = var;
        } else {
          mean = Eigen::Map<const VectorXd>(p.norm_state.data() + o.norm[m][l], w);
          var = Eigen::Map<const VectorXd>(p.norm_state.data() + o.norm[m][l] + w, w);
        }
        c.inv_std = (var.array() + a.bn_epsilon).rsqrt();
        c.xhat = (c.z.colwise() - mean).array().colwise() * c.inv_std.array();
        c.y = (c.xhat.array().colwise() * vec(o.scale[m][l], w).array()).colwise() + vec(o.shift[m][l], w).array();
        c.mask.setOnes(w, B);
        if (mode == Mode::Train && a.dropout > 0.0) {
          for (Index s = 0; s < B; ++s)
            for (Index r = 0; r < w; ++r) c.mask(r, s) = keep(rng) ? keep_scale : 0.0;
        }
        c.out = apply_elu(c.y).cwiseProduct(c.mask);
        x = &c.out;
      }
      t.h0.middleRows(2 * flat + m * a.dense2, a.dense2) = t.dense[m][kLayers - 1].out;
    }

    t.zh = mat(o.head_w, a.head_width, a.concat_width()) * t.h0;
    t.zh.colwise() += vec(o.head_b, a.head_width);
    t.ah = apply_elu(t.zh);
    const VectorXd out = (mat(o.out_w, 1, a.head_width) * t.ah).transpose().array() + p.values[o.out_b];
    VectorXd y = (p.target_offset + p.target_scale * out.array()).matrix();
    if (!y.allFinite()) throw Error(ErrorCode::NonFiniteActivation, "network output is not finite");
    return y;
  }

  AlignedValues reverse(const Tape& t, const VectorXd& d_y) const {
    const Index B = d_y.size();
    AlignedValues grad(o.total, 0.0);
    const auto gmat = [&grad](std::size_t off, Index rows, Index cols) { return Map(grad.data() + off, rows, cols); };
    const auto gvec = [&grad](std::size_t off, Index n) { return Eigen::Map<VectorXd>(grad.data() + off, n); };

    const Eigen::RowVectorXd d_out = (p.target_scale * d_y).transpose();
    gmat(o.out_w, 1, a.head_width) = d_out * t.ah.transpose();
    grad[o.out_b] = d_out.sum();
    MatrixXd d_zh = mat(o.out_w, 1, a.head_width).transpose() * d_out;
    d_zh.array() *= t.zh.unaryExpr([](double z) { return elu_grad(z); }).array();
    gmat(o.head_w, a.head_width, a.concat_width()) = d_zh * t.h0.transpose();
    gvec(o.head_b, a.head_width) = d_zh.rowwise().sum();
    const MatrixXd d_h0 = mat(o.head_w, a.head_width, a.concat_width()).transpose() * d_zh;

    const Index flat = a.cnn_flat();
    for (int m = 0; m < kBranches; ++m) {
      MatrixXd d_out_l = d_h0.middleRows(2 * flat + m * a.dense2, a.dense2);
      for (int l = kLayers - 1; l >= 0; --l) {
        const DenseCache& c = t.dense[m][l];
        const Index w = dense_out(l);
        const MatrixXd d_yl =
            d_out_l.cwiseProduct(c.mask).cwiseProduct(c.y.unaryExpr([](double z) { return elu_grad(z); }));
        gvec(o.scale[m][l], w) = d_yl.cwiseProduct(c.xhat).rowwise().sum();
        gvec(o.shift[m][l], w) = d_yl.rowwise().sum();
        const MatrixXd d_xhat = d_yl.array().colwise() * vec(o.scale[m][l], w).array();
        const VectorXd sum_dx = d_xhat.rowwise().sum();
        const VectorXd sum_dx_x = d_xhat.cwiseProduct(c.xhat).rowwise().sum();
        MatrixXd d_z = (static_cast<double>(B) * d_xhat).colwise() - sum_dx;
        d_z -= (c.xhat.array().colwise() * sum_dx_x.array()).matrix();
        d_z = d_z.array().colwise() * (c.inv_std.array() / static_cast<double>(B));
        const MatrixXd& x_in = l == 0 ? *features_ : t.dense[m][l - 1].out;
        gmat(o.dense_w[m][l], w, dense_in(l)) = d_z * x_in.transpose();
        gvec(o.dense_b[m][l], w) = d_z.rowwise().sum();
        if (l > 0) d_out_l = mat(o.dense_w[m][l], w, dense_in(l)).transpose() * d_z;
      }
    }

    MatrixXd d_pooled, d_act, d_z, d_col, d_in;
    for (Index s = 0; s < B; ++s) {
      for (int b = 0; b < kBranches; ++b) {
        const ConvCache& c = t.conv[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)];
        d_pooled = Eigen::Map<const MatrixXd>(d_h0.data() + s * d_h0.rows() + b * flat, c.pooled[1].rows(),
                                              c.pooled[1].cols());
        for (int l = kLayers - 1; l >= 0; --l) {
          const int n = conv_side(l);
          pool_backward(d_pooled, n, b == 0, c.arg[l], d_act);
          d_z = d_act.cwiseProduct(c.z[l].unaryExpr([](double z) { return elu_grad(z); }));
          gmat(o.conv_w[b][l], conv_out(l), conv_in(l) * k2()) += d_z * c.col[l].transpose();
          gvec(o.conv_b[b][l], conv_out(l)) += d_z.rowwise().sum();
          if (l > 0) {
            d_col = mat(o.conv_w[b][l], conv_out(l), conv_in(l) * k2()).transpose() * d_z;
            d_in.setZero(conv_in(l), static_cast<Index>(n) * n);
            col2im_add(d_col, conv_in(l), n, a.kernel, d_in);
            d_pooled = d_in;
          }
        }
      }
    }
    for (double g : grad)
      if (!std::isfinite(g)) throw Error(ErrorCode::NonFiniteGradient, "gradient is not finite");
    return grad;
  }

  const MatrixXd* features_ = nullptr;
};

}  // namespace

void HynnArchitecture::validate() const {
  const auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArchitecture, m); };
  if (image_side < 4) fail("image_side must be >= 4");
  if (num_features < 1) fail("num_features must be >= 1");
  if (conv1_filters < 1 || conv2_filters < 1) fail("filter counts must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) fail("kernel must be odd and >= 1");
  if (dense1 < 1 || dense2 < 1 || head_width < 1) fail("dense widths must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) fail("bn_momentum must be in [0, 1)");
  if (!(bn_epsilon > 0.0)) fail("bn_epsilon must be > 0");
  if (pooled2() < 1) fail("image_side too small for two pooling stages");
}

std::vector<ParamSlice> param_slices(const HynnArchitecture& arch) {
  arch.validate();
  const Offsets o = compute_offsets(arch);
  std::vector<ParamSlice> s;
  const char* cnn_names[kBranches] = {"cnn_max", "cnn_avg"};
  const char* mlp_names[kBranches] = {"mlp_a", "mlp_b"};
  const int k2 = arch.kernel * arch.kernel;
  for (int b = 0; b < kBranches; ++b) {
    const std::string n = cnn_names[b];
    s.push_back({n + ".conv1.weight", LayerKind::ConvWeight, o.conv_w[b][0], arch.conv1_filters, k2});
    s.push_back({n + ".conv1.bias", LayerKind::ConvBias, o.conv_b[b][0], arch.conv1_filters, 1});
    s.push_back({n + ".conv2.weight", LayerKind::ConvWeight, o.conv_w[b][1], arch.conv2_filters, arch.conv1_filters * k2});
    s.push_back({n + ".conv2.bias", LayerKind::ConvBias, o.conv_b[b][1], arch.conv2_filters, 1});
  }
  const int width[kLayers] = {arch.dense1, arch.dense2};
  const int fan_in[kLayers] = {arch.num_features, arch.dense1};
  for (int m = 0; m < kBranches; ++m)
    for (int l = 0; l < kLayers; ++l) {
      const std::string n = std::string(mlp_names[m]) + ".dense" + std::to_string(l + 1);
      s.push_back({n + ".weight", LayerKind::DenseWeight, o.dense_w[m][l], width[l], fan_in[l]});
      s.push_back({n + ".bias", LayerKind::DenseBias, o.dense_b[m][l], width[l], 1});
      s.push_back({n + ".norm.scale", LayerKind::NormScale, o.scale[m][l], width[l], 1});
      s.push_back({n + ".norm.shift", LayerKind::NormShift, o.shift[m][l], width[l], 1});
    }
  s.push_back({"head.weight", LayerKind::HeadWeight, o.head_w, arch.head_width, arch.concat_width()});
  s.push_back({"head.bias", LayerKind::HeadBias, o.head_b, arch.head_width, 1});
  s.push_back({"output.weight", LayerKind::OutputWeight, o.out_w, 1, arch.head_width});
  s.push_back({"output.bias", LayerKind::OutputBias, o.out_b, 1, 1});
  return s;
}

HynnParams init_params(const HynnArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  const Offsets o = compute_offsets(arch);
  HynnParams p;
  p.arch = arch;
  p.values.assign(o.total, 0.0);
  p.norm_state.assign(o.norm_total, 0.0);
  std::mt19937_64 rng(seed);
  for (const auto& s : param_slices(arch)) {
    double limit = 0.0;
    switch (s.kind) {
      case LayerKind::ConvWeight:
      case LayerKind::DenseWeight:
      case LayerKind::HeadWeight: limit = std::sqrt(6.0 / s.cols); break;
      case LayerKind::OutputWeight: limit = std::sqrt(6.0 / (s.cols + 1)); break;
      case LayerKind::NormScale: std::fill_n(p.values.begin() + static_cast<std::ptrdiff_t>(s.offset), s.size(), 1.0); continue;
      default: continue;
    }
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < s.size(); ++i) p.values[s.offset + i] = u(rng);
  }
  for (int m = 0; m < kBranches; ++m)
    for (int l = 0; l < kLayers; ++l) {
      const auto w = static_cast<std::size_t>(l == 0 ? arch.dense1 : arch.dense2);
      std::fill_n(p.norm_state.begin() + static_cast<std::ptrdiff_t>(o.norm[m][l] + w), w, 1.0);
    }
  return p;
}

HynnDataset HynnDataset::gather(std::span<const Eigen::Index> columns) const {
  HynnDataset out;
  const auto n = static_cast<Index>(columns.size());
  out.images.resize(images.rows(), n);
  out.features.resize(features.rows(), n);
  out.targets.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index c = columns[static_cast<std::size_t>(i)];
    out.images.col(i) = images.col(c);
    out.features.col(i) = features.col(c);
    out.targets[i] = targets[c];
  }
  return out;
}

ForwardResult forward_batch(const HynnParams& params, const MatrixXd& images, const MatrixXd& features, Mode mode,
                            std::uint64_t dropout_seed) {
  Net net(params);
  Tape tape;
  ForwardResult r;
  r.outputs = net.run(images, features, mode, dropout_seed, tape, r.batch_stats);
  if (mode == Mode::Inference) r.batch_stats.clear();
  return r;
}

double forward(const HynnParams& params, const SyntheticImage& image, std::span<const double> normalised_features,
               bool inference_mode, std::uint64_t dropout_seed) {
  if (image.side != params.arch.image_side)
    throw Error(ErrorCode::ShapeMismatch, "image side " + std::to_string(image.side) + " does not match architecture");
  if (normalised_features.size() != static_cast<std::size_t>(params.arch.num_features))
    throw Error(ErrorCode::ShapeMismatch, "feature count does not match architecture");
  const MatrixXd img = Eigen::Map<const MatrixXd>(image.pixels.data(), static_cast<Index>(image.pixels.size()), 1);
  const MatrixXd feat =
      Eigen::Map<const MatrixXd>(normalised_features.data(), static_cast<Index>(normalised_features.size()), 1);
  return forward_batch(params, img, feat, inference_mode ? Mode::Inference : Mode::Train, dropout_seed).outputs[0];
}

GradientResult backward(const HynnParams& params, const MatrixXd& images, const MatrixXd& features,
                        const VectorXd& targets, std::uint64_t dropout_seed) {
  if (images.cols() < 1) throw Error(ErrorCode::EmptyBatch, "batch is empty");
  if (targets.size() != images.cols()) throw Error(ErrorCode::ShapeMismatch, "target count does not match batch");
  Net net(params);
  net.features_ = &features;
  Tape tape;
  GradientResult r;
  r.outputs = net.run(images, features, Mode::Train, dropout_seed, tape, r.batch_stats);
  const VectorXd residual = r.outputs - targets;
  const auto B = static_cast<double>(targets.size());
  r.loss = residual.squaredNorm() / B;
  r.gradient = net.reverse(tape, (2.0 / B) * residual);
  return r;
}

void update_norm_state(HynnParams& params, const NormBatchStats& batch_stats) {
  if (batch_stats.size() != params.norm_state.size())
    throw Error(ErrorCode::ShapeMismatch, "batch statistics do not match norm state");
  const double m = params.arch.bn_momentum;
  for (std::size_t i = 0; i < batch_stats.size(); ++i)
    params.norm_state[i] = m * params.norm_state[i] + (1.0 - m) * batch_stats[i];
}

}  // namespace csiloc
