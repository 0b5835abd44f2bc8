#include "csiloc/csi_data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "csiloc/error.hpp"
#include "csiloc/io_util.hpp"

namespace csiloc {
namespace {

constexpr double kMinSeparationMm = 1.0;

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t position_seed(std::uint64_t seed, PointMm pos) noexcept {
  // +0.0 so that -0.0 and 0.0 hash alike
  const auto hx = std::bit_cast<std::uint64_t>(pos.x + 0.0);
  const auto hy = std::bit_cast<std::uint64_t>(pos.y + 0.0);
  return splitmix64(splitmix64(splitmix64(seed) ^ hx) ^ hy);
}

bool finite(PointMm p) noexcept { return std::isfinite(p.x) && std::isfinite(p.y); }

}  // namespace

// ---------------------------------------------------------------------------
// AntennaArray

AntennaArray::AntennaArray(std::vector<PointMm> elements, double carrier_hz,
                           double subcarrier_spacing_hz, int num_subcarriers)
    : elements_(std::move(elements)),
      carrier_hz_(carrier_hz),
      subcarrier_spacing_hz_(subcarrier_spacing_hz),
      num_subcarriers_(num_subcarriers) {
  if (elements_.empty()) throw Error(ErrorCode::InvalidArray, "array has no elements");
  if (!std::ranges::all_of(elements_, finite))
    throw Error(ErrorCode::InvalidArray, "non-finite element position");
  if (num_subcarriers_ < 1) throw Error(ErrorCode::InvalidArray, "num_subcarriers must be >= 1");
  if (!(carrier_hz_ > 0.0) || !std::isfinite(carrier_hz_))
    throw Error(ErrorCode::InvalidArray, "carrier_hz must be > 0");
  if (!std::isfinite(subcarrier_spacing_hz_) || subcarrier_spacing_hz_ < 0.0)
    throw Error(ErrorCode::InvalidArray, "subcarrier spacing must be finite and >= 0");

  if (elements_.size() >= 2) {
    const PointMm p0 = elements_[0];
    const double spacing = distance(p0, elements_[1]);
    if (!(spacing > 0.0)) throw Error(ErrorCode::InvalidArray, "coincident antenna elements");
    const double ux = (elements_[1].x - p0.x) / spacing;
    const double uy = (elements_[1].y - p0.y) / spacing;
    for (std::size_t i = 1; i < elements_.size(); ++i) {
      const double dx = elements_[i].x - p0.x;
      const double dy = elements_[i].y - p0.y;
      if (std::abs(dx * uy - dy * ux) > 1e-9)
        throw Error(ErrorCode::InvalidArray, "ULA elements are not collinear");
      const double gap = distance(elements_[i - 1], elements_[i]);
      if (std::abs(gap - spacing) >= 1e-9)
        throw Error(ErrorCode::InvalidArray, "ULA elements are not equally spaced");
      if (dx * ux + dy * uy <= 0.0)
        throw Error(ErrorCode::InvalidArray, "ULA elements are not ordered along the axis");
    }
  }
}

AntennaArray AntennaArray::ula(int count, PointMm first, PointMm step, double carrier_hz,
                               double subcarrier_spacing_hz, int num_subcarriers) {
  if (count < 1) throw Error(ErrorCode::InvalidArray, "count must be >= 1");
  std::vector<PointMm> elements;
  elements.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) elements.push_back({first.x + i * step.x, first.y + i * step.y});
  return AntennaArray(std::move(elements), carrier_hz, subcarrier_spacing_hz, num_subcarriers);
}

// ---------------------------------------------------------------------------
// Channel synthesis

CsiMatrix synth_csi(PointMm pos, const AntennaArray& array, const ScatterModel& model) {
  if (!finite(pos)) throw Error(ErrorCode::DegenerateGeometry, "non-finite position");
  for (const auto& e : array.elements()) {
    if (distance(pos, e) <= kMinSeparationMm)
      throw Error(ErrorCode::DegenerateGeometry, "position coincides with an antenna element");
  }
  for (const auto& r : model.reflectors) {
    if (distance(pos, r.position) <= kMinSeparationMm)
      throw Error(ErrorCode::DegenerateGeometry, "position coincides with a reflector");
  }

  const int A = array.num_antennas();
  const int S = array.num_subcarriers();
  CsiMatrix out;
  out.values.resize(A, S);
  out.position = pos;

  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const std::complex<double> j(0.0, 1.0);

  std::vector<double> d_ref_pos(model.reflectors.size());
  for (std::size_t k = 0; k < model.reflectors.size(); ++k)
    d_ref_pos[k] = distance(model.reflectors[k].position, pos) * 1e-3;

  for (int a = 0; a < A; ++a) {
    const PointMm e = array.elements()[static_cast<std::size_t>(a)];
    const double d_los = distance(e, pos) * 1e-3;
    for (int s = 0; s < S; ++s) {
      const double f = array.subcarrier_frequency(s);
      std::complex<double> h =
          model.los_gain * std::exp(-j * (kTwoPi * f * d_los / kSpeedOfLight)) / d_los;
      for (std::size_t k = 0; k < model.reflectors.size(); ++k) {
        const auto& r = model.reflectors[k];
        const double d_ant_ref = distance(e, r.position) * 1e-3;
        if (d_ant_ref * 1e3 <= kMinSeparationMm)
          throw Error(ErrorCode::DegenerateGeometry, "reflector coincides with an antenna element");
        const double path = d_ant_ref + d_ref_pos[k];
        h += r.gain * std::exp(-j * (kTwoPi * f * path / kSpeedOfLight)) / (d_ant_ref * d_ref_pos[k]);
      }
      out.values(a, s) = h;
    }
  }

  if (model.noise_floor > 0.0) {
    std::mt19937_64 rng(position_seed(model.noise_seed, pos));
    std::normal_distribution<double> noise(0.0, model.noise_floor);
    for (int a = 0; a < A; ++a)
      for (int s = 0; s < S; ++s) {
        const double re = noise(rng);
        const double im = noise(rng);
        out.values(a, s) += std::complex<double>(re, im);
      }
  }
  return out;
}

Polar to_polar(std::complex<double> z) noexcept {
  double arg = std::atan2(z.imag(), z.real());
  if (arg <= -std::numbers::pi) arg = std::numbers::pi;
  return {std::abs(z), arg};
}

std::vector<double> to_polar(const CsiMatrix& m) {
  std::vector<double> row;
  row.reserve(static_cast<std::size_t>(2 * m.values.size()));
  for (Eigen::Index a = 0; a < m.values.rows(); ++a) {
    for (Eigen::Index s = 0; s < m.values.cols(); ++s) {
      const auto z = m.values(a, s);
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw Error(ErrorCode::RangeError, "non-finite CSI entry");
      const Polar p = to_polar(z);
      row.push_back(p.modulus);
      row.push_back(p.argument);
    }
  }
  return row;
}

// ---------------------------------------------------------------------------
// FingerprintTable

FingerprintTable::FingerprintTable(std::vector<int> antenna_ids, int num_subcarriers)
    : antenna_ids_(std::move(antenna_ids)), num_subcarriers_(num_subcarriers) {
  if (num_subcarriers_ < 1) throw Error(ErrorCode::ShapeMismatch, "num_subcarriers must be >= 1");
  if (antenna_ids_.empty()) throw Error(ErrorCode::ShapeMismatch, "table needs at least one antenna");
}

void FingerprintTable::reserve(std::size_t rows) {
  data_.reserve(rows * num_features());
  positions_.reserve(rows);
}

void FingerprintTable::add_row(std::span<const double> features, PointMm position) {
  if (features.size() != num_features())
    throw Error(ErrorCode::ShapeMismatch, "row has " + std::to_string(features.size()) +
                                              " features, expected " + std::to_string(num_features()));
  if (!finite(position)) throw Error(ErrorCode::RangeError, "non-finite position label");
  for (std::size_t j = 0; j < features.size(); ++j) {
    const double v = features[j];
    if (!std::isfinite(v))
      throw Error(ErrorCode::RangeError, "non-finite value in column " + feature_name(j));
    if (is_argument_column(j)) {
      if (!(v > -std::numbers::pi && v <= std::numbers::pi))
        throw Error(ErrorCode::RangeError, "argument outside (-pi, pi] in column " + feature_name(j));
    } else if (v < 0.0) {
      throw Error(ErrorCode::RangeError, "negative modulus in column " + feature_name(j));
    }
  }
  data_.insert(data_.end(), features.begin(), features.end());
  positions_.push_back(position);
}

std::span<const double> FingerprintTable::features(std::size_t row) const {
  if (row >= num_rows()) throw std::out_of_range("FingerprintTable row");
  return {data_.data() + row * num_features(), num_features()};
}

std::string FingerprintTable::feature_name(std::size_t column) const {
  const std::size_t pair = column / 2;
  const std::size_t antenna = pair / static_cast<std::size_t>(num_subcarriers_);
  const std::size_t sub = pair % static_cast<std::size_t>(num_subcarriers_);
  return "A" + std::to_string(antenna_ids_.at(antenna)) + "S" + std::to_string(sub + 1) +
         (is_argument_column(column) ? "-φ" : "-m");
}

std::vector<std::string> FingerprintTable::column_names() const {
  std::vector<std::string> names;
  names.reserve(num_columns());
  for (std::size_t j = 0; j < num_features(); ++j) names.push_back(feature_name(j));
  names.emplace_back("PosX");
  names.emplace_back("PosY");
  return names;
}

FingerprintTable FingerprintTable::select_rows(std::span<const std::size_t> rows) const {
  FingerprintTable out(antenna_ids_, num_subcarriers_);
  out.reserve(rows.size());
  for (std::size_t r : rows) {
    const auto f = features(r);
    out.data_.insert(out.data_.end(), f.begin(), f.end());
    out.positions_.push_back(positions_[r]);
  }
  return out;
}

FingerprintTable build_table(const AntennaArray& array, std::span<const CsiMatrix> samples) {
  std::vector<int> ids(static_cast<std::size_t>(array.num_antennas()));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i) + 1;
  FingerprintTable table(std::move(ids), array.num_subcarriers());
  table.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& m = samples[i];
    if (m.values.rows() != array.num_antennas() || m.values.cols() != array.num_subcarriers())
      throw Error(ErrorCode::ShapeMismatch, "sample " + std::to_string(i) + " is " +
                                                std::to_string(m.values.rows()) + "x" +
                                                std::to_string(m.values.cols()));
    if (!m.position) throw Error(ErrorCode::ShapeMismatch, "sample " + std::to_string(i) + " has no position");
    table.add_row(to_polar(m), *m.position);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Grid / subsetting / splitting

std::size_t grid_count(Interval x_span, Interval y_span, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw Error(ErrorCode::InvalidSpan, "step must be > 0");
  if (x_span.hi < x_span.lo || y_span.hi < y_span.lo)
    throw Error(ErrorCode::InvalidSpan, "span end precedes start");
  const auto per_axis = [step](Interval s) {
    return static_cast<std::size_t>(std::floor(s.length() / step + 1e-9)) + 1;
  };
  return per_axis(x_span) * per_axis(y_span);
}

std::vector<PointMm> grid_positions(Interval x_span, Interval y_span, double step) {
  (void)grid_count(x_span, y_span, step);
  const auto nx = static_cast<std::size_t>(std::floor(x_span.length() / step + 1e-9)) + 1;
  const auto ny = static_cast<std::size_t>(std::floor(y_span.length() / step + 1e-9)) + 1;
  std::vector<PointMm> out;
  out.reserve(nx * ny);
  for (std::size_t iy = 0; iy < ny; ++iy)
    for (std::size_t ix = 0; ix < nx; ++ix)
      out.push_back({x_span.lo + static_cast<double>(ix) * step, y_span.lo + static_cast<double>(iy) * step});
  return out;
}

FingerprintTable subset_antennas(const FingerprintTable& table, int n) {
  const int A = table.num_antennas();
  if (n < 1 || n > A || A % n != 0)
    throw Error(ErrorCode::InvalidSubset,
                "cannot take " + std::to_string(n) + " of " + std::to_string(A) + " antennas");
  if (n == A) return table;
  const int stride = A / n;
  const auto S = static_cast<std::size_t>(table.num_subcarriers());
  std::vector<int> ids;
  std::vector<std::size_t> keep_antennas;
  for (int i = 0; i < A; i += stride) {
    ids.push_back(table.antenna_ids()[static_cast<std::size_t>(i)]);
    keep_antennas.push_back(static_cast<std::size_t>(i));
  }
  FingerprintTable out(std::move(ids), table.num_subcarriers());
  out.reserve(table.num_rows());
  std::vector<double> row(out.num_features());
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    const auto src = table.features(r);
    std::size_t k = 0;
    for (std::size_t a : keep_antennas) {
      const auto begin = src.begin() + static_cast<std::ptrdiff_t>(2 * a * S);
      std::copy(begin, begin + static_cast<std::ptrdiff_t>(2 * S), row.begin() + static_cast<std::ptrdiff_t>(k));
      k += 2 * S;
    }
    out.add_row(row, table.position(r));
  }
  return out;
}

SplitSizes split_sizes(std::size_t rows) {
  // round half up on 85% and 10%, remainder to test
  const std::size_t train = (85 * rows + 50) / 100;
  const std::size_t validation = (10 * rows + 50) / 100;
  return {train, validation, rows - train - validation};
}

TableSplit split(const FingerprintTable& table, std::uint64_t seed) {
  const std::size_t n = table.num_rows();
  if (n < 20) throw Error(ErrorCode::TooFewRows, "split needs >= 20 rows, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const SplitSizes sizes = split_sizes(n);
  TableSplit out;
  out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sizes.train));
  out.validation_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(sizes.train),
                             order.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.validation));
  out.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.validation), order.end());
  out.train = table.select_rows(out.train_rows);
  out.validation = table.select_rows(out.validation_rows);
  out.test = table.select_rows(out.test_rows);
  return out;
}

// ---------------------------------------------------------------------------
// CSV persistence

std::string write_table_csv(const FingerprintTable& table) {
  std::string out;
  const auto names = table.column_names();
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j) out.push_back(',');
    out += names[j];
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    for (double v : table.features(r)) {
      out += io::format_double(v);
      out.push_back(',');
    }
    const PointMm p = table.position(r);
    out += io::format_double(p.x);
    out.push_back(',');
    out += io::format_double(p.y);
    out.push_back('\n');
  }
  return out;
}

void save_table_csv(const FingerprintTable& table, const std::filesystem::path& path) {
  io::write_file(path, write_table_csv(table));
}

namespace {

struct ParsedName {
  int antenna;
  int subcarrier;
  bool argument;
};

std::optional<ParsedName> parse_feature_name(std::string_view name) {
  // A<int>S<int>-m | A<int>S<int>-φ
  if (name.size() < 5 || name.front() != 'A') return std::nullopt;
  const auto s_pos = name.find('S');
  const auto dash = name.find('-');
  if (s_pos == std::string_view::npos || dash == std::string_view::npos || dash < s_pos) return std::nullopt;
  ParsedName p{};
  const auto parse_int = [](std::string_view t, int& v) {
    if (t.empty()) return false;
    v = 0;
    for (char c : t) {
      if (c < '0' || c > '9') return false;
      v = v * 10 + (c - '0');
    }
    return v > 0;
  };
  if (!parse_int(name.substr(1, s_pos - 1), p.antenna)) return std::nullopt;
  if (!parse_int(name.substr(s_pos + 1, dash - s_pos - 1), p.subcarrier)) return std::nullopt;
  const auto suffix = name.substr(dash + 1);
  if (suffix == "m") p.argument = false;
  else if (suffix == "φ") p.argument = true;
  else return std::nullopt;
  return p;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

}  // namespace

FingerprintTable parse_table_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorCode::ParseError, "line 1: missing header");
  const auto header = io::split(lines[0], ',');
  if (header.size() < 4 || header[header.size() - 2] != "PosX" || header.back() != "PosY")
    throw Error(ErrorCode::ParseError, "line 1: header must end with PosX,PosY");
  const std::size_t nf = header.size() - 2;
  if (nf % 2 != 0) throw Error(ErrorCode::ParseError, "line 1: odd number of feature columns");

  std::vector<int> ids;
  int max_sub = 0;
  for (std::size_t j = 0; j < nf; ++j) {
    const auto p = parse_feature_name(header[j]);
    if (!p) throw Error(ErrorCode::ParseError, "line 1: bad column name '" + std::string(header[j]) + "'");
    if (ids.empty() || ids.back() != p->antenna) ids.push_back(p->antenna);
    max_sub = std::max(max_sub, p->subcarrier);
  }
  FingerprintTable table(ids, max_sub);
  if (table.num_features() != nf) throw Error(ErrorCode::ParseError, "line 1: inconsistent column layout");
  for (std::size_t j = 0; j < nf; ++j) {
    if (table.feature_name(j) != header[j])
      throw Error(ErrorCode::ParseError, "line 1: column " + std::to_string(j + 1) + " out of order: '" +
                                             std::string(header[j]) + "'");
  }

  std::vector<double> row(nf);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto fields = io::split(lines[li], ',');
    const std::string where = "line " + std::to_string(li + 1);
    if (fields.size() != header.size())
      throw Error(ErrorCode::ParseError, where + ": expected " + std::to_string(header.size()) +
                                             " fields, got " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < nf; ++j)
      if (!io::parse_double(fields[j], row[j]))
        throw Error(ErrorCode::ParseError, where + ": bad number '" + std::string(fields[j]) + "'");
    PointMm pos;
    if (!io::parse_double(fields[nf], pos.x) || !io::parse_double(fields[nf + 1], pos.y))
      throw Error(ErrorCode::ParseError, where + ": bad position");
    try {
      table.add_row(row, pos);
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
  return table;
}

FingerprintTable load_table_csv(const std::filesystem::path& path) { return parse_table_csv(io::read_file(path)); }

// ---------------------------------------------------------------------------
// External ingestion

IngestLayout parse_ingest_layout(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("layout descriptor: ") + e.what());
  }
  IngestLayout l;
  try {
    l.num_antennas = j.at("antennas").get<int>();
    l.num_subcarriers = j.at("subcarriers").get<int>();
    const auto enc = j.value("encoding", std::string("complex"));
    if (enc == "complex") l.encoding = ValueEncoding::Complex;
    else if (enc == "polar") l.encoding = ValueEncoding::Polar;
    else throw Error(ErrorCode::ParseError, "layout descriptor: unknown encoding '" + enc + "'");
    const auto order = j.value("order", std::string("antenna_major"));
    if (order == "antenna_major") l.order = ValueOrder::AntennaMajor;
    else if (order == "subcarrier_major") l.order = ValueOrder::SubcarrierMajor;
    else throw Error(ErrorCode::ParseError, "layout descriptor: unknown order '" + order + "'");
    const auto pos = j.value("position_columns", std::string("last"));
    if (pos == "last") l.positions_first = false;
    else if (pos == "first") l.positions_first = true;
    else throw Error(ErrorCode::ParseError, "layout descriptor: position_columns must be first|last");
    l.has_header = j.value("header", true);
    const auto delim = j.value("delimiter", std::string(","));
    if (delim.size() != 1) throw Error(ErrorCode::ParseError, "layout descriptor: delimiter must be one character");
    l.delimiter = delim[0];
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("layout descriptor: ") + e.what());
  }
  if (l.num_antennas < 1 || l.num_subcarriers < 1)
    throw Error(ErrorCode::ParseError, "layout descriptor: antennas and subcarriers must be >= 1");
  return l;
}

FingerprintTable ingest_external(const std::filesystem::path& data_path, const IngestLayout& layout) {
  const std::string text = io::read_file(data_path);
  const auto lines = lines_of(text);
  const int A = layout.num_antennas;
  const int S = layout.num_subcarriers;
  const std::size_t n_values = static_cast<std::size_t>(2 * A * S);
  const std::size_t n_fields = n_values + 2;

  std::vector<int> ids(static_cast<std::size_t>(A));
  for (int i = 0; i < A; ++i) ids[static_cast<std::size_t>(i)] = i + 1;
  FingerprintTable table(std::move(ids), S);

  std::vector<double> raw(n_fields);
  std::vector<double> row(n_values);
  std::size_t record = 0;
  for (std::size_t li = layout.has_header ? 1 : 0; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    ++record;
    const std::string where = data_path.filename().string() + " line " + std::to_string(li + 1) +
                              " (record " + std::to_string(record) + ")";
    const auto fields = io::split(lines[li], layout.delimiter);
    if (fields.size() != n_fields)
      throw Error(ErrorCode::ParseError, where + ": expected " + std::to_string(n_fields) +
                                             " fields, got " + std::to_string(fields.size()));
    for (std::size_t k = 0; k < n_fields; ++k)
      if (!io::parse_double(fields[k], raw[k]))
        throw Error(ErrorCode::ParseError, where + ": bad number '" + std::string(fields[k]) + "'");

    const std::size_t value_offset = layout.positions_first ? 2 : 0;
    const std::size_t pos_offset = layout.positions_first ? 0 : n_values;
    for (int a = 0; a < A; ++a) {
      for (int s = 0; s < S; ++s) {
        const std::size_t src_pair = layout.order == ValueOrder::AntennaMajor
                                         ? static_cast<std::size_t>(a * S + s)
                                         : static_cast<std::size_t>(s * A + a);
        const double v0 = raw[value_offset + 2 * src_pair];
        const double v1 = raw[value_offset + 2 * src_pair + 1];
        const std::size_t dst = 2 * static_cast<std::size_t>(a * S + s);
        if (layout.encoding == ValueEncoding::Complex) {
          const Polar p = to_polar(std::complex<double>(v0, v1));
          row[dst] = p.modulus;
          row[dst + 1] = p.argument;
        } else {
          if (v0 < 0.0) throw Error(ErrorCode::RangeError, where + ": negative modulus");
          // -pi itself is the same direction as pi; anything further out is rejected
          if (!(v1 >= -std::numbers::pi && v1 <= std::numbers::pi))
            throw Error(ErrorCode::RangeError, where + ": argument " + io::format_double(v1) +
                                                   " outside (-pi, pi]");
          row[dst] = v0;
          row[dst + 1] = wrap_angle(v1);
        }
      }
    }
    try {
      table.add_row(row, {raw[pos_offset], raw[pos_offset + 1]});
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
  return table;
}

FingerprintTable ingest_external(const std::filesystem::path& data_path,
                                 const std::filesystem::path& layout_path) {
  return ingest_external(data_path, parse_ingest_layout(io::read_file(layout_path)));
}

}  // namespace csiloc
