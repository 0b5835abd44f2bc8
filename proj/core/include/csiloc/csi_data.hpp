#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csiloc/geometry.hpp"

namespace csiloc {

inline constexpr double kSpeedOfLight = 299792458.0;

enum class ArrayGeometry { ULA };

/// Receive array plus the pilot's frequency grid. Only uniform linear arrays
/// are supported; the constructor rejects anything else.
class AntennaArray {
 public:
  AntennaArray(std::vector<PointMm> elements, double carrier_hz, double subcarrier_spacing_hz,
               int num_subcarriers);

  /// `count` elements starting at `first`, each offset by `step` from the previous one.
  static AntennaArray ula(int count, PointMm first, PointMm step, double carrier_hz,
                          double subcarrier_spacing_hz, int num_subcarriers);

  const std::vector<PointMm>& elements() const noexcept { return elements_; }
  int num_antennas() const noexcept { return static_cast<int>(elements_.size()); }
  int num_subcarriers() const noexcept { return num_subcarriers_; }
  double carrier_hz() const noexcept { return carrier_hz_; }
  double subcarrier_spacing_hz() const noexcept { return subcarrier_spacing_hz_; }
  ArrayGeometry geometry() const noexcept { return ArrayGeometry::ULA; }
  double subcarrier_frequency(int s) const noexcept { return carrier_hz_ + s * subcarrier_spacing_hz_; }

 private:
  std::vector<PointMm> elements_;
  double carrier_hz_;
  double subcarrier_spacing_hz_;
  int num_subcarriers_;
};

/// Complex channel gains, antennas x subcarriers.
struct CsiMatrix {
  Eigen::MatrixXcd values;
  std::optional<PointMm> position;
};

struct Reflector {
  PointMm position;
  std::complex<double> gain;
};

/// Deterministic LoS + point-scatterer channel. `noise_floor` is the per-component
/// standard deviation of a complex Gaussian perturbation seeded from
/// (`noise_seed`, position), so the same position always yields the same CSI.
struct ScatterModel {
  std::vector<Reflector> reflectors;
  std::complex<double> los_gain{1.0, 0.0};
  double noise_floor = 0.0;
  std::uint64_t noise_seed = 0;
};

CsiMatrix synth_csi(PointMm pos, const AntennaArray& array, const ScatterModel& model);

struct Polar {
  double modulus;
  double argument;  // (-pi, pi]
};

Polar to_polar(std::complex<double> z) noexcept;

/// Flattened polar features, antenna-major, subcarrier-minor, modulus before argument.
std::vector<double> to_polar(const CsiMatrix& m);

/// Tidy fingerprint table: per row 2*A*S polar features then PosX, PosY (mm).
///
/// Antennas keep their original 1-based index (`antenna_ids`) so a subset table
/// still names its columns after the physical elements it came from.
class FingerprintTable {
 public:
  FingerprintTable() = default;
  FingerprintTable(std::vector<int> antenna_ids, int num_subcarriers);

  void add_row(std::span<const double> features, PointMm position);
  void reserve(std::size_t rows);

  std::size_t num_rows() const noexcept { return positions_.size(); }
  std::size_t num_features() const noexcept { return 2 * antenna_ids_.size() * num_subcarriers_; }
  std::size_t num_columns() const noexcept { return num_features() + 2; }
  int num_antennas() const noexcept { return static_cast<int>(antenna_ids_.size()); }
  int num_subcarriers() const noexcept { return num_subcarriers_; }
  const std::vector<int>& antenna_ids() const noexcept { return antenna_ids_; }

  std::span<const double> features(std::size_t row) const;
  PointMm position(std::size_t row) const { return positions_.at(row); }
  const std::vector<PointMm>& positions() const noexcept { return positions_; }

  /// Feature names followed by "PosX", "PosY".
  std::vector<std::string> column_names() const;
  std::string feature_name(std::size_t column) const;

  static bool is_argument_column(std::size_t column) noexcept { return column % 2 == 1; }

  FingerprintTable select_rows(std::span<const std::size_t> rows) const;

  friend bool operator==(const FingerprintTable&, const FingerprintTable&) = default;

 private:
  std::vector<int> antenna_ids_;
  int num_subcarriers_ = 0;
  std::vector<double> data_;  // row-major, num_features() per row
  std::vector<PointMm> positions_;
};

/// Samples must share the array's shape and carry a position label.
FingerprintTable build_table(const AntennaArray& array, std::span<const CsiMatrix> samples);

/// Inclusive lattice, x varying fastest.
std::vector<PointMm> grid_positions(Interval x_span, Interval y_span, double step);
std::size_t grid_count(Interval x_span, Interval y_span, double step);

/// Keeps `n` evenly strided antennas starting at the first one.
FingerprintTable subset_antennas(const FingerprintTable& table, int n);

struct SplitSizes {
  std::size_t train;
  std::size_t validation;
  std::size_t test;
};

SplitSizes split_sizes(std::size_t rows);

struct TableSplit {
  FingerprintTable train;
  FingerprintTable validation;
  FingerprintTable test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
  std::vector<std::size_t> test_rows;
};

TableSplit split(const FingerprintTable& table, std::uint64_t seed);

std::string write_table_csv(const FingerprintTable& table);
void save_table_csv(const FingerprintTable& table, const std::filesystem::path& path);
FingerprintTable load_table_csv(const std::filesystem::path& path);
FingerprintTable parse_table_csv(std::string_view text);

enum class ValueEncoding { Complex, Polar };
enum class ValueOrder { AntennaMajor, SubcarrierMajor };

/// Describes a foreign CSV of raw CSI rows: A*S value pairs (re,im or m,phi)
/// in the declared order plus the two position columns.
struct IngestLayout {
  int num_antennas = 0;
  int num_subcarriers = 0;
  ValueEncoding encoding = ValueEncoding::Complex;
  ValueOrder order = ValueOrder::AntennaMajor;
  bool positions_first = false;
  bool has_header = true;
  char delimiter = ',';
};

IngestLayout parse_ingest_layout(std::string_view json_text);
FingerprintTable ingest_external(const std::filesystem::path& data_path, const IngestLayout& layout);
FingerprintTable ingest_external(const std::filesystem::path& data_path,
                                 const std::filesystem::path& layout_path);

}  // namespace csiloc
