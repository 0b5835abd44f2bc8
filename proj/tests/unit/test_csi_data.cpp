#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "csiloc/csi_data.hpp"
#include "csiloc/error.hpp"
#include "csiloc/io_util.hpp"
#include "generators.hpp"

using namespace csiloc;
using csiloc::testing::Gen;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

AntennaArray single_antenna(double carrier = 2.4e9, int subcarriers = 1) {
  return AntennaArray::ula(1, {0.0, 0.0}, {1.0, 0.0}, carrier, 20e6, subcarriers);
}

ScatterModel los_only() { return ScatterModel{}; }

FingerprintTable table_with_ids(int antennas, int subcarriers) {
  std::vector<int> ids;
  for (int i = 1; i <= antennas; ++i) ids.push_back(i);
  return FingerprintTable(ids, subcarriers);
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("csiloc_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("antenna array validation") {
  CHECK(code_of([] { AntennaArray({}, 2.4e9, 20e6, 1); }) == ErrorCode::InvalidArray);
  CHECK(code_of([] { AntennaArray({{0, 0}, {10, 0}, {25, 0}}, 2.4e9, 20e6, 1); }) == ErrorCode::InvalidArray);
  CHECK(code_of([] { AntennaArray({{0, 0}, {10, 0}, {20, 1}}, 2.4e9, 20e6, 1); }) == ErrorCode::InvalidArray);
  CHECK(code_of([] { AntennaArray({{0, 0}}, 0.0, 20e6, 1); }) == ErrorCode::InvalidArray);
  CHECK(code_of([] { AntennaArray({{0, 0}}, 2.4e9, 20e6, 0); }) == ErrorCode::InvalidArray);
  const auto ula = AntennaArray::ula(4, {-10, 5}, {7.5, 0}, 2.4e9, 20e6, 3);
  CHECK(ula.num_antennas() == 4);
  CHECK(ula.elements()[3].x == doctest::Approx(12.5));
  CHECK(ula.subcarrier_frequency(2) == doctest::Approx(2.44e9));
}

TEST_CASE("synth_csi: line of sight at one metre") {
  const CsiMatrix m = synth_csi({1000.0, 0.0}, single_antenna(), los_only());
  REQUIRE(m.values.rows() == 1);
  REQUIRE(m.values.cols() == 1);
  const Polar p = to_polar(m.values(0, 0));
  CHECK(p.modulus == doctest::Approx(1.0).epsilon(1e-12));
  // wrap(-2*pi*2.4e9*1 m / c), evaluated independently
  CHECK(p.argument == doctest::Approx(-0.03479806940366874).epsilon(1e-9));
  REQUIRE(m.position.has_value());
  CHECK(*m.position == PointMm{1000.0, 0.0});
}

TEST_CASE("synth_csi: reflector path matches a direct evaluation") {
  ScatterModel model;
  model.reflectors.push_back({{500.0, 500.0}, {0.5, 0.2}});
  const AntennaArray array({{0.0, 0.0}, {60.0, 0.0}}, 2.4e9, 20e6, 2);
  const CsiMatrix m = synth_csi({1000.0, 0.0}, array, model);
  const double expected[2][2][2] = {{{0.925140621374417, -1.109261309667027}, {0.2368434921924898, -1.2881969953408383}},
                                    {{-0.009365499547253409, 0.6405265443687806}, {0.22511583642810995, 0.388077425162735}}};
  for (int a = 0; a < 2; ++a)
    for (int s = 0; s < 2; ++s) {
      CHECK(m.values(a, s).real() == doctest::Approx(expected[a][s][0]).epsilon(1e-9));
      CHECK(m.values(a, s).imag() == doctest::Approx(expected[a][s][1]).epsilon(1e-9));
    }
}

TEST_CASE("synth_csi: mirror positions about the array axis") {
  const auto array = AntennaArray::ula(8, {0, 0}, {50, 0}, 2.61e9, 20e6, 4);
  const auto up = to_polar(synth_csi({123.0, 456.0}, array, los_only()));
  const auto down = to_polar(synth_csi({123.0, -456.0}, array, los_only()));
  REQUIRE(up.size() == down.size());
  for (std::size_t j = 0; j < up.size(); ++j) CHECK(up[j] == doctest::Approx(down[j]).epsilon(1e-12));
}

TEST_CASE("synth_csi: degenerate geometry") {
  const auto array = AntennaArray::ula(2, {0, 0}, {100, 0}, 2.4e9, 20e6, 1);
  CHECK(code_of([&] { synth_csi({0.5, 0.0}, array, los_only()); }) == ErrorCode::DegenerateGeometry);
  ScatterModel model;
  model.reflectors.push_back({{300, 300}, {0.1, 0}});
  CHECK(code_of([&] { synth_csi({300.4, 300.0}, array, model); }) == ErrorCode::DegenerateGeometry);
  CHECK_NOTHROW(synth_csi({300, 310}, array, model));
}

TEST_CASE("synth_csi: determinism and noise floor seeding") {
  const auto array = AntennaArray::ula(4, {0, 0}, {50, 0}, 2.4e9, 20e6, 2);
  ScatterModel model;
  model.noise_floor = 0.01;
  model.noise_seed = 3;
  const auto a = synth_csi({400, 500}, array, model);
  const auto b = synth_csi({400, 500}, array, model);
  CHECK(a.values == b.values);
  model.noise_seed = 4;
  CHECK(synth_csi({400, 500}, array, model).values != a.values);
}

TEST_CASE("property: LoS modulus decreases along a ray") {
  Gen g(11);
  const auto array = AntennaArray::ula(4, {0, 0}, {50, 0}, 2.4e9, 20e6, 3);
  for (int ray = 0; ray < 20; ++ray) {
    const double theta = g.uniform(0.1, std::numbers::pi - 0.1);
    std::vector<double> prev;
    for (double r = 200.0; r < 5000.0; r += 137.0) {
      const auto row = to_polar(synth_csi({75.0 + r * std::cos(theta), r * std::sin(theta)}, array, los_only()));
      if (!prev.empty())
        for (std::size_t j = 0; j < row.size(); j += 2) CHECK(row[j] < prev[j]);
      prev = row;
    }
  }
}

TEST_CASE("to_polar: reference values") {
  CHECK(to_polar({1.0, 0.0}).modulus == 1.0);
  CHECK(to_polar({1.0, 0.0}).argument == 0.0);
  CHECK(to_polar({0.0, 1.0}).modulus == 1.0);
  CHECK(to_polar({0.0, 1.0}).argument == doctest::Approx(std::numbers::pi / 2));
  CHECK(to_polar({3.0, 4.0}).modulus == doctest::Approx(5.0));
  CHECK(to_polar({3.0, 4.0}).argument == doctest::Approx(0.9272952180016122).epsilon(1e-15));
  // the negative real axis lands on +pi, never -pi
  CHECK(to_polar({-1.0, -0.0}).argument == std::numbers::pi);
  CHECK(to_polar({-1.0, 0.0}).argument == std::numbers::pi);
}

TEST_CASE("to_polar: matrix ordering is antenna-major, modulus first") {
  CsiMatrix m;
  m.values.resize(2, 2);
  m.values << std::complex<double>(1, 0), std::complex<double>(0, 2), std::complex<double>(-3, 0),
      std::complex<double>(0, -4);
  const auto row = to_polar(m);
  REQUIRE(row.size() == 8);
  CHECK(row[0] == 1.0);
  CHECK(row[2] == 2.0);
  CHECK(row[3] == doctest::Approx(std::numbers::pi / 2));
  CHECK(row[4] == 3.0);
  CHECK(row[5] == std::numbers::pi);
  CHECK(row[6] == 4.0);
  CHECK(row[7] == doctest::Approx(-std::numbers::pi / 2));
}

TEST_CASE("property: polar round trip") {
  Gen g(12);
  for (int i = 0; i < 20000; ++i) {
    const auto z = g.complex_value();
    const Polar p = to_polar(z);
    CHECK(std::abs(std::polar(p.modulus, p.argument) - z) / std::abs(z) < 1e-12);
    CHECK(p.argument > -std::numbers::pi);
    CHECK(p.argument <= std::numbers::pi);
  }
}

TEST_CASE("build_table: column layout") {
  const auto array = AntennaArray::ula(1, {0, 0}, {1, 0}, 2.4e9, 20e6, 2);
  std::vector<CsiMatrix> samples{synth_csi({500, 500}, array, los_only())};
  const FingerprintTable t = build_table(array, samples);
  CHECK(t.num_rows() == 1);
  CHECK(t.column_names() == std::vector<std::string>{"A1S1-m", "A1S1-φ", "A1S2-m", "A1S2-φ", "PosX", "PosY"});
  CHECK(t.position(0) == PointMm{500, 500});

  const FingerprintTable empty = build_table(array, {});
  CHECK(empty.num_rows() == 0);
  CHECK(empty.num_columns() == 6);

  const auto other = AntennaArray::ula(2, {0, 0}, {50, 0}, 2.4e9, 20e6, 2);
  samples.push_back(synth_csi({600, 500}, other, los_only()));
  CHECK(code_of([&] { build_table(array, samples); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("build_table: tidy rows as in the published example") {
  FingerprintTable t = table_with_ids(1, 2);
  t.add_row(std::vector<double>{0.234, 0.643, 0.275, 0.631}, {302, 2391});
  t.add_row(std::vector<double>{0.180, -1.989, 0.152, -1.961}, {-1215, 1221});
  const std::string csv = write_table_csv(t);
  CHECK(csv == "A1S1-m,A1S1-φ,A1S2-m,A1S2-φ,PosX,PosY\n0.234,0.643,0.275,0.631,302,2391\n"
               "0.18,-1.989,0.152,-1.961,-1215,1221\n");
  CHECK(parse_table_csv(csv) == t);
}

TEST_CASE("property: table row extraction is the identity") {
  Gen g(13);
  for (int trial = 0; trial < 20; ++trial) {
    const int A = g.integer(1, 4), S = g.integer(1, 3);
    const auto array = AntennaArray::ula(A, {0, 0}, {40, 0}, 2.4e9, 20e6, S);
    std::vector<CsiMatrix> samples;
    for (int i = 0; i < 10; ++i) samples.push_back(synth_csi({g.uniform(-900, 900), g.uniform(100, 900)}, array, los_only()));
    const FingerprintTable t = build_table(array, samples);
    for (std::size_t r = 0; r < samples.size(); ++r) {
      const auto expected = to_polar(samples[r]);
      const auto got = t.features(r);
      CHECK(std::equal(got.begin(), got.end(), expected.begin(), expected.end()));
    }
    CHECK(parse_table_csv(write_table_csv(t)) == t);
  }
}

TEST_CASE("fingerprint table invariants") {
  FingerprintTable t = table_with_ids(1, 1);
  CHECK(code_of([&] { t.add_row(std::vector<double>{-0.1, 0.0}, {0, 0}); }) == ErrorCode::RangeError);
  CHECK(code_of([&] { t.add_row(std::vector<double>{0.1, -std::numbers::pi}, {0, 0}); }) == ErrorCode::RangeError);
  CHECK(code_of([&] { t.add_row(std::vector<double>{0.1, 0.0, 0.0}, {0, 0}); }) == ErrorCode::ShapeMismatch);
  CHECK_NOTHROW(t.add_row(std::vector<double>{0.1, std::numbers::pi}, {0, 0}));
}

TEST_CASE("grid_positions") {
  CHECK(grid_positions({0, 20}, {0, 20}, 10).size() == 9);
  const auto one = grid_positions({0, 0}, {0, 0}, 5);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == PointMm{0, 0});
  // 502 points per axis at a 5 mm step
  CHECK(grid_count({0, 2505}, {0, 2505}, 5) == 252004);
  CHECK(grid_count({-1255, 1250}, {0, 2505}, 5) == 252004);
  const auto g = grid_positions({0, 10}, {0, 5}, 5);
  REQUIRE(g.size() == 6);
  CHECK(g[1] == PointMm{5, 0});
  CHECK(g[3] == PointMm{0, 5});
  CHECK(code_of([] { grid_positions({10, 0}, {0, 5}, 5); }) == ErrorCode::InvalidSpan);
  CHECK(code_of([] { grid_positions({0, 10}, {0, 5}, 0); }) == ErrorCode::InvalidSpan);
}

TEST_CASE("property: grid count formula") {
  Gen g(14);
  for (int i = 0; i < 50; ++i) {
    const double lo_x = g.uniform(-500, 500), lo_y = g.uniform(-500, 500);
    const double dx = g.uniform(0, 300), dy = g.uniform(0, 300), step = g.uniform(1, 40);
    const std::size_t expected = static_cast<std::size_t>((std::floor(dx / step) + 1) * (std::floor(dy / step) + 1));
    CHECK(grid_positions({lo_x, lo_x + dx}, {lo_y, lo_y + dy}, step).size() == expected);
    CHECK(grid_count({lo_x, lo_x + dx}, {lo_y, lo_y + dy}, step) == expected);
  }
}

TEST_CASE("subset_antennas") {
  Gen g(15);
  FingerprintTable t = csiloc::testing::random_grid_table(g, 3, 3, 10, 64, 2);
  CHECK(subset_antennas(t, 64) == t);
  const FingerprintTable s = subset_antennas(t, 8);
  CHECK(s.antenna_ids() == std::vector<int>{1, 9, 17, 25, 33, 41, 49, 57});
  CHECK(s.num_columns() == 2 * 8 * 2 + 2);
  CHECK(s.column_names()[2] == "A1S2-m");
  CHECK(s.column_names()[4] == "A9S1-m");
  // values come from the matching source columns
  const auto names = t.column_names();
  for (std::size_t r = 0; r < t.num_rows(); ++r)
    for (std::size_t j = 0; j < s.num_features(); ++j) {
      const auto src = std::find(names.begin(), names.end(), s.feature_name(j)) - names.begin();
      CHECK(s.features(r)[j] == t.features(r)[static_cast<std::size_t>(src)]);
    }
  CHECK(s.positions() == t.positions());
  CHECK(code_of([&] { subset_antennas(t, 3); }) == ErrorCode::InvalidSubset);
  CHECK(code_of([&] { subset_antennas(t, 128); }) == ErrorCode::InvalidSubset);
  CHECK(code_of([&] { subset_antennas(t, 0); }) == ErrorCode::InvalidSubset);
  // subsets of subsets keep physical antenna names
  CHECK(subset_antennas(s, 2).antenna_ids() == std::vector<int>{1, 33});
}

TEST_CASE("split sizes and determinism") {
  CHECK(split_sizes(1000).train == 850);
  CHECK(split_sizes(1000).validation == 100);
  CHECK(split_sizes(1000).test == 50);
  CHECK(split_sizes(20).train == 17);
  CHECK(split_sizes(20).validation == 2);
  CHECK(split_sizes(20).test == 1);

  Gen g(16);
  const FingerprintTable t = csiloc::testing::random_grid_table(g, 5, 5, 10, 1, 1);
  const TableSplit a = split(t, 9), b = split(t, 9);
  CHECK(a.train_rows == b.train_rows);
  CHECK(a.validation_rows == b.validation_rows);
  CHECK(a.test_rows == b.test_rows);
  CHECK(a.train == b.train);
  CHECK(code_of([&] { split(t.select_rows(std::vector<std::size_t>{0, 1, 2}), 1); }) == ErrorCode::TooFewRows);
}

TEST_CASE("property: split is a partition") {
  Gen g(17);
  for (int i = 0; i < 100; ++i) {
    const int side = g.integer(5, 12);
    const FingerprintTable t = csiloc::testing::random_grid_table(g, side, side, 5, 1, 1);
    const TableSplit s = split(t, g.seed());
    std::set<std::size_t> all;
    for (const auto* part : {&s.train_rows, &s.validation_rows, &s.test_rows}) all.insert(part->begin(), part->end());
    CHECK(all.size() == t.num_rows());
    CHECK(s.train_rows.size() + s.validation_rows.size() + s.test_rows.size() == t.num_rows());
    CHECK(s.train.num_rows() == split_sizes(t.num_rows()).train);
    for (std::size_t k = 0; k < s.test_rows.size(); ++k) CHECK(s.test.position(k) == t.position(s.test_rows[k]));
  }
}

TEST_CASE("table CSV parse errors") {
  CHECK(code_of([] { parse_table_csv(""); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_table_csv("A1S1-m,A1S1-φ,PosX\n"); }) == ErrorCode::ParseError);
  try {
    parse_table_csv("A1S1-m,A1S1-φ,PosX,PosY\n1,0,0,0\n1,0,0\n");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("ingest_external") {
  const auto dir = temp_dir("ingest");
  io::write_file(dir / "layout.json", R"({"antennas": 1, "subcarriers": 2, "encoding": "complex"})");
  io::write_file(dir / "data.csv", "re11,im11,re12,im12,x,y\n3,4,1,0,302,2391\n0,-2,-1,0,-1215,1221\n");
  const FingerprintTable t = ingest_external(dir / "data.csv", dir / "layout.json");
  REQUIRE(t.num_rows() == 2);
  CHECK(t.features(0)[0] == doctest::Approx(5.0));
  CHECK(t.features(0)[1] == doctest::Approx(0.9272952180016122));
  CHECK(t.features(1)[1] == doctest::Approx(-std::numbers::pi / 2));
  CHECK(t.features(1)[3] == std::numbers::pi);
  CHECK(t.position(1) == PointMm{-1215, 1221});

  io::write_file(dir / "polar.json",
                 R"({"antennas": 2, "subcarriers": 1, "encoding": "polar", "order": "subcarrier_major",
                     "position_columns": "first", "header": false, "delimiter": ";"})");
  io::write_file(dir / "polar.csv", "10;20;0.5;0.1;0.7;-0.2\n");
  const FingerprintTable p = ingest_external(dir / "polar.csv", dir / "polar.json");
  CHECK(p.features(0)[2] == 0.7);
  CHECK(p.position(0) == PointMm{10, 20});

  io::write_file(dir / "short.csv", "a,b,c,d,x,y\n3,4,1,0,302,2391\n3,4,1,0,302\n");
  try {
    ingest_external(dir / "short.csv", dir / "layout.json");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("record 2") != std::string::npos);
  }
  io::write_file(dir / "bad_arg.csv", "10;20;0.5;4.0;0.7;-0.2\n");
  CHECK(code_of([&] { ingest_external(dir / "bad_arg.csv", dir / "polar.json"); }) == ErrorCode::RangeError);
  CHECK(code_of([] { parse_ingest_layout(R"({"antennas": 1})"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_ingest_layout(R"({"antennas": 1, "subcarriers": 1, "encoding": "iq"})"); }) ==
        ErrorCode::ParseError);
}
