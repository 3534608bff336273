#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "panelode/data.hpp"
#include "panelode/error.hpp"

using namespace panelode;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "panelode_data_test";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& content) {
  const fs::path p = temp_dir() / name;
  std::ofstream out(p);
  out << content;
  return p;
}

const std::string kHeader =
    "district,year,toilet,piped_water,lpg,pucca_house,electricity,education_secondary\n";

}  // namespace

TEST_CASE("normalize_year: the published anchors") {
  data::TimeScale ts;
  CHECK(ts.normalize(2007.0) == 0.0);
  CHECK(ts.normalize(2020.0) == 1.0);
  CHECK(ts.normalize(2026.0) == doctest::Approx(19.0 / 13.0).epsilon(1e-15));
  CHECK(ts.normalize(2015.0) == doctest::Approx(8.0 / 13.0).epsilon(1e-15));
}

TEST_CASE("denormalize_year round-trips") {
  data::TimeScale ts;
  CHECK(ts.denormalize(0.0) == 2007.0);
  CHECK(ts.denormalize(1.0) == 2020.0);
  CHECK(ts.denormalize(0.5) == doctest::Approx(2013.5).epsilon(1e-15));
  for (scalar_t y : {1999.0, 2007.0, 2013.0, 2031.25}) {
    CHECK(ts.denormalize(ts.normalize(y)) == doctest::Approx(y).epsilon(1e-12));
  }
}

TEST_CASE("normalize_year is affine") {
  data::TimeScale ts;
  for (scalar_t a : {2007.0, 2011.5, 2026.0}) {
    for (scalar_t b : {2008.0, 2015.0, 2030.0}) {
      CHECK(ts.normalize(a) + ts.normalize(b) ==
            doctest::Approx(ts.normalize(a + b - 2007.0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("load_panel: a fully observed synthetic panel") {
  const data::IndicatorPanel panel = data::synth_panel(30, 0);
  const fs::path p = temp_dir() / "full.csv";
  data::write_panel(panel, p.string());

  const data::IndicatorPanel loaded = data::load_panel(p.string());
  CHECK(loaded.n_districts() == 30);
  CHECK(loaded.n_times() == 3);
  CHECK(loaded.n_indicators() == 6);
  CHECK(loaded.unmasked_count() == 30 * 3 * 6);
  CHECK(loaded.district_names == data::odisha_district_names());
}

TEST_CASE("write_panel / load_panel round-trips bit-exactly") {
  // randomized panels with random holes, several seeds
  for (std::uint64_t seed : {1ull, 42ull, 777ull}) {
    data::IndicatorPanel panel = data::synth_panel(7, seed);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution hole(0.15);
    for (auto& m : panel.mask) {
      for (index_t t = 0; t < panel.n_times(); ++t) {
        for (index_t k = 0; k < panel.n_indicators(); ++k) {
          if (hole(rng)) m(t, k) = false;
        }
      }
    }
    const fs::path p = temp_dir() / ("roundtrip_" + std::to_string(seed) + ".csv");
    data::write_panel(panel, p.string());
    const data::IndicatorPanel loaded = data::load_panel(p.string());

    REQUIRE(loaded.n_districts() == panel.n_districts());
    CHECK(loaded.years == panel.years);
    CHECK(loaded.district_names == panel.district_names);
    for (index_t d = 0; d < panel.n_districts(); ++d) {
      CHECK((loaded.mask[static_cast<std::size_t>(d)] ==
             panel.mask[static_cast<std::size_t>(d)])
                .all());
      for (index_t t = 0; t < panel.n_times(); ++t) {
        for (index_t k = 0; k < panel.n_indicators(); ++k) {
          if (panel.mask[static_cast<std::size_t>(d)](t, k)) {
            CHECK(loaded.values[static_cast<std::size_t>(d)](t, k) ==
                  panel.values[static_cast<std::size_t>(d)](t, k));
          }
        }
      }
    }
  }
}

TEST_CASE("load_panel: a blank cell is masked, not an error") {
  const fs::path p = write_file("blank.csv", kHeader +
                                                 "A,2007,0.1,0.2,,0.4,0.5,0.6\n"
                                                 "A,2020,0.2,0.3,0.4,0.5,0.6,0.7\n");
  const data::IndicatorPanel panel = data::load_panel(p.string());
  CHECK(panel.unmasked_count() == 11);
  CHECK_FALSE(panel.mask[0](0, 2));
  CHECK(panel.mask[0](0, 3));
}

TEST_CASE("load_panel: out-of-range value names the line and column") {
  const fs::path p = write_file("range.csv", kHeader + "A,2007,0.1,0.2,1.2,0.4,0.5,0.6\n");
  try {
    data::load_panel(p.string());
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kData);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("lpg") != std::string::npos);
  }
}

TEST_CASE("load_panel: duplicate (district, year) is rejected") {
  const fs::path p = write_file("dup.csv", kHeader +
                                               "A,2007,0.1,0.2,0.3,0.4,0.5,0.6\n"
                                               "A,2007,0.2,0.3,0.4,0.5,0.6,0.7\n");
  try {
    data::load_panel(p.string());
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("load_panel: malformed rows report their line number") {
  const fs::path p = write_file("short.csv", kHeader + "A,2007,0.1,0.2\n");
  try {
    data::load_panel(p.string());
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  const fs::path q = write_file("notnum.csv", kHeader + "A,garbage,0.1,0.2,0.3,0.4,0.5,0.6\n");
  CHECK_THROWS_AS(data::load_panel(q.string()), Error);
}

TEST_CASE("load_panel: missing file and bad header") {
  CHECK_THROWS_AS(data::load_panel("/nonexistent/panel.csv"), Error);
  const fs::path p = write_file("badheader.csv", "district,year,a,b,c,d,e,f\nA,2007,0,0,0,0,0,0\n");
  CHECK_THROWS_AS(data::load_panel(p.string()), Error);
}

TEST_CASE("load_panel: a district absent in one year is fully masked there") {
  const fs::path p = write_file("hole.csv", kHeader +
                                                "A,2007,0.1,0.2,0.3,0.4,0.5,0.6\n"
                                                "A,2020,0.2,0.3,0.4,0.5,0.6,0.7\n"
                                                "B,2007,0.3,0.4,0.5,0.6,0.7,0.8\n");
  const data::IndicatorPanel panel = data::load_panel(p.string());
  CHECK(panel.n_districts() == 2);
  CHECK(panel.n_times() == 2);
  CHECK_FALSE(panel.mask[1].row(1).any());
  CHECK(panel.masked_series(1).row(1).isZero());
}

TEST_CASE("synth_panel is deterministic and in range") {
  const data::IndicatorPanel a = data::synth_panel(30, 5);
  const data::IndicatorPanel b = data::synth_panel(30, 5);
  const data::IndicatorPanel c = data::synth_panel(30, 6);
  bool identical = true, differs = false;
  for (index_t d = 0; d < 30; ++d) {
    identical = identical && a.values[static_cast<std::size_t>(d)] ==
                                 b.values[static_cast<std::size_t>(d)];
    differs = differs || a.values[static_cast<std::size_t>(d)] !=
                             c.values[static_cast<std::size_t>(d)];
    CHECK(a.values[static_cast<std::size_t>(d)].minCoeff() > 0.0);
    CHECK(a.values[static_cast<std::size_t>(d)].maxCoeff() < 1.0);
  }
  CHECK(identical);
  CHECK(differs);
  CHECK(a.years == std::vector<scalar_t>{2007.0, 2015.0, 2020.0});
}

TEST_CASE("reference_tables: published spot values") {
  const data::ReferenceTables& t = data::reference_tables();
  REQUIRE(t.districts.size() == 30);
  REQUIRE(t.y2026.rows() == 30);
  REQUIRE(t.y2030.rows() == 30);

  auto idx = [&](const std::string& name) {
    for (std::size_t i = 0; i < t.districts.size(); ++i) {
      if (t.districts[i] == name) return static_cast<index_t>(i);
    }
    FAIL("district not found: ", name);
    return index_t{0};
  };
  CHECK(t.y2026(idx("Angul"), 0) == 0.865);        // toilet
  CHECK(t.y2030(idx("Ganjam"), 4) == 1.000);       // electricity
  CHECK(t.y2030(idx("Khordha"), 5) == 0.469);      // education
  CHECK(t.y2026(idx("Koraput"), 0) == 0.717);
  CHECK(t.y2030(idx("Kalahandi"), 2) == 0.801);    // lpg
}

TEST_CASE("reference_tables: values bounded and infrastructure columns monotone") {
  const data::ReferenceTables& t = data::reference_tables();
  CHECK(t.y2026.minCoeff() >= 0.0);
  CHECK(t.y2026.maxCoeff() <= 1.0);
  CHECK(t.y2030.minCoeff() >= 0.0);
  CHECK(t.y2030.maxCoeff() <= 1.0);
  // toilet, lpg, pucca_house, electricity never regress between the tables
  for (index_t k : {0, 2, 3, 4}) {
    for (index_t d = 0; d < 30; ++d) {
      CHECK(t.y2030(d, k) >= t.y2026(d, k) - 1e-9);
    }
  }
}
