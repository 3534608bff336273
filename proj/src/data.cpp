#include "panelode/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "panelode/error.hpp"

namespace panelode::data {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

scalar_t parse_number(const std::string& s, long line_no, const std::string& what) {
  try {
    std::size_t used = 0;
    const scalar_t v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::kData,
         "line " + std::to_string(line_no) + ": cannot parse " + what + " '" + s + "'");
  }
}

std::string format_full(scalar_t v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

TimeScale IndicatorPanel::time_scale() const {
  TimeScale ts;
  if (!years.empty()) {
    ts.year0 = years.front();
    ts.year1 = years.size() > 1 ? years.back() : years.front() + 1.0;
  }
  return ts;
}

std::vector<scalar_t> IndicatorPanel::normalized_times() const {
  const TimeScale ts = time_scale();
  std::vector<scalar_t> out;
  out.reserve(years.size());
  for (scalar_t y : years) out.push_back(ts.normalize(y));
  return out;
}

mat_t IndicatorPanel::masked_series(index_t d) const {
  return mask[static_cast<std::size_t>(d)].select(values[static_cast<std::size_t>(d)], 0.0);
}

long IndicatorPanel::unmasked_count() const {
  long n = 0;
  for (const mask_t& m : mask) n += m.count();
  return n;
}

void IndicatorPanel::validate() const {
  if (district_names.empty() || years.empty() || indicator_names.empty()) {
    fail(ErrorKind::kData, "panel: empty axis");
  }
  if (values.size() != district_names.size() || mask.size() != district_names.size()) {
    fail(ErrorKind::kData, "panel: district axis out of sync");
  }
  for (std::size_t i = 1; i < years.size(); ++i) {
    if (!(years[i] > years[i - 1])) fail(ErrorKind::kData, "panel: years not strictly increasing");
  }
  for (std::size_t d = 0; d < values.size(); ++d) {
    if (values[d].rows() != n_times() || values[d].cols() != n_indicators()) {
      fail(ErrorKind::kData, "panel: bad shape for district " + district_names[d]);
    }
    for (index_t t = 0; t < n_times(); ++t) {
      for (index_t k = 0; k < n_indicators(); ++k) {
        if (mask[d](t, k)) {
          const scalar_t v = values[d](t, k);
          if (!(v >= 0.0 && v <= 1.0)) {
            fail(ErrorKind::kData, "panel: value out of [0,1] for district " +
                                       district_names[d] + ", year " +
                                       std::to_string(years[static_cast<std::size_t>(t)]) +
                                       ", " + indicator_names[static_cast<std::size_t>(k)]);
          }
        }
      }
    }
  }
}

IndicatorPanel load_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "no such file: " + path);

  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kData, "empty file: " + path);
  {
    std::vector<std::string> header = split_csv_line(line);
    std::vector<std::string> expected = {"district", "year"};
    for (const char* c : kIndicatorColumns) expected.emplace_back(c);
    bool ok = header.size() == expected.size();
    for (std::size_t i = 0; ok && i < header.size(); ++i) ok = trim(header[i]) == expected[i];
    if (!ok) {
      fail(ErrorKind::kData,
           "line 1: header must be "
           "'district,year,toilet,piped_water,lpg,pucca_house,electricity,education_secondary'");
    }
  }

  struct Row {
    long line_no;
    std::vector<scalar_t> values;
    std::vector<bool> present;
  };
  std::vector<std::string> district_order;
  std::map<std::string, std::map<scalar_t, Row>> rows;  // district -> year -> row
  std::set<scalar_t> year_set;

  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 2 + kIndicatorColumns.size()) {
      fail(ErrorKind::kData, "line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(2 + kIndicatorColumns.size()) +
                                 " fields, got " + std::to_string(fields.size()));
    }
    const std::string district = trim(fields[0]);
    if (district.empty()) {
      fail(ErrorKind::kData, "line " + std::to_string(line_no) + ": empty district name");
    }
    const scalar_t year = parse_number(trim(fields[1]), line_no, "year");

    Row row;
    row.line_no = line_no;
    for (std::size_t k = 0; k < kIndicatorColumns.size(); ++k) {
      const std::string cell = trim(fields[2 + k]);
      if (cell.empty()) {
        row.values.push_back(0.0);
        row.present.push_back(false);
        continue;
      }
      const scalar_t v = parse_number(cell, line_no, kIndicatorColumns[k]);
      if (!(v >= 0.0 && v <= 1.0)) {
        fail(ErrorKind::kData, "line " + std::to_string(line_no) + ": value " + cell +
                                   " out of [0,1] in column " + kIndicatorColumns[k]);
      }
      row.values.push_back(v);
      row.present.push_back(true);
    }

    auto& per_year = rows[district];
    if (std::find(district_order.begin(), district_order.end(), district) ==
        district_order.end()) {
      district_order.push_back(district);
    }
    if (per_year.count(year)) {
      fail(ErrorKind::kData, "line " + std::to_string(line_no) + ": duplicate (district, year) " +
                                 district + ", " + std::to_string(year));
    }
    per_year.emplace(year, std::move(row));
    year_set.insert(year);
  }
  if (district_order.empty()) fail(ErrorKind::kData, "no data rows in " + path);

  IndicatorPanel panel;
  panel.district_names = district_order;
  panel.indicator_names.assign(kIndicatorColumns.begin(), kIndicatorColumns.end());
  panel.years.assign(year_set.begin(), year_set.end());

  const index_t nt = panel.n_times();
  const index_t ni = panel.n_indicators();
  for (const std::string& district : district_order) {
    mat_t v = mat_t::Zero(nt, ni);
    mask_t m = mask_t::Constant(nt, ni, false);
    const auto& per_year = rows[district];
    for (index_t t = 0; t < nt; ++t) {
      auto it = per_year.find(panel.years[static_cast<std::size_t>(t)]);
      if (it == per_year.end()) continue;  // absent row: fully masked year
      for (index_t k = 0; k < ni; ++k) {
        v(t, k) = it->second.values[static_cast<std::size_t>(k)];
        m(t, k) = it->second.present[static_cast<std::size_t>(k)];
      }
    }
    panel.values.push_back(std::move(v));
    panel.mask.push_back(std::move(m));
  }
  panel.validate();
  return panel;
}

void write_panel(const IndicatorPanel& panel, const std::string& path) {
  panel.validate();
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot open for writing: " + path);
  out << "district,year";
  for (const char* c : kIndicatorColumns) out << ',' << c;
  out << '\n';
  for (index_t d = 0; d < panel.n_districts(); ++d) {
    for (index_t t = 0; t < panel.n_times(); ++t) {
      out << panel.district_names[static_cast<std::size_t>(d)] << ','
          << format_full(panel.years[static_cast<std::size_t>(t)]);
      for (index_t k = 0; k < panel.n_indicators(); ++k) {
        out << ',';
        if (panel.mask[static_cast<std::size_t>(d)](t, k)) {
          out << format_full(panel.values[static_cast<std::size_t>(d)](t, k));
        }
      }
      out << '\n';
    }
  }
  if (!out) fail(ErrorKind::kIo, "short write: " + path);
}

IndicatorPanel synth_panel(index_t n_districts, std::uint64_t seed) {
  if (n_districts < 1) fail(ErrorKind::kUsage, "synth_panel: need at least one district");

  IndicatorPanel panel;
  const auto& names = odisha_district_names();
  for (index_t d = 0; d < n_districts; ++d) {
    if (d < static_cast<index_t>(names.size())) {
      panel.district_names.push_back(names[static_cast<std::size_t>(d)]);
    } else {
      panel.district_names.push_back("district_" + std::to_string(d + 1));
    }
  }
  panel.indicator_names.assign(kIndicatorColumns.begin(), kIndicatorColumns.end());
  panel.years = {2007.0, 2015.0, 2020.0};
  const TimeScale ts = panel.time_scale();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<scalar_t> base(-2.0, 0.5);
  std::uniform_real_distribution<scalar_t> rate(0.5, 2.5);

  for (index_t d = 0; d < n_districts; ++d) {
    mat_t v(panel.n_times(), panel.n_indicators());
    for (index_t k = 0; k < panel.n_indicators(); ++k) {
      const scalar_t a = base(rng);
      const scalar_t b = rate(rng);
      for (index_t t = 0; t < panel.n_times(); ++t) {
        const scalar_t x = a + b * ts.normalize(panel.years[static_cast<std::size_t>(t)]);
        v(t, k) = 1.0 / (1.0 + std::exp(-x));
      }
    }
    panel.values.push_back(std::move(v));
    panel.mask.push_back(mask_t::Constant(panel.n_times(), panel.n_indicators(), true));
  }
  panel.validate();
  return panel;
}

}  // namespace panelode::data
