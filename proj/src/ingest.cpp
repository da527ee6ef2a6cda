#include "sfcr/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "sfcr/error.hpp"
#include "sfcr/geojson.hpp"

namespace sfcr {

int parse_iso_date(const std::string& text) {
  const auto bad = [&text]() {
    return InputError("date", "unparseable date '" + text + "' (expected YYYY-MM-DD)");
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  const auto field = [&](int pos, int len) {
    int v = 0;
    const char* begin = text.data() + pos;
    const auto [end, ec] = std::from_chars(begin, begin + len, v);
    if (ec != std::errc() || end != begin + len) throw bad();
    return v;
  };
  const std::chrono::year_month_day ymd{
      std::chrono::year{field(0, 4)}, std::chrono::month{static_cast<unsigned>(field(5, 2))},
      std::chrono::day{static_cast<unsigned>(field(8, 2))}};
  if (!ymd.ok()) throw bad();
  return static_cast<int>(std::chrono::sys_days(ymd).time_since_epoch().count());
}

std::string format_iso_date(int days_since_epoch) {
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{days_since_epoch}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

void require_planar(const std::vector<Region>& regions, bool allow_geographic) {
  if (allow_geographic || regions.empty()) return;
  const auto bb = joint_bbox(regions);
  const bool degree_range = bb[0] >= -180.0 && bb[2] <= 180.0 && bb[1] >= -90.0 && bb[3] <= 90.0;
  if (degree_range && bb[2] - bb[0] < 10.0 && bb[3] - bb[1] < 10.0) {
    std::ostringstream msg;
    msg << "coordinates look like geographic degrees (bounding box [" << bb[0] << ", " << bb[1]
        << "] to [" << bb[2] << ", " << bb[3] << "]); distances need a projected planar CRS "
        << "in meters — reproject, or allow geographic coordinates explicitly if the extent "
        << "really is a small planar one";
    throw GeometryError(msg.str());
  }
}

namespace {

// Minimal strict CSV: comma-separated cells, no quoting, one header row naming
// the columns.  Cells are trimmed of spaces/tabs/CR; blank lines are skipped.
// Every data row must match the header's cell count.
struct Csv {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;  // 1-based physical line of each row, for messages

  std::string where(int row) const { return path + " line " + std::to_string(lines[row]); }

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  }

  int required(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw InputError("csv", path + ": missing required column '" + name + "'");
    return c;
  }
};

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& cell : out) {
    while (!cell.empty() &&
           (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
      cell.pop_back();
    std::size_t b = 0;
    while (b < cell.size() && (cell[b] == ' ' || cell[b] == '\t')) ++b;
    cell.erase(0, b);
  }
  return out;
}

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("csv", "cannot open '" + path + "'");
  Csv csv;
  csv.path = path;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto cells = split_cells(line);
    if (cells.size() == 1 && cells[0].empty()) continue;  // blank line
    if (csv.header.empty()) {
      csv.header = std::move(cells);
      continue;
    }
    if (cells.size() != csv.header.size())
      throw InputError("csv", path + " line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(csv.header.size()) + " cells, got " +
                                  std::to_string(cells.size()));
    csv.rows.push_back(std::move(cells));
    csv.lines.push_back(lineno);
  }
  if (csv.header.empty()) throw InputError("csv", path + ": missing header row");
  return csv;
}

double parse_number(const Csv& csv, int row, const std::string& cell, const char* what) {
  double v = 0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || end != cell.data() + cell.size() || !std::isfinite(v))
    throw InputError("csv", csv.where(row) + ": unparseable " + what + " '" + cell + "'");
  return v;
}

long parse_count(const Csv& csv, int row, const std::string& cell, const char* what) {
  long v = 0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || end != cell.data() + cell.size() || v < 0)
    throw InputError("csv", csv.where(row) + ": unparseable " + what + " '" + cell + "'");
  return v;
}

int parse_row_date(const Csv& csv, int row, const std::string& cell) {
  try {
    return parse_iso_date(cell);
  } catch (const InputError& e) {
    throw InputError("date", csv.where(row) + ": " + e.what());
  }
}

struct Obs {
  int day = 0;  // days since epoch
  double value = 0;
  int row = 0;  // source row index, for duplicate reports
};

using SiteObs = std::map<std::string, std::vector<Obs>>;

// Shared row scan for both files.  `make_value` returns the observation value
// or NaN for "this day is missing"; day extent is tracked even for missing
// rows (the date exists, the measurement does not).
template <typename ValueFn>
void scan(const Csv& csv, const std::set<std::string>& known, SiteObs& per_site,
          std::set<std::string>& orphans, int& day_min, int& day_max, ValueFn make_value) {
  const int c_site = csv.required("site_id");
  const int c_date = csv.required("date");
  for (int r = 0; r < static_cast<int>(csv.rows.size()); ++r) {
    const auto& cells = csv.rows[r];
    const std::string& site = cells[c_site];
    if (site.empty()) throw InputError("csv", csv.where(r) + ": empty site_id");
    const int day = parse_row_date(csv, r, cells[c_date]);
    day_min = std::min(day_min, day);
    day_max = std::max(day_max, day);
    if (known.find(site) == known.end()) {
      orphans.insert(site);
      continue;
    }
    const double v = make_value(r);
    if (!std::isnan(v)) per_site[site].push_back({day, v, r});
  }
}

SiteSeries to_series(const Csv& csv, std::vector<Obs>& obs, int day0) {
  std::sort(obs.begin(), obs.end(), [](const Obs& a, const Obs& b) { return a.day < b.day; });
  SiteSeries s;
  s.idx.reserve(obs.size());
  s.values.resize(static_cast<int>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (i > 0 && obs[i].day == obs[i - 1].day)
      throw InputError("csv", csv.where(obs[i].row) + ": duplicate observation for " +
                                  format_iso_date(obs[i].day));
    s.idx.push_back(obs[i].day - day0);
    s.values[static_cast<int>(i)] = obs[i].value;
  }
  return s;
}

std::string join_ids(const std::set<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}

}  // namespace

IngestResult ingest(const std::string& y_csv, const std::string& x_csv, const std::string& geo,
                    const IngestRules& rules) {
  if (rules.min_positives < 0)
    throw ConfigError("ingest", "min_positives must be nonnegative");
  if (rules.extension < 0) throw ConfigError("ingest", "extension must be nonnegative");

  std::vector<Region> regions = load_geojson(geo, rules.id_property);
  require_planar(regions, rules.allow_geographic);
  std::set<std::string> known;
  for (const auto& r : regions) known.insert(r.id);

  const Csv yc = read_csv(y_csv);
  const Csv xc = read_csv(x_csv);

  SiteObs y_obs, x_obs;
  std::set<std::string> orphans;
  int day_min = std::numeric_limits<int>::max();
  int day_max = std::numeric_limits<int>::min();

  // y rows: value directly, or positives/tests with the sparse-day rule.
  const int c_value = yc.column("value");
  const int c_pos = yc.column("positives");
  const int c_tests = yc.column("tests");
  if (c_pos >= 0 && c_tests < 0)
    throw InputError("csv", y_csv + ": positives column requires a tests column");
  if (c_value < 0 && c_pos < 0)
    throw InputError("csv", y_csv + ": need a value column or positives/tests columns");
  scan(yc, known, y_obs, orphans, day_min, day_max, [&](int r) {
    const auto& cells = yc.rows[r];
    if (c_pos >= 0 && !cells[c_pos].empty()) {
      const long positives = parse_count(yc, r, cells[c_pos], "positives count");
      if (positives < rules.min_positives) return std::numeric_limits<double>::quiet_NaN();
    }
    double v;
    if (c_value >= 0 && !cells[c_value].empty()) {
      v = parse_number(yc, r, cells[c_value], "positivity value");
    } else {
      if (c_pos < 0 || cells[c_pos].empty())
        throw InputError("csv", yc.where(r) + ": no value and no positives count");
      const long positives = parse_count(yc, r, cells[c_pos], "positives count");
      const long tests = parse_count(yc, r, cells[c_tests], "tests count");
      if (tests <= 0)
        throw InputError("csv", yc.where(r) + ": tests count must be positive");
      v = static_cast<double>(positives) / static_cast<double>(tests);
    }
    if (v < 0.0 || v > 1.0)
      throw InputError("range", yc.where(r) + ": positivity " + csv_double(v) +
                                    " outside [0, 1]");
    return v;
  });

  // x rows: a plain value column.
  const int cx_value = xc.required("value");
  scan(xc, known, x_obs, orphans, day_min, day_max, [&](int r) {
    const auto& cells = xc.rows[r];
    return parse_number(xc, r, cells[cx_value], "concentration value");
  });

  if (!orphans.empty())
    throw InputError("site",
                     "observations reference site ids missing from the geometry: " +
                         join_ids(orphans));
  if (day_min > day_max)
    throw InputError("csv", "no observations in '" + y_csv + "' or '" + x_csv + "'");

  std::set<std::string> missing_x;
  for (const auto& r : regions)
    if (x_obs.find(r.id) == x_obs.end()) missing_x.insert(r.id);
  if (!missing_x.empty())
    throw InputError("site", "sites with no concentration observations: " + join_ids(missing_x));

  IngestResult out;
  out.day0 = day_min;
  out.data.grid = Grid{0, day_max - day_min + 1, rules.extension};
  for (auto& r : regions) out.data.site_ids.push_back(r.id);
  out.data.regions = std::move(regions);
  for (const auto& id : out.data.site_ids) {
    const auto yi = y_obs.find(id);
    out.data.y.push_back(yi == y_obs.end() ? SiteSeries{} : to_series(yc, yi->second, day_min));
    out.data.x.push_back(to_series(xc, x_obs.find(id)->second, day_min));
  }
  out.data.validate(true);
  return out;
}

}  // namespace sfcr
