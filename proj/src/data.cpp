#include "sfcr/data.hpp"

#include <cmath>
#include <set>

namespace sfcr {

namespace {

void check_series(const SiteSeries& s, const std::string& site, const char* which, int num_days,
                  bool unit_interval) {
  if (static_cast<int>(s.idx.size()) != s.values.size())
    throw DimensionError("site " + site + ": " + which + " index/value lengths differ");
  for (int j = 0; j < s.count(); ++j) {
    if (s.idx[j] < 0 || s.idx[j] >= num_days)
      throw InputError("range", "site " + site + ": " + which + " day index out of grid");
    if (j > 0 && s.idx[j] <= s.idx[j - 1])
      throw InputError("order", "site " + site + ": " + which + " days must be strictly increasing");
    double v = s.values[j];
    if (!std::isfinite(v))
      throw InputError("value", "site " + site + ": nonfinite " + which + " value");
    if (unit_interval && (v < 0.0 || v > 1.0))
      throw InputError("value", "site " + site + ": positivity outside [0, 1]");
  }
}

}  // namespace

void Dataset::validate(bool unit_interval_y) const {
  grid.validate();
  if (site_ids.empty()) throw InputError("empty", "dataset has no sites");
  if (y.size() != site_ids.size() || x.size() != site_ids.size())
    throw DimensionError("per-site series are not aligned with site_ids");
  if (!regions.empty() && regions.size() != site_ids.size())
    throw DimensionError("regions are not aligned with site_ids");
  std::set<std::string> seen;
  for (size_t i = 0; i < site_ids.size(); ++i) {
    if (!seen.insert(site_ids[i]).second)
      throw InputError("duplicate", "duplicate site id " + site_ids[i]);
    if (!regions.empty() && regions[i].id != site_ids[i])
      throw InputError("order", "region ids must match site_ids order");
    check_series(y[i], site_ids[i], "y", grid.size(), unit_interval_y);
    check_series(x[i], site_ids[i], "x", grid.size(), false);
    if (x[i].count() == 0)
      throw InputError("empty", "site " + site_ids[i] + ": needs at least one x observation");
  }
}

}  // namespace sfcr
