#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace hgprl::csv {

/// Fixed-point formatting; identical inputs always give identical text.
inline std::string num(double v, int decimals = 6) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (s == "-0" || s.find_first_not_of("-0.") == std::string::npos) {
    s.erase(0, s.front() == '-' ? 1 : 0);
  }
  return s;
}

inline std::string num(const std::optional<double>& v, int decimals = 6) {
  return v ? num(*v, decimals) : std::string("NA");
}

inline void row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << fields[i];
  }
  out << '\n';
}

}  // namespace hgprl::csv
