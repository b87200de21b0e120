#include "dqm/csv.hpp"

#include <charconv>
#include <cstdio>
#include <vector>

namespace dqm::csv {

std::string number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void header(std::ostream& out, std::initializer_list<std::string_view> names) {
  bool first = true;
  for (auto n : names) {
    if (!first) out << ',';
    out << n;
    first = false;
  }
  out << '\n';
}

void row(std::ostream& out, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    out << number(values[i]);
  }
  out << '\n';
}

void row(std::ostream& out, std::initializer_list<double> values) {
  row(out, std::span<const double>(values.begin(), values.size()));
}

}  // namespace dqm::csv
