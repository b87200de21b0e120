#pragma once

#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

namespace dqm::csv {

/// Shortest text that round-trips a double (17 significant digits).
std::string number(double v);

void header(std::ostream& out, std::initializer_list<std::string_view> names);
void row(std::ostream& out, std::span<const double> values);
void row(std::ostream& out, std::initializer_list<double> values);

}  // namespace dqm::csv
