#include "svq/text.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "svq/errors.hpp"

namespace svq {

std::string format_number(double value) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(len));
}

double parse_number(std::string_view text, std::string_view field) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || text.empty())
    throw FormatError(std::string(field) + ": not a number: '" + std::string(text) + "'");
  if (!std::isfinite(v)) throw FormatError(std::string(field) + ": non-finite value");
  return v;
}

}  // namespace svq
