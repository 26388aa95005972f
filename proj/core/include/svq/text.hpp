#pragma once

#include <string>
#include <string_view>

namespace svq {

/// %.17g, which reads back to the identical double.
std::string format_number(double value);

/// Parses the whole of `text` as a finite double; throws FormatError naming `field` otherwise.
double parse_number(std::string_view text, std::string_view field);

}  // namespace svq
