#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mixdetect {

/// Writes through a temporary file in the target directory and renames it into
/// place, so a failed writer never leaves a partial file behind.
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// Whole-string parse; throws std::invalid_argument otherwise.
double parse_double(std::string_view text);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

std::string read_file(const std::filesystem::path& path);

}  // namespace mixdetect
