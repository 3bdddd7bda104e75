#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "mixdetect/types.hpp"

namespace mixdetect {

/// `key = value` lines, `#` starts a comment line. Duplicate keys are an error.
using KeyValues = std::map<std::string, std::string, std::less<>>;

KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::filesystem::path& path);

/// Seconds, with an optional `s`, `m` or `h` suffix ("3h", "0.25h", "90m", "10800").
/// The result must be a whole positive number of seconds.
Timestamp parse_duration(std::string_view text);

double parse_real(std::string_view key, std::string_view text);
std::uint64_t parse_unsigned(std::string_view key, std::string_view text);

struct PipelineConfig {
  Timestamp delta = kDefaultDelta;
  double epsilon = 0.6;
  double spy_rate = 0.15;
  double delta_p = 0.005;
  double lambda = 1.0;
  std::size_t n_null = 100;
  std::size_t n_runs = 100;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::string input;
  std::string labels;
  std::string out;
};

/// Overrides fields named in `kv`. Keys starting with `synth.` are left for the
/// generator; any other unknown key is an error.
void apply_config(PipelineConfig& config, const KeyValues& kv);

/// Throws std::invalid_argument naming the first out-of-range field.
void validate(const PipelineConfig& config);

}  // namespace mixdetect
