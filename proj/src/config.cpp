#include "mixdetect/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <stdexcept>

#include "mixdetect/io.hpp"

namespace mixdetect {

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string buf;
  std::size_t line = 0;
  while (std::getline(in, buf)) {
    ++line;
    const auto t = trim(buf);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError(line, "expected key = value");
    const auto key = trim(t.substr(0, eq));
    if (key.empty()) throw ParseError(line, "empty key");
    auto [it, fresh] = kv.emplace(std::string(key), std::string(trim(t.substr(eq + 1))));
    if (!fresh) throw ParseError(line, "duplicate key '" + it->first + "'");
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  try {
    return parse_key_values(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

Timestamp parse_duration(std::string_view text) {
  text = trim(text);
  double unit = 1;
  if (!text.empty()) {
    switch (text.back()) {
      case 'h': unit = 3600; text.remove_suffix(1); break;
      case 'm': unit = 60; text.remove_suffix(1); break;
      case 's': text.remove_suffix(1); break;
      default: break;
    }
  }
  double v = 0;
  try {
    v = parse_double(text) * unit;
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("bad duration '" + std::string(text) + "'");
  }
  if (!std::isfinite(v) || v <= 0 || v != std::floor(v) || v > 1e15) {
    throw std::invalid_argument("duration must be a positive whole number of seconds");
  }
  return static_cast<Timestamp>(v);
}

double parse_real(std::string_view key, std::string_view text) {
  try {
    const double v = parse_double(text);
    if (!std::isfinite(v)) throw std::invalid_argument("not finite");
    return v;
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(std::string(key) + ": expected a number, got '" +
                                std::string(text) + "'");
  }
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument(std::string(key) + ": expected a non-negative integer, got '" +
                                std::string(text) + "'");
  }
  return v;
}

void apply_config(PipelineConfig& c, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (key.starts_with("synth.")) continue;
    if (key == "delta") c.delta = parse_duration(value);
    else if (key == "epsilon") c.epsilon = parse_real(key, value);
    else if (key == "spy_rate") c.spy_rate = parse_real(key, value);
    else if (key == "delta_p") c.delta_p = parse_real(key, value);
    else if (key == "lambda") c.lambda = parse_real(key, value);
    else if (key == "n_null") c.n_null = parse_unsigned(key, value);
    else if (key == "n_runs") c.n_runs = parse_unsigned(key, value);
    else if (key == "seed") c.seed = parse_unsigned(key, value);
    else if (key == "threads") c.threads = static_cast<unsigned>(parse_unsigned(key, value));
    else if (key == "input") c.input = value;
    else if (key == "labels") c.labels = value;
    else if (key == "out") c.out = value;
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

void validate(const PipelineConfig& c) {
  if (c.delta <= 0) throw std::invalid_argument("delta must be positive");
  if (!(c.epsilon > 0 && c.epsilon < 1)) throw std::invalid_argument("epsilon must be in (0, 1)");
  if (!(c.spy_rate > 0 && c.spy_rate < 1)) throw std::invalid_argument("spy_rate must be in (0, 1)");
  if (!(c.delta_p > 0 && c.delta_p < 1)) throw std::invalid_argument("delta_p must be in (0, 1)");
  if (!(c.lambda > 0)) throw std::invalid_argument("lambda must be positive");
  if (c.n_null < 2) throw std::invalid_argument("n_null must be at least 2");
  if (c.n_runs < 1) throw std::invalid_argument("n_runs must be at least 1");
}

}  // namespace mixdetect
