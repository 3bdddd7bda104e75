#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "mixdetect/graph.hpp"
#include "mixdetect/motif.hpp"

namespace mixdetect {

inline constexpr double kSignificanceThreshold = 2.0;
inline constexpr std::size_t kDefaultNullSamples = 100;

/// Directed configuration model: out-stubs and in-stubs paired uniformly at random
/// (self-loops and multi-edges kept), then the (tx, t) attribute pairs permuted over
/// the new edges. Per-node in/out degrees are preserved exactly.
Aain randomize_aain(const Aain& aain, std::uint64_t seed);

/// Stub matching within each TAIN edge kind separately, with the (amount, t) pairs
/// permuted within each kind. Per-node per-kind degrees are preserved.
Tain randomize_tain(const Tain& tain, std::uint64_t seed);

/// (n_real - mean) / std with the population standard deviation. When std is 0 the
/// result is +inf, -inf or 0 by the sign of n_real - mean. Throws on empty input.
double zscore(std::uint64_t n_real, std::span<const std::uint64_t> null_counts);

struct PatternSignificance {
  std::string pattern;
  std::uint64_t n_real = 0;
  double null_mean = 0;
  double null_std = 0;
  double z = 0;
  bool significant = false;
};

/// a1..a6 followed by b1..b6.
struct SignificanceReport {
  std::array<PatternSignificance, kTemporalPatternCount + kAthPatternCount> patterns;
};

struct NullModelOptions {
  Timestamp delta = kDefaultDelta;
  std::size_t n_null = kDefaultNullSamples;
  std::uint64_t seed = 0;
  /// 0 picks std::thread::hardware_concurrency(). The report does not depend on it.
  unsigned threads = 0;
};

/// Seed of replica `i`, derived from the base seed.
std::uint64_t replica_seed(std::uint64_t seed, std::size_t i);

/// Census of the real networks and of n_null independent AAIN/TAIN replicas.
/// Throws std::invalid_argument when n_null < 2.
SignificanceReport significance_report(const Aain& aain, const Tain& tain,
                                       const NullModelOptions& options);

/// Tab-separated `pattern n_real null_mean null_std z significant` with a header.
void write_significance_report(std::ostream& out, const SignificanceReport& report);

}  // namespace mixdetect
