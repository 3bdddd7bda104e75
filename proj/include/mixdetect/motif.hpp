#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "mixdetect/graph.hpp"

namespace mixdetect {

// ---------------------------------------------------------------------------
// 2-edge temporal motifs in the AAIN, counted at the center address.
//
//   a1  in from v, then out to w      (v != w)
//   a2  out to w, then in from v      (v != w)
//   a3  out, out to distinct neighbors
//   a4  in, in from distinct neighbors
//   a5  in and out with the same neighbor, either order (round trip)
//   a6  same direction, same neighbor (repeat)
//
// Pairs involving a self-loop are not classified.
// ---------------------------------------------------------------------------

enum class TemporalPattern : std::uint8_t { a1, a2, a3, a4, a5, a6 };
inline constexpr std::size_t kTemporalPatternCount = 6;

/// Pattern for (direction of earlier edge, direction of later edge, same neighbor).
/// Direction is relative to the center.
TemporalPattern temporal_pattern_for(Direction first, Direction second, bool same_neighbor);

/// `e1` must precede `e2` in edge_order_less. Returns nullopt when either edge is a
/// self-loop. Throws std::invalid_argument when an edge does not touch `center`.
std::optional<TemporalPattern> classify_edge_pair(AddressId center, const AainEdge& e1,
                                                  const AainEdge& e2);

using TemporalCounts = std::array<std::uint64_t, kTemporalPatternCount>;

struct TemporalCensus {
  Timestamp delta = 0;
  std::vector<TemporalCounts> per_address;  // indexed by AddressId, zero outside the universe
  TemporalCounts totals{};
};

/// For every universe address u, counts the pairs of distinct incident edges
/// (e1 before e2 in the total edge order) with t2 - t1 <= delta. One sliding
/// window pass per address with per-neighbor tallies: O(deg) per center.
/// Throws std::invalid_argument when delta <= 0.
TemporalCensus count_temporal_motifs(const Aain& aain, Timestamp delta);

// ---------------------------------------------------------------------------
// ATH motifs in the TAIN: events of one address grouped into tumbling windows
// of width delta, each window classified by topology and the 2-bit attribute
// vector (amount bit, time bit).
// ---------------------------------------------------------------------------

enum class AthPattern : std::uint8_t { b1, b2, b3, b4, b5, b6 };
inline constexpr std::size_t kAthPatternCount = 6;

struct AthClass {
  AthPattern pattern;
  std::array<std::uint8_t, 2> bits;  // [amount bit, time bit]
};

/// Tumbling windows: a window starts at the earliest uncovered event and takes every
/// following event with t <= start + delta.
std::vector<std::span<const Event>> ath_windows(const EventSeries& series, Timestamp delta);

/// all-in -> b1 [0,0]; all-out -> b2 [1,1]; mixed -> amount bit 0 iff mean in amount >=
/// mean out amount, time bit 0 iff mean in time > mean out time; [0,0] b3, [0,1] b4,
/// [1,0] b5, [1,1] b6. Comparisons are exact. Throws on an empty window.
AthClass classify_window(std::span<const Event> window);

using AthCounts = std::array<std::uint64_t, kAthPatternCount>;

struct AthCensus {
  Timestamp delta = 0;
  std::vector<AthCounts> per_address;
  AthCounts totals{};
};

AthCensus count_ath_motifs(const Tain& tain, Timestamp delta);

struct MotifCensus {
  TemporalCensus temporal;
  AthCensus ath;
};

MotifCensus count_motifs(const Aain& aain, const Tain& tain, Timestamp delta);

/// Census dump: header, one row per universe address with a1..a6 b1..b6, then a
/// `#total` footer row.
void write_census(std::ostream& out, const TxContext& ctx, const MotifCensus& census);

std::string_view pattern_name(TemporalPattern p);
std::string_view pattern_name(AthPattern p);

// ---------------------------------------------------------------------------
// Generic brute-force temporal motif enumeration.
// ---------------------------------------------------------------------------

/// Ordered edge template over abstract nodes 0..3: edge i maps to the i-th edge of an
/// instance, in time order.
struct MotifTemplate {
  std::vector<std::pair<int, int>> edges;
};

inline constexpr std::size_t kMaxTemplateEdges = 4;
inline constexpr int kMaxTemplateNodes = 4;

/// Counts instances: tuples of distinct AAIN edges, strictly increasing in the total
/// edge order, whose endpoints admit one injective node mapping onto the template,
/// with t_last - t_first <= delta. Brute force by design.
/// Throws std::invalid_argument for an empty or disconnected template, more than 4
/// edges or node ids outside 0..3.
std::uint64_t enumerate_generic(const Aain& aain, const MotifTemplate& pattern, Timestamp delta);

}  // namespace mixdetect
