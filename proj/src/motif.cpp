#include "mixdetect/motif.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace mixdetect {
namespace {

// [first direction][second direction][same neighbor]
constexpr TemporalPattern kTemporalTaxonomy[2][2][2] = {
    // first = in
    {/* second = in  */ {TemporalPattern::a4, TemporalPattern::a6},
     /* second = out */ {TemporalPattern::a1, TemporalPattern::a5}},
    // first = out
    {/* second = in  */ {TemporalPattern::a2, TemporalPattern::a5},
     /* second = out */ {TemporalPattern::a3, TemporalPattern::a6}},
};

constexpr std::size_t idx(Direction d) { return d == Direction::in ? 0 : 1; }

void require_positive_delta(Timestamp delta) {
  if (delta <= 0) throw std::invalid_argument("delta must be positive");
}

void add_counts(TemporalCounts& into, const TemporalCounts& from) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

}  // namespace

TemporalPattern temporal_pattern_for(Direction first, Direction second, bool same_neighbor) {
  return kTemporalTaxonomy[idx(first)][idx(second)][same_neighbor ? 1 : 0];
}

std::optional<TemporalPattern> classify_edge_pair(AddressId center, const AainEdge& e1,
                                                  const AainEdge& e2) {
  for (const auto* e : {&e1, &e2}) {
    if (e->src != center && e->dst != center) {
      throw std::invalid_argument("edge is not incident to the center address");
    }
  }
  if (e1.is_self_loop() || e2.is_self_loop()) return std::nullopt;
  const auto d1 = e1.dst == center ? Direction::in : Direction::out;
  const auto d2 = e2.dst == center ? Direction::in : Direction::out;
  const auto n1 = d1 == Direction::in ? e1.src : e1.dst;
  const auto n2 = d2 == Direction::in ? e2.src : e2.dst;
  return temporal_pattern_for(d1, d2, n1 == n2);
}

TemporalCensus count_temporal_motifs(const Aain& aain, Timestamp delta) {
  require_positive_delta(delta);
  const auto& ctx = aain.context();
  const auto n = ctx.addresses().size();
  const auto& edges = aain.edges();

  TemporalCensus census;
  census.delta = delta;
  census.per_address.assign(n, TemporalCounts{});

  // Per-neighbor tallies of window edges, [direction][neighbor]. They return to zero
  // after every center, so one allocation serves all of them.
  std::vector<std::uint32_t> tally[2] = {std::vector<std::uint32_t>(n, 0),
                                         std::vector<std::uint32_t>(n, 0)};

  for (AddressId u : ctx.universe()) {
    const auto inc = aain.incidence(u);
    auto& counts = census.per_address[u];
    std::uint64_t total[2] = {0, 0};
    std::size_t lo = 0;

    auto side = [&](const AainEdge& e) {
      return e.dst == u ? std::pair{Direction::in, e.src} : std::pair{Direction::out, e.dst};
    };
    auto drop = [&](std::size_t i) {
      const auto& e = edges[inc[i]];
      if (e.is_self_loop()) return;
      auto [d, nb] = side(e);
      --tally[idx(d)][nb];
      --total[idx(d)];
    };

    for (std::size_t j = 0; j < inc.size(); ++j) {
      const auto& e2 = edges[inc[j]];
      while (e2.t - edges[inc[lo]].t > delta) drop(lo++);
      if (e2.is_self_loop()) continue;
      auto [d2, nb] = side(e2);
      for (auto d1 : {Direction::in, Direction::out}) {
        const std::uint64_t same = tally[idx(d1)][nb];
        counts[static_cast<std::size_t>(temporal_pattern_for(d1, d2, true))] += same;
        counts[static_cast<std::size_t>(temporal_pattern_for(d1, d2, false))] +=
            total[idx(d1)] - same;
      }
      ++tally[idx(d2)][nb];
      ++total[idx(d2)];
    }
    while (lo < inc.size()) drop(lo++);
    add_counts(census.totals, counts);
  }
  return census;
}

std::vector<std::span<const Event>> ath_windows(const EventSeries& series, Timestamp delta) {
  require_positive_delta(delta);
  std::vector<std::span<const Event>> windows;
  const auto& ev = series.events;
  std::size_t i = 0;
  while (i < ev.size()) {
    const auto end_t = ev[i].t + delta;
    std::size_t j = i + 1;
    while (j < ev.size() && ev[j].t <= end_t) ++j;
    windows.emplace_back(ev.data() + i, j - i);
    i = j;
  }
  return windows;
}

AthClass classify_window(std::span<const Event> window) {
  if (window.empty()) throw std::invalid_argument("cannot classify an empty window");
  // Cross-multiplied sums of int64 values overflow 64 bits.
  __extension__ typedef __int128 wide;
  wide n_in = 0, n_out = 0, v_in = 0, v_out = 0, t_in = 0, t_out = 0;
  for (const auto& e : window) {
    if (e.dir == Direction::in) {
      ++n_in;
      v_in += e.amount;
      t_in += e.t;
    } else {
      ++n_out;
      v_out += e.amount;
      t_out += e.t;
    }
  }
  if (n_out == 0) return {AthPattern::b1, {0, 0}};
  if (n_in == 0) return {AthPattern::b2, {1, 1}};
  // mean comparisons by cross-multiplication, exact in integers
  const std::uint8_t amount_bit = v_in * n_out >= v_out * n_in ? 0 : 1;
  const std::uint8_t time_bit = t_in * n_out > t_out * n_in ? 0 : 1;
  static constexpr AthPattern kMixed[2][2] = {{AthPattern::b3, AthPattern::b4},
                                              {AthPattern::b5, AthPattern::b6}};
  return {kMixed[amount_bit][time_bit], {amount_bit, time_bit}};
}

AthCensus count_ath_motifs(const Tain& tain, Timestamp delta) {
  require_positive_delta(delta);
  const auto& ctx = tain.context();
  AthCensus census;
  census.delta = delta;
  census.per_address.assign(ctx.addresses().size(), AthCounts{});
  for (AddressId a : ctx.universe()) {
    const auto series = event_series(tain, a);
    auto& counts = census.per_address[a];
    for (auto w : ath_windows(series, delta)) {
      ++counts[static_cast<std::size_t>(classify_window(w).pattern)];
    }
    for (std::size_t i = 0; i < counts.size(); ++i) census.totals[i] += counts[i];
  }
  return census;
}

MotifCensus count_motifs(const Aain& aain, const Tain& tain, Timestamp delta) {
  return {count_temporal_motifs(aain, delta), count_ath_motifs(tain, delta)};
}

std::string_view pattern_name(TemporalPattern p) {
  static constexpr std::string_view names[] = {"a1", "a2", "a3", "a4", "a5", "a6"};
  return names[static_cast<std::size_t>(p)];
}

std::string_view pattern_name(AthPattern p) {
  static constexpr std::string_view names[] = {"b1", "b2", "b3", "b4", "b5", "b6"};
  return names[static_cast<std::size_t>(p)];
}

void write_census(std::ostream& out, const TxContext& ctx, const MotifCensus& census) {
  if (census.temporal.delta != census.ath.delta) {
    throw std::invalid_argument("temporal and ATH censuses use different delta");
  }
  out << "address";
  for (std::size_t i = 0; i < kTemporalPatternCount; ++i) {
    out << '\t' << pattern_name(static_cast<TemporalPattern>(i));
  }
  for (std::size_t i = 0; i < kAthPatternCount; ++i) {
    out << '\t' << pattern_name(static_cast<AthPattern>(i));
  }
  out << '\n';
  auto row = [&](const TemporalCounts& a, const AthCounts& b) {
    for (auto c : a) out << '\t' << c;
    for (auto c : b) out << '\t' << c;
    out << '\n';
  };
  for (AddressId a : ctx.universe()) {
    out << ctx.addresses().name(a);
    row(census.temporal.per_address[a], census.ath.per_address[a]);
  }
  out << "#total";
  row(census.temporal.totals, census.ath.totals);
}

namespace {

class GenericEnumerator {
 public:
  GenericEnumerator(const Aain& aain, const MotifTemplate& pattern, Timestamp delta)
      : aain_(aain), edges_(aain.edges()), pattern_(pattern), delta_(delta) {
    mapping_.fill(kUnmapped);
  }

  std::uint64_t run() {
    extend(0, nullptr, 0);
    return count_;
  }

 private:
  static constexpr AddressId kUnmapped = static_cast<AddressId>(-1);

  bool after(std::uint32_t cand, const std::uint32_t* prev) const {
    if (!prev) return true;
    const auto& a = edges_[*prev];
    const auto& b = edges_[cand];
    if (edge_order_less(a, b)) return true;
    if (edge_order_less(b, a)) return false;
    return *prev < cand;
  }

  void try_edge(std::size_t i, std::uint32_t cand, const std::uint32_t* prev, Timestamp t_first) {
    const auto& e = edges_[cand];
    if (!after(cand, prev)) return;
    if (prev && e.t - t_first > delta_) return;
    const auto [a, b] = pattern_.edges[i];
    const bool new_a = mapping_[a] == kUnmapped;
    if (!new_a && mapping_[a] != e.src) return;
    if (new_a && is_used(e.src)) return;
    mapping_[a] = e.src;
    const bool new_b = mapping_[b] == kUnmapped;
    bool ok = true;
    if (!new_b) {
      ok = mapping_[b] == e.dst;
    } else if (is_used(e.dst)) {
      ok = false;
    }
    if (ok) {
      mapping_[b] = e.dst;
      extend(i + 1, &cand, prev ? t_first : e.t);
      if (new_b) mapping_[b] = kUnmapped;
    }
    if (new_a) mapping_[a] = kUnmapped;
  }

  bool is_used(AddressId addr) const {
    return std::find(mapping_.begin(), mapping_.end(), addr) != mapping_.end();
  }

  void extend(std::size_t i, const std::uint32_t* prev, Timestamp t_first) {
    if (i == pattern_.edges.size()) {
      ++count_;
      return;
    }
    const auto [a, b] = pattern_.edges[i];
    const std::uint32_t prev_value = prev ? *prev : 0;
    const std::uint32_t* prev_ptr = prev ? &prev_value : nullptr;
    if (mapping_[a] != kUnmapped || mapping_[b] != kUnmapped) {
      const auto anchor = mapping_[a] != kUnmapped ? mapping_[a] : mapping_[b];
      for (auto cand : aain_.incidence(anchor)) try_edge(i, cand, prev_ptr, t_first);
    } else {
      for (std::uint32_t cand = 0; cand < edges_.size(); ++cand) {
        try_edge(i, cand, prev_ptr, t_first);
      }
    }
  }

  const Aain& aain_;
  const std::vector<AainEdge>& edges_;
  const MotifTemplate& pattern_;
  Timestamp delta_;
  std::array<AddressId, kMaxTemplateNodes> mapping_;
  std::uint64_t count_ = 0;
};

void validate_template(const MotifTemplate& pattern) {
  if (pattern.edges.empty()) throw std::invalid_argument("motif template has no edges");
  if (pattern.edges.size() > kMaxTemplateEdges) {
    throw std::invalid_argument("motif templates with more than 4 edges are unsupported");
  }
  std::array<int, kMaxTemplateNodes> parent;
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::array<bool, kMaxTemplateNodes> used{};
  for (auto [a, b] : pattern.edges) {
    if (a < 0 || b < 0 || a >= kMaxTemplateNodes || b >= kMaxTemplateNodes) {
      throw std::invalid_argument("motif template node ids must be in 0..3");
    }
    used[a] = used[b] = true;
    parent[find(a)] = find(b);
  }
  int root = -1;
  for (int v = 0; v < kMaxTemplateNodes; ++v) {
    if (!used[v]) continue;
    if (root == -1) root = find(v);
    if (find(v) != root) throw std::invalid_argument("motif template is not connected");
  }
}

}  // namespace

std::uint64_t enumerate_generic(const Aain& aain, const MotifTemplate& pattern, Timestamp delta) {
  require_positive_delta(delta);
  validate_template(pattern);
  return GenericEnumerator(aain, pattern, delta).run();
}

}  // namespace mixdetect
