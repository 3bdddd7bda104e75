#pragma once

// Brute-force reference implementations and random fixtures shared by the unit
// tests and the acceptance runner. Written independently of the library code paths
// they check: no sliding windows, no sorted-array searches.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mixdetect/graph.hpp"
#include "mixdetect/ingest.hpp"
#include "mixdetect/motif.hpp"

namespace oracle {

using namespace mixdetect;

inline TxRecord tx(std::string id, Timestamp t, std::vector<Slot> in, std::vector<Slot> out) {
  return TxRecord{std::move(id), t, std::move(in), std::move(out)};
}

// Random small dataset. The AAIN over all addresses has at most `max_edges` edges.
inline std::vector<TxRecord> random_records(std::mt19937_64& rng, std::size_t max_edges,
                                            Timestamp horizon) {
  std::uniform_int_distribution<int> n_addr_d(3, 9);
  const int n_addr = n_addr_d(rng);
  std::uniform_int_distribution<int> addr_d(0, n_addr - 1), slots_d(1, 3), amount_d(1, 20);
  std::uniform_int_distribution<Timestamp> time_d(0, horizon);
  std::bernoulli_distribution coinbase_d(0.1);
  std::vector<TxRecord> recs;
  std::size_t edges = 0;
  for (int k = 0; k < 40; ++k) {
    TxRecord r;
    r.tx_id = "t" + std::to_string(k);
    r.timestamp = time_d(rng);
    std::vector<int> ins, outs;
    if (!coinbase_d(rng)) {
      for (int i = slots_d(rng); i > 0; --i) ins.push_back(addr_d(rng));
    }
    for (int i = slots_d(rng); i > 0; --i) outs.push_back(addr_d(rng));
    for (int a : ins) r.inputs.push_back({"a" + std::to_string(a), amount_d(rng)});
    for (int a : outs) r.outputs.push_back({"a" + std::to_string(a), amount_d(rng)});
    std::sort(ins.begin(), ins.end());
    ins.erase(std::unique(ins.begin(), ins.end()), ins.end());
    std::sort(outs.begin(), outs.end());
    outs.erase(std::unique(outs.begin(), outs.end()), outs.end());
    const auto add = ins.size() * outs.size();
    if (edges + add > max_edges) break;
    edges += add;
    recs.push_back(std::move(r));
  }
  return recs;
}

// Pattern index 0..5 for a1..a6 straight from the taxonomy prose.
inline int taxonomy(bool first_in, bool second_in, bool same_neighbor) {
  if (same_neighbor) return first_in != second_in ? 4 : 5;
  if (first_in && !second_in) return 0;
  if (!first_in && second_in) return 1;
  if (!first_in && !second_in) return 2;
  return 3;
}

// Every ordered pair of incident edges, per center.
inline std::vector<TemporalCounts> temporal_counts(const Aain& aain, Timestamp delta) {
  const auto& ctx = aain.context();
  std::vector<TemporalCounts> counts(ctx.addresses().size(), TemporalCounts{});
  const auto& E = aain.edges();
  for (AddressId u : ctx.universe()) {
    for (std::size_t i = 0; i < E.size(); ++i) {
      for (std::size_t j = 0; j < E.size(); ++j) {
        if (i == j) continue;
        const auto &a = E[i], &b = E[j];
        if ((a.src != u && a.dst != u) || (b.src != u && b.dst != u)) continue;
        if (a.src == a.dst || b.src == b.dst) continue;
        if (!edge_order_less(a, b)) continue;
        if (b.t - a.t > delta) continue;
        const bool a_in = a.dst == u, b_in = b.dst == u;
        const AddressId na = a_in ? a.src : a.dst, nb = b_in ? b.src : b.dst;
        ++counts[u][static_cast<std::size_t>(taxonomy(a_in, b_in, na == nb))];
      }
    }
  }
  return counts;
}

struct OracleEvent {
  Timestamp t;
  TxIndex tx;
  bool in;
  Satoshi amount;
};

// Windows rebuilt from the raw TAIN edge list and reclassified.
inline std::vector<AthCounts> ath_counts(const Tain& tain, Timestamp delta) {
  const auto& ctx = tain.context();
  std::vector<AthCounts> counts(ctx.addresses().size(), AthCounts{});
  for (AddressId u : ctx.universe()) {
    std::vector<OracleEvent> ev;
    for (const auto& e : tain.edges()) {
      if (e.address == u) {
        ev.push_back({e.t, e.tx, e.kind == TainEdgeKind::transaction_to_address, e.amount});
      }
    }
    std::stable_sort(ev.begin(), ev.end(), [](const OracleEvent& a, const OracleEvent& b) {
      if (a.t != b.t) return a.t < b.t;
      if (a.tx != b.tx) return a.tx < b.tx;
      return a.in && !b.in;
    });
    std::vector<bool> covered(ev.size(), false);
    for (std::size_t s = 0; s < ev.size(); ++s) {
      if (covered[s]) continue;
      long double n_in = 0, n_out = 0, v_in = 0, v_out = 0, t_in = 0, t_out = 0;
      for (std::size_t k = s; k < ev.size(); ++k) {
        if (ev[k].t > ev[s].t + delta) break;
        covered[k] = true;
        if (ev[k].in) {
          n_in += 1, v_in += ev[k].amount, t_in += ev[k].t;
        } else {
          n_out += 1, v_out += ev[k].amount, t_out += ev[k].t;
        }
      }
      int id;
      if (n_out == 0) {
        id = 0;
      } else if (n_in == 0) {
        id = 1;
      } else {
        // Exact on these magnitudes: small integer sums fit a long double mantissa.
        const int amount_bit = v_in * n_out >= v_out * n_in ? 0 : 1;
        const int time_bit = t_in * n_out > t_out * n_in ? 0 : 1;
        static const int table[2][2] = {{2, 3}, {4, 5}};
        id = table[amount_bit][time_bit];
      }
      ++counts[u][static_cast<std::size_t>(id)];
    }
  }
  return counts;
}

// Every l-tuple of distinct edges, checked against the template directly.
inline std::uint64_t generic_count(const Aain& aain, const MotifTemplate& m, Timestamp delta) {
  const auto& E = aain.edges();
  const std::size_t l = m.edges.size();
  std::uint64_t count = 0;
  std::vector<std::size_t> pick(l, 0);
  while (true) {
    bool ok = true;
    for (std::size_t i = 0; ok && i < l; ++i) {
      for (std::size_t j = i + 1; ok && j < l; ++j) ok = pick[i] != pick[j];
    }
    for (std::size_t i = 0; ok && i + 1 < l; ++i) ok = edge_order_less(E[pick[i]], E[pick[i + 1]]);
    if (ok) ok = E[pick[l - 1]].t - E[pick[0]].t <= delta;
    if (ok) {
      std::map<int, AddressId> fwd;
      std::map<AddressId, int> back;
      auto bind = [&](int node, AddressId a) {
        auto f = fwd.find(node);
        if (f != fwd.end()) return f->second == a;
        auto b = back.find(a);
        if (b != back.end()) return false;
        fwd[node] = a;
        back[a] = node;
        return true;
      };
      for (std::size_t i = 0; ok && i < l; ++i) {
        ok = bind(m.edges[i].first, E[pick[i]].src) && bind(m.edges[i].second, E[pick[i]].dst);
      }
      if (ok) ++count;
    }
    std::size_t k = 0;
    while (k < l && ++pick[k] == E.size()) pick[k++] = 0;
    if (k == l) break;
  }
  return count;
}

// Grid scan with plain double fractions and linear counting.
inline double theta(const std::vector<double>& spy, const std::vector<double>& unl, double dp) {
  auto frac = [](const std::vector<double>& v, double p) {
    double c = 0;
    for (double x : v) c += x <= p ? 1 : 0;
    return c / static_cast<double>(v.size());
  };
  const auto k_max = static_cast<long>(std::ceil(1.0 / dp - 1e-9));
  double best = -2, best_p = 0, prev_p = 0;
  for (long k = 1; k <= k_max; ++k) {
    const double p = k == k_max ? 1.0 : static_cast<double>(k) * dp;
    const double score =
        (frac(unl, p) - frac(unl, prev_p)) - (frac(spy, p) - frac(spy, prev_p));
    if (score > best + 1e-12) {
      best = score;
      best_p = p;
    }
    prev_p = p;
  }
  return best_p;
}

}  // namespace oracle
