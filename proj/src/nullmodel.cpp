#include "mixdetect/nullmodel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "mixdetect/random.hpp"

namespace mixdetect {

Aain randomize_aain(const Aain& aain, std::uint64_t seed) {
  const auto& edges = aain.edges();
  std::vector<AddressId> in_stubs;
  std::vector<std::pair<TxIndex, Timestamp>> attrs;
  in_stubs.reserve(edges.size());
  attrs.reserve(edges.size());
  for (const auto& e : edges) {
    in_stubs.push_back(e.dst);
    attrs.emplace_back(e.tx, e.t);
  }
  Rng rng(seed);
  std::shuffle(in_stubs.begin(), in_stubs.end(), rng);
  std::shuffle(attrs.begin(), attrs.end(), rng);

  std::vector<AainEdge> out(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    out[i] = {edges[i].src, in_stubs[i], attrs[i].first, attrs[i].second};
  }
  return Aain(aain.context_ptr(), std::move(out));
}

Tain randomize_tain(const Tain& tain, std::uint64_t seed) {
  const auto& edges = tain.edges();
  Rng rng(seed);
  std::vector<TainEdge> out(edges);
  for (auto kind : {TainEdgeKind::transaction_to_address, TainEdgeKind::address_to_transaction}) {
    std::vector<std::size_t> slots;
    std::vector<TxIndex> tx_stubs;
    std::vector<std::pair<Satoshi, Timestamp>> attrs;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (edges[i].kind != kind) continue;
      slots.push_back(i);
      tx_stubs.push_back(edges[i].tx);
      attrs.emplace_back(edges[i].amount, edges[i].t);
    }
    std::shuffle(tx_stubs.begin(), tx_stubs.end(), rng);
    std::shuffle(attrs.begin(), attrs.end(), rng);
    for (std::size_t k = 0; k < slots.size(); ++k) {
      auto& e = out[slots[k]];
      e.tx = tx_stubs[k];
      e.amount = attrs[k].first;
      e.t = attrs[k].second;
    }
  }
  return Tain(tain.context_ptr(), std::move(out));
}

double zscore(std::uint64_t n_real, std::span<const std::uint64_t> null_counts) {
  if (null_counts.empty()) throw std::invalid_argument("zscore needs at least one null count");
  const double n = static_cast<double>(null_counts.size());
  double sum = 0;
  for (auto c : null_counts) sum += static_cast<double>(c);
  const double mean = sum / n;
  double ss = 0;
  for (auto c : null_counts) {
    const double d = static_cast<double>(c) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / n);
  const double diff = static_cast<double>(n_real) - mean;
  if (sd == 0) {
    if (diff > 0) return std::numeric_limits<double>::infinity();
    if (diff < 0) return -std::numeric_limits<double>::infinity();
    return 0;
  }
  return diff / sd;
}

std::uint64_t replica_seed(std::uint64_t seed, std::size_t i) { return derive_seed(seed, 0x6e756c6c, i); }

namespace {

using Totals = std::array<std::uint64_t, kTemporalPatternCount + kAthPatternCount>;

Totals census_totals(const Aain& aain, const Tain& tain, Timestamp delta) {
  const auto census = count_motifs(aain, tain, delta);
  Totals t{};
  std::copy(census.temporal.totals.begin(), census.temporal.totals.end(), t.begin());
  std::copy(census.ath.totals.begin(), census.ath.totals.end(),
            t.begin() + kTemporalPatternCount);
  return t;
}

}  // namespace

SignificanceReport significance_report(const Aain& aain, const Tain& tain,
                                       const NullModelOptions& options) {
  if (options.n_null < 2) {
    throw std::invalid_argument("significance needs at least 2 null replicas");
  }
  const auto real = census_totals(aain, tain, options.delta);

  std::vector<Totals> nulls(options.n_null);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < nulls.size();) {
      // AAIN and TAIN replicas use separate streams of the replica seed.
      const auto s = replica_seed(options.seed, i);
      nulls[i] = census_totals(randomize_aain(aain, mix_seed(s ^ 0xaa)),
                               randomize_tain(tain, mix_seed(s ^ 0xbb)), options.delta);
    }
  };
  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(nulls.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  }

  SignificanceReport report;
  std::vector<std::uint64_t> column(nulls.size());
  for (std::size_t p = 0; p < report.patterns.size(); ++p) {
    for (std::size_t i = 0; i < nulls.size(); ++i) column[i] = nulls[i][p];
    auto& r = report.patterns[p];
    r.pattern = p < kTemporalPatternCount
                    ? std::string(pattern_name(static_cast<TemporalPattern>(p)))
                    : std::string(pattern_name(static_cast<AthPattern>(p - kTemporalPatternCount)));
    r.n_real = real[p];
    double sum = 0;
    for (auto c : column) sum += static_cast<double>(c);
    r.null_mean = sum / static_cast<double>(column.size());
    double ss = 0;
    for (auto c : column) ss += (static_cast<double>(c) - r.null_mean) * (static_cast<double>(c) - r.null_mean);
    r.null_std = std::sqrt(ss / static_cast<double>(column.size()));
    r.z = zscore(r.n_real, column);
    r.significant = r.z > kSignificanceThreshold;
  }
  return report;
}

void write_significance_report(std::ostream& out, const SignificanceReport& report) {
  out << "pattern\tn_real\tnull_mean\tnull_std\tz\tsignificant\n";
  const auto old = out.precision(10);
  for (const auto& p : report.patterns) {
    out << p.pattern << '\t' << p.n_real << '\t' << p.null_mean << '\t' << p.null_std << '\t'
        << p.z << '\t' << (p.significant ? "yes" : "no") << '\n';
  }
  out.precision(old);
}

}  // namespace mixdetect
