#include "mixdetect/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mixdetect/io.hpp"

namespace mixdetect {
namespace {

double ratio(double num, double den) { return den == 0 ? num : num / den; }

enum : std::size_t {
  NF1 = 0, NF7 = 6, NF11 = 10, NF12, NF13, NF14, NF15, NF16, NF17,
  AF1, AF2, AF3, AF4, AF5, AF6,
  TF1, TF2, TF3, TF4, TF5, TF6,
};
static_assert(TF6 + 1 == kFeatureCount);

}  // namespace

std::vector<Cycle> transaction_cycles(const EventSeries& series) {
  std::vector<Cycle> cycles;
  const auto& ev = series.events;
  std::size_t i = 0;
  while (i < ev.size() && ev[i].dir == Direction::out) ++i;
  while (i < ev.size()) {
    Cycle c;
    while (i < ev.size() && ev[i].dir == Direction::in) c.in_events.push_back(ev[i++]);
    while (i < ev.size() && ev[i].dir == Direction::out) c.out_events.push_back(ev[i++]);
    if (c.out_events.empty()) break;
    for (const auto& e : c.in_events) c.balance += e.amount;
    for (const auto& e : c.out_events) c.balance -= e.amount;
    c.duration = c.out_events.back().t - c.in_events.front().t;
    cycles.push_back(std::move(c));
  }
  return cycles;
}

const std::array<std::string_view, kFeatureCount>& feature_names() {
  static constexpr std::array<std::string_view, kFeatureCount> names = {
      "NF1",  "NF2",  "NF3",  "NF4",  "NF5",  "NF6",  "NF7",  "NF8",  "NF9",  "NF10",
      "NF11", "NF12", "NF13", "NF14", "NF15", "NF16", "NF17", "AF1",  "AF2",  "AF3",
      "AF4",  "AF5",  "AF6",  "TF1",  "TF2",  "TF3",  "TF4",  "TF5",  "TF6"};
  return names;
}

double FeatureVector::get(std::string_view name) const {
  const auto& names = feature_names();
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("unknown feature '" + std::string(name) + "'");
  return values[static_cast<std::size_t>(it - names.begin())];
}

FeatureVector extract_features(AddressId address, const Aain& aain, const Tain& tain,
                               const TemporalCensus& temporal, const AthCensus& ath,
                               const EventSeries& series) {
  if (temporal.delta != ath.delta) {
    throw std::invalid_argument("temporal and ATH motif counts use different delta");
  }
  const auto& ctx = aain.context();
  if (address >= ctx.addresses().size() || !ctx.in_universe(address)) {
    throw std::out_of_range("address id " + std::to_string(address) + " is not in the universe");
  }
  if (series.address != address) throw std::invalid_argument("event series belongs to another address");
  (void)tain;

  FeatureVector f;

  const auto& a = temporal.per_address[address];
  std::uint64_t a_sum = 0;
  for (auto c : a) a_sum += c;
  for (std::size_t i = 0; i < kTemporalPatternCount; ++i) {
    f[NF1 + i] = a_sum ? static_cast<double>(a[i]) / static_cast<double>(a_sum) : 0.0;
  }

  const auto& b = ath.per_address[address];
  const std::array<std::uint64_t, 4> considered = {
      b[static_cast<std::size_t>(AthPattern::b2)], b[static_cast<std::size_t>(AthPattern::b4)],
      b[static_cast<std::size_t>(AthPattern::b5)], b[static_cast<std::size_t>(AthPattern::b6)]};
  std::uint64_t b_sum = 0;
  for (auto c : considered) b_sum += c;
  for (std::size_t i = 0; i < considered.size(); ++i) {
    f[NF7 + i] = b_sum ? static_cast<double>(considered[i]) / static_cast<double>(b_sum) : 0.0;
  }

  std::vector<AddressId> successors, predecessors;
  for (auto e : aain.incidence(address)) {
    const auto& edge = aain.edges()[e];
    if (edge.src == address) successors.push_back(edge.dst);
    if (edge.dst == address) predecessors.push_back(edge.src);
  }
  auto distinct = [](std::vector<AddressId>& v) {
    std::sort(v.begin(), v.end());
    return static_cast<double>(std::unique(v.begin(), v.end()) - v.begin());
  };
  f[NF11] = static_cast<double>(aain.in_degree(address));
  f[NF12] = static_cast<double>(aain.out_degree(address));
  f[NF13] = ratio(f[NF11], f[NF12]);
  f[NF14] = distinct(successors);
  f[NF15] = distinct(predecessors);
  f[NF16] = ratio(f[NF11], f[NF14]);
  f[NF17] = ratio(f[NF12], f[NF15]);

  std::size_t n_in = 0, n_out = 0;
  Satoshi v_in = 0, v_out = 0;
  std::uint64_t co_in_sum = 0, co_out_sum = 0;
  std::vector<AddressId> co_in, co_out;
  for (const auto& e : series.events) {
    if (e.dir == Direction::in) {
      ++n_in;
      v_in += e.amount;
      co_out_sum += e.co_outputs;
      for (const auto& p : ctx.outputs(e.tx)) {
        if (p.address != address) co_out.push_back(p.address);
      }
    } else {
      ++n_out;
      v_out += e.amount;
      co_in_sum += e.co_inputs;
      for (const auto& p : ctx.inputs(e.tx)) {
        if (p.address != address) co_in.push_back(p.address);
      }
    }
  }
  f[AF1] = static_cast<double>(n_in);
  f[AF2] = static_cast<double>(n_out);
  f[AF3] = ratio(f[AF1], f[AF2]);
  f[AF4] = static_cast<double>(v_in);
  f[AF5] = static_cast<double>(v_out);
  f[AF6] = ratio(f[AF4], f[AF5]);

  const auto cycles = transaction_cycles(series);
  if (cycles.size() >= 2) {
    double mean = 0;
    for (const auto& c : cycles) mean += static_cast<double>(c.balance);
    mean /= static_cast<double>(cycles.size());
    double ss = 0;
    for (const auto& c : cycles) {
      const double d = static_cast<double>(c.balance) - mean;
      ss += d * d;
    }
    f[TF1] = std::sqrt(ss / static_cast<double>(cycles.size()));
  }
  if (!cycles.empty()) {
    double total = 0;
    for (const auto& c : cycles) total += static_cast<double>(c.duration);
    f[TF2] = total / static_cast<double>(cycles.size());
  }
  f[TF3] = n_out ? static_cast<double>(co_in_sum) / static_cast<double>(n_out) : 0.0;
  f[TF4] = n_in ? static_cast<double>(co_out_sum) / static_cast<double>(n_in) : 0.0;
  f[TF5] = distinct(co_in);
  f[TF6] = distinct(co_out);
  return f;
}

std::vector<std::size_t> FeatureTable::rows_with(Label label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) out.push_back(i);
  }
  return out;
}

FeatureTable build_feature_table(std::span<const TxRecord> records, const LabelSet& labels,
                                 Timestamp delta) {
  const auto universe = filter_addresses(records);
  auto ctx = TxContext::build(records, universe);
  const auto aain = build_aain(ctx);
  const auto tain = build_tain(ctx);
  const auto census = count_motifs(aain, tain, delta);

  FeatureTable table;
  const auto& ids = ctx->universe();
  table.features.resize(static_cast<Eigen::Index>(ids.size()), kFeatureCount);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto a = ids[r];
    const auto& name = ctx->addresses().name(a);
    const auto f = extract_features(a, aain, tain, census.temporal, census.ath, event_series(tain, a));
    table.addresses.push_back(name);
    table.labels.push_back(labels.contains(name) ? Label::positive : Label::unlabeled);
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      table.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = f[c];
    }
  }
  return table;
}

void write_feature_table(std::ostream& out, const FeatureTable& table) {
  out << "address\tlabel";
  for (auto n : feature_names()) out << '\t' << n;
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out << table.addresses[r] << '\t'
        << (table.labels[r] == Label::positive ? "positive" : "unlabeled");
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      out << '\t'
          << format_double(table.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    }
    out << '\n';
  }
}

FeatureTable read_feature_table(std::istream& in) {
  std::string buf;
  std::size_t line = 0;
  if (!std::getline(in, buf)) throw ParseError(0, "feature file is empty");
  ++line;
  {
    const auto cols = split(buf, '\t');
    bool ok = cols.size() == kFeatureCount + 2 && cols[0] == "address" && cols[1] == "label";
    for (std::size_t c = 0; ok && c < kFeatureCount; ++c) ok = cols[c + 2] == feature_names()[c];
    if (!ok) throw ParseError(line, "feature file header does not match the canonical feature names");
  }
  FeatureTable table;
  std::vector<double> values;
  while (std::getline(in, buf)) {
    ++line;
    if (buf.empty()) continue;
    const auto cols = split(buf, '\t');
    if (cols.size() != kFeatureCount + 2) {
      throw ParseError(line, "expected " + std::to_string(kFeatureCount + 2) + " columns");
    }
    table.addresses.emplace_back(cols[0]);
    if (cols[1] == "positive") {
      table.labels.push_back(Label::positive);
    } else if (cols[1] == "unlabeled") {
      table.labels.push_back(Label::unlabeled);
    } else {
      throw ParseError(line, "label must be 'positive' or 'unlabeled'");
    }
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      const auto s = cols[c + 2];
      double v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ParseError(line, "bad value for " + std::string(feature_names()[c]));
      }
      values.push_back(v);
    }
  }
  const auto rows = static_cast<Eigen::Index>(table.addresses.size());
  table.features =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          values.data(), rows, kFeatureCount);
  return table;
}

FeatureTable read_feature_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature file " + path.string());
  try {
    return read_feature_table(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& rows,
                                      const StandardizationParams& params) {
  if (rows.cols() != params.mean.size() || rows.cols() != params.scale.size()) {
    throw std::invalid_argument("column count does not match standardization params");
  }
  Eigen::MatrixXd out = rows;
  out.rowwise() -= params.mean.transpose();
  out.array().rowwise() /= params.scale.transpose().array();
  return out;
}

std::pair<Eigen::MatrixXd, StandardizationParams> standardize(
    const Eigen::MatrixXd& rows, const std::optional<StandardizationParams>& params) {
  if (params) return {apply_standardization(rows, *params), *params};
  if (rows.rows() == 0) throw std::invalid_argument("cannot fit standardization on an empty matrix");
  StandardizationParams p;
  const auto n = static_cast<double>(rows.rows());
  p.mean.resize(rows.cols());
  p.scale.resize(rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const auto col = rows.col(c);
    if (col.maxCoeff() == col.minCoeff()) {
      p.mean(c) = col(0);
      p.scale(c) = 1.0;
      continue;
    }
    const double mean = col.sum() / n;
    const double var = (col.array() - mean).square().sum() / n;
    p.mean(c) = mean;
    p.scale(c) = var > 0 ? std::sqrt(var) : 1.0;
  }
  return {apply_standardization(rows, p), p};
}

}  // namespace mixdetect
