#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "mixdetect/features.hpp"
#include "oracles.hpp"

using namespace mixdetect;
using oracle::tx;

namespace {

EventSeries series_of(std::initializer_list<std::pair<Direction, Satoshi>> events) {
  EventSeries s{0, {}};
  Timestamp t = 0;
  for (const auto& [d, a] : events) s.events.push_back(Event{t += 10, d, a, 0, 1, 1});
  return s;
}

FeatureVector features_for(const std::vector<TxRecord>& recs, const std::string& name,
                           Timestamp delta = kDefaultDelta) {
  const auto ctx = TxContext::build(recs, all_addresses(recs));
  const auto aain = build_aain(ctx);
  const auto tain = build_tain(ctx);
  const auto census = count_motifs(aain, tain, delta);
  const auto a = ctx->address_id(name);
  return extract_features(a, aain, tain, census.temporal, census.ath, event_series(tain, a));
}

constexpr auto in = Direction::in;
constexpr auto out = Direction::out;

}  // namespace

TEST(TransactionCycles, ReceiveThenSendAll) {
  const auto c = transaction_cycles(series_of({{in, 5}, {in, 3}, {out, 8}}));
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].balance, 0);
  EXPECT_EQ(c[0].in_events.size(), 2u);
  EXPECT_EQ(c[0].duration, 20);
}

TEST(TransactionCycles, MaximalRuns) {
  const auto c = transaction_cycles(series_of({{in, 5}, {out, 2}, {in, 1}, {out, 4}}));
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].balance, 3);
  EXPECT_EQ(c[1].balance, -3);
}

TEST(TransactionCycles, LeadingOutAndTrailingIn) {
  EXPECT_TRUE(transaction_cycles(series_of({{out, 7}})).empty());
  EXPECT_EQ(transaction_cycles(series_of({{out, 7}, {in, 2}, {out, 2}, {in, 9}})).size(), 1u);
}

TEST(ExtractFeatures, TemporalProportions) {
  const std::vector<TxRecord> recs{tx("t1", 1, {{"v", 1}}, {{"u", 1}}),
                                   tx("t2", 2, {{"u", 1}}, {{"w", 1}})};
  const auto ctx = TxContext::build(recs, all_addresses(recs));
  const auto aain = build_aain(ctx);
  const auto tain = build_tain(ctx);
  auto census = count_motifs(aain, tain, kDefaultDelta);
  const auto u = ctx->address_id("u");
  census.temporal.per_address[u] = {3, 0, 1, 0, 0, 0};
  const auto f = extract_features(u, aain, tain, census.temporal, census.ath, event_series(tain, u));
  EXPECT_EQ(f.get("NF1"), 0.75);
  EXPECT_EQ(f.get("NF3"), 0.25);
  for (auto n : {"NF2", "NF4", "NF5", "NF6"}) EXPECT_EQ(f.get(n), 0.0);

  census.ath.delta = 60;
  EXPECT_THROW(extract_features(u, aain, tain, census.temporal, census.ath, event_series(tain, u)),
               std::invalid_argument);
}

TEST(ExtractFeatures, MeanCoInputs) {
  const std::vector<TxRecord> recs{
      tx("t0", 0, {{"Y", 9}}, {{"A", 9}}),
      tx("t1", 10, {{"A", 1}, {"X", 1}}, {{"B", 2}}),
      tx("t2", 20, {{"A", 1}, {"X", 1}, {"Y", 1}, {"Z", 1}}, {{"B", 4}}),
  };
  const auto f = features_for(recs, "A");
  EXPECT_EQ(f.get("TF3"), 3.0);
  EXPECT_EQ(f.get("TF4"), 1.0);
  EXPECT_EQ(f.get("TF5"), 3.0);  // X, Y, Z
  EXPECT_EQ(f.get("TF6"), 0.0);
}

TEST(ExtractFeatures, AmountFeatures) {
  const std::vector<TxRecord> recs{
      tx("r1", 1, {{"S", 2}}, {{"A", 2}}),   tx("r2", 2, {{"S", 3}}, {{"A", 3}}),
      tx("s1", 3, {{"A", 1}}, {{"D", 1}}),   tx("s2", 4, {{"A", 2}}, {{"D", 2}}),
      tx("s3", 5, {{"A", 2}}, {{"D", 2}}),
  };
  const auto f = features_for(recs, "A");
  EXPECT_EQ(f.get("AF1"), 2.0);
  EXPECT_EQ(f.get("AF2"), 3.0);
  EXPECT_DOUBLE_EQ(f.get("AF3"), 2.0 / 3.0);
  EXPECT_EQ(f.get("AF4"), 5.0);
  EXPECT_EQ(f.get("AF5"), 5.0);
  EXPECT_EQ(f.get("AF6"), 1.0);
  // One cycle from r1 to s3 with nothing left over.
  EXPECT_EQ(f.get("TF1"), 0.0);
  EXPECT_EQ(f.get("TF2"), 4.0);
}

TEST(ExtractFeatures, ZeroDenominatorTakesNumerator) {
  const std::vector<TxRecord> recs{tx("r1", 1, {{"S", 2}}, {{"A", 2}}),
                                   tx("r2", 2, {{"S", 3}}, {{"A", 3}})};
  const auto f = features_for(recs, "A");
  EXPECT_EQ(f.get("AF3"), 2.0);
  EXPECT_EQ(f.get("AF6"), 5.0);
  EXPECT_EQ(f.get("NF13"), 2.0);
  EXPECT_THROW(f.get("NF99"), std::out_of_range);
}

TEST(ExtractFeatures, Properties) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 50; ++rep) {
    const auto recs = oracle::random_records(rng, 50, 20000);
    const auto table = build_feature_table(recs, LabelSet{});
    for (std::size_t r = 0; r < table.rows(); ++r) {
      const auto row = table.features.row(static_cast<Eigen::Index>(r));
      double nf_a = 0, nf_b = 0;
      for (int c = 0; c < 6; ++c) nf_a += row(c);
      for (int c = 6; c < 10; ++c) nf_b += row(c);
      EXPECT_TRUE(std::abs(nf_a - 1) < 1e-12 || nf_a == 0);
      EXPECT_TRUE(std::abs(nf_b - 1) < 1e-12 || nf_b == 0);
      if (row(11) > 0) EXPECT_NEAR(row(12) * row(11), row(10), 1e-9);
      EXPECT_TRUE(row.allFinite());
      EXPECT_GE(row.minCoeff(), 0.0);
    }
  }
}

TEST(BuildFeatureTable, IndependentOfRecordOrder) {
  std::mt19937_64 rng(22);
  for (int rep = 0; rep < 20; ++rep) {
    auto recs = oracle::random_records(rng, 50, 20000);
    LabelSet labels;
    labels.positives = {"a0", "a1"};
    const auto a = build_feature_table(recs, labels);
    std::shuffle(recs.begin(), recs.end(), rng);
    const auto b = build_feature_table(recs, labels);
    EXPECT_EQ(a.addresses, b.addresses);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.features, b.features);
  }
}

TEST(FeatureFile, RoundTrip) {
  std::mt19937_64 rng(23);
  const auto recs = oracle::random_records(rng, 50, 20000);
  LabelSet labels;
  labels.positives = {"a2"};
  const auto table = build_feature_table(recs, labels);
  std::stringstream ss;
  write_feature_table(ss, table);
  const auto back = read_feature_table(ss);
  EXPECT_EQ(back.addresses, table.addresses);
  EXPECT_EQ(back.labels, table.labels);
  EXPECT_EQ(back.features, table.features);
}

TEST(FeatureFile, RejectsBadInput) {
  std::istringstream header("address\tlabel\tNF1\n");
  EXPECT_THROW(read_feature_table(header), ParseError);
  std::istringstream empty("");
  EXPECT_THROW(read_feature_table(empty), ParseError);
}

TEST(Standardize, Examples) {
  Eigen::MatrixXd m(2, 2);
  m << 1, 7, 3, 7;
  const auto [z, p] = standardize(m);
  EXPECT_EQ(z(0, 0), -1.0);
  EXPECT_EQ(z(1, 0), 1.0);
  EXPECT_EQ(z(0, 1), 0.0);
  EXPECT_EQ(z(1, 1), 0.0);
  EXPECT_EQ(p.scale(1), 1.0);

  Eigen::MatrixXd at_mean(1, 2);
  at_mean << 2, 7;
  EXPECT_TRUE(apply_standardization(at_mean, p).isZero());
  EXPECT_THROW(standardize(Eigen::MatrixXd(0, 2)), std::invalid_argument);
  EXPECT_THROW(apply_standardization(Eigen::MatrixXd(1, 3), p), std::invalid_argument);
}

TEST(Standardize, ZeroMeanUnitVariance) {
  std::mt19937_64 rng(24);
  std::normal_distribution<double> d(5, 3);
  Eigen::MatrixXd m(200, 4);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  const auto [z, p] = standardize(m);
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    EXPECT_NEAR(z.col(c).mean(), 0.0, 1e-12);
    EXPECT_NEAR(z.col(c).squaredNorm() / static_cast<double>(z.rows()), 1.0, 1e-12);
  }
  const auto [again, q] = standardize(m, p);
  EXPECT_EQ(again, z);
}
