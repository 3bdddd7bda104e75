#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "mixdetect/eval.hpp"

using namespace mixdetect;

namespace {

// Positives shifted away from the unlabeled cloud; a few positives hide among the unlabeled.
FeatureTable synthetic_table(std::uint64_t seed, int n_pos = 80, int n_unl = 800) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  FeatureTable t;
  const int n = n_pos + n_unl;
  t.features.resize(n, 6);
  for (int i = 0; i < n; ++i) {
    const bool positive = i < n_pos;
    for (int c = 0; c < 6; ++c) t.features(i, c) = g(rng) + (positive ? 2.0 : 0.0);
    t.addresses.push_back("a" + std::to_string(100000 + i));
    t.labels.push_back(positive && i % 4 != 0 ? Label::positive : Label::unlabeled);
  }
  return t;
}

}  // namespace

TEST(MakeSplit, SeventyThirty) {
  const auto p = make_split(10, 21, 5);
  EXPECT_EQ(p.train_pos.size(), 7u);
  EXPECT_EQ(p.test_pos.size(), 3u);
  EXPECT_EQ(p.train_unl.size(), 14u);
  std::set<std::size_t> all(p.train_pos.begin(), p.train_pos.end());
  all.insert(p.test_pos.begin(), p.test_pos.end());
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(*all.rbegin(), 9u);
  EXPECT_TRUE(std::is_sorted(p.train_unl.begin(), p.train_unl.end()));
}

TEST(MakeSplit, DeterministicAndSeeded) {
  const auto a = make_split(50, 500, 3), b = make_split(50, 500, 3), c = make_split(50, 500, 4);
  EXPECT_EQ(a.train_pos, b.train_pos);
  EXPECT_EQ(a.train_unl, b.train_unl);
  EXPECT_NE(a.train_unl, c.train_unl);
  EXPECT_THROW(make_split(3, 100, 1), std::invalid_argument);
  EXPECT_THROW(make_split(10, 1, 1), std::invalid_argument);
}

TEST(SplitReliableNegatives, PartitionsInput) {
  auto p = make_split(10, 100, 8);
  std::vector<std::size_t> rn(p.train_unl.begin(), p.train_unl.begin() + 20);
  split_reliable_negatives(p, rn);
  EXPECT_EQ(p.train_rn.size(), 14u);
  EXPECT_EQ(p.test_rn.size(), 6u);
  std::set<std::size_t> joined(p.train_rn.begin(), p.train_rn.end());
  joined.insert(p.test_rn.begin(), p.test_rn.end());
  EXPECT_EQ(joined, std::set<std::size_t>(rn.begin(), rn.end()));
}

TEST(ComputeMetrics, PerfectPrediction) {
  const std::vector<bool> truth{true, true, false, false, false};
  const auto m = compute_metrics(truth, truth);
  EXPECT_EQ(m.tpr, 1.0);
  EXPECT_EQ(m.fpr, 0.0);
  EXPECT_EQ(m.gmean, 1.0);
}

TEST(ComputeMetrics, Counts) {
  const std::vector<bool> truth{true, true, true, true, false, false, false, false, false};
  const std::vector<bool> pred{true, true, true, false, true, false, false, false, false};
  const auto m = compute_metrics(pred, truth);
  EXPECT_EQ(m.tpr, 0.75);
  EXPECT_EQ(m.fpr, 0.2);
  EXPECT_DOUBLE_EQ(m.gmean, std::sqrt(0.75 * 0.8));
}

TEST(ComputeMetrics, ReferenceTriples) {
  EXPECT_NEAR(gmean(0.9165, 0.0334), 0.9412, 1e-4);
  EXPECT_NEAR(gmean(0.9318, 0.0356), 0.9479, 1e-4);
}

TEST(ComputeMetrics, DegenerateTruth) {
  const std::vector<bool> all_pos{true, true};
  EXPECT_THROW(compute_metrics(all_pos, all_pos), std::invalid_argument);
  const std::vector<bool> all_neg{false, false};
  EXPECT_THROW(compute_metrics(all_neg, all_neg), std::invalid_argument);
  EXPECT_THROW(compute_metrics(all_pos, std::vector<bool>{true}), std::invalid_argument);
}

TEST(Aggregate, PopulationStatsOverCompletedRuns) {
  MetricsReport r;
  r.runs.resize(3);
  r.runs[0].metrics = {0.8, 0.1, gmean(0.8, 0.1)};
  r.runs[1].metrics = {0.6, 0.3, gmean(0.6, 0.3)};
  r.runs[2].failed = true;
  r.runs[2].metrics = {0, 1, 0};
  aggregate(r);
  EXPECT_EQ(r.failed_runs, 1u);
  EXPECT_EQ(r.completed_runs(), 2u);
  EXPECT_DOUBLE_EQ(r.mean.tpr, 0.7);
  EXPECT_NEAR(r.std.tpr, 0.1, 1e-12);
  EXPECT_NEAR(r.std.fpr, 0.1, 1e-12);

  MetricsReport single;
  single.runs.resize(1);
  single.runs[0].metrics = {0.9, 0.05, gmean(0.9, 0.05)};
  aggregate(single);
  EXPECT_EQ(single.std.gmean, 0.0);

  MetricsReport dead;
  dead.runs.resize(2);
  dead.runs[0].failed = dead.runs[1].failed = true;
  EXPECT_THROW(aggregate(dead), std::runtime_error);
}

TEST(RunExperiments, DeterministicAndThreadIndependent) {
  const auto table = synthetic_table(1);
  ExperimentOptions opt;
  opt.n_runs = 6;
  opt.seed = 11;
  opt.threads = 1;
  const auto a = run_experiments(table, opt);
  opt.threads = 3;
  const auto b = run_experiments(table, opt);
  ASSERT_EQ(a.runs.size(), 6u);
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(a.runs[i].seed, run_seed(11, i));
    EXPECT_EQ(a.runs[i].theta, b.runs[i].theta);
    EXPECT_EQ(a.runs[i].metrics.gmean, b.runs[i].metrics.gmean);
    EXPECT_EQ(a.runs[i].model.weights, b.runs[i].model.weights);
  }
  std::ostringstream ta, tb;
  write_report_tsv(ta, a);
  write_report_tsv(tb, b);
  EXPECT_EQ(ta.str(), tb.str());
}

TEST(RunExperiments, ReportIsConsistent) {
  const auto table = synthetic_table(2);
  ExperimentOptions opt;
  opt.n_runs = 5;
  const auto rep = run_experiments(table, opt);
  EXPECT_EQ(rep.failed_runs, 0u);
  double sum = 0;
  for (const auto& r : rep.runs) {
    EXPECT_NEAR(r.metrics.gmean, gmean(r.metrics.tpr, r.metrics.fpr), 1e-15);
    EXPECT_GT(r.reliable_negatives, 0u);
    sum += r.metrics.gmean;
  }
  EXPECT_NEAR(rep.mean.gmean, sum / 5, 1e-12);
  EXPECT_GT(rep.mean.gmean, 0.8);

  std::ostringstream js;
  write_report_json(js, rep);
  const auto j = nlohmann::json::parse(js.str());
  EXPECT_EQ(j.at("gmean_mean").get<double>(), rep.mean.gmean);
  EXPECT_EQ(j.at("completed_runs").get<std::size_t>(), 5u);

  std::ostringstream tsv;
  write_report_tsv(tsv, rep);
  EXPECT_NE(tsv.str().find("#failed_runs\t0"), std::string::npos);
}

TEST(RunExperiments, SingleRunReportsZeroStd) {
  const auto table = synthetic_table(3);
  ExperimentOptions opt;
  opt.n_runs = 1;
  const auto a = run_experiments(table, opt);
  const auto b = run_experiments(table, opt);
  EXPECT_EQ(a.std.gmean, 0.0);
  EXPECT_EQ(a.mean.gmean, b.mean.gmean);
}

TEST(RunExperiments, HeldOutRowsDoNotReachTraining) {
  // Scrambling every row outside the training split leaves the trained model untouched.
  auto table = synthetic_table(4);
  ExperimentOptions opt;
  opt.n_runs = 1;
  opt.seed = 21;
  const auto before = run_experiments(table, opt);

  const auto pos = table.rows_with(Label::positive);
  const auto unl = table.rows_with(Label::unlabeled);
  const auto plan = make_split(pos.size(), unl.size(), run_seed(21, 0));
  std::set<std::size_t> train(plan.train_unl.begin(), plan.train_unl.end());
  for (auto i : plan.test_pos) table.features.row(static_cast<Eigen::Index>(pos[i])).setConstant(50);
  for (std::size_t i = 0; i < unl.size(); ++i) {
    if (!train.count(i)) table.features.row(static_cast<Eigen::Index>(unl[i])).setConstant(-50);
  }
  const auto after = run_experiments(table, opt);
  EXPECT_EQ(before.runs[0].model.weights, after.runs[0].model.weights);
  EXPECT_EQ(before.runs[0].model.bias, after.runs[0].model.bias);
  EXPECT_EQ(before.runs[0].theta, after.runs[0].theta);
}

TEST(RunExperiments, RejectsTooFewPositives) {
  auto table = synthetic_table(5, 4, 50);
  ExperimentOptions opt;
  opt.n_runs = 1;
  EXPECT_THROW(run_experiments(table, opt), std::invalid_argument);
}

TEST(EpsilonSweep, MonotoneRates) {
  const auto table = synthetic_table(6);
  ExperimentOptions opt;
  opt.n_runs = 4;
  const std::vector<double> eps{0.5, 0.6, 0.7, 0.8, 0.9};
  const auto reps = run_epsilon_sweep(table, opt, eps);
  ASSERT_EQ(reps.size(), eps.size());
  for (std::size_t k = 1; k < reps.size(); ++k) {
    EXPECT_LE(reps[k].mean.tpr, reps[k - 1].mean.tpr);
    EXPECT_LE(reps[k].mean.fpr, reps[k - 1].mean.fpr);
  }
  opt.epsilon = 0.6;
  EXPECT_EQ(run_experiments(table, opt).mean.gmean, reps[1].mean.gmean);
}

TEST(NaiveBaseline, RunsOnSameSplits) {
  const auto table = synthetic_table(7);
  ExperimentOptions opt;
  opt.n_runs = 3;
  const auto base = run_naive_baseline(table, opt);
  EXPECT_EQ(base.failed_runs, 0u);
  for (const auto& r : base.runs) EXPECT_EQ(r.theta, 0.0);
  // Hidden positives sit in the baseline's negatives, which holds its TPR down.
  EXPECT_LT(base.mean.tpr, run_experiments(table, opt).mean.tpr);
}
