#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mixdetect/features.hpp"
#include "mixdetect/pulearn.hpp"

namespace mixdetect {

/// Indices are positions within the positive (resp. unlabeled) row lists of a table.
struct SplitPlan {
  std::uint64_t seed = 0;
  std::vector<std::size_t> train_pos, test_pos;
  std::vector<std::size_t> train_unl;
  std::vector<std::size_t> train_rn, test_rn;  // filled after stage 1, subsets of train_unl
};

/// 70% (rounded down) of positives and of unlabeled rows go to training, sampled
/// without replacement. Throws std::invalid_argument when n_pos < 4.
SplitPlan make_split(std::size_t n_pos, std::size_t n_unl, std::uint64_t seed);

/// Splits reliable negatives 70/30 into plan.train_rn / plan.test_rn.
void split_reliable_negatives(SplitPlan& plan, std::span<const std::size_t> reliable_negatives);

struct Metrics {
  double tpr = 0;
  double fpr = 0;
  double gmean = 0;
};

double gmean(double tpr, double fpr);

/// Throws std::invalid_argument on a length mismatch or when truth holds a single class.
Metrics compute_metrics(const std::vector<bool>& predicted, const std::vector<bool>& truth);

struct RunResult {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;  // set when failed
  double theta = 0;     // 0 for the baseline
  std::size_t reliable_negatives = 0;
  Metrics metrics;
  LinearModel model;  // the classifier scored on the test rows
};

struct MetricsReport {
  double epsilon = 0;
  std::vector<RunResult> runs;
  Metrics mean;
  Metrics std;  // population std over completed runs
  std::size_t failed_runs = 0;

  std::size_t completed_runs() const { return runs.size() - failed_runs; }
};

/// Fills mean / std / failed_runs from `runs`. Throws std::runtime_error if every run failed.
void aggregate(MetricsReport& report);

struct ExperimentOptions {
  std::size_t n_runs = 100;
  std::uint64_t seed = 1;
  double spy_rate = kDefaultSpyRate;
  double delta_p = kDefaultDeltaP;
  double lambda = kDefaultLambda;
  double epsilon = kDefaultEpsilon;
  unsigned threads = 0;  // 0 = hardware concurrency; results do not depend on it
};

std::uint64_t run_seed(std::uint64_t base, std::size_t run);

/// Per run: split, standardize on the training rows, stage 1 on the training
/// positives and unlabeled rows, split reliable negatives, stage 2, score the held
/// out positives and reliable negatives. Runs with no reliable negatives are failed.
MetricsReport run_experiments(const FeatureTable& table, const ExperimentOptions& options);

/// Same splits, no stage 1: unweighted model of training positives against all
/// training unlabeled rows, tested on the held out positives and unlabeled rows.
MetricsReport run_naive_baseline(const FeatureTable& table, const ExperimentOptions& options);

/// One report per epsilon. Models are trained once per run and rethresholded.
std::vector<MetricsReport> run_epsilon_sweep(const FeatureTable& table,
                                             const ExperimentOptions& options,
                                             std::span<const double> epsilons);

/// Per-run rows, then `#mean`, `#std` and `#failed_runs` footer lines.
void write_report_tsv(std::ostream& out, const MetricsReport& report);

/// {tpr_mean, tpr_std, fpr_mean, fpr_std, gmean_mean, gmean_std, failed_runs, ...}
void write_report_json(std::ostream& out, const MetricsReport& report);

}  // namespace mixdetect
