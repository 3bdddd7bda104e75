#include "mixdetect/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include <json.hpp>

#include "mixdetect/io.hpp"
#include "mixdetect/random.hpp"

namespace mixdetect {
namespace {

enum : std::uint64_t { kSplitStream = 1, kSpyStream = 2, kRnStream = 3 };

std::size_t seventy_percent(std::size_t n) { return n * 7 / 10; }

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& x, std::span<const std::size_t> rows_of_table,
                       std::span<const std::size_t> picks) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(picks.size()), x.cols());
  for (std::size_t i = 0; i < picks.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows_of_table[picks[i]]));
  }
  return out;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

// A trained run before thresholding.
struct ScoredRun {
  RunResult result;
  std::vector<double> probabilities;
  std::vector<bool> truth;
};

ScoredRun scored_run(const FeatureTable& table, const ExperimentOptions& opt, std::size_t r,
                     bool baseline) {
  ScoredRun out;
  out.result.run = r;
  out.result.seed = run_seed(opt.seed, r);
  const auto pos = table.rows_with(Label::positive);
  const auto unl = table.rows_with(Label::unlabeled);
  auto plan = make_split(pos.size(), unl.size(), out.result.seed);

  // Standardization sees training rows only.
  const auto fit_rows = stack(gather(table.features, pos, plan.train_pos),
                              gather(table.features, unl, plan.train_unl));
  const auto params = standardize(fit_rows).second;
  const auto x = apply_standardization(table.features, params);
  const auto x_train_pos = gather(x, pos, plan.train_pos);
  const auto x_test_pos = gather(x, pos, plan.test_pos);

  Eigen::MatrixXd x_test_neg;
  try {
    if (baseline) {
      const auto x_train_unl = gather(x, unl, plan.train_unl);
      std::vector<int> y(plan.train_pos.size(), 1);
      y.insert(y.end(), plan.train_unl.size(), -1);
      out.result.model =
          train_weighted_lr(stack(x_train_pos, x_train_unl), y, 1.0, 1.0, opt.lambda);
      std::vector<std::size_t> test_unl;
      std::vector<char> in_train(unl.size(), 0);
      for (auto i : plan.train_unl) in_train[i] = 1;
      for (std::size_t i = 0; i < unl.size(); ++i) {
        if (!in_train[i]) test_unl.push_back(i);
      }
      x_test_neg = gather(x, unl, test_unl);
    } else {
      const auto x_train_unl = gather(x, unl, plan.train_unl);
      auto s1 = stage1_reliable_negatives(x_train_pos, x_train_unl, opt.spy_rate, opt.lambda,
                                          derive_seed(out.result.seed, kSpyStream, 0), opt.delta_p);
      out.result.theta = s1.theta;
      out.result.reliable_negatives = s1.reliable_negatives.size();
      // Reliable negatives as positions in the unlabeled list.
      std::vector<std::size_t> rn;
      rn.reserve(s1.reliable_negatives.size());
      for (auto i : s1.reliable_negatives) rn.push_back(plan.train_unl[i]);
      split_reliable_negatives(plan, rn);
      if (plan.train_rn.empty() || plan.test_rn.empty()) {
        throw NoReliableNegatives("too few reliable negatives to split (" +
                                  std::to_string(rn.size()) + ")");
      }
      out.result.model = stage2_train(x_train_pos, gather(x, unl, plan.train_rn), opt.lambda);
      x_test_neg = gather(x, unl, plan.test_rn);
    }
  } catch (const NoReliableNegatives& e) {
    out.result.failed = true;
    out.result.failure = e.what();
    return out;
  }

  const auto p_pos = predict_proba(out.result.model, x_test_pos);
  const auto p_neg = predict_proba(out.result.model, x_test_neg);
  out.probabilities.assign(p_pos.data(), p_pos.data() + p_pos.size());
  out.probabilities.insert(out.probabilities.end(), p_neg.data(), p_neg.data() + p_neg.size());
  out.truth.assign(static_cast<std::size_t>(p_pos.size()), true);
  out.truth.insert(out.truth.end(), static_cast<std::size_t>(p_neg.size()), false);
  return out;
}

std::vector<MetricsReport> sweep(const FeatureTable& table, const ExperimentOptions& opt,
                                 std::span<const double> epsilons, bool baseline) {
  if (opt.n_runs == 0) throw std::invalid_argument("n_runs must be at least 1");
  for (double e : epsilons) {
    if (!(e > 0 && e < 1)) throw std::invalid_argument("epsilon must be in (0, 1)");
  }
  // Surface protocol errors (too few positives) before any work starts.
  make_split(table.rows_with(Label::positive).size(), table.rows_with(Label::unlabeled).size(), 0);

  std::vector<ScoredRun> runs(opt.n_runs);
  std::vector<std::exception_ptr> errors(opt.n_runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < runs.size();) {
      try {
        runs[r] = scored_run(table, opt, r, baseline);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  unsigned threads = opt.threads ? opt.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(runs.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<MetricsReport> reports;
  for (double eps : epsilons) {
    MetricsReport rep;
    rep.epsilon = eps;
    for (const auto& run : runs) {
      RunResult res = run.result;
      if (!res.failed) {
        std::vector<bool> predicted(run.probabilities.size());
        for (std::size_t i = 0; i < predicted.size(); ++i) predicted[i] = run.probabilities[i] > eps;
        res.metrics = compute_metrics(predicted, run.truth);
      }
      rep.runs.push_back(std::move(res));
    }
    aggregate(rep);
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace

SplitPlan make_split(std::size_t n_pos, std::size_t n_unl, std::uint64_t seed) {
  if (n_pos < 4) {
    throw std::invalid_argument("need at least 4 labeled positives, got " + std::to_string(n_pos));
  }
  if (n_unl < 2) throw std::invalid_argument("need at least 2 unlabeled rows");
  SplitPlan plan;
  plan.seed = seed;
  Rng rng(derive_seed(seed, kSplitStream, 0));
  auto p = shuffled(n_pos, rng);
  auto u = shuffled(n_unl, rng);
  const auto k = seventy_percent(n_pos);
  plan.train_pos.assign(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(k));
  plan.test_pos.assign(p.begin() + static_cast<std::ptrdiff_t>(k), p.end());
  plan.train_unl.assign(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(seventy_percent(n_unl)));
  std::sort(plan.train_pos.begin(), plan.train_pos.end());
  std::sort(plan.test_pos.begin(), plan.test_pos.end());
  std::sort(plan.train_unl.begin(), plan.train_unl.end());
  return plan;
}

void split_reliable_negatives(SplitPlan& plan, std::span<const std::size_t> reliable_negatives) {
  Rng rng(derive_seed(plan.seed, kRnStream, 0));
  auto order = shuffled(reliable_negatives.size(), rng);
  const auto k = seventy_percent(order.size());
  plan.train_rn.clear();
  plan.test_rn.clear();
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < k ? plan.train_rn : plan.test_rn).push_back(reliable_negatives[order[i]]);
  }
  std::sort(plan.train_rn.begin(), plan.train_rn.end());
  std::sort(plan.test_rn.begin(), plan.test_rn.end());
}

double gmean(double tpr, double fpr) { return std::sqrt(tpr * (1 - fpr)); }

Metrics compute_metrics(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("prediction and truth lengths differ");
  }
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) (predicted[i] ? tp : fn)++;
    else (predicted[i] ? fp : tn)++;
  }
  if (tp + fn == 0 || fp + tn == 0) {
    throw std::invalid_argument("truth must contain both positive and negative rows");
  }
  Metrics m;
  m.tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.fpr = static_cast<double>(fp) / static_cast<double>(fp + tn);
  m.gmean = gmean(m.tpr, m.fpr);
  return m;
}

void aggregate(MetricsReport& report) {
  std::vector<const Metrics*> ok;
  report.failed_runs = 0;
  for (const auto& r : report.runs) {
    if (r.failed) ++report.failed_runs;
    else ok.push_back(&r.metrics);
  }
  if (ok.empty()) throw std::runtime_error("every experiment run failed");
  const auto n = static_cast<double>(ok.size());
  auto stat = [&](double Metrics::*field, double& mean, double& sd) {
    double s = 0;
    for (auto* m : ok) s += m->*field;
    mean = s / n;
    double v = 0;
    for (auto* m : ok) v += (m->*field - mean) * (m->*field - mean);
    sd = std::sqrt(v / n);
  };
  stat(&Metrics::tpr, report.mean.tpr, report.std.tpr);
  stat(&Metrics::fpr, report.mean.fpr, report.std.fpr);
  stat(&Metrics::gmean, report.mean.gmean, report.std.gmean);
}

std::uint64_t run_seed(std::uint64_t base, std::size_t run) {
  return derive_seed(base, 0x65766c, run);
}

MetricsReport run_experiments(const FeatureTable& table, const ExperimentOptions& options) {
  const double eps[] = {options.epsilon};
  return std::move(sweep(table, options, eps, false).front());
}

MetricsReport run_naive_baseline(const FeatureTable& table, const ExperimentOptions& options) {
  const double eps[] = {options.epsilon};
  return std::move(sweep(table, options, eps, true).front());
}

std::vector<MetricsReport> run_epsilon_sweep(const FeatureTable& table,
                                             const ExperimentOptions& options,
                                             std::span<const double> epsilons) {
  return sweep(table, options, epsilons, false);
}

void write_report_tsv(std::ostream& out, const MetricsReport& report) {
  out << "run\tseed\tstatus\ttheta\treliable_negatives\ttpr\tfpr\tgmean\n";
  for (const auto& r : report.runs) {
    out << r.run << '\t' << r.seed << '\t';
    if (r.failed) {
      out << "failed\t-\t" << r.reliable_negatives << "\t-\t-\t-\n";
      continue;
    }
    out << "ok\t" << format_double(r.theta) << '\t' << r.reliable_negatives << '\t'
        << format_double(r.metrics.tpr) << '\t' << format_double(r.metrics.fpr) << '\t'
        << format_double(r.metrics.gmean) << '\n';
  }
  out << "#mean\t\t\t\t\t" << format_double(report.mean.tpr) << '\t'
      << format_double(report.mean.fpr) << '\t' << format_double(report.mean.gmean) << '\n';
  out << "#std\t\t\t\t\t" << format_double(report.std.tpr) << '\t' << format_double(report.std.fpr)
      << '\t' << format_double(report.std.gmean) << '\n';
  out << "#failed_runs\t" << report.failed_runs << '\n';
}

void write_report_json(std::ostream& out, const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["tpr_mean"] = report.mean.tpr;
  j["tpr_std"] = report.std.tpr;
  j["fpr_mean"] = report.mean.fpr;
  j["fpr_std"] = report.std.fpr;
  j["gmean_mean"] = report.mean.gmean;
  j["gmean_std"] = report.std.gmean;
  j["failed_runs"] = report.failed_runs;
  j["completed_runs"] = report.completed_runs();
  j["epsilon"] = report.epsilon;
  out << j.dump(2) << '\n';
}

}  // namespace mixdetect
