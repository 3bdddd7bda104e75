#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixdetect/features.hpp"

namespace mixdetect {

inline constexpr double kDefaultSpyRate = 0.15;
inline constexpr double kDefaultDeltaP = 0.005;
inline constexpr double kDefaultEpsilon = 0.6;
inline constexpr double kDefaultLambda = 1.0;

/// Affine logistic model. `lambda` is the L2 coefficient on `weights` only.
struct LinearModel {
  Eigen::VectorXd weights;
  double bias = 0;
  double lambda = kDefaultLambda;
};

struct TrainOptions {
  double gradient_tolerance = 1e-6;  // on the max-norm of the full gradient
  int max_iterations = 5000;
};

struct TrainStats {
  int iterations = 0;
  double gradient_norm = 0;
  std::vector<double> objective_trace;  // objective after each accepted step, starting value first
};

/// Labels are +1 / -1.
///
///   J(w, b) = c_pos * sum_{y=+1} log(1 + exp(-s)) + c_neg * sum_{y=-1} log(1 + exp(s))
///             + lambda * |w|^2,          s = x.w + b
double lr_objective(const LinearModel& model, const Eigen::MatrixXd& x, std::span<const int> y,
                    double c_pos, double c_neg);

/// Gradient of lr_objective; the last entry is d/d bias.
Eigen::VectorXd lr_gradient(const LinearModel& model, const Eigen::MatrixXd& x,
                            std::span<const int> y, double c_pos, double c_neg);

/// Minimizes lr_objective by damped Newton steps with Armijo backtracking, starting at
/// zero. Deterministic. Throws std::invalid_argument for a single-class or mismatched
/// y, non-finite features, or non-positive c_pos / c_neg / lambda.
LinearModel train_weighted_lr(const Eigen::MatrixXd& x, std::span<const int> y, double c_pos,
                              double c_neg, double lambda, const TrainOptions& options = {},
                              TrainStats* stats = nullptr);

/// Logistic of the affine score per row. Throws on a dimension mismatch.
Eigen::VectorXd predict_proba(const LinearModel& model, const Eigen::MatrixXd& x);

/// Argmax over p in {dp, 2dp, .., 1} of (F_U(p) - F_U(p - dp)) - (F_S(p) - F_S(p - dp)),
/// F_X(p) the fraction of X <= p. Smallest p wins ties.
double select_theta(std::span<const double> spy_probs, std::span<const double> unlabeled_probs,
                    double delta_p = kDefaultDeltaP);

class NoReliableNegatives : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Stage1Result {
  std::vector<std::size_t> reliable_negatives;  // row indices into the unlabeled matrix
  std::vector<std::size_t> spies;               // row indices into the positive matrix
  double theta = 0;
  LinearModel model;
};

/// Spy technique: ceil(spy_rate * |pos|) spies drawn without replacement, an
/// unweighted model of non-spy positives (+1) against spies and unlabeled (-1),
/// theta from select_theta, reliable negatives = unlabeled rows with probability < theta.
/// Throws NoReliableNegatives when none qualify.
Stage1Result stage1_reliable_negatives(const Eigen::MatrixXd& x_pos, const Eigen::MatrixXd& x_unl,
                                       double spy_rate, double lambda, std::uint64_t seed,
                                       double delta_p = kDefaultDeltaP);

/// c_pos = 1 / |pos|, c_neg = 1 / |rn|.
LinearModel stage2_train(const Eigen::MatrixXd& x_pos, const Eigen::MatrixXd& x_rn, double lambda);

struct PUModel {
  LinearModel stage1;
  double theta = 0;
  LinearModel stage2;
  double c_pos = 0;
  double c_neg = 0;
  double epsilon = kDefaultEpsilon;
  double spy_rate = kDefaultSpyRate;
  double delta_p = kDefaultDeltaP;
  std::uint64_t seed = 0;
  StandardizationParams standardization;
};

struct PUOptions {
  double spy_rate = kDefaultSpyRate;
  double delta_p = kDefaultDeltaP;
  double lambda = kDefaultLambda;
  double epsilon = kDefaultEpsilon;
  std::uint64_t seed = 0;
};

/// Standardizes on all rows, runs both stages on every positive and unlabeled row.
PUModel train_pu(const FeatureTable& table, const PUOptions& options);

struct Detection {
  std::string address;
  double probability;
  bool detected;
};

/// `x` must already be standardized with the model's params. detected iff the stage-2
/// probability is strictly greater than epsilon. Sorted by probability descending,
/// address ascending on ties.
std::vector<Detection> predict(const PUModel& model, const Eigen::MatrixXd& x,
                               std::span<const std::string> addresses);

void write_detections(std::ostream& out, std::span<const Detection> detections);

/// Plain-text `key=value` lines; doubles are written round-trip exact.
void save_model(std::ostream& out, const PUModel& model);
PUModel load_model(std::istream& in);
PUModel load_model(const std::filesystem::path& path);

}  // namespace mixdetect
