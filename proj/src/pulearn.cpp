#include "mixdetect/pulearn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

#include "mixdetect/io.hpp"
#include "mixdetect/random.hpp"

namespace mixdetect {
namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_inputs(const Eigen::MatrixXd& x, std::span<const int> y, double c_pos, double c_neg) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw std::invalid_argument("row count does not match label count");
  }
  if (y.size() < 2) throw std::invalid_argument("need at least two training rows");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw std::invalid_argument("labels must be +1 or -1");
  }
  if (!pos || !neg) throw std::invalid_argument("training labels contain a single class");
  if (!x.allFinite()) throw std::invalid_argument("feature matrix contains a non-finite value");
  if (!(c_pos > 0) || !(c_neg > 0)) throw std::invalid_argument("class weights must be positive");
}

Eigen::VectorXd scores(const LinearModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.weights.size()) {
    throw std::invalid_argument("feature dimension " + std::to_string(x.cols()) +
                                " does not match model dimension " +
                                std::to_string(m.weights.size()));
  }
  Eigen::VectorXd s = x * m.weights;
  s.array() += m.bias;
  return s;
}

// Objective and per-row pieces at one point.
struct Eval {
  double objective = 0;
  Eigen::VectorXd gradient;
  Eigen::VectorXd curvature;  // c_i * sigma(s)(1 - sigma(s))
};

Eval evaluate(const LinearModel& m, const Eigen::MatrixXd& x, std::span<const int> y, double c_pos,
              double c_neg, bool want_gradient) {
  const Eigen::VectorXd s = scores(m, x);
  const auto n = static_cast<Eigen::Index>(y.size());
  Eval ev;
  Eigen::VectorXd r(n);
  if (want_gradient) ev.curvature.resize(n);
  double loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double yi = y[static_cast<std::size_t>(i)];
    const double ci = yi > 0 ? c_pos : c_neg;
    loss += ci * softplus(-yi * s(i));
    if (want_gradient) {
      r(i) = -yi * ci * sigmoid(-yi * s(i));
      const double p = sigmoid(s(i));
      ev.curvature(i) = ci * p * (1 - p);
    }
  }
  ev.objective = loss + m.lambda * m.weights.squaredNorm();
  if (want_gradient) {
    const auto d = x.cols();
    ev.gradient.resize(d + 1);
    ev.gradient.head(d) = x.transpose() * r + 2 * m.lambda * m.weights;
    ev.gradient(d) = r.sum();
  }
  return ev;
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << format_double(v(i));
}

Eigen::VectorXd parse_vector(std::string_view text) {
  std::vector<double> vals;
  for (auto part : split(trim(text), ' ')) {
    if (part.empty()) continue;
    vals.push_back(parse_double(part));
  }
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

}  // namespace

double lr_objective(const LinearModel& model, const Eigen::MatrixXd& x, std::span<const int> y,
                    double c_pos, double c_neg) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw std::invalid_argument("row count does not match label count");
  }
  return evaluate(model, x, y, c_pos, c_neg, false).objective;
}

Eigen::VectorXd lr_gradient(const LinearModel& model, const Eigen::MatrixXd& x,
                            std::span<const int> y, double c_pos, double c_neg) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw std::invalid_argument("row count does not match label count");
  }
  return evaluate(model, x, y, c_pos, c_neg, true).gradient;
}

LinearModel train_weighted_lr(const Eigen::MatrixXd& x, std::span<const int> y, double c_pos,
                              double c_neg, double lambda, const TrainOptions& options,
                              TrainStats* stats) {
  check_inputs(x, y, c_pos, c_neg);
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be positive");
  const auto d = x.cols();
  LinearModel m{Eigen::VectorXd::Zero(d), 0.0, lambda};

  Eigen::MatrixXd xa(x.rows(), d + 1);
  xa.leftCols(d) = x;
  xa.col(d).setOnes();

  TrainStats local;
  auto ev = evaluate(m, x, y, c_pos, c_neg, true);
  local.objective_trace.push_back(ev.objective);
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (ev.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) break;

    const Eigen::MatrixXd weighted = xa.array().colwise() * ev.curvature.array().sqrt();
    Eigen::MatrixXd h = weighted.transpose() * weighted;
    h.diagonal().head(d).array() += 2 * lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    Eigen::VectorXd step = ldlt.solve(-ev.gradient);
    double slope = ev.gradient.dot(step);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || !(slope < 0)) {
      step = -ev.gradient;
      slope = ev.gradient.dot(step);
    }

    bool accepted = false;
    double alpha = 1.0;
    for (int k = 0; k < 60; ++k, alpha *= 0.5) {
      LinearModel trial = m;
      trial.weights += alpha * step.head(d);
      trial.bias += alpha * step(d);
      const double obj = evaluate(trial, x, y, c_pos, c_neg, false).objective;
      if (obj <= ev.objective + 1e-4 * alpha * slope) {
        m = std::move(trial);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no representable decrease left
    ev = evaluate(m, x, y, c_pos, c_neg, true);
    local.objective_trace.push_back(ev.objective);
  }
  local.iterations = it;
  local.gradient_norm = ev.gradient.lpNorm<Eigen::Infinity>();
  if (stats) *stats = std::move(local);
  return m;
}

Eigen::VectorXd predict_proba(const LinearModel& model, const Eigen::MatrixXd& x) {
  Eigen::VectorXd s = scores(model, x);
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = sigmoid(s(i));
  return s;
}

double select_theta(std::span<const double> spy_probs, std::span<const double> unlabeled_probs,
                    double delta_p) {
  if (spy_probs.empty() || unlabeled_probs.empty()) {
    throw std::invalid_argument("select_theta needs non-empty spy and unlabeled lists");
  }
  if (!(delta_p > 0 && delta_p < 1)) throw std::invalid_argument("delta_p must be in (0, 1)");

  std::vector<double> s(spy_probs.begin(), spy_probs.end());
  std::vector<double> u(unlabeled_probs.begin(), unlabeled_probs.end());
  std::sort(s.begin(), s.end());
  std::sort(u.begin(), u.end());
  auto count_le = [](const std::vector<double>& v, double p) {
    return static_cast<std::int64_t>(std::upper_bound(v.begin(), v.end(), p) - v.begin());
  };

  const auto grid = static_cast<std::int64_t>(std::ceil(1.0 / delta_p - 1e-9));
  const auto ns = static_cast<std::int64_t>(s.size());
  const auto nu = static_cast<std::int64_t>(u.size());
  // dU/nU - dS/nS compared as dU*nS - dS*nU to keep ties exact.
  std::int64_t best = 0;
  double best_p = 0;
  std::int64_t prev_s = count_le(s, 0.0), prev_u = count_le(u, 0.0);
  for (std::int64_t k = 1; k <= grid; ++k) {
    const double p = k == grid ? 1.0 : static_cast<double>(k) * delta_p;
    const auto cs = count_le(s, p), cu = count_le(u, p);
    const std::int64_t score = (cu - prev_u) * ns - (cs - prev_s) * nu;
    if (k == 1 || score > best) {
      best = score;
      best_p = p;
    }
    prev_s = cs;
    prev_u = cu;
  }
  return best_p;
}

Stage1Result stage1_reliable_negatives(const Eigen::MatrixXd& x_pos, const Eigen::MatrixXd& x_unl,
                                       double spy_rate, double lambda, std::uint64_t seed,
                                       double delta_p) {
  const auto n_pos = static_cast<std::size_t>(x_pos.rows());
  const auto n_unl = static_cast<std::size_t>(x_unl.rows());
  if (n_pos < 2) throw std::invalid_argument("stage 1 needs at least two positive rows");
  if (n_unl == 0) throw std::invalid_argument("stage 1 needs at least one unlabeled row");
  if (x_pos.cols() != x_unl.cols()) throw std::invalid_argument("positive/unlabeled column mismatch");
  if (!(spy_rate > 0 && spy_rate < 1)) throw std::invalid_argument("spy_rate must be in (0, 1)");

  auto n_spy = static_cast<std::size_t>(std::ceil(spy_rate * static_cast<double>(n_pos) - 1e-9));
  n_spy = std::clamp<std::size_t>(n_spy, 1, n_pos - 1);

  std::vector<std::size_t> order(n_pos);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Stage1Result res;
  res.spies.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_spy));
  std::sort(res.spies.begin(), res.spies.end());

  std::vector<char> is_spy(n_pos, 0);
  for (auto i : res.spies) is_spy[i] = 1;
  const auto d = x_pos.cols();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n_pos + n_unl), d);
  std::vector<int> y;
  y.reserve(n_pos + n_unl);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < n_pos; ++i) {
    x.row(row++) = x_pos.row(static_cast<Eigen::Index>(i));
    y.push_back(is_spy[i] ? -1 : 1);
  }
  x.bottomRows(static_cast<Eigen::Index>(n_unl)) = x_unl;
  y.insert(y.end(), n_unl, -1);

  res.model = train_weighted_lr(x, y, 1.0, 1.0, lambda);
  const Eigen::VectorXd p_unl = predict_proba(res.model, x_unl);
  const Eigen::VectorXd p_spy = predict_proba(res.model, take_rows(x_pos, res.spies));
  res.theta = select_theta(std::span<const double>(p_spy.data(), static_cast<std::size_t>(p_spy.size())),
                           std::span<const double>(p_unl.data(), n_unl), delta_p);
  for (std::size_t i = 0; i < n_unl; ++i) {
    if (p_unl(static_cast<Eigen::Index>(i)) < res.theta) res.reliable_negatives.push_back(i);
  }
  if (res.reliable_negatives.empty()) {
    throw NoReliableNegatives(
        "stage 1 found no reliable negatives (theta = " + format_double(res.theta) +
        "); inspect the feature matrix or raise the spy rate");
  }
  return res;
}

LinearModel stage2_train(const Eigen::MatrixXd& x_pos, const Eigen::MatrixXd& x_rn, double lambda) {
  if (x_pos.rows() == 0 || x_rn.rows() == 0) {
    throw std::invalid_argument("stage 2 needs positive and reliable negative rows");
  }
  if (x_pos.cols() != x_rn.cols()) throw std::invalid_argument("positive/negative column mismatch");
  Eigen::MatrixXd x(x_pos.rows() + x_rn.rows(), x_pos.cols());
  x.topRows(x_pos.rows()) = x_pos;
  x.bottomRows(x_rn.rows()) = x_rn;
  std::vector<int> y(static_cast<std::size_t>(x_pos.rows()), 1);
  y.insert(y.end(), static_cast<std::size_t>(x_rn.rows()), -1);
  return train_weighted_lr(x, y, 1.0 / static_cast<double>(x_pos.rows()),
                           1.0 / static_cast<double>(x_rn.rows()), lambda);
}

PUModel train_pu(const FeatureTable& table, const PUOptions& options) {
  if (!(options.epsilon > 0 && options.epsilon < 1)) {
    throw std::invalid_argument("epsilon must be in (0, 1)");
  }
  const auto pos = table.rows_with(Label::positive);
  const auto unl = table.rows_with(Label::unlabeled);
  auto [x, params] = standardize(table.features);
  const Eigen::MatrixXd x_pos = take_rows(x, pos);
  const Eigen::MatrixXd x_unl = take_rows(x, unl);

  PUModel m;
  auto s1 = stage1_reliable_negatives(x_pos, x_unl, options.spy_rate, options.lambda, options.seed,
                                      options.delta_p);
  m.stage1 = std::move(s1.model);
  m.theta = s1.theta;
  const Eigen::MatrixXd x_rn = take_rows(x_unl, s1.reliable_negatives);
  m.stage2 = stage2_train(x_pos, x_rn, options.lambda);
  m.c_pos = 1.0 / static_cast<double>(x_pos.rows());
  m.c_neg = 1.0 / static_cast<double>(x_rn.rows());
  m.epsilon = options.epsilon;
  m.spy_rate = options.spy_rate;
  m.delta_p = options.delta_p;
  m.seed = options.seed;
  m.standardization = std::move(params);
  return m;
}

std::vector<Detection> predict(const PUModel& model, const Eigen::MatrixXd& x,
                               std::span<const std::string> addresses) {
  if (static_cast<std::size_t>(x.rows()) != addresses.size()) {
    throw std::invalid_argument("row count does not match address count");
  }
  const Eigen::VectorXd p = predict_proba(model.stage2, x);
  std::vector<Detection> out;
  out.reserve(addresses.size());
  for (std::size_t i = 0; i < addresses.size(); ++i) {
    const double pi = p(static_cast<Eigen::Index>(i));
    out.push_back({addresses[i], pi, pi > model.epsilon});
  }
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.address < b.address;
  });
  return out;
}

void write_detections(std::ostream& out, std::span<const Detection> detections) {
  out << "address\tprobability\tdetected\n";
  for (const auto& d : detections) {
    out << d.address << '\t' << format_double(d.probability) << '\t' << (d.detected ? 1 : 0) << '\n';
  }
}

namespace {
constexpr std::string_view kModelFormat = "mixdetect-pu-model/1";
}

void save_model(std::ostream& out, const PUModel& m) {
  out << "format=" << kModelFormat << '\n';
  out << "seed=" << m.seed << '\n';
  out << "epsilon=" << format_double(m.epsilon) << '\n';
  out << "spy_rate=" << format_double(m.spy_rate) << '\n';
  out << "delta_p=" << format_double(m.delta_p) << '\n';
  out << "theta=" << format_double(m.theta) << '\n';
  const std::pair<const char*, const LinearModel*> stages[] = {{"stage1", &m.stage1},
                                                               {"stage2", &m.stage2}};
  for (auto [name, lm] : stages) {
    out << name << ".lambda=" << format_double(lm->lambda) << '\n';
    out << name << ".bias=" << format_double(lm->bias) << '\n';
    out << name << ".weights=";
    write_vector(out, lm->weights);
    out << '\n';
  }
  out << "stage2.c_pos=" << format_double(m.c_pos) << '\n';
  out << "stage2.c_neg=" << format_double(m.c_neg) << '\n';
  out << "standardization.mean=";
  write_vector(out, m.standardization.mean);
  out << '\n';
  out << "standardization.scale=";
  write_vector(out, m.standardization.scale);
  out << '\n';
}

PUModel load_model(std::istream& in) {
  std::map<std::string, std::string, std::less<>> kv;
  std::string buf;
  std::size_t line = 0;
  while (std::getline(in, buf)) {
    ++line;
    const auto t = trim(buf);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError(line, "expected key=value");
    auto [it, fresh] = kv.emplace(std::string(trim(t.substr(0, eq))), std::string(t.substr(eq + 1)));
    if (!fresh) throw ParseError(line, "duplicate key " + it->first);
  }
  auto get = [&](std::string_view key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(0, "model file is missing key " + std::string(key));
    return it->second;
  };
  auto num = [&](std::string_view key) {
    try {
      return parse_double(get(key));
    } catch (const std::invalid_argument& e) {
      throw ParseError(0, std::string(key) + ": " + e.what());
    }
  };
  auto vec = [&](std::string_view key) {
    try {
      return parse_vector(get(key));
    } catch (const std::invalid_argument& e) {
      throw ParseError(0, std::string(key) + ": " + e.what());
    }
  };
  if (trim(get("format")) != kModelFormat) throw ParseError(0, "unsupported model format");

  PUModel m;
  try {
    m.seed = std::stoull(get("seed"));
  } catch (const std::exception&) {
    throw ParseError(0, "seed: not an unsigned integer");
  }
  m.epsilon = num("epsilon");
  m.spy_rate = num("spy_rate");
  m.delta_p = num("delta_p");
  m.theta = num("theta");
  m.stage1 = {vec("stage1.weights"), num("stage1.bias"), num("stage1.lambda")};
  m.stage2 = {vec("stage2.weights"), num("stage2.bias"), num("stage2.lambda")};
  m.c_pos = num("stage2.c_pos");
  m.c_neg = num("stage2.c_neg");
  m.standardization.mean = vec("standardization.mean");
  m.standardization.scale = vec("standardization.scale");

  const auto d = m.stage2.weights.size();
  if (m.stage1.weights.size() != d || m.standardization.mean.size() != d ||
      m.standardization.scale.size() != d) {
    throw ParseError(0, "model vectors have inconsistent dimensions");
  }
  if (!(m.epsilon > 0 && m.epsilon < 1)) throw ParseError(0, "epsilon must be in (0, 1)");
  if (!(m.theta > 0 && m.theta <= 1)) throw ParseError(0, "theta must be in (0, 1]");
  return m;
}

PUModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  try {
    return load_model(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

}  // namespace mixdetect
