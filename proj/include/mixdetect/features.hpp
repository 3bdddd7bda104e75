#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mixdetect/graph.hpp"
#include "mixdetect/ingest.hpp"
#include "mixdetect/motif.hpp"

namespace mixdetect {

/// A maximal run of incoming events followed by a maximal run of outgoing events.
struct Cycle {
  std::vector<Event> in_events;
  std::vector<Event> out_events;
  Satoshi balance = 0;     // sum in - sum out
  Timestamp duration = 0;  // last out t - first in t
};

/// Leading out runs and a trailing in run without outputs form no cycle.
std::vector<Cycle> transaction_cycles(const EventSeries& series);

inline constexpr std::size_t kFeatureCount = 29;

/// NF1..NF17, AF1..AF6, TF1..TF6 in canonical order.
const std::array<std::string_view, kFeatureCount>& feature_names();

/// Per-address feature vector.
///
///  NF1-NF6   a1..a6 share of the address's classified 2-edge temporal motifs
///  NF7-NF10  b2, b4, b5, b6 share among those four ATH patterns
///  NF11/12   AAIN in/out degree;  NF13 = NF11 / NF12
///  NF14/15   unique successors / predecessors
///  NF16      NF11 / NF14;  NF17 = NF12 / NF15
///  AF1/AF2   number of receiving / sending transactions;  AF3 = AF1 / AF2
///  AF4/AF5   total received / sent satoshi;  AF6 = AF4 / AF5
///  TF1       population std of cycle balances (0 below two cycles)
///  TF2       mean cycle duration in seconds (0 without cycles)
///  TF3/TF4   mean distinct input (output) addresses of the transactions in which the
///            address is an input (output), self included
///  TF5/TF6   distinct co-input (co-output) addresses, self excluded
///
/// Ratios with a zero denominator take the numerator (denominator read as 1).
struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double get(std::string_view name) const;
};

/// Throws std::invalid_argument when the two censuses were counted with different
/// delta, std::out_of_range when the address is not in the universe.
FeatureVector extract_features(AddressId address, const Aain& aain, const Tain& tain,
                               const TemporalCensus& temporal, const AthCensus& ath,
                               const EventSeries& series);

enum class Label { positive, unlabeled };

/// Rows of the feature matrix file. Row order is address order.
struct FeatureTable {
  std::vector<std::string> addresses;
  std::vector<Label> labels;
  Eigen::MatrixXd features;  // rows x kFeatureCount

  std::size_t rows() const { return addresses.size(); }
  std::vector<std::size_t> rows_with(Label label) const;
};

/// Full feature stage: filter, build both networks, count motifs, extract.
FeatureTable build_feature_table(std::span<const TxRecord> records, const LabelSet& labels,
                                 Timestamp delta = kDefaultDelta);

/// Header `address label NF1 .. TF6`, tab-separated, values printed round-trip exact.
void write_feature_table(std::ostream& out, const FeatureTable& table);
FeatureTable read_feature_table(std::istream& in);
FeatureTable read_feature_table(const std::filesystem::path& path);

struct StandardizationParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // population std, 1 for constant columns
};

/// Without params: fit per-column mean / population std on `rows` and transform.
/// With params: apply them (column count must match).
/// Throws std::invalid_argument on an empty matrix without params or a column mismatch.
std::pair<Eigen::MatrixXd, StandardizationParams> standardize(
    const Eigen::MatrixXd& rows, const std::optional<StandardizationParams>& params = std::nullopt);

Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& rows,
                                      const StandardizationParams& params);

}  // namespace mixdetect
