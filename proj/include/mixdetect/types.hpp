#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixdetect {

/// Integer satoshi. Amounts are never floating point so balance equality is exact.
using Satoshi = std::int64_t;
/// Seconds since the epoch.
using Timestamp = std::int64_t;
using AddressId = std::uint32_t;
using TxIndex = std::uint32_t;

/// Default motif time window: 3 hours.
inline constexpr Timestamp kDefaultDelta = 3 * 3600;

struct Slot {
  std::string address;
  Satoshi amount = 0;

  friend bool operator==(const Slot&, const Slot&) = default;
};

/// One transaction. `inputs` are the paying addresses (money flows out of
/// them), `outputs` the receiving addresses (money flows into them).
struct TxRecord {
  std::string tx_id;
  Timestamp timestamp = 0;
  std::vector<Slot> inputs;
  std::vector<Slot> outputs;

  bool is_coinbase() const { return inputs.empty(); }

  friend bool operator==(const TxRecord&, const TxRecord&) = default;
};

/// Malformed input data. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mixdetect
