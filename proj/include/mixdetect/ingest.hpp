#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mixdetect/types.hpp"

namespace mixdetect {

enum class TxFormat { jsonl, csv };

/// Picks csv for a `.csv` extension and jsonl otherwise.
TxFormat format_for_path(const std::filesystem::path& path);

/// Reads transactions in file order.
///
/// JSON Lines: `{"tx_id": "...", "time": 123, "inputs": [["addr", 5]], "outputs": [...]}`.
/// Blank lines are skipped.
///
/// CSV: header `tx_id,time,side,address,amount`, `side` is `in` or `out`.
/// Consecutive rows sharing a tx_id form one transaction; a tx_id that
/// reappears after another transaction started is a duplicate.
///
/// Throws ParseError naming the line for missing fields, non-positive
/// amounts, negative timestamps, empty outputs and duplicate tx ids.
std::vector<TxRecord> parse_transactions(std::istream& in, TxFormat format);
std::vector<TxRecord> read_transactions(const std::filesystem::path& path);

void write_transactions(std::ostream& out, std::span<const TxRecord> records, TxFormat format);

struct LabelSet {
  std::set<std::string> positives;

  bool contains(const std::string& address) const { return positives.count(address) != 0; }
};

struct LabelLoad {
  LabelSet labels;
  std::size_t duplicates = 0;
  std::vector<std::string> warnings;
};

/// One address per line. Whitespace-only lines are skipped with a warning,
/// an empty source yields an empty set with a warning.
LabelLoad load_labels(std::istream& in);
LabelLoad load_labels(const std::filesystem::path& path);

void write_labels(std::ostream& out, const LabelSet& labels);

/// Addresses that both receive (appear in some outputs) and send (appear in
/// some inputs).
struct AddressUniverse {
  std::set<std::string> addresses;
  std::size_t removed_count = 0;

  bool contains(const std::string& address) const { return addresses.count(address) != 0; }
  std::size_t size() const { return addresses.size(); }
};

AddressUniverse filter_addresses(std::span<const TxRecord> records);

/// Universe that keeps every address seen in `records`.
AddressUniverse all_addresses(std::span<const TxRecord> records);

}  // namespace mixdetect
