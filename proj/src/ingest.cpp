#include "mixdetect/ingest.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "mixdetect/io.hpp"

namespace mixdetect {
namespace {

using nlohmann::json;

std::int64_t parse_int(std::string_view text, std::size_t line, const char* field) {
  text = trim(text);
  std::int64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError(line, std::string("field '") + field + "' is not an integer: '" +
                               std::string(text) + "'");
  }
  return value;
}

Satoshi checked_amount(std::int64_t amount, std::size_t line) {
  if (amount <= 0) {
    throw ParseError(line, "amount must be positive, got " + std::to_string(amount));
  }
  return amount;
}

Timestamp checked_time(std::int64_t t, std::size_t line) {
  if (t < 0) throw ParseError(line, "timestamp must be non-negative, got " + std::to_string(t));
  return t;
}

std::vector<Slot> json_slots(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  if (!it->is_array()) throw ParseError(line, std::string("field '") + key + "' must be an array");
  std::vector<Slot> slots;
  slots.reserve(it->size());
  for (const auto& pair : *it) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string()) {
      throw ParseError(line, std::string("entries of '") + key + "' must be [address, amount]");
    }
    const auto& amount = pair[1];
    if (!amount.is_number_integer()) {
      throw ParseError(line, std::string("amount in '") + key + "' must be an integer");
    }
    slots.push_back({pair[0].get<std::string>(), checked_amount(amount.get<std::int64_t>(), line)});
  }
  return slots;
}

TxRecord parse_json_line(std::string_view text, std::size_t line) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(line, "expected a JSON object");

  TxRecord rec;
  auto id = obj.find("tx_id");
  if (id == obj.end()) throw ParseError(line, "missing field 'tx_id'");
  if (!id->is_string()) throw ParseError(line, "field 'tx_id' must be a string");
  rec.tx_id = id->get<std::string>();

  auto time = obj.find("time");
  if (time == obj.end()) throw ParseError(line, "missing field 'time'");
  if (!time->is_number_integer()) throw ParseError(line, "field 'time' must be an integer");
  rec.timestamp = checked_time(time->get<std::int64_t>(), line);

  rec.inputs = json_slots(obj, "inputs", line);
  rec.outputs = json_slots(obj, "outputs", line);
  return rec;
}

void finish_record(const TxRecord& rec, std::size_t line, std::unordered_set<std::string>& seen) {
  if (rec.tx_id.empty()) throw ParseError(line, "empty tx_id");
  if (rec.outputs.empty()) throw ParseError(line, "transaction '" + rec.tx_id + "' has no outputs");
  if (!seen.insert(rec.tx_id).second) {
    throw ParseError(line, "duplicate tx_id '" + rec.tx_id + "'");
  }
}

std::vector<TxRecord> parse_jsonl(std::istream& in) {
  std::vector<TxRecord> out;
  std::unordered_set<std::string> seen;
  std::string buf;
  std::size_t line = 0;
  while (std::getline(in, buf)) {
    ++line;
    auto text = trim(buf);
    if (text.empty()) continue;
    auto rec = parse_json_line(text, line);
    finish_record(rec, line, seen);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TxRecord> parse_csv(std::istream& in) {
  std::vector<TxRecord> out;
  std::unordered_set<std::string> seen;
  std::string buf;
  std::size_t line = 0;
  bool header_seen = false;
  std::size_t current_line = 0;  // first line of the transaction being assembled

  auto flush = [&] {
    if (!out.empty() && current_line != 0) {
      finish_record(out.back(), current_line, seen);
      current_line = 0;
    }
  };

  while (std::getline(in, buf)) {
    ++line;
    auto text = trim(buf);
    if (text.empty()) continue;
    auto cols = split(text, ',');
    if (!header_seen) {
      header_seen = true;
      if (cols.size() == 5 && cols[0] == "tx_id" && cols[1] == "time" && cols[2] == "side" &&
          cols[3] == "address" && cols[4] == "amount") {
        continue;
      }
      throw ParseError(line, "expected header 'tx_id,time,side,address,amount'");
    }
    if (cols.size() != 5) {
      throw ParseError(line, "expected 5 columns, got " + std::to_string(cols.size()));
    }
    if (cols[0].empty()) throw ParseError(line, "missing field 'tx_id'");
    if (cols[3].empty()) throw ParseError(line, "missing field 'address'");
    const auto t = checked_time(parse_int(cols[1], line, "time"), line);
    const auto amount = checked_amount(parse_int(cols[4], line, "amount"), line);
    const bool is_in = cols[2] == "in";
    if (!is_in && cols[2] != "out") {
      throw ParseError(line, "side must be 'in' or 'out', got '" + std::string(cols[2]) + "'");
    }

    if (current_line == 0 || out.back().tx_id != cols[0]) {
      flush();
      if (seen.count(std::string(cols[0]))) {
        throw ParseError(line, "duplicate tx_id '" + std::string(cols[0]) + "'");
      }
      TxRecord rec;
      rec.tx_id = std::string(cols[0]);
      rec.timestamp = t;
      out.push_back(std::move(rec));
      current_line = line;
    } else if (out.back().timestamp != t) {
      throw ParseError(line, "inconsistent time for transaction '" + out.back().tx_id + "'");
    }
    auto& rec = out.back();
    (is_in ? rec.inputs : rec.outputs).push_back({std::string(cols[3]), amount});
  }
  flush();
  return out;
}

void write_json_slots(std::ostream& out, const std::vector<Slot>& slots) {
  out << '[';
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (i) out << ',';
    out << '[' << json(slots[i].address).dump() << ',' << slots[i].amount << ']';
  }
  out << ']';
}

}  // namespace

TxFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? TxFormat::csv : TxFormat::jsonl;
}

std::vector<TxRecord> parse_transactions(std::istream& in, TxFormat format) {
  return format == TxFormat::csv ? parse_csv(in) : parse_jsonl(in);
}

std::vector<TxRecord> read_transactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open transactions file " + path.string());
  try {
    return parse_transactions(in, format_for_path(path));
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

void write_transactions(std::ostream& out, std::span<const TxRecord> records, TxFormat format) {
  if (format == TxFormat::csv) {
    out << "tx_id,time,side,address,amount\n";
    for (const auto& rec : records) {
      for (const auto& s : rec.inputs) {
        out << rec.tx_id << ',' << rec.timestamp << ",in," << s.address << ',' << s.amount << '\n';
      }
      for (const auto& s : rec.outputs) {
        out << rec.tx_id << ',' << rec.timestamp << ",out," << s.address << ',' << s.amount << '\n';
      }
    }
    return;
  }
  for (const auto& rec : records) {
    out << "{\"tx_id\":" << json(rec.tx_id).dump() << ",\"time\":" << rec.timestamp
        << ",\"inputs\":";
    write_json_slots(out, rec.inputs);
    out << ",\"outputs\":";
    write_json_slots(out, rec.outputs);
    out << "}\n";
  }
}

LabelLoad load_labels(std::istream& in) {
  LabelLoad result;
  std::string buf;
  std::size_t line = 0;
  std::size_t non_empty = 0;
  while (std::getline(in, buf)) {
    ++line;
    auto text = trim(buf);
    if (text.empty()) {
      if (!buf.empty()) result.warnings.push_back("line " + std::to_string(line) + ": blank label skipped");
      continue;
    }
    ++non_empty;
    if (!result.labels.positives.emplace(text).second) ++result.duplicates;
  }
  if (non_empty == 0) result.warnings.push_back("label source is empty");
  return result;
}

LabelLoad load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open labels file " + path.string());
  return load_labels(in);
}

void write_labels(std::ostream& out, const LabelSet& labels) {
  for (const auto& a : labels.positives) out << a << '\n';
}

AddressUniverse filter_addresses(std::span<const TxRecord> records) {
  std::set<std::string_view> receives;
  std::set<std::string_view> sends;
  for (const auto& rec : records) {
    for (const auto& s : rec.outputs) receives.insert(s.address);
    for (const auto& s : rec.inputs) sends.insert(s.address);
  }
  AddressUniverse u;
  std::size_t distinct = receives.size();
  for (auto a : sends) {
    if (receives.count(a)) {
      u.addresses.emplace(a);
    } else {
      ++distinct;
    }
  }
  u.removed_count = distinct - u.addresses.size();
  return u;
}

AddressUniverse all_addresses(std::span<const TxRecord> records) {
  AddressUniverse u;
  for (const auto& rec : records) {
    for (const auto& s : rec.inputs) u.addresses.insert(s.address);
    for (const auto& s : rec.outputs) u.addresses.insert(s.address);
  }
  return u;
}

}  // namespace mixdetect
