#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mixdetect/ingest.hpp"
#include "mixdetect/types.hpp"

namespace mixdetect {

/// Default cap on the number of AAIN edges produced by input x output expansion.
inline constexpr std::size_t kDefaultEdgeCap = 100'000'000;

/// Interned address names. Ids follow lexicographic name order, so every
/// derived ordering is independent of the order records were read in.
class AddressTable {
 public:
  AddressTable() = default;
  explicit AddressTable(std::vector<std::string> sorted_unique_names);

  std::optional<AddressId> find(std::string_view name) const;
  const std::string& name(AddressId id) const { return names_[id]; }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string_view, AddressId> ids_;
};

/// A per-transaction participant: distinct address with its slot amounts summed.
struct Participant {
  AddressId address;
  Satoshi amount;
};

/// Canonicalized view of a dataset shared by AAIN and TAIN.
///
/// Transactions are indexed in (timestamp, tx_id) order, so comparing
/// (t, tx index) is the same as comparing (t, tx_id). Participant lists
/// are NOT restricted to the universe: co-participant statistics always
/// see the full transaction.
class TxContext {
 public:
  static std::shared_ptr<const TxContext> build(std::span<const TxRecord> records,
                                                const AddressUniverse& universe);

  const AddressTable& addresses() const { return addresses_; }
  bool in_universe(AddressId a) const { return in_universe_[a]; }
  /// Universe members in id order.
  const std::vector<AddressId>& universe() const { return universe_; }

  std::size_t tx_count() const { return tx_ids_.size(); }
  const std::string& tx_id(TxIndex tx) const { return tx_ids_[tx]; }
  Timestamp tx_time(TxIndex tx) const { return tx_time_[tx]; }
  std::span<const Participant> inputs(TxIndex tx) const;
  std::span<const Participant> outputs(TxIndex tx) const;

  /// Throws std::out_of_range for names not in the dataset.
  AddressId address_id(std::string_view name) const;

 private:
  AddressTable addresses_;
  std::vector<bool> in_universe_;
  std::vector<AddressId> universe_;
  std::vector<std::string> tx_ids_;
  std::vector<Timestamp> tx_time_;
  std::vector<std::size_t> in_offsets_, out_offsets_;
  std::vector<Participant> in_parts_, out_parts_;
};

struct AainEdge {
  AddressId src;
  AddressId dst;
  TxIndex tx;
  Timestamp t;

  bool is_self_loop() const { return src == dst; }
  friend bool operator==(const AainEdge&, const AainEdge&) = default;
};

/// Deterministic total order on AAIN edges: (t, tx, src, dst).
bool edge_order_less(const AainEdge& a, const AainEdge& b);

/// Address-Address Interaction Network: temporal directed multigraph with one
/// edge per (input address, output address, transaction). Nodes are the
/// universe; edges touching addresses outside it are dropped.
class Aain {
 public:
  Aain(std::shared_ptr<const TxContext> ctx, std::vector<AainEdge> edges);

  const TxContext& context() const { return *ctx_; }
  const std::shared_ptr<const TxContext>& context_ptr() const { return ctx_; }
  const std::vector<AainEdge>& edges() const { return edges_; }

  /// Indices into edges() of the edges incident to `a`, sorted by edge_order_less.
  /// A self-loop appears once.
  std::span<const std::uint32_t> incidence(AddressId a) const;
  std::size_t in_degree(AddressId a) const { return in_degree_[a]; }
  std::size_t out_degree(AddressId a) const { return out_degree_[a]; }

 private:
  std::shared_ptr<const TxContext> ctx_;
  std::vector<AainEdge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> incident_;
  std::vector<std::uint32_t> in_degree_, out_degree_;
};

/// Builds the AAIN. Throws std::length_error naming the transaction at which the
/// running sum of |distinct inputs| x |distinct outputs| exceeds `edge_cap`.
Aain build_aain(std::shared_ptr<const TxContext> ctx, std::size_t edge_cap = kDefaultEdgeCap);
Aain build_aain(std::span<const TxRecord> records, const AddressUniverse& universe,
                std::size_t edge_cap = kDefaultEdgeCap);

enum class TainEdgeKind : std::uint8_t {
  transaction_to_address,  // amount flowing into the address
  address_to_transaction,  // amount flowing out of the address
};

struct TainEdge {
  AddressId address;
  TxIndex tx;
  TainEdgeKind kind;
  Satoshi amount;
  Timestamp t;

  friend bool operator==(const TainEdge&, const TainEdge&) = default;
};

/// Transaction-Address Interaction Network: bipartite attributed temporal graph.
/// One transaction node per record, address nodes for the universe. Slots of the
/// same address within a transaction are merged.
class Tain {
 public:
  Tain(std::shared_ptr<const TxContext> ctx, std::vector<TainEdge> edges);

  const TxContext& context() const { return *ctx_; }
  const std::shared_ptr<const TxContext>& context_ptr() const { return ctx_; }
  const std::vector<TainEdge>& edges() const { return edges_; }
  std::size_t transaction_node_count() const { return ctx_->tx_count(); }

  /// Edge indices incident to `a` in event order.
  std::span<const std::uint32_t> incidence(AddressId a) const;

 private:
  std::shared_ptr<const TxContext> ctx_;
  std::vector<TainEdge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> incident_;
};

Tain build_tain(std::shared_ptr<const TxContext> ctx);
Tain build_tain(std::span<const TxRecord> records, const AddressUniverse& universe);

enum class Direction : std::uint8_t { in, out };

struct Event {
  Timestamp t;
  Direction dir;
  Satoshi amount;
  TxIndex tx;
  std::uint32_t co_inputs;   // distinct input addresses of the transaction
  std::uint32_t co_outputs;  // distinct output addresses of the transaction

  friend bool operator==(const Event&, const Event&) = default;
};

/// Time-ordered incidence of one address in the TAIN, ordered by
/// (t, tx_id, `in` before `out`).
struct EventSeries {
  AddressId address;
  std::vector<Event> events;
};

/// Throws std::out_of_range when the address is not a TAIN address node.
EventSeries event_series(const Tain& tain, AddressId address);
EventSeries event_series(const Tain& tain, std::string_view address);

/// Tab-separated `src dst tx_id t` rows.
void write_aain_edges(std::ostream& out, const Aain& aain);
/// Tab-separated `kind address tx_id amount t` rows, kind is `tx->addr` or `addr->tx`.
void write_tain_edges(std::ostream& out, const Tain& tain);

}  // namespace mixdetect
