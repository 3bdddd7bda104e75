#include "mixdetect/graph.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace mixdetect {
namespace {

// Merge slots of the same address, result sorted by address id.
void append_participants(const AddressTable& table, const std::vector<Slot>& slots,
                         std::vector<Participant>& out) {
  const auto first = out.size();
  for (const auto& s : slots) out.push_back({*table.find(s.address), s.amount});
  auto begin = out.begin() + static_cast<std::ptrdiff_t>(first);
  std::sort(begin, out.end(),
            [](const Participant& a, const Participant& b) { return a.address < b.address; });
  auto w = begin;
  for (auto r = begin; r != out.end(); ++r) {
    if (w != begin && std::prev(w)->address == r->address) {
      std::prev(w)->amount += r->amount;
    } else {
      *w++ = *r;
    }
  }
  out.erase(w, out.end());
}

// Distribute edge indices, visited in `order`, into per-address buckets.
template <typename Endpoints>
void bucket_incidence(std::size_t n_addresses, const std::vector<std::uint32_t>& order,
                      Endpoints endpoints, std::vector<std::size_t>& offsets,
                      std::vector<std::uint32_t>& incident) {
  offsets.assign(n_addresses + 1, 0);
  for (auto e : order) {
    auto [a, b] = endpoints(e);
    ++offsets[a + 1];
    if (b != a) ++offsets[b + 1];
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  incident.assign(offsets.back(), 0);
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (auto e : order) {
    auto [a, b] = endpoints(e);
    incident[cursor[a]++] = e;
    if (b != a) incident[cursor[b]++] = e;
  }
}

bool tain_event_less(const TainEdge& a, const TainEdge& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.tx != b.tx) return a.tx < b.tx;
  if (a.kind != b.kind) return a.kind == TainEdgeKind::transaction_to_address;
  return a.amount < b.amount;
}

}  // namespace

AddressTable::AddressTable(std::vector<std::string> sorted_unique_names)
    : names_(std::move(sorted_unique_names)) {
  ids_.reserve(names_.size());
  for (std::size_t i = 0; i < names_.size(); ++i) ids_.emplace(names_[i], static_cast<AddressId>(i));
}

std::optional<AddressId> AddressTable::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::shared_ptr<const TxContext> TxContext::build(std::span<const TxRecord> records,
                                                  const AddressUniverse& universe) {
  auto ctx = std::make_shared<TxContext>();

  std::vector<std::string> names;
  for (const auto& rec : records) {
    for (const auto& s : rec.inputs) names.push_back(s.address);
    for (const auto& s : rec.outputs) names.push_back(s.address);
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  ctx->addresses_ = AddressTable(std::move(names));

  const auto n = ctx->addresses_.size();
  ctx->in_universe_.assign(n, false);
  for (const auto& a : universe.addresses) {
    if (auto id = ctx->addresses_.find(a)) ctx->in_universe_[*id] = true;
  }
  for (AddressId a = 0; a < n; ++a) {
    if (ctx->in_universe_[a]) ctx->universe_.push_back(a);
  }

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].timestamp != records[b].timestamp) {
      return records[a].timestamp < records[b].timestamp;
    }
    return records[a].tx_id < records[b].tx_id;
  });

  ctx->in_offsets_.push_back(0);
  ctx->out_offsets_.push_back(0);
  for (auto i : order) {
    const auto& rec = records[i];
    ctx->tx_ids_.push_back(rec.tx_id);
    ctx->tx_time_.push_back(rec.timestamp);
    append_participants(ctx->addresses_, rec.inputs, ctx->in_parts_);
    append_participants(ctx->addresses_, rec.outputs, ctx->out_parts_);
    ctx->in_offsets_.push_back(ctx->in_parts_.size());
    ctx->out_offsets_.push_back(ctx->out_parts_.size());
  }
  return ctx;
}

std::span<const Participant> TxContext::inputs(TxIndex tx) const {
  return {in_parts_.data() + in_offsets_[tx], in_offsets_[tx + 1] - in_offsets_[tx]};
}

std::span<const Participant> TxContext::outputs(TxIndex tx) const {
  return {out_parts_.data() + out_offsets_[tx], out_offsets_[tx + 1] - out_offsets_[tx]};
}

AddressId TxContext::address_id(std::string_view name) const {
  auto id = addresses_.find(name);
  if (!id) throw std::out_of_range("unknown address '" + std::string(name) + "'");
  return *id;
}

bool edge_order_less(const AainEdge& a, const AainEdge& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.tx != b.tx) return a.tx < b.tx;
  if (a.src != b.src) return a.src < b.src;
  return a.dst < b.dst;
}

Aain::Aain(std::shared_ptr<const TxContext> ctx, std::vector<AainEdge> edges)
    : ctx_(std::move(ctx)), edges_(std::move(edges)) {
  const auto n = ctx_->addresses().size();
  std::vector<std::uint32_t> order(edges_.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (edge_order_less(edges_[a], edges_[b])) return true;
    if (edge_order_less(edges_[b], edges_[a])) return false;
    return a < b;
  });
  bucket_incidence(
      n, order, [&](std::uint32_t e) { return std::pair{edges_[e].src, edges_[e].dst}; }, offsets_,
      incident_);
  in_degree_.assign(n, 0);
  out_degree_.assign(n, 0);
  for (const auto& e : edges_) {
    ++out_degree_[e.src];
    ++in_degree_[e.dst];
  }
}

std::span<const std::uint32_t> Aain::incidence(AddressId a) const {
  return {incident_.data() + offsets_[a], offsets_[a + 1] - offsets_[a]};
}

Aain build_aain(std::shared_ptr<const TxContext> ctx, std::size_t edge_cap) {
  const auto& c = *ctx;
  std::size_t expanded = 0;
  for (TxIndex tx = 0; tx < c.tx_count(); ++tx) {
    expanded += c.inputs(tx).size() * c.outputs(tx).size();
    if (expanded > edge_cap) {
      throw std::length_error("AAIN expansion exceeds cap of " + std::to_string(edge_cap) +
                              " edges at transaction '" + c.tx_id(tx) + "' (" +
                              std::to_string(c.inputs(tx).size()) + " inputs x " +
                              std::to_string(c.outputs(tx).size()) + " outputs)");
    }
  }
  std::vector<AainEdge> edges;
  edges.reserve(expanded);
  for (TxIndex tx = 0; tx < c.tx_count(); ++tx) {
    for (const auto& in : c.inputs(tx)) {
      if (!c.in_universe(in.address)) continue;
      for (const auto& out : c.outputs(tx)) {
        if (!c.in_universe(out.address)) continue;
        edges.push_back({in.address, out.address, tx, c.tx_time(tx)});
      }
    }
  }
  return Aain(std::move(ctx), std::move(edges));
}

Aain build_aain(std::span<const TxRecord> records, const AddressUniverse& universe,
                std::size_t edge_cap) {
  return build_aain(TxContext::build(records, universe), edge_cap);
}

Tain::Tain(std::shared_ptr<const TxContext> ctx, std::vector<TainEdge> edges)
    : ctx_(std::move(ctx)), edges_(std::move(edges)) {
  std::vector<std::uint32_t> order(edges_.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (tain_event_less(edges_[a], edges_[b])) return true;
    if (tain_event_less(edges_[b], edges_[a])) return false;
    return a < b;
  });
  bucket_incidence(
      ctx_->addresses().size(), order,
      [&](std::uint32_t e) { return std::pair{edges_[e].address, edges_[e].address}; }, offsets_,
      incident_);
}

std::span<const std::uint32_t> Tain::incidence(AddressId a) const {
  return {incident_.data() + offsets_[a], offsets_[a + 1] - offsets_[a]};
}

Tain build_tain(std::shared_ptr<const TxContext> ctx) {
  const auto& c = *ctx;
  std::vector<TainEdge> edges;
  for (TxIndex tx = 0; tx < c.tx_count(); ++tx) {
    const auto t = c.tx_time(tx);
    for (const auto& in : c.inputs(tx)) {
      if (c.in_universe(in.address)) {
        edges.push_back({in.address, tx, TainEdgeKind::address_to_transaction, in.amount, t});
      }
    }
    for (const auto& out : c.outputs(tx)) {
      if (c.in_universe(out.address)) {
        edges.push_back({out.address, tx, TainEdgeKind::transaction_to_address, out.amount, t});
      }
    }
  }
  return Tain(std::move(ctx), std::move(edges));
}

Tain build_tain(std::span<const TxRecord> records, const AddressUniverse& universe) {
  return build_tain(TxContext::build(records, universe));
}

EventSeries event_series(const Tain& tain, AddressId address) {
  const auto& c = tain.context();
  if (address >= c.addresses().size() || !c.in_universe(address)) {
    throw std::out_of_range("address id " + std::to_string(address) + " is not a TAIN node");
  }
  EventSeries s{address, {}};
  const auto inc = tain.incidence(address);
  s.events.reserve(inc.size());
  for (auto e : inc) {
    const auto& edge = tain.edges()[e];
    s.events.push_back({edge.t,
                        edge.kind == TainEdgeKind::transaction_to_address ? Direction::in
                                                                          : Direction::out,
                        edge.amount, edge.tx, static_cast<std::uint32_t>(c.inputs(edge.tx).size()),
                        static_cast<std::uint32_t>(c.outputs(edge.tx).size())});
  }
  return s;
}

EventSeries event_series(const Tain& tain, std::string_view address) {
  return event_series(tain, tain.context().address_id(address));
}

void write_aain_edges(std::ostream& out, const Aain& aain) {
  const auto& c = aain.context();
  for (const auto& e : aain.edges()) {
    out << c.addresses().name(e.src) << '\t' << c.addresses().name(e.dst) << '\t' << c.tx_id(e.tx)
        << '\t' << e.t << '\n';
  }
}

void write_tain_edges(std::ostream& out, const Tain& tain) {
  const auto& c = tain.context();
  for (const auto& e : tain.edges()) {
    out << (e.kind == TainEdgeKind::transaction_to_address ? "tx->addr" : "addr->tx") << '\t'
        << c.addresses().name(e.address) << '\t' << c.tx_id(e.tx) << '\t' << e.amount << '\t'
        << e.t << '\n';
  }
}

}  // namespace mixdetect
