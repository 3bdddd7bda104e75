#include "mixdetect/synth.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <queue>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "mixdetect/io.hpp"
#include "mixdetect/random.hpp"

namespace mixdetect {

void apply_synth_config(SynthConfig& c, const KeyValues& kv) {
  for (const auto& [full, value] : kv) {
    if (!full.starts_with("synth.")) continue;
    const std::string_view key = std::string_view(full).substr(6);
    auto count = [&] { return static_cast<std::size_t>(parse_unsigned(full, value)); };
    auto real = [&] { return parse_real(full, value); };
    auto dur = [&] { return parse_duration(value); };
    if (key == "n_mixer_addresses") c.n_mixer_addresses = count();
    else if (key == "n_user_addresses") c.n_user_addresses = count();
    else if (key == "n_exchange_addresses") c.n_exchange_addresses = count();
    else if (key == "n_transactions") c.n_transactions = count();
    else if (key == "mean_gap") c.mean_gap = dur();
    else if (key == "payout_delay_min") c.payout_delay_min = dur();
    else if (key == "payout_delay_max") c.payout_delay_max = dur();
    else if (key == "mixer_rest") c.mixer_rest = dur();
    else if (key == "mixer_rest_jitter") c.mixer_rest_jitter = dur();
    else if (key == "fanout_min") c.fanout_min = count();
    else if (key == "fanout_max") c.fanout_max = count();
    else if (key == "max_coinputs") c.max_coinputs = count();
    else if (key == "batch_window") c.batch_window = dur();
    else if (key == "zero_balance") {
      if (value == "true" || value == "1") c.zero_balance = true;
      else if (value == "false" || value == "0") c.zero_balance = false;
      else throw std::invalid_argument(full + ": expected true or false");
    }
    else if (key == "mixer_reuse_prob") c.mixer_reuse_prob = real();
    else if (key == "withheld_fraction") c.withheld_fraction = real();
    else if (key == "deposit_rate") c.deposit_rate = real();
    else if (key == "exchange_deposit_rate") c.exchange_deposit_rate = real();
    else if (key == "exchange_withdrawal_rate") c.exchange_withdrawal_rate = real();
    else if (key == "coinbase_rate") c.coinbase_rate = real();
    else if (key == "change_prob") c.change_prob = real();
    else if (key == "address_reuse_prob") c.address_reuse_prob = real();
    else if (key == "co_input_prob") c.co_input_prob = real();
    else if (key == "forwarder_prob") c.forwarder_prob = real();
    else if (key == "forward_delay_max") c.forward_delay_max = dur();
    else if (key == "start_time") c.start_time = static_cast<Timestamp>(parse_unsigned(full, value));
    else if (key == "seed") c.seed = parse_unsigned(full, value);
    else throw std::invalid_argument("unknown config key '" + full + "'");
  }
}

namespace {

constexpr std::size_t kGenesisOutputs = 50;

std::size_t genesis_transactions(const SynthConfig& c) {
  return (c.n_user_addresses + kGenesisOutputs - 1) / kGenesisOutputs;
}

}  // namespace

void validate(const SynthConfig& c) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("synth config: " + m); };
  if (c.n_mixer_addresses == 0 || c.n_user_addresses == 0 || c.n_exchange_addresses == 0 ||
      c.n_transactions == 0) {
    fail("address and transaction counts must be positive");
  }
  if (c.mean_gap <= 0) fail("mean_gap must be positive");
  if (c.payout_delay_min <= 0 || c.payout_delay_min > c.payout_delay_max) {
    fail("need 0 < payout_delay_min <= payout_delay_max");
  }
  if (c.mixer_rest <= c.payout_delay_max) fail("mixer_rest must exceed payout_delay_max");
  if (c.mixer_rest_jitter < 0 || c.batch_window < 0) fail("negative duration");
  if (c.fanout_min < 2 || c.fanout_min > c.fanout_max) fail("need 2 <= fanout_min <= fanout_max");
  if (c.max_coinputs < 1) fail("max_coinputs must be at least 1");
  if (c.forward_delay_max < 60) fail("forward_delay_max must be at least 60 seconds");
  for (auto [name, p] : {std::pair{"mixer_reuse_prob", c.mixer_reuse_prob},
                         {"withheld_fraction", c.withheld_fraction},
                         {"deposit_rate", c.deposit_rate},
                         {"exchange_deposit_rate", c.exchange_deposit_rate},
                         {"exchange_withdrawal_rate", c.exchange_withdrawal_rate},
                         {"coinbase_rate", c.coinbase_rate},
                         {"change_prob", c.change_prob},
                         {"address_reuse_prob", c.address_reuse_prob},
                         {"co_input_prob", c.co_input_prob},
                         {"forwarder_prob", c.forwarder_prob}}) {
    if (!(p >= 0 && p <= 1)) fail(std::string(name) + " must be in [0, 1]");
  }
  if (c.deposit_rate + c.exchange_deposit_rate + c.exchange_withdrawal_rate + c.coinbase_rate > 1) {
    fail("step rates sum to more than 1");
  }
  if (c.deposit_rate == 0) fail("deposit_rate must be positive");
  // Every mixer needs a deposit and a payout on top of the genesis funding.
  if (c.n_transactions < genesis_transactions(c) + 2 * c.n_mixer_addresses) {
    fail("n_transactions too small for " + std::to_string(c.n_mixer_addresses) +
         " mixing cycles and the genesis funding");
  }
  const double expected_deposits =
      c.deposit_rate * static_cast<double>(c.n_transactions - genesis_transactions(c));
  if (expected_deposits < static_cast<double>(c.n_mixer_addresses)) {
    fail("deposit_rate * n_transactions yields fewer deposits than mixers");
  }
}

namespace {

enum class Kind : std::uint8_t { user, exchange, mixer };

constexpr Satoshi kMinSpend = 10'000;
constexpr Satoshi kBlockReward = 625'000'000;
constexpr std::size_t kMiners = 20;
constexpr std::size_t kMinPool = 200;
constexpr std::size_t kMaxPayoutOutputs = 16;

struct Due {
  Timestamp t;
  std::uint64_t seq;
  bool payout;
  std::uint32_t addr;

  bool operator>(const Due& o) const { return std::tie(t, seq) > std::tie(o.t, o.seq); }
};

struct MixerState {
  bool pending = false;
  bool used = false;
  Timestamp due = 0;
  std::uint64_t seq = 0;
  std::uint32_t depositor = 0;
};

class Generator {
 public:
  explicit Generator(const SynthConfig& c)
      : c_(c), rng_(derive_seed(c.seed, 0x73796e, 0)), salt_(derive_seed(c.seed, 0x6e616d, 0)) {}

  SynthDataset run() {
    now_ = c_.start_time;
    for (std::size_t i = 0; i < c_.n_exchange_addresses; ++i) exchanges_.push_back(new_address(Kind::exchange));
    for (std::size_t i = 0; i < c_.n_mixer_addresses; ++i) {
      const auto m = new_address(Kind::mixer);
      mixer_of_.emplace(m, mixers_.size());
      mixers_.push_back(m);
      available_.push_back(m);
    }
    state_.resize(mixers_.size());
    for (std::size_t i = 0; i < kMiners; ++i) miners_.push_back(new_address(Kind::user));
    genesis();

    while (background_ < c_.n_transactions) step();
    // Flush outstanding payouts so every deposit completes its cycle.
    while (!due_.empty()) {
      const auto d = due_.top();
      due_.pop();
      if (!d.payout) continue;
      now_ = std::max(d.t, now_ + 1);
      payout(d);
    }
    return finish();
  }

 private:
  // ---- randomness ----
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  std::int64_t between(std::int64_t a, std::int64_t b) {
    return std::uniform_int_distribution<std::int64_t>(a, b)(rng_);
  }
  bool chance(double p) { return uniform(0, 1) < p; }

  // ---- addresses ----
  std::uint32_t new_address(Kind k) {
    const auto id = static_cast<std::uint32_t>(kind_.size());
    kind_.push_back(k);
    balance_.push_back(0);
    pool_pos_.push_back(-1);
    forwarder_.push_back(k == Kind::user && id >= kMiners + c_.n_mixer_addresses + c_.n_exchange_addresses &&
                         chance(c_.forwarder_prob));
    forward_scheduled_.push_back(false);
    if (k == Kind::user) users_.push_back(id);
    return id;
  }

  std::string name(std::uint32_t id) const {
    char buf[24];
    std::snprintf(buf, sizeof buf, "1%016" PRIx64, mix_seed(salt_ + id));
    return buf;
  }

  void pool_add(std::uint32_t a) {
    if (pool_pos_[a] >= 0) return;
    pool_pos_[a] = static_cast<std::int64_t>(pool_.size());
    pool_.push_back(a);
  }

  void pool_remove(std::uint32_t a) {
    const auto p = pool_pos_[a];
    if (p < 0) return;
    const auto last = pool_.back();
    pool_[static_cast<std::size_t>(p)] = last;
    pool_pos_[last] = p;
    pool_.pop_back();
    pool_pos_[a] = -1;
  }

  void credit(std::uint32_t a, Satoshi v) {
    balance_[a] += v;
    if (kind_[a] != Kind::user || balance_[a] < kMinSpend) return;
    pool_add(a);
    if (forwarder_[a] && !forward_scheduled_[a]) {
      forward_scheduled_[a] = true;
      due_.push({now_ + between(60, c_.forward_delay_max), seq_++, false, a});
    }
  }

  Satoshi drain(std::uint32_t a) {
    const auto v = balance_[a];
    balance_[a] = 0;
    if (kind_[a] == Kind::user) pool_remove(a);
    return v;
  }

  std::uint32_t take_funded() { return pool_[pick(pool_.size())]; }

  std::uint32_t payee() {
    if (chance(c_.address_reuse_prob)) return users_[pick(users_.size())];
    return new_address(Kind::user);
  }

  // n positive parts summing to total (total >= n).
  std::vector<Satoshi> split(Satoshi total, std::size_t n) {
    std::vector<double> w(n);
    double sum = 0;
    for (auto& x : w) sum += (x = uniform(0.2, 1.0));
    const Satoshi rest = total - static_cast<Satoshi>(n);
    std::vector<Satoshi> parts(n, 1);
    Satoshi given = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto share = static_cast<Satoshi>(static_cast<double>(rest) * (w[i] / sum));
      parts[i] += share;
      given += share;
    }
    parts[n - 1] += rest - given;
    return parts;
  }

  // ---- emission ----
  using Legs = std::vector<std::pair<std::uint32_t, Satoshi>>;

  static Legs merged(const Legs& legs) {
    Legs out;
    for (const auto& [a, v] : legs) {
      auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == a; });
      if (it == out.end()) out.emplace_back(a, v);
      else it->second += v;
    }
    return out;
  }

  // Inputs must already be drained; outputs are credited here.
  void emit(const Legs& inputs, const Legs& outputs, bool background = true) {
    TxRecord rec;
    char id[24];
    std::snprintf(id, sizeof id, "tx%08zu", records_.size());
    rec.tx_id = id;
    rec.timestamp = now_;
    for (const auto& [a, v] : merged(inputs)) rec.inputs.push_back({name(a), v});
    for (const auto& [a, v] : merged(outputs)) {
      rec.outputs.push_back({name(a), v});
      credit(a, v);
    }
    records_.push_back(std::move(rec));
    if (background) ++background_;
  }

  // ---- phases ----
  void genesis() {
    std::vector<std::uint32_t> fresh;
    for (std::size_t i = 0; i < c_.n_user_addresses; ++i) fresh.push_back(new_address(Kind::user));
    for (std::size_t i = 0; i < fresh.size(); i += kGenesisOutputs) {
      Legs outs;
      for (std::size_t j = i; j < std::min(fresh.size(), i + kGenesisOutputs); ++j) {
        outs.emplace_back(fresh[j], between(1'000'000, 1'000'000'000));
      }
      advance();
      emit({}, outs);
    }
  }

  void advance() {
    const double mean = static_cast<double>(c_.mean_gap);
    const auto gap = std::exponential_distribution<double>(1.0 / mean)(rng_);
    now_ += std::max<Timestamp>(1, static_cast<Timestamp>(gap + 0.5));
  }

  void step() {
    const auto before = now_;
    advance();
    if (!due_.empty() && due_.top().t <= now_) {
      const auto d = due_.top();
      due_.pop();
      now_ = std::max(d.t, before + 1);
      if (d.payout) payout(d);
      else forward(d);
      return;
    }
    while (!resting_.empty() && resting_.top().first <= now_) {
      available_.push_back(resting_.top().second);
      resting_.pop();
    }
    if (pool_.size() < kMinPool) return coinbase();
    double r = uniform(0, 1);
    if ((r -= c_.coinbase_rate) < 0) return coinbase();
    if ((r -= c_.deposit_rate) < 0 && !available_.empty() && !pool_.empty()) return deposit();
    if ((r -= c_.exchange_deposit_rate) < 0) return exchange_deposit();
    if ((r -= c_.exchange_withdrawal_rate) < 0) return exchange_withdrawal();
    payment();
  }

  void coinbase() { emit({}, {{miners_[pick(miners_.size())], kBlockReward}}); }

  // Spend one funded address: `amount` to `to`, the rest as change.
  void pay(std::uint32_t from, std::uint32_t to, double lo, double hi) {
    Legs in{{from, drain(from)}};
    if (chance(c_.co_input_prob) && !pool_.empty()) {
      const auto v = take_funded();
      in.emplace_back(v, drain(v));
    }
    Satoshi total = 0;
    for (const auto& [a, v] : in) total += v;
    for (const auto& [a, v] : in) {
      if (a == to) to = new_address(Kind::user);
    }
    const auto amount = std::clamp<Satoshi>(static_cast<Satoshi>(static_cast<double>(total) * uniform(lo, hi)),
                                            1, total);
    Legs out{{to, amount}};
    if (total > amount) {
      out.emplace_back(chance(c_.change_prob) ? new_address(Kind::user) : from, total - amount);
    }
    emit(in, out);
  }

  void payment() {
    if (pool_.empty()) return coinbase();
    const auto from = take_funded();
    pay(from, payee(), 0.05, 0.95);
  }

  void exchange_deposit() {
    if (pool_.empty()) return coinbase();
    const auto from = take_funded();
    pay(from, exchanges_[pick(exchanges_.size())], 0.5, 1.0);
  }

  void exchange_withdrawal() {
    const auto e = exchanges_[pick(exchanges_.size())];
    if (balance_[e] < 100 * kMinSpend) return payment();
    const auto total = drain(e);
    const auto spend = static_cast<Satoshi>(static_cast<double>(total) * uniform(0.05, 0.3));
    const auto k = static_cast<std::size_t>(between(1, 5));
    const auto parts = split(spend, k);
    Legs out;
    for (auto v : parts) out.emplace_back(payee(), v);
    out.emplace_back(e, total - spend);
    emit({{e, total}}, out);
  }

  void deposit() {
    const auto slot = pick(available_.size());
    const auto m = available_[slot];
    available_[slot] = available_.back();
    available_.pop_back();
    const auto u = take_funded();
    const auto total = drain(u);
    const auto amount =
        std::clamp<Satoshi>(static_cast<Satoshi>(static_cast<double>(total) * uniform(0.3, 1.0)), 1, total);
    Legs out{{m, amount}};
    if (total > amount) {
      out.emplace_back(chance(c_.change_prob) ? new_address(Kind::user) : u, total - amount);
    }
    emit({{u, total}}, out);

    auto& st = state_[mixer_of_.at(m)];
    st.pending = true;
    st.depositor = u;
    st.due = now_ + between(c_.payout_delay_min, c_.payout_delay_max);
    st.seq = seq_++;
    pending_.push_back(m);
    due_.push({st.due, st.seq, true, m});
  }

  void payout(const Due& d) {
    auto& head = state_[mixer_of_.at(d.addr)];
    if (!head.pending || head.seq != d.seq) return;  // already merged into an earlier payout

    std::vector<std::uint32_t> batch{d.addr};
    const auto extra = static_cast<std::size_t>(between(0, static_cast<std::int64_t>(c_.max_coinputs) - 1));
    if (extra > 0) {
      std::vector<std::pair<Timestamp, std::uint32_t>> cands;
      for (auto m : pending_) {
        const auto& st = state_[mixer_of_.at(m)];
        if (m != d.addr && st.due <= now_ + c_.batch_window) cands.emplace_back(st.due, m);
      }
      std::sort(cands.begin(), cands.end());
      for (std::size_t i = 0; i < std::min(extra, cands.size()); ++i) batch.push_back(cands[i].second);
    }

    Legs in;
    Satoshi total = 0;
    std::vector<Satoshi> fees;
    std::size_t n_out = 0;
    for (auto m : batch) {
      const auto v = drain(m);
      const Satoshi fee =
          c_.zero_balance ? 0 : static_cast<Satoshi>(static_cast<double>(v) * uniform(0.01, 0.03));
      in.emplace_back(m, v - fee);
      fees.push_back(fee);
      total += v - fee;
      n_out += static_cast<std::size_t>(between(static_cast<std::int64_t>(c_.fanout_min),
                                                static_cast<std::int64_t>(c_.fanout_max)));
    }
    n_out = std::min({n_out, kMaxPayoutOutputs, static_cast<std::size_t>(total)});
    Legs out;
    const auto parts = split(total, n_out);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const bool back = i == 0 && chance(c_.mixer_reuse_prob);
      out.emplace_back(back ? head.depositor : new_address(Kind::user), parts[i]);
    }
    emit(in, out, false);
    // The fee stays at the mixer and leaves with its next payout.
    for (std::size_t i = 0; i < batch.size(); ++i) balance_[batch[i]] += fees[i];

    for (auto m : batch) {
      auto& st = state_[mixer_of_.at(m)];
      st.pending = false;
      st.used = true;
      pending_.erase(std::find(pending_.begin(), pending_.end(), m));
      resting_.emplace(now_ + c_.mixer_rest + between(0, c_.mixer_rest_jitter), m);
    }
  }

  void forward(const Due& d) {
    const auto a = d.addr;
    forward_scheduled_[a] = false;
    if (balance_[a] < kMinSpend) return payment();
    const auto total = drain(a);
    const auto parts = split(total, static_cast<std::size_t>(between(1, 3)));
    Legs out;
    for (auto v : parts) out.emplace_back(new_address(Kind::user), v);
    emit({{a, total}}, out);
  }

  SynthDataset finish() {
    SynthDataset ds;
    ds.records = std::move(records_);
    std::vector<std::string> used;
    for (std::size_t i = 0; i < mixers_.size(); ++i) {
      if (state_[i].used) used.push_back(name(mixers_[i]));
    }
    std::sort(used.begin(), used.end());
    ds.mixers.insert(used.begin(), used.end());
    Rng label_rng(derive_seed(c_.seed, 0x6c6162, 0));
    std::shuffle(used.begin(), used.end(), label_rng);
    const auto withheld = static_cast<std::size_t>(
        static_cast<double>(used.size()) * c_.withheld_fraction + 0.5);
    ds.labels.positives.insert(used.begin() + static_cast<std::ptrdiff_t>(std::min(withheld, used.size())),
                               used.end());
    return ds;
  }

  const SynthConfig& c_;
  Rng rng_;
  std::uint64_t salt_;
  Timestamp now_ = 0;
  std::uint64_t seq_ = 0;
  std::size_t background_ = 0;

  std::vector<Kind> kind_;
  std::vector<Satoshi> balance_;
  std::vector<std::int64_t> pool_pos_;
  std::vector<bool> forwarder_, forward_scheduled_;
  std::vector<std::uint32_t> pool_, users_, miners_, exchanges_, mixers_;
  std::unordered_map<std::uint32_t, std::size_t> mixer_of_;
  std::vector<MixerState> state_;
  std::vector<std::uint32_t> available_, pending_;
  std::priority_queue<std::pair<Timestamp, std::uint32_t>, std::vector<std::pair<Timestamp, std::uint32_t>>,
                      std::greater<>>
      resting_;
  std::priority_queue<Due, std::vector<Due>, std::greater<>> due_;
  std::vector<TxRecord> records_;
};

}  // namespace

SynthDataset generate(const SynthConfig& config) {
  validate(config);
  return Generator(config).run();
}

void write_dataset(const std::filesystem::path& dir, const SynthDataset& dataset) {
  std::filesystem::create_directories(dir);
  atomic_write(dir / "transactions.jsonl",
               [&](std::ostream& out) { write_transactions(out, dataset.records, TxFormat::jsonl); });
  atomic_write(dir / "labels.txt", [&](std::ostream& out) { write_labels(out, dataset.labels); });
  atomic_write(dir / "truth.txt", [&](std::ostream& out) {
    for (const auto& m : dataset.mixers) out << m << '\n';
  });
}

}  // namespace mixdetect
