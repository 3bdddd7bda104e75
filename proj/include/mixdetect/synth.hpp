#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "mixdetect/config.hpp"
#include "mixdetect/ingest.hpp"
#include "mixdetect/types.hpp"

namespace mixdetect {

struct SynthConfig {
  std::size_t n_mixer_addresses = 1000;
  std::size_t n_user_addresses = 10000;  // funded at the start; later addresses are created on demand
  std::size_t n_exchange_addresses = 20;
  std::size_t n_transactions = 100000;  // background target; pending mixer payouts are flushed on top
  Timestamp mean_gap = 30;              // seconds between consecutive transactions

  // Mixing. A cycle is one deposit followed by one payout.
  Timestamp payout_delay_min = 600;
  Timestamp payout_delay_max = 3 * 3600 - 60;
  Timestamp mixer_rest = 3 * 3600 + 1;  // minimum idle time after a payout
  Timestamp mixer_rest_jitter = 6 * 3600;
  std::size_t fanout_min = 2;
  std::size_t fanout_max = 5;
  std::size_t max_coinputs = 4;  // mixers merged into one payout
  Timestamp batch_window = 1800;  // pending payouts due this soon may be merged
  bool zero_balance = true;       // false keeps a 1-3% fee at the mixer
  double mixer_reuse_prob = 0.02;  // payout pays the depositor back
  double withheld_fraction = 0.2;  // used mixers left out of the label set

  // Background.
  double deposit_rate = 0.04;  // share of steps that are mixer deposits
  double exchange_deposit_rate = 0.08;
  double exchange_withdrawal_rate = 0.06;
  double coinbase_rate = 0.01;
  double change_prob = 0.7;       // change goes to a fresh address, otherwise back to the payer
  double address_reuse_prob = 0.3;  // payee is an existing address
  double co_input_prob = 0.2;
  double forwarder_prob = 0.03;  // fresh addresses that pass funds on within minutes
  Timestamp forward_delay_max = 7200;

  Timestamp start_time = 1'600'000'000;
  std::uint64_t seed = 1;
};

/// Reads `synth.<field>` keys; other keys are ignored, unknown `synth.` keys are an error.
void apply_synth_config(SynthConfig& config, const KeyValues& kv);

/// Throws std::invalid_argument for an infeasible or out-of-range config.
void validate(const SynthConfig& config);

struct SynthDataset {
  std::vector<TxRecord> records;  // strictly increasing timestamps
  LabelSet labels;                // labeled mixers
  std::set<std::string> mixers;   // every mixer address that completed a cycle
};

SynthDataset generate(const SynthConfig& config);

/// transactions.jsonl, labels.txt and truth.txt under `dir` (created if needed).
void write_dataset(const std::filesystem::path& dir, const SynthDataset& dataset);

}  // namespace mixdetect
