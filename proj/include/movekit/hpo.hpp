#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "movekit/common.hpp"

namespace movekit {

struct SearchSpace {
  std::vector<int> n_h_choices = {0, 1, 2, 3, 4};
  std::vector<int> n_c_choices = {0, 1, 2, 3};
  std::vector<double> scale_choices = {1.5, 2.0, 4.0};
  double margin_lo = 0.0, margin_hi = 0.9;              // uniform
  double pair_weight_lo = 1e-3, pair_weight_hi = 10.0;  // log-uniform
  double weight_decay_lo = 1e-6, weight_decay_hi = 1e-2;
  double learning_rate_lo = 1e-5, learning_rate_hi = 1e-2;
  std::vector<std::size_t> batch_choices = {32, 64, 128};
};

struct TrialConfig {
  int n_h = 0;
  int n_c = 0;
  double scale = 2.0;
  double margin = 0.0;
  double pair_weight = 1.0;
  double weight_decay = 0.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
};

TrialConfig suggest(const SearchSpace& space, Rng& rng);

enum class TrialStatus { running, promoted, stopped, completed, failed };

struct TrialRecord {
  int trial_id = -1;
  TrialConfig config;
  std::uint64_t seed = 0;
  TrialStatus status = TrialStatus::running;
  std::vector<std::pair<int, double>> reports;  // (rung epochs, objective)

  double last_objective() const {
    return reports.empty() ? -1e300 : reports.back().second;
  }
  int last_rung() const { return reports.empty() ? 0 : reports.back().first; }
};

// Rung resources r_min * eta^k capped at (and always including) r_max.
std::vector<int> asha_rungs(int r_min, int r_max, double eta);

enum class AshaDecision { promote, stop, complete };

// Asynchronous rule: after `reporting` files a report at its current rung,
// promote iff its objective is within the top 1/eta of all reports seen at
// that rung so far (ties promote). A report at the final rung completes.
AshaDecision asha_decide(const std::vector<TrialRecord>& trials,
                         const TrialRecord& reporting, double eta, int r_min,
                         int r_max);

// Trains a configuration from scratch for `epochs` epochs and returns the
// objective (validation frame accuracy). Must be deterministic in its inputs.
using TrialEvaluator =
    std::function<double(const TrialConfig& cfg, std::uint64_t trial_seed, int epochs)>;

struct SearchOptions {
  int budget = 32;
  double eta = 4.0;
  int r_min = 2;
  int r_max = 32;
  int parallelism = 1;
  std::uint64_t seed = 0;
  std::filesystem::path ledger_path;  // empty: no ledger file
  bool resume = false;                // replay an existing ledger before running
};

struct SearchResult {
  std::vector<TrialRecord> trials;
  int best_trial_id = -1;

  const TrialRecord& best() const;
};

SearchResult run_search(const TrialEvaluator& evaluate, const SearchSpace& space,
                        const SearchOptions& opts);

}  // namespace movekit
