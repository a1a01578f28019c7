#include "movekit/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"

namespace movekit {

using nlohmann::json;

TrialConfig suggest(const SearchSpace& space, Rng& rng) {
  TrialConfig c;
  c.n_h = space.n_h_choices[rng.index(space.n_h_choices.size())];
  c.n_c = space.n_c_choices[rng.index(space.n_c_choices.size())];
  c.scale = space.scale_choices[rng.index(space.scale_choices.size())];
  c.margin = rng.uniform(space.margin_lo, space.margin_hi);
  c.pair_weight = rng.log_uniform(space.pair_weight_lo, space.pair_weight_hi);
  c.weight_decay = rng.log_uniform(space.weight_decay_lo, space.weight_decay_hi);
  c.learning_rate = rng.log_uniform(space.learning_rate_lo, space.learning_rate_hi);
  c.batch_size = space.batch_choices[rng.index(space.batch_choices.size())];
  return c;
}

std::vector<int> asha_rungs(int r_min, int r_max, double eta) {
  if (r_min < 1 || r_max < r_min) fail(Errc::invalid_argument, "asha: bad rung bounds");
  if (eta <= 1.0) fail(Errc::invalid_argument, "asha: eta must be > 1");
  std::vector<int> rungs;
  double r = r_min;
  while (static_cast<int>(std::floor(r)) <= r_max) {
    int ri = static_cast<int>(std::floor(r));
    if (rungs.empty() || ri > rungs.back()) rungs.push_back(ri);
    r *= eta;
  }
  if (rungs.back() != r_max) rungs.push_back(r_max);
  return rungs;
}

AshaDecision asha_decide(const std::vector<TrialRecord>& trials,
                         const TrialRecord& reporting, double eta, int r_min,
                         int r_max) {
  auto rungs = asha_rungs(r_min, r_max, eta);
  if (reporting.reports.empty())
    fail(Errc::invalid_rung, "asha_decide: trial has no report");
  int r = reporting.last_rung();
  if (std::find(rungs.begin(), rungs.end(), r) == rungs.end())
    fail(Errc::invalid_rung, "asha_decide: rung " + std::to_string(r) + " not in schedule");
  if (r == rungs.back()) return AshaDecision::complete;

  std::vector<double> at_rung;
  for (const auto& t : trials)
    for (const auto& [rr, obj] : t.reports)
      if (rr == r) at_rung.push_back(obj);
  // The reporting trial's own report is part of `trials` by the time this is
  // called; decisions never wait for trials that have not reported yet.
  std::size_t m = at_rung.size();
  auto keep = static_cast<std::size_t>(
      std::ceil(static_cast<double>(m) / eta));
  std::sort(at_rung.begin(), at_rung.end(), std::greater<>());
  double threshold = at_rung[keep - 1];
  return reporting.last_objective() >= threshold ? AshaDecision::promote
                                                 : AshaDecision::stop;
}

namespace {

json config_to_json(const TrialConfig& c) {
  return {{"n_h", c.n_h},
          {"n_c", c.n_c},
          {"scale", c.scale},
          {"margin", c.margin},
          {"pair_weight", c.pair_weight},
          {"weight_decay", c.weight_decay},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size}};
}

TrialConfig config_from_json(const json& j) {
  TrialConfig c;
  c.n_h = j.at("n_h").get<int>();
  c.n_c = j.at("n_c").get<int>();
  c.scale = j.at("scale").get<double>();
  c.margin = j.at("margin").get<double>();
  c.pair_weight = j.at("pair_weight").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  return c;
}

const char* status_of(AshaDecision d) {
  switch (d) {
    case AshaDecision::promote: return "promote";
    case AshaDecision::stop: return "stop";
    case AshaDecision::complete: return "complete";
  }
  return "stop";
}

struct Scheduler {
  const SearchSpace& space;
  const SearchOptions& opts;
  std::vector<int> rungs;

  std::mutex mu;
  std::condition_variable cv;
  std::vector<TrialRecord> trials;
  int started = 0;
  int active = 0;
  std::ofstream ledger;
  std::uint64_t trial_seed_base;
  Rng suggest_rng;

  Scheduler(const SearchSpace& s, const SearchOptions& o)
      : space(s),
        opts(o),
        rungs(asha_rungs(o.r_min, o.r_max, o.eta)),
        trial_seed_base(substream_seed(o.seed, "trial")),
        suggest_rng(substream_seed(o.seed, "hpo")) {}

  void log_event(const TrialRecord& t, const std::string& event, int rung,
                 double objective, bool has_objective) {
    if (!ledger.is_open()) return;
    json e = {{"trial", t.trial_id},
              {"event", event},
              {"rung", rung},
              {"objective", has_objective ? json(objective) : json(nullptr)},
              {"config", config_to_json(t.config)}};
    ledger << e.dump() << "\n";
    ledger.flush();
  }

  // Next epochs target for a trial: first rung, or the rung after its last.
  int next_rung_for(const TrialRecord& t) const {
    if (t.reports.empty()) return rungs.front();
    auto it = std::find(rungs.begin(), rungs.end(), t.last_rung());
    return *(it + 1);
  }

  struct Job {
    int trial_index = -1;
    int target_epochs = 0;
  };

  // Promotable trials first (highest rung, then lowest id), else a fresh one.
  bool try_get_job(Job& job) {
    int best = -1;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      if (trials[i].status != TrialStatus::promoted) continue;
      if (best < 0 || trials[i].last_rung() > trials[best].last_rung()) {
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) {
      job.trial_index = best;
      job.target_epochs = next_rung_for(trials[best]);
      trials[best].status = TrialStatus::running;
      return true;
    }
    if (started < opts.budget) {
      TrialRecord t;
      t.trial_id = started;
      t.config = suggest(space, suggest_rng);
      t.seed = splitmix64(trial_seed_base ^ static_cast<std::uint64_t>(t.trial_id));
      t.status = TrialStatus::running;
      trials.push_back(std::move(t));
      ++started;
      job.trial_index = static_cast<int>(trials.size()) - 1;
      job.target_epochs = rungs.front();
      return true;
    }
    return false;
  }

  void record_outcome(int trial_index, int rung, double objective, bool failed) {
    TrialRecord& t = trials[trial_index];
    if (failed) {
      t.reports.emplace_back(rung, -1e300);
      t.status = TrialStatus::failed;
      log_event(t, "fail", rung, 0.0, false);
      return;
    }
    t.reports.emplace_back(rung, objective);
    log_event(t, "report", rung, objective, true);
    AshaDecision d = asha_decide(trials, t, opts.eta, opts.r_min, opts.r_max);
    switch (d) {
      case AshaDecision::promote:
        t.status = TrialStatus::promoted;
        break;
      case AshaDecision::stop:
        t.status = TrialStatus::stopped;
        break;
      case AshaDecision::complete:
        t.status = TrialStatus::completed;
        break;
    }
    log_event(t, status_of(d), rung, objective, true);
  }

  void resume_from_ledger() {
    std::ifstream in(opts.ledger_path);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json e = json::parse(line);
      int id = e.at("trial").get<int>();
      while (static_cast<int>(trials.size()) <= id) {
        TrialRecord t;
        t.trial_id = static_cast<int>(trials.size());
        t.seed = splitmix64(trial_seed_base ^ static_cast<std::uint64_t>(t.trial_id));
        trials.push_back(std::move(t));
      }
      TrialRecord& t = trials[id];
      t.config = config_from_json(e.at("config"));
      std::string ev = e.at("event").get<std::string>();
      int rung = e.at("rung").get<int>();
      if (ev == "report") {
        t.reports.emplace_back(rung, e.at("objective").get<double>());
        t.status = TrialStatus::running;
      } else if (ev == "promote") {
        t.status = TrialStatus::promoted;
      } else if (ev == "stop") {
        t.status = TrialStatus::stopped;
      } else if (ev == "complete") {
        t.status = TrialStatus::completed;
      } else if (ev == "fail") {
        t.reports.emplace_back(rung, -1e300);
        t.status = TrialStatus::failed;
      }
    }
    started = static_cast<int>(trials.size());
    // Fast-forward the suggestion stream past the trials already drawn so a
    // resumed search continues the sequence instead of repeating it.
    for (int i = 0; i < started; ++i) suggest(space, suggest_rng);
    // A report whose decision never landed (interrupted run): decide it now.
    for (auto& t : trials) {
      if (t.status == TrialStatus::running && !t.reports.empty()) {
        AshaDecision d = asha_decide(trials, t, opts.eta, opts.r_min, opts.r_max);
        t.status = d == AshaDecision::promote
                       ? TrialStatus::promoted
                       : (d == AshaDecision::complete ? TrialStatus::completed
                                                      : TrialStatus::stopped);
        log_event(t, status_of(d), t.last_rung(), t.last_objective(), true);
      } else if (t.status == TrialStatus::running && t.reports.empty()) {
        // Never reported: schedule it again from the first rung.
        t.status = TrialStatus::promoted;
        t.reports.clear();
      }
    }
  }
};

}  // namespace

const TrialRecord& SearchResult::best() const {
  for (const auto& t : trials)
    if (t.trial_id == best_trial_id) return t;
  fail(Errc::invalid_argument, "search produced no usable trial");
}

SearchResult run_search(const TrialEvaluator& evaluate, const SearchSpace& space,
                        const SearchOptions& opts) {
  if (opts.budget < 1) fail(Errc::invalid_argument, "run_search: budget must be >= 1");
  if (opts.parallelism < 1)
    fail(Errc::invalid_argument, "run_search: parallelism must be >= 1");

  Scheduler sched(space, opts);
  if (!opts.ledger_path.empty()) {
    bool resuming = opts.resume && std::filesystem::exists(opts.ledger_path);
    sched.ledger.open(opts.ledger_path, resuming ? std::ios::app : std::ios::trunc);
    if (!sched.ledger)
      fail(Errc::io_error, "cannot open ledger: " + opts.ledger_path.string());
    if (resuming) sched.resume_from_ledger();
  }

  auto worker = [&]() {
    std::unique_lock<std::mutex> lock(sched.mu);
    for (;;) {
      Scheduler::Job job;
      if (sched.try_get_job(job)) {
        ++sched.active;
        TrialConfig cfg = sched.trials[job.trial_index].config;
        std::uint64_t seed = sched.trials[job.trial_index].seed;
        lock.unlock();
        double objective = 0.0;
        bool failed = false;
        try {
          objective = evaluate(cfg, seed, job.target_epochs);
        } catch (const std::exception&) {
          failed = true;
        }
        lock.lock();
        sched.record_outcome(job.trial_index, job.target_epochs, objective, failed);
        --sched.active;
        sched.cv.notify_all();
        continue;
      }
      if (sched.active == 0 && sched.started >= opts.budget) break;
      sched.cv.wait(lock);
    }
    sched.cv.notify_all();
  };

  if (opts.parallelism == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < opts.parallelism; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SearchResult res;
  res.trials = std::move(sched.trials);
  // Completed trials outrank partial ones; then objective, then trial id.
  auto better = [](const TrialRecord& a, const TrialRecord& b) {
    bool ac = a.status == TrialStatus::completed;
    bool bc = b.status == TrialStatus::completed;
    if (ac != bc) return ac;
    if (a.last_objective() != b.last_objective())
      return a.last_objective() > b.last_objective();
    return a.trial_id < b.trial_id;
  };
  int best = -1;
  for (std::size_t i = 0; i < res.trials.size(); ++i) {
    if (res.trials[i].reports.empty()) continue;
    if (best < 0 || better(res.trials[i], res.trials[best])) best = static_cast<int>(i);
  }
  res.best_trial_id = best >= 0 ? res.trials[best].trial_id : -1;
  return res;
}

}  // namespace movekit
