#include "voltlab/runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "voltlab/errors.hpp"

namespace voltlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::int64_t kSecondsPerDay = 86400;

void put_number(std::ostream& out, double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  out.write(buf, r.ptr - buf);
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

double mean_at(const StepRecord& r, std::span<const int> buses) {
  double s = 0.0;
  for (int b : buses) s += r.v_mag[static_cast<size_t>(b)];
  return buses.empty() ? 0.0 : s / static_cast<double>(buses.size());
}

nlohmann::json summary_json(const RunSummary& s) {
  nlohmann::json j;
  j["scenario"] = s.scenario;
  j["steps"] = s.steps;
  j["violation_steps"] = s.violation_steps;
  j["max_abs_deviation"] = s.max_abs_deviation;
  j["divergence_step"] = s.divergence_step ? nlohmann::json(*s.divergence_step) : nlohmann::json(nullptr);
  j["period_peaks"] = s.period_peaks;
  j["oscillation_amplitude"] = s.oscillation_amplitude;
  j["dominant_period"] = s.dominant_period;
  j["mean_objective"] = s.mean_objective;
  return j;
}

nlohmann::json eval_json(const EvalReport& r) {
  nlohmann::json j;
  j["episodes"] = nlohmann::json::array();
  for (size_t i = 0; i < r.episodes.size(); ++i) {
    nlohmann::json e = summary_json(r.episodes[i]);
    e["start_day"] = r.start_days[i];
    j["episodes"].push_back(e);
  }
  j["mean_objective"] = r.mean_objective;
  j["objective_stddev"] = r.objective_stddev;
  j["episodes_with_violation"] = r.episodes_with_violation;
  j["sign_change_interval"] = std::isfinite(r.sign_change_interval) ? nlohmann::json(r.sign_change_interval)
                                                                    : nlohmann::json(nullptr);
  return j;
}

}  // namespace

int dominant_period(std::span<const double> x, int min_lag, int max_lag) {
  const auto n = static_cast<int>(x.size());
  max_lag = std::min(max_lag, n - 1);
  if (n < 3 || min_lag > max_lag) return 0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  if (var <= 0.0) return 0;
  int best = 0;
  double best_r = -kInf;
  for (int lag = min_lag; lag <= max_lag; ++lag) {
    double r = 0.0;
    for (int t = 0; t + lag < n; ++t) r += (x[static_cast<size_t>(t)] - mean) * (x[static_cast<size_t>(t + lag)] - mean);
    r /= var;
    if (r > best_r) {
      best_r = r;
      best = lag;
    }
  }
  return best_r > 0.0 ? best : 0;
}

RunSummary summarize(std::span<const StepRecord> records, const ScenarioConfig& config,
                     std::span<const int> controlled_buses) {
  RunSummary s;
  s.scenario = config.name;
  s.steps = static_cast<std::int64_t>(records.size());
  double obj = 0.0;
  std::vector<double> mean_v;
  for (const auto& r : records) {
    obj += r.objective;
    if (!r.converged) {
      if (!s.divergence_step) s.divergence_step = r.step;
      continue;
    }
    bool violated = false;
    for (double v : r.v_mag) {
      violated = violated || v < config.v_lo || v > config.v_hi;
      s.max_abs_deviation = std::max(s.max_abs_deviation, std::abs(v - 1.0));
    }
    if (violated) ++s.violation_steps;
    mean_v.push_back(mean_at(r, controlled_buses));
  }
  if (!records.empty()) s.mean_objective = obj / static_cast<double>(records.size());

  const size_t window = 2 * static_cast<size_t>(config.holdoff);
  for (size_t w = 0; (w + 1) * window <= records.size(); ++w) {
    double peak = -kInf, lo = kInf, hi = -kInf;
    bool any = false;
    for (size_t t = w * window; t < (w + 1) * window; ++t) {
      const auto& r = records[t];
      if (!r.converged) continue;
      any = true;
      for (int b : controlled_buses) peak = std::max(peak, r.v_mag[static_cast<size_t>(b)]);
      const double m = mean_at(r, controlled_buses);
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    if (!any) break;
    s.period_peaks.push_back(peak);
    s.oscillation_amplitude.push_back(0.5 * (hi - lo));
  }
  const int max_lag = std::min(static_cast<int>(mean_v.size()) / 2, 4 * config.holdoff);
  s.dominant_period = dominant_period(mean_v, 2, max_lag);
  return s;
}

void write_trace_header(std::ostream& out, const Grid& grid, size_t action_dim) {
  out << "episode,step,timestamp,converged,iterations,irradiance_w_m2,load_p_mw,objective";
  for (int b = 0; b < grid.bus_count(); ++b) out << ",v_" << b;
  const size_t units = grid.units().size();
  for (size_t i = 0; i < units; ++i) out << ",p_mw_u" << i;
  for (size_t i = 0; i < units; ++i) out << ",q_rel_u" << i;
  for (size_t i = 0; i < units; ++i) out << ",q_mvar_u" << i;
  for (size_t k = 0; k < action_dim; ++k) out << ",action_" << k;
  out << '\n';
}

void write_trace_rows(std::ostream& out, std::span<const StepRecord> records, int episode) {
  for (const auto& r : records) {
    out << episode << ',' << r.step << ',' << format_timestamp(r.time) << ',' << (r.converged ? 1 : 0)
        << ',' << r.iterations << ',';
    put_number(out, r.irradiance);
    out << ',';
    put_number(out, r.load_p);
    out << ',';
    put_number(out, r.objective);
    for (const auto* col : {&r.v_mag, &r.p_unit, &r.q_rel, &r.q_unit, &r.action}) {
      for (double x : *col) {
        out << ',';
        put_number(out, x);
      }
    }
    out << '\n';
  }
}

std::string summary_to_json(const RunSummary& summary, int indent) {
  return summary_json(summary).dump(indent) + "\n";
}

std::string eval_report_to_json(const EvalReport& report) { return eval_json(report).dump(2) + "\n"; }

Action scripted_action(const ScenarioConfig& config, std::int64_t step, size_t action_dim) {
  switch (config.attacker_mode) {
    case AttackerMode::kOscillating:
      return oscillating_action(step, config.holdoff, action_dim);
    case AttackerMode::kNone:
    case AttackerMode::kZero:
      return Action{std::vector<double>(action_dim, 0.0)};
    case AttackerMode::kLearned:
      break;
  }
  throw ValidationError("scenario needs a trained policy; use train/eval for learned attackers");
}

SimulationRun simulate(const ScenarioConfig& config, const Grid& grid, const ScenarioInputs& inputs) {
  Simulation sim(grid, config, inputs);
  SimulationRun run;
  const bool ok = sim.reset(config.start);
  if (!ok) {
    // Initial state already infeasible: the run stops before the first step.
    run.summary = summarize(run.records, config, sim.controlled_buses());
    run.summary.divergence_step = 0;
    return run;
  }
  for (std::int64_t t = 0; t < config.horizon; ++t) {
    run.records.push_back(sim.step(scripted_action(config, t, sim.action_dim())));
    if (!run.records.back().converged && config.terminate_on_divergence) break;
  }
  run.summary = summarize(run.records, config, sim.controlled_buses());
  return run;
}

std::int64_t episode_days(const ScenarioConfig& config, const ScenarioInputs& inputs) {
  const auto last = inputs.last_instant();
  if (!last) return 365;
  const auto span = std::chrono::duration_cast<std::chrono::seconds>(*last - config.start).count() -
                    static_cast<std::int64_t>(config.episode_length) * config.step_seconds;
  if (span < 0) throw ValidationError("input series end before one episode_length has elapsed");
  return span / kSecondsPerDay + 1;
}

Timestamp episode_start(const ScenarioConfig& config, std::int64_t day) {
  return config.start + std::chrono::seconds(day * kSecondsPerDay);
}

double sign_change_interval(std::span<const std::vector<StepRecord>> episodes) {
  std::int64_t steps = 0, changes = 0;
  for (const auto& ep : episodes) {
    if (ep.empty()) continue;
    const size_t dims = ep.front().action.size();
    for (size_t k = 0; k < dims; ++k) {
      steps += static_cast<std::int64_t>(ep.size());
      for (size_t t = 1; t < ep.size(); ++t)
        if ((ep[t].action[k] >= 0.0) != (ep[t - 1].action[k] >= 0.0)) ++changes;
    }
  }
  return changes == 0 ? kInf : static_cast<double>(steps) / static_cast<double>(changes);
}

EvalReport evaluate(SacState& state, const ScenarioConfig& config, const Grid& grid,
                    const ScenarioInputs& inputs, int episodes, EvalPolicy policy,
                    std::uint64_t seed, std::vector<std::vector<StepRecord>>* traces) {
  Simulation sim(grid, config, inputs);
  if (static_cast<int>(sim.feature_dim()) != state.config.obs_dim ||
      static_cast<int>(sim.action_dim()) != state.config.act_dim)
    throw ValidationError("checkpoint expects " + std::to_string(state.config.obs_dim) + " inputs and " +
                          std::to_string(state.config.act_dim) + " actions, scenario provides " +
                          std::to_string(sim.feature_dim()) + " and " + std::to_string(sim.action_dim()));
  const std::int64_t days = episode_days(config, inputs);
  Rng day_rng(seed);
  Rng act_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  EvalReport report;
  std::vector<std::vector<StepRecord>> all;
  std::vector<double> means;
  for (int e = 0; e < episodes; ++e) {
    const auto day = static_cast<std::int64_t>(day_rng.index(static_cast<std::uint64_t>(days)));
    std::vector<StepRecord> records;
    if (sim.reset(episode_start(config, day))) {
      for (int t = 0; t < config.episode_length; ++t) {
        Action a;
        if (policy == EvalPolicy::kGreedy) {
          a.q_rel_cmd = select_action(state, sim.features(), ActionMode::kDeterministic);
        } else {
          for (size_t k = 0; k < sim.action_dim(); ++k) a.q_rel_cmd.push_back(act_rng.uniform(-1.0, 1.0));
        }
        records.push_back(sim.step(a));
        if (!records.back().converged && config.terminate_on_divergence) break;
      }
    }
    RunSummary s = summarize(records, config, sim.controlled_buses());
    if (s.violation_steps > 0) ++report.episodes_with_violation;
    means.push_back(s.mean_objective);
    report.episodes.push_back(std::move(s));
    report.start_days.push_back(day);
    all.push_back(std::move(records));
  }
  if (!means.empty()) {
    report.mean_objective = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
    if (means.size() > 1) {
      double ss = 0.0;
      for (double m : means) ss += (m - report.mean_objective) * (m - report.mean_objective);
      report.objective_stddev = std::sqrt(ss / static_cast<double>(means.size() - 1));
    }
  }
  report.sign_change_interval = sign_change_interval(all);
  if (traces) *traces = std::move(all);
  return report;
}

SacConfig learner_config(const ScenarioConfig& config, const Simulation& sim) {
  SacConfig sc = config.training.sac;
  sc.obs_dim = static_cast<int>(sim.feature_dim());
  sc.act_dim = static_cast<int>(sim.action_dim());
  return sc;
}

void write_returns_log(std::ostream& out, std::span<const EpisodeLog> log) {
  out << "episode,start_day,env_steps,steps,return,mean_objective,diverged,violation_steps\n";
  for (const auto& e : log) {
    out << e.episode << ',' << e.start_day << ',' << e.env_steps << ',' << e.steps << ',';
    put_number(out, e.episode_return);
    out << ',';
    put_number(out, e.mean_objective);
    out << ',' << (e.diverged ? 1 : 0) << ',' << e.violation_steps << '\n';
  }
}

TrainResult train_attacker(const ScenarioConfig& config, const Grid& grid, const ScenarioInputs& inputs,
                           const std::optional<std::filesystem::path>& out_dir,
                           const std::function<void(const EpisodeLog&)>& on_episode) {
  Simulation sim(grid, config, inputs);
  const SacConfig sc = learner_config(config, sim);
  TrainResult res{SacState::create(sc, config.seed), {}};
  SacState& st = res.state;
  ReplayBuffer buffer(sc.buffer_capacity, sc.obs_dim, sc.act_dim);
  Rng env_rng(config.seed ^ 0xd1b54a32d192ed03ULL);
  const std::int64_t days = episode_days(config, inputs);
  const auto& tc = config.training;
  if (out_dir) ensure_dir(*out_dir / "checkpoints");

  std::int64_t env_steps = 0;
  int failed_resets = 0;
  while (env_steps < tc.train_steps) {
    const auto day = static_cast<std::int64_t>(env_rng.index(static_cast<std::uint64_t>(days)));
    if (!sim.reset(episode_start(config, day))) {
      if (++failed_resets > 1000) throw ValidationError("initial power flow diverges on every sampled day");
      continue;
    }
    EpisodeLog log;
    log.episode = static_cast<int>(res.log.size());
    log.start_day = day;
    std::vector<double> obs = sim.features();
    for (int t = 0; t < config.episode_length && env_steps < tc.train_steps; ++t) {
      std::vector<double> act;
      if (env_steps < tc.warmup_steps) {
        for (int k = 0; k < sc.act_dim; ++k) act.push_back(st.rng.uniform(-1.0, 1.0));
      } else {
        act = select_action(st, obs, ActionMode::kStochastic);
      }
      const StepRecord rec = sim.step(Action{act});
      const bool done = !rec.converged;
      std::vector<double> next = sim.features();
      buffer.push(obs, rec.action, tc.reward_scale * rec.objective, next, done);
      ++env_steps;
      ++log.steps;
      log.episode_return += rec.objective;
      if (rec.converged) {
        bool violated = false;
        for (double v : rec.v_mag) violated = violated || v < config.v_lo || v > config.v_hi;
        if (violated) ++log.violation_steps;
      }
      if (env_steps >= tc.warmup_steps && buffer.size() >= static_cast<size_t>(sc.batch_size))
        for (int u = 0; u < tc.updates_per_step; ++u) sac_update(st, buffer);
      if (out_dir && tc.checkpoint_every > 0 && env_steps % tc.checkpoint_every == 0)
        save_checkpoint(st, *out_dir / "checkpoints" / ("step_" + std::to_string(env_steps) + ".ckpt"));
      if (done) {
        log.diverged = true;
        break;
      }
      obs = std::move(next);
    }
    log.env_steps = env_steps;
    log.mean_objective = log.steps > 0 ? log.episode_return / log.steps : 0.0;
    res.log.push_back(log);
    if (on_episode) on_episode(log);
  }
  if (out_dir) {
    save_checkpoint(st, *out_dir / "policy.ckpt");
    const auto path = *out_dir / "returns.csv";
    auto out = open_output(path);
    write_returns_log(out, res.log);
    finish_output(out, path);
  }
  return res;
}

LoadedScenario load_scenario(const ScenarioConfig& config) {
  LoadedScenario ls{load_grid_file(config.grid_file), load_inputs(config)};
  validate(config, ls.grid);
  if (config.scenario != ScenarioKind::kS3LearnedAttack) {
    const auto last = ls.inputs.last_instant();
    const Timestamp end = config.start + std::chrono::seconds(config.horizon * config.step_seconds);
    if (last && end > *last) throw ValidationError("input series end before the configured horizon");
    if (ls.inputs.weather && config.start < ls.inputs.weather->start())
      throw ValidationError("start lies before the weather series");
  } else {
    episode_days(config, ls.inputs);
  }
  return ls;
}

namespace {

void write_eval_outputs(const ScenarioConfig& config, const Grid& grid, size_t action_dim,
                        const EvalReport& report, const std::vector<std::vector<StepRecord>>& traces,
                        const nlohmann::json& extra) {
  ensure_dir(config.output_dir);
  const auto trace_path = config.output_dir / "trace.csv";
  auto trace = open_output(trace_path);
  write_trace_header(trace, grid, action_dim);
  for (size_t e = 0; e < traces.size(); ++e) write_trace_rows(trace, traces[e], static_cast<int>(e));
  finish_output(trace, trace_path);

  nlohmann::json j;
  j["scenario"] = config.name;
  j["evaluation"] = eval_json(report);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  const auto summary_path = config.output_dir / "summary.json";
  auto summary = open_output(summary_path);
  summary << j.dump(2) << '\n';
  finish_output(summary, summary_path);
}

}  // namespace

TrainResult train_scenario(const ScenarioConfig& config, std::ostream* progress) {
  if (config.scenario != ScenarioKind::kS3LearnedAttack)
    throw ValidationError("train needs an s3_learned_attack config");
  const LoadedScenario ls = load_scenario(config);
  ensure_dir(config.output_dir);
  std::function<void(const EpisodeLog&)> cb;
  if (progress)
    cb = [progress](const EpisodeLog& e) {
      if (e.episode % 50 == 0)
        *progress << "episode " << e.episode << " env_steps " << e.env_steps << " mean_objective "
                  << e.mean_objective << '\n';
    };
  return train_attacker(config, ls.grid, ls.inputs, config.output_dir, cb);
}

RunSummary run_scenario(const ScenarioConfig& config) {
  if (config.scenario == ScenarioKind::kS3LearnedAttack) {
    TrainResult trained = train_scenario(config, nullptr);
    const LoadedScenario ls = load_scenario(config);
    std::vector<std::vector<StepRecord>> traces;
    const int n = config.training.eval_episodes;
    const std::uint64_t seed = config.training.eval_seed;
    const EvalReport greedy = evaluate(trained.state, config, ls.grid, ls.inputs, n, EvalPolicy::kGreedy, seed, &traces);
    const EvalReport random = evaluate(trained.state, config, ls.grid, ls.inputs, n, EvalPolicy::kRandom, seed);
    nlohmann::json extra;
    extra["random_baseline"] = eval_json(random);
    extra["train_episodes"] = trained.log.size();
    write_eval_outputs(config, ls.grid, static_cast<size_t>(trained.state.config.act_dim), greedy, traces, extra);
    RunSummary overall;
    overall.scenario = config.name;
    for (const auto& e : greedy.episodes) {
      overall.steps += e.steps;
      overall.violation_steps += e.violation_steps;
      overall.max_abs_deviation = std::max(overall.max_abs_deviation, e.max_abs_deviation);
      if (e.divergence_step && !overall.divergence_step) overall.divergence_step = e.divergence_step;
    }
    overall.mean_objective = greedy.mean_objective;
    return overall;
  }

  const LoadedScenario ls = load_scenario(config);
  const SimulationRun run = simulate(config, ls.grid, ls.inputs);
  ensure_dir(config.output_dir);
  const auto trace_path = config.output_dir / "trace.csv";
  auto trace = open_output(trace_path);
  write_trace_header(trace, ls.grid, config.attacker_buses.size());
  write_trace_rows(trace, run.records, 0);
  finish_output(trace, trace_path);
  const auto summary_path = config.output_dir / "summary.json";
  auto summary = open_output(summary_path);
  summary << summary_to_json(run.summary);
  finish_output(summary, summary_path);
  return run.summary;
}

EvalReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const ScenarioConfig& config,
                               int episodes) {
  if (episodes < 1) throw ValidationError("episodes must be >= 1");
  SacState state = load_checkpoint(checkpoint);
  const LoadedScenario ls = load_scenario(config);
  std::vector<std::vector<StepRecord>> traces;
  const EvalReport report = evaluate(state, config, ls.grid, ls.inputs, episodes, EvalPolicy::kGreedy,
                                     config.training.eval_seed, &traces);
  nlohmann::json extra;
  extra["checkpoint"] = checkpoint.string();
  write_eval_outputs(config, ls.grid, static_cast<size_t>(state.config.act_dim), report, traces, extra);
  return report;
}

}  // namespace voltlab
