#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "voltlab/errors.hpp"
#include "voltlab/powerflow.hpp"
#include "voltlab/runner.hpp"
#include "voltlab/scenario_config.hpp"
#include "voltlab/simulation.hpp"

using namespace voltlab;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = VOLTLAB_SOURCE_DIR;

ScenarioConfig config(const std::string& name) { return load_config(kSource / "configs" / (name + ".json")); }

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("voltlab_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trace_of(const SimulationRun& run, const Grid& grid) {
  std::ostringstream out;
  write_trace_header(out, grid, run.records.empty() ? 0 : run.records.front().action.size());
  write_trace_rows(out, run.records, 0);
  return out.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(VOLTLAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("baseline under mild sun settles near nominal") {
  ScenarioConfig c = config("baseline");
  c.weather.irradiance = 500.0;
  const LoadedScenario s = load_scenario(c);
  const SimulationRun run = simulate(c, s.grid, s.inputs);
  REQUIRE(run.records.size() == 200);
  for (double v : run.records.back().v_mag) CHECK(std::abs(v - 1.0) <= 0.01);
  CHECK(run.summary.violation_steps == 0);
  CHECK_FALSE(run.summary.divergence_step.has_value());
}

TEST_CASE("benign controllers pull their buses toward nominal") {
  ScenarioConfig c = config("baseline");
  const LoadedScenario s = load_scenario(c);
  const SimulationRun controlled = simulate(c, s.grid, s.inputs);
  c.voltvar_d = 1e-12;
  const SimulationRun open = simulate(c, s.grid, s.inputs);
  Simulation sim(s.grid, c, s.inputs);
  double dev_on = 0.0, dev_off = 0.0;
  for (int b : sim.controlled_buses()) {
    dev_on = std::max(dev_on, std::abs(controlled.records.back().v_mag[static_cast<size_t>(b)] - 1.0));
    dev_off = std::max(dev_off, std::abs(open.records.back().v_mag[static_cast<size_t>(b)] - 1.0));
  }
  CHECK(dev_on < dev_off);
}

TEST_CASE("scenario 1 oscillates with period 2 holdoff and a higher second peak") {
  const ScenarioConfig c = config("s1");
  const LoadedScenario s = load_scenario(c);
  const SimulationRun run = simulate(c, s.grid, s.inputs);
  CHECK(run.summary.violation_steps > 0);
  CHECK(run.summary.dominant_period == 50);
  REQUIRE(run.summary.period_peaks.size() >= 2);
  CHECK(run.summary.period_peaks[1] > run.summary.period_peaks[0]);
  CHECK(run.summary.violation_steps <= run.summary.steps);
}

TEST_CASE("a zero attacker reproduces the baseline trajectory") {
  ScenarioConfig base = config("baseline");
  ScenarioConfig zero = config("s1");
  zero.attacker_mode = AttackerMode::kZero;
  const LoadedScenario s = load_scenario(base);
  const SimulationRun a = simulate(base, s.grid, s.inputs);
  const SimulationRun b = simulate(zero, s.grid, s.inputs);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].v_mag == b.records[i].v_mag);
    CHECK(a.records[i].q_rel == b.records[i].q_rel);
  }
}

TEST_CASE("reading same-step voltages changes the trace") {
  ScenarioConfig c = config("s1");
  const LoadedScenario s = load_scenario(c);
  const std::string normal = trace_of(simulate(c, s.grid, s.inputs), s.grid);
  c.controller_timing = ControllerTiming::kSameStep;
  CHECK(trace_of(simulate(c, s.grid, s.inputs), s.grid) != normal);
}

TEST_CASE("slack covers load plus losses minus generation") {
  ScenarioConfig c = config("s2");
  c.horizon = 96;
  const LoadedScenario s = load_scenario(c);
  Simulation sim(s.grid, c, s.inputs);
  REQUIRE(sim.reset(c.start));
  const PowerflowSolver solver(s.grid);
  int checked = 0;
  for (std::int64_t k = 0; k < c.horizon; ++k) {
    const StepRecord r = sim.step(scripted_action(c, k, sim.action_dim()));
    if (!r.converged) continue;
    const PowerflowResult& pf = sim.last_result();
    const Injections& inj = sim.last_injections();
    const Injections flow = bus_injections(solver.admittance(), pf.v_mag, pf.v_ang);
    const double losses = total_losses(solver.admittance(), pf.v_mag, pf.v_ang);
    double net = 0.0;
    for (int b = 0; b < s.grid.bus_count(); ++b)
      if (b != s.grid.slack_bus()) net += inj.p[b];
    CHECK(std::abs(flow.p[s.grid.slack_bus()] - (losses - net)) <= 1e-6);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("one record per executed step including divergence") {
  ScenarioConfig c = config("s1");
  c.horizon = 60;
  const LoadedScenario s = load_scenario(c);
  const SimulationRun run = simulate(c, s.grid, s.inputs);
  CHECK(run.records.size() == 60);
  CHECK(run.summary.steps == 60);
  for (size_t i = 0; i < run.records.size(); ++i) CHECK(run.records[i].step == static_cast<std::int64_t>(i) + 1);

  // Oversized inverters: the attack drives the flow past the nose point.
  std::string doc = read_file(c.grid_file);
  for (size_t at = doc.find("\"s_rated_mva\": 1.0"); at != std::string::npos;
       at = doc.find("\"s_rated_mva\": 1.0", at))
    doc.replace(at, 18, "\"s_rated_mva\": 5.0");
  const Grid big = load_grid(doc);
  const SimulationRun bad = simulate(c, big, s.inputs);
  REQUIRE(bad.summary.divergence_step.has_value());
  CHECK(*bad.summary.divergence_step > 1);
  CHECK(bad.summary.steps == *bad.summary.divergence_step);
  CHECK(bad.records.size() == static_cast<size_t>(*bad.summary.divergence_step));
  CHECK_FALSE(bad.records.back().converged);
}

TEST_CASE("trace has a header and one row per step") {
  const ScenarioConfig c = config("s1");
  const LoadedScenario s = load_scenario(c);
  const SimulationRun run = simulate(c, s.grid, s.inputs);
  std::istringstream in(trace_of(run, s.grid));
  std::string header, line;
  std::getline(in, header);
  CHECK(header.rfind("episode,step,timestamp,converged,iterations,", 0) == 0);
  const auto columns = std::count(header.begin(), header.end(), ',');
  size_t rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == columns);
    ++rows;
  }
  CHECK(rows == run.records.size());
}

TEST_CASE("identical configs give bit-identical trace files") {
  for (const char* name : {"baseline", "s1"}) {
    CAPTURE(name);
    ScenarioConfig c = config(name);
    c.output_dir = scratch_dir(std::string(name) + "_a");
    run_scenario(c);
    const fs::path first = c.output_dir;
    c.output_dir = scratch_dir(std::string(name) + "_b");
    run_scenario(c);
    CHECK(read_file(first / "trace.csv") == read_file(c.output_dir / "trace.csv"));
    CHECK(read_file(first / "summary.json") == read_file(c.output_dir / "summary.json"));
    CHECK(!read_file(first / "trace.csv").empty());
    fs::remove_all(first);
    fs::remove_all(c.output_dir);
  }
}

TEST_CASE("config validation") {
  const ScenarioConfig good = config("s1");
  const Grid grid = load_grid_file(good.grid_file);
  CHECK_NOTHROW(validate(good, grid));
  auto rejects = [&](auto mutate) {
    ScenarioConfig c = good;
    mutate(c);
    CHECK_THROWS_AS(validate(c, grid), ValidationError);
  };
  rejects([](ScenarioConfig& c) { c.horizon = 0; });
  rejects([](ScenarioConfig& c) { c.v_lo = 1.01; });
  rejects([](ScenarioConfig& c) { c.v_hi = 1.0; });
  rejects([](ScenarioConfig& c) { c.holdoff = 0; });
  rejects([](ScenarioConfig& c) { c.controlled_buses = {3, 5}; });
  rejects([](ScenarioConfig& c) { c.attacker_buses = {5, 3}; });
  rejects([](ScenarioConfig& c) { c.attacker_buses = {2}; });
  rejects([](ScenarioConfig& c) { c.attacker_buses = {3, 3}; });
  rejects([](ScenarioConfig& c) { c.sensor_buses = {15}; });
  rejects([](ScenarioConfig& c) { c.sensor_buses.clear(); });
  rejects([](ScenarioConfig& c) { c.objective.sigma = 0.0; });
  rejects([](ScenarioConfig& c) { c.pv_active_limit = 1.5; });

  CHECK_THROWS_AS(parse_config("{}", kSource), ParseError);
  CHECK_THROWS_AS(parse_config("not json", kSource), ParseError);
  CHECK_THROWS_AS(parse_config(R"({"scenario": "s9"})", kSource), ParseError);
  CHECK_THROWS_AS(load_config(kSource / "configs" / "missing.json"), IoError);
}

TEST_CASE("random-weight checkpoint evaluates deterministically") {
  ScenarioConfig c = config("s3");
  const LoadedScenario s = load_scenario(c);
  Simulation sim(s.grid, c, s.inputs);
  SacState state = SacState::create(learner_config(c, sim), 5);
  const fs::path dir = scratch_dir("ckpt");
  fs::create_directories(dir);
  save_checkpoint(state, dir / "random.ckpt");

  const EvalReport a = evaluate_checkpoint(dir / "random.ckpt", c, 2);
  const EvalReport b = evaluate_checkpoint(dir / "random.ckpt", c, 2);
  REQUIRE(a.episodes.size() == 2);
  CHECK(eval_report_to_json(a) == eval_report_to_json(b));
  CHECK(a.start_days == b.start_days);
  for (const auto& e : a.episodes) CHECK(e.steps >= 1);

  // Greedy and random rollouts see the same days.
  SacState st = load_checkpoint(dir / "random.ckpt");
  const EvalReport r = evaluate(st, c, s.grid, s.inputs, 2, EvalPolicy::kRandom, c.training.eval_seed);
  CHECK(r.start_days == a.start_days);

  SacConfig wrong = learner_config(c, sim);
  wrong.obs_dim += 1;
  save_checkpoint(SacState::create(wrong, 5), dir / "wrong.ckpt");
  CHECK_THROWS_AS(evaluate_checkpoint(dir / "wrong.ckpt", c, 1), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("episode start days are whole days inside the series") {
  const ScenarioConfig c = config("s3");
  const LoadedScenario s = load_scenario(c);
  const std::int64_t days = episode_days(c, s.inputs);
  CHECK(days >= 360);
  CHECK(days <= 365);
  const Timestamp last = episode_start(c, days - 1) + std::chrono::seconds(c.step_seconds * c.episode_length);
  CHECK(last <= *s.inputs.last_instant());
}

TEST_CASE("sign change interval pools steps over units") {
  std::vector<std::vector<StepRecord>> eps(1);
  for (int k = 0; k < 10; ++k) {
    StepRecord r;
    r.action = {k % 2 == 0 ? 1.0 : -1.0, 0.5};
    eps[0].push_back(r);
  }
  CHECK(sign_change_interval(eps) == doctest::Approx(20.0 / 9.0));
  for (auto& r : eps[0]) r.action = {0.3, 0.5};
  CHECK(std::isinf(sign_change_interval(eps)));
}

TEST_CASE("dominant period of a square wave") {
  std::vector<double> x;
  for (int k = 0; k < 400; ++k) x.push_back((k / 25) % 2 == 0 ? 1.0 : -1.0);
  CHECK(dominant_period(x, 2, 100) == 50);
  CHECK(dominant_period(std::vector<double>(100, 3.0), 2, 50) == 0);
}

TEST_CASE("cli exit codes") {
  const std::string grid = (kSource / "data/grids/cigre_mv.json").string();
  CHECK(cli("validate-grid " + grid) == 0);
  CHECK(cli("validate-grid /nonexistent/grid.json") == 3);
  const fs::path dir = scratch_dir("cli");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "bad_grid.json") << "{\"name\": \"x\"}";
    std::ofstream(dir / "bad_config.json") << "{\"scenario\": \"baseline\", \"horizon\": 0}";
  }
  CHECK(cli("validate-grid " + (dir / "bad_grid.json").string()) == 2);
  CHECK(cli("run --config " + (dir / "bad_config.json").string()) == 2);
  CHECK(cli("run --config /nonexistent/config.json") == 3);
  CHECK(cli("frobnicate") == 2);
  CHECK(cli("run --config " + (kSource / "configs/s1.json").string() + " --out " + (dir / "s1").string()) == 0);
  CHECK(fs::exists(dir / "s1" / "trace.csv"));
  CHECK(fs::exists(dir / "s1" / "summary.json"));
  CHECK(cli("run --config " + (kSource / "configs/s1.json").string() + " --out /proc/voltlab_no") == 3);
  fs::remove_all(dir);
}
