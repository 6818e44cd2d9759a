// Runs the end-to-end acceptance checks and prints one PASS/FAIL line each.

#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "skylane/engine/engine.hpp"
#include "skylane/gateway/gateway.hpp"

namespace fs = std::filesystem;
using namespace skylane;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count(const RunReport& r, const std::string& state) {
  std::size_t n = 0;
  for (const auto& m : r.missions) n += m.state == state;
  return n;
}

struct Run {
  RunReport report;
  PerfReport perf;
  double wall = 0.0;
};

Run run(Scenario s, EngineOptions opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  Engine e(std::move(s), opt);
  Run r;
  r.report = e.run();
  r.perf = e.perf();
  r.wall = seconds_since(t0);
  return r;
}

// Demo-1 and the bench share one run.
Outcome demo1(const Scenario& s, const Run& r) {
  std::ostringstream d;
  const auto& net = s.network;
  bool shape = net.airports.size() == 13 && net.nodes.size() == 45 && net.airways.size() == 67 &&
               s.demands.size() == 100;
  for (const auto& [id, w] : net.airways) shape = shape && w.bidirectional;
  for (const auto& [id, n] : net.nodes) shape = shape && n.position.z() == 120.0;
  const std::size_t done = count(r.report, "completed");
  d << done << "/" << r.report.missions.size() << " completed, " << r.report.collisions.size() << " collisions, "
    << net.airports.size() << " airports, " << net.nodes.size() << " nodes, " << net.airways.size()
    << " airways (bidirectional at 120 m: " << (shape ? "yes" : "no") << "), wall " << r.wall << " s";
  return {shape && done == 100 && r.report.missions.size() == 100 && r.report.collisions.empty() && r.wall <= 600.0,
          d.str()};
}

Outcome bench(const Run& r) {
  std::ostringstream d;
  d << "loaded ticks/sec " << r.perf.loaded_ticks_per_second << " over " << r.perf.loaded_ticks << " ticks with >= "
    << r.perf.loaded_threshold << " active (peak " << r.report.peak_active << "), overall " << r.perf.ticks_per_second
    << ", threads " << r.perf.threads << ", hw " << std::thread::hardware_concurrency();
  return {r.report.peak_active >= 100 && r.perf.loaded_ticks > 0 && r.perf.loaded_ticks_per_second >= 30.0, d.str()};
}

Outcome demo2(const fs::path& dir) {
  const Scenario s = load_scenario((dir / "xiamen_vfh.json").string());
  bool shape = s.network.airways.size() == 4 && s.fleet.size() == 1;
  for (const auto& [id, n] : s.network.nodes) shape = shape && n.position.z() == 18.0;
  for (const auto& f : s.fleet)
    shape = shape && f.lidar && f.avoidance && f.lidar->channels == 12 && f.lidar->vfov_min_deg == -5.0 &&
            f.lidar->vfov_max_deg == 5.0;
  const Run r = run(s);
  std::ostringstream d;
  d << count(r.report, "completed") << "/" << r.report.missions.size() << " completed, "
    << r.report.collisions.size() << " collisions, " << r.report.ticks << " ticks, wall " << r.wall
    << " s, 18 m / 4 sections / 12-ch lidar: " << (shape ? "yes" : "no");
  return {shape && count(r.report, "completed") == r.report.missions.size() && r.report.collisions.empty() &&
              r.wall <= 120.0,
          d.str()};
}

bool identical_logs(const Scenario& s, std::optional<Tick> until, const fs::path& tmp, std::string& why) {
  std::string logs[2][2];
  for (int i = 0; i < 2; ++i) {
    EngineOptions opt;
    opt.until = until;
    opt.out_dir = (tmp / ("run" + std::to_string(i))).string();
    run(s, opt);
    logs[i][0] = slurp(fs::path(opt.out_dir) / "telemetry.jsonl");
    logs[i][1] = slurp(fs::path(opt.out_dir) / "events.jsonl");
  }
  if (logs[0][0].empty() || logs[0][0] != logs[1][0]) {
    why = "telemetry differs";
    return false;
  }
  if (logs[0][1] != logs[1][1]) {
    why = "events differ";
    return false;
  }
  why = std::to_string(logs[0][0].size() + logs[0][1].size()) + " bytes";
  return true;
}

std::vector<Fate> fates(std::uint64_t seed) {
  MessageBus bus(seed);
  LinkModel l;
  l.loss_prob = 0.1;
  bus.set_link("uav/telemetry", l);
  std::vector<Fate> out;
  for (Tick t = 0; t < 2000; ++t) out.push_back(bus.publish("uav/telemetry/1", nlohmann::json::object(), t).fate);
  return out;
}

Outcome determinism(const fs::path& dir, const fs::path& tmp) {
  std::ostringstream d;
  bool ok = true;
  std::string why;
  const bool a = identical_logs(load_scenario((dir / "xiamen_vfh.json").string()), std::nullopt, tmp / "d2", why);
  d << "Demo-2 logs " << (a ? "identical" : "DIFFER") << " (" << why << ")";
  ok &= a;
  Scenario lossy = load_scenario((dir / "smallcity_100_anomaly.json").string());
  LinkModel l;
  l.loss_prob = 0.05;
  lossy.links["uav/telemetry"] = l;
  const bool b = identical_logs(lossy, Tick{2400}, tmp / "d1", why);
  d << "; Demo-1 anomaly, 5% telemetry loss, 2400 ticks " << (b ? "identical" : "DIFFER") << " (" << why << ")";
  ok &= b;
  const bool same = fates(11) == fates(11);
  const bool changed = fates(11) != fates(12);
  d << "; bus fates same seed " << (same ? "equal" : "DIFFER") << ", new seed " << (changed ? "changed" : "UNCHANGED");
  return {ok && same && changed, d.str()};
}

// Runs the named unit tests and checks each one ran and passed.
Outcome unit_suite(const std::string& binary, const std::vector<std::string>& tests, const fs::path& tmp,
                   const std::string& tag) {
  std::string filter;
  for (const auto& t : tests) filter += (filter.empty() ? "" : ":") + t;
  const fs::path report = tmp / (tag + ".json");
  const std::string cmd =
      "'" + binary + "' --gtest_filter='" + filter + "' --gtest_output=json:'" + report.string() + "' > /dev/null 2>&1";
  const auto t0 = std::chrono::steady_clock::now();
  const int rc = std::system(cmd.c_str());
  const double wall = seconds_since(t0);
  std::ostringstream d;
  const auto doc = nlohmann::json::parse(slurp(report), nullptr, false);
  if (doc.is_discarded()) return {false, "no test report (exit " + std::to_string(rc) + ")"};
  std::size_t passed = 0;
  std::vector<std::string> failed;
  for (const auto& suite : doc.value("testsuites", nlohmann::json::array())) {
    for (const auto& t : suite.value("testsuite", nlohmann::json::array())) {
      const std::string name = suite.value("name", "") + "." + t.value("name", "");
      if (t.value("status", "") == "RUN" && !t.contains("failures")) {
        ++passed;
      } else {
        failed.push_back(name);
      }
    }
  }
  d << passed << "/" << tests.size() << " passed in " << wall << " s";
  for (const auto& f : failed) d << "; FAILED " << f;
  return {rc == 0 && passed == tests.size() && failed.empty(), d.str()};
}

Outcome anomaly(const fs::path& dir) {
  const Scenario s = load_scenario((dir / "smallcity_100_anomaly.json").string());
  const Run r = run(s);
  bool all_terminal = r.report.all_terminal;
  for (const auto& m : r.report.missions) all_terminal = all_terminal && is_terminal(plan_state_from(m.state));
  bool motor = false, closure = false;
  std::size_t affected = 0;
  for (const auto& e : r.report.anomalies) {
    for (const auto& a : s.anomalies) {
      if (a.id != e.anomaly_id) continue;
      if (a.kind == AnomalyKind::kMotorFailure && e.applied_tick == a.onset) motor = true;
      if (a.kind == AnomalyKind::kCloseAirway && e.applied_tick == a.onset && e.reverted_tick) {
        closure = true;
        affected = e.affected.size();
      }
    }
  }
  std::ostringstream d;
  d << "stop " << r.report.stop_reason << ", " << count(r.report, "completed") << " completed, "
    << count(r.report, "aborted") << " aborted, motor-failure entry " << (motor ? "yes" : "no")
    << ", closure entry " << (closure ? "yes" : "no") << " (" << affected << " plans affected), " << r.report.replans
    << " re-plans, " << r.report.collisions.size() << " collisions";
  return {all_terminal && motor && closure && r.report.replans > 0, d.str()};
}

Outcome swap(const fs::path& dir) {
  Scenario s = load_scenario((dir / "smallcity_100.json").string());
  s.policy = permissive_policy();
  const Run builtin = run(s);

  GatewayOptions opt;
  opt.http_port = -1;
  opt.stream_port = 0;
  opt.token = "acceptance";
  Gateway g(opt);
  g.start();
  ExternalClient stub("127.0.0.1", g.stream_port(), opt.token, Role::kAuthority, {"plan/submit"});
  std::thread peer([&] { stub.run(echo_authority); });
  ApiRequest load;
  load.verb = "scenario.load";
  load.token = opt.token;
  load.body = {{"scenario", scenario_to_json(s)}, {"subsystems", {{"authority", "external"}}}};
  ApiRequest start = load;
  start.verb = "sim.start";
  start.body = nlohmann::json::object();
  const auto t0 = std::chrono::steady_clock::now();
  const bool started = g.handle(load).ok && g.handle(start).ok;
  const GatewayState end = started ? g.wait_done(1200.0) : g.state();
  const double wall = seconds_since(t0);
  g.stop();
  peer.join();
  const auto bridged = g.report();
  const bool same = bridged && report_to_json(*bridged).dump() == report_to_json(builtin.report).dump();
  std::ostringstream d;
  d << "bridged run " << gateway_state_name(end) << " in " << wall << " s, built-in "
    << count(builtin.report, "completed") << "/" << builtin.report.missions.size() << " completed in " << builtin.wall
    << " s; RunReport " << (same ? "identical" : "DIFFERS");
  if (!g.error().empty()) d << "; error: " << g.error();
  return {started && end == GatewayState::kFinished && same, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string scenarios = SKYLANE_SCENARIO_DIR;
  std::string unit_tests = SKYLANE_UNIT_TESTS;
  int threads = 1;
  app.add_option("--scenarios", scenarios, "Directory with the shipped scenarios");
  app.add_option("--unit-tests", unit_tests, "Unit test binary");
  app.add_option("--threads", threads, "Worker threads for the Demo-1 run")->check(CLI::Range(1, 256));
  CLI11_PARSE(app, argc, argv);

  const fs::path dir(scenarios);
  const fs::path tmp = fs::temp_directory_path() / ("skylane_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(tmp);

  int failures = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failures += !o.pass;
  };

  Scenario demo1_scenario;
  Run demo1_run;
  bool demo1_ok = true;
  std::string demo1_error;
  try {
    demo1_scenario = load_scenario((dir / "smallcity_100.json").string());
    EngineOptions opt;
    opt.threads = threads;
    demo1_run = run(demo1_scenario, opt);
  } catch (const std::exception& e) {
    demo1_ok = false;
    demo1_error = e.what();
  }
  auto needs_demo1 = [&](const std::function<Outcome()>& f) {
    return [&, f] { return demo1_ok ? f() : Outcome{false, "Demo-1 run failed: " + demo1_error}; };
  };

  report("demo1-reproduction", needs_demo1([&] { return demo1(demo1_scenario, demo1_run); }));
  report("bench-30-ticks-per-second", needs_demo1([&] { return bench(demo1_run); }));
  report("demo2-reproduction", [&] { return demo2(dir); });
  report("determinism", [&] { return determinism(dir, tmp); });
  report("oracle-suites", [&] {
    return unit_suite(unit_tests,
                      {"RouteProperty.MatchesExhaustiveEnumeration",
                       "Collision.SpatialHashMatchesAllPairsOn1000Configurations", "Histogram.MatchesDirectSummation",
                       "SelectHeading.MatchesExhaustiveOracle", "Bus.EmpiricalLossOverHundredThousand"},
                      tmp, "oracles");
  });
  report("dynamics-suite", [&] {
    return unit_suite(unit_tests,
                      {"Dynamics.HoverIsFixedPoint", "Dynamics.QuaternionNormPreservedOverMillionSteps",
                       "Dynamics.UndampedEnergyConserved", "Dynamics.FirstOrderConvergence"},
                      tmp, "dynamics");
  });
  report("anomaly-robustness", [&] { return anomaly(dir); });
  report("subsystem-swap", [&] { return swap(dir); });

  std::error_code ec;
  fs::remove_all(tmp, ec);
  return failures == 0 ? 0 : 1;
}
