#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "skylane/engine/engine.hpp"
#include "skylane/errors.hpp"
#include "skylane/gateway/gateway.hpp"

namespace {

skylane::Engine* g_engine = nullptr;
skylane::Gateway* g_gateway = nullptr;

void on_signal(int) {
  if (g_engine) g_engine->request_stop("interrupted");
  if (g_gateway) g_gateway->request_shutdown();
}

int fail(int code, const std::string& msg) {
  std::cerr << "skylane: " << msg << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic low-altitude UAV traffic simulator"};
  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> until;
  bool headless = false, bench = false, validate_only = false;
  std::string serve_addr, out_dir;
  int threads = 1;
  app.add_option("scenario", scenario_path, "Scenario file (JSON)");
  app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("--until", until, "Stop after this many ticks")->check(CLI::PositiveNumber);
  app.add_flag("--headless", headless, "Run without the gateway");
  app.add_option("--serve", serve_addr, "Serve the gateway on HOST:PORT");
  app.add_flag("--bench", bench, "Performance mode; prints ticks/sec");
  app.add_option("--out", out_dir, "Log directory");
  app.add_flag("--validate", validate_only, "Validate the scenario and exit");
  app.add_option("--threads", threads, "Worker threads for the per-vehicle phase")->check(CLI::Range(1, 256));
  CLI11_PARSE(app, argc, argv);

  if (!serve_addr.empty() && headless) return fail(2, "--serve and --headless are exclusive");

  if (!serve_addr.empty()) {
    skylane::GatewayOptions gopt;
    const auto colon = serve_addr.rfind(':');
    if (colon == std::string::npos) return fail(2, "--serve expects HOST:PORT");
    gopt.host = serve_addr.substr(0, colon);
    gopt.http_port = std::atoi(serve_addr.c_str() + colon + 1);
    if (gopt.http_port <= 0 || gopt.http_port > 65534) return fail(2, "--serve port must be in 1..65534");
    gopt.stream_port = gopt.http_port + 1;
    gopt.out_dir = out_dir;
    gopt.threads = threads;
    if (const char* tok = std::getenv("SKYLANE_TOKEN")) gopt.token = tok;
    gopt.pace = 1.0;
    std::unique_ptr<skylane::Gateway> gwp;
    try {
      gwp = std::make_unique<skylane::Gateway>(gopt);
    } catch (const std::exception& e) {
      return fail(2, e.what());
    }
    skylane::Gateway& gw = *gwp;
    g_gateway = &gw;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    if (!scenario_path.empty()) {
      try {
        gw.load_scenario_file(scenario_path, seed, until);
      } catch (const std::exception& e) {
        return fail(2, e.what());
      }
    }
    std::cerr << "skylane: serving http on " << gopt.host << ":" << gopt.http_port << ", stream on port "
              << gopt.stream_port << "\n";
    try {
      gw.serve_forever();
    } catch (const std::exception& e) {
      return fail(1, e.what());
    }
    g_gateway = nullptr;
    return 0;
  }


  if (scenario_path.empty()) return fail(2, "a scenario path is required");

  skylane::Scenario scenario;
  try {
    scenario = skylane::load_scenario(scenario_path);
  } catch (const std::exception& e) {
    return fail(2, e.what());
  }
  if (seed) scenario.seed = *seed;
  const auto violations = skylane::validate_scenario(scenario);
  if (!violations.empty()) {
    std::cerr << "skylane: scenario has " << violations.size() << " violation(s):\n";
    for (const auto& v : violations) std::cerr << "  " << v.rule << ": " << v.message << "\n";
    return 2;
  }
  if (validate_only) {
    std::cout << "ok: " << scenario.network.nodes.size() << " nodes, " << scenario.network.airports.size()
              << " airports, " << scenario.network.airways.size() << " airways, " << scenario.demands.size()
              << " demands\n";
    return 0;
  }

  skylane::EngineOptions opt;
  if (until) opt.until = *until;
  opt.out_dir = out_dir;
  opt.threads = threads;
  if (!opt.out_dir.empty()) std::filesystem::create_directories(opt.out_dir);

  try {
    skylane::Engine engine(std::move(scenario), opt);
    g_engine = &engine;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    const auto report = engine.run();
    g_engine = nullptr;
    const auto& perf = engine.perf();
    std::size_t completed = 0;
    for (const auto& m : report.missions)
      if (m.state == "completed") ++completed;
    std::cout << "ticks " << report.ticks << ", stop " << report.stop_reason << ", completed " << completed << "/"
              << report.missions.size() << ", collisions " << report.collisions.size() << ", replans "
              << report.replans << ", peak active " << report.peak_active << ", min separation "
              << report.min_separation << "\n";
    if (bench) {
      std::cout << "wall " << perf.wall_seconds << " s, ticks/sec " << perf.ticks_per_second << ", loaded ticks "
                << perf.loaded_ticks << " (>= " << perf.loaded_threshold << " active), loaded ticks/sec "
                << perf.loaded_ticks_per_second << ", threads " << perf.threads << "\n";
    }
    if (report.stop_reason == "interrupted") return fail(130, "interrupted");
    if (report.stop_reason == "all_terminal" || report.stop_reason == "until" || report.stop_reason == "empty")
      return 0;
    return fail(1, "run ended with stop reason '" + report.stop_reason + "'");
  } catch (const skylane::ValidationError& e) {
    return fail(2, e.what());
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
}
