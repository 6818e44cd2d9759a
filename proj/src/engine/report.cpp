#include "skylane/engine/report.hpp"

namespace skylane {

nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json missions = nlohmann::json::array();
  std::size_t completed = 0, aborted = 0;
  for (const auto& m : r.missions) {
    completed += m.state == "completed";
    aborted += m.state == "aborted" || m.state == "rejected";
    missions.push_back({{"plan", m.plan},
                        {"demand", m.demand},
                        {"uav", m.uav},
                        {"state", m.state},
                        {"reason", m.reason},
                        {"departed", m.departed ? nlohmann::json(*m.departed) : nlohmann::json(nullptr)},
                        {"finished", m.finished ? nlohmann::json(*m.finished) : nlohmann::json(nullptr)},
                        {"replans", m.replans}});
  }
  nlohmann::json collisions = nlohmann::json::array();
  for (const auto& c : r.collisions) collisions.push_back(collision_to_json(c));
  nlohmann::json anomalies = nlohmann::json::array();
  for (const auto& a : r.anomalies) anomalies.push_back(log_entry_to_json(a));
  nlohmann::json rejected = nlohmann::json::array();
  for (const auto& a : r.anomaly_rejections) rejected.push_back(rejection_to_json(a));
  return {{"version", 1},
          {"ticks", r.ticks},
          {"stop_reason", r.stop_reason},
          {"all_terminal", r.all_terminal},
          {"summary",
           {{"demands", r.missions.size()},
            {"completed", completed},
            {"aborted", aborted},
            {"collisions", r.collisions.size()},
            {"replans", r.replans},
            {"peak_active", r.peak_active},
            {"min_separation", r.min_separation}}},
          {"stats", stats_to_json(r.stats)},
          {"missions", missions},
          {"collisions", collisions},
          {"anomalies", anomalies},
          {"anomaly_rejections", rejected},
          {"logs", r.logs}};
}

nlohmann::json perf_to_json(const PerfReport& p) {
  return {{"wall_seconds", p.wall_seconds},
          {"ticks", p.ticks},
          {"ticks_per_second", p.ticks_per_second},
          {"peak_active", p.peak_active},
          {"loaded_threshold", p.loaded_threshold},
          {"loaded_ticks", p.loaded_ticks},
          {"loaded_ticks_per_second", p.loaded_ticks_per_second},
          {"threads", p.threads}};
}

}  // namespace skylane
