#include "skylane/authority/policy.hpp"

#include <limits>

#include "skylane/errors.hpp"

namespace skylane {

void validate_policy(const ApprovalPolicy& p) {
  if (!(p.max_airway_occupancy_fraction > 0.0 && p.max_airway_occupancy_fraction <= 1.0) &&
      !(p.max_airway_occupancy_fraction == std::numeric_limits<double>::infinity()))
    throw ValidationError("policy: max_airway_occupancy_fraction must be in (0, 1]");
  if (!(p.corridor_tolerance >= 0.0)) throw ValidationError("policy: corridor_tolerance must be >= 0");
  if (p.defer_retry == 0) throw ValidationError("policy: defer_retry must be >= 1");
  if (p.stats_every == 0) throw ValidationError("policy: stats_every must be >= 1");
}

ApprovalPolicy policy_from_json(const nlohmann::json& j, ApprovalPolicy p) {
  if (!j.is_object()) throw ValidationError("policy: expected an object");
  if (j.contains("max_airway_occupancy_fraction")) {
    const auto& v = j["max_airway_occupancy_fraction"];
    p.max_airway_occupancy_fraction = v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
  }
  p.departure_separation = j.value("departure_separation", p.departure_separation);
  p.nfz_check = j.value("nfz_check", p.nfz_check);
  p.corridor_tolerance = j.value("corridor_tolerance", p.corridor_tolerance);
  p.defer_retry = j.value("defer_retry", p.defer_retry);
  p.stats_every = j.value("stats_every", p.stats_every);
  validate_policy(p);
  return p;
}

nlohmann::json policy_to_json(const ApprovalPolicy& p) {
  nlohmann::json j = {{"departure_separation", p.departure_separation},
                      {"nfz_check", p.nfz_check},
                      {"corridor_tolerance", p.corridor_tolerance},
                      {"defer_retry", p.defer_retry},
                      {"stats_every", p.stats_every}};
  j["max_airway_occupancy_fraction"] = p.max_airway_occupancy_fraction == std::numeric_limits<double>::infinity()
                                           ? nlohmann::json(nullptr)
                                           : nlohmann::json(p.max_airway_occupancy_fraction);
  return j;
}

ApprovalPolicy permissive_policy() {
  ApprovalPolicy p;
  p.max_airway_occupancy_fraction = std::numeric_limits<double>::infinity();
  p.departure_separation = 0;
  p.nfz_check = false;
  return p;
}

}  // namespace skylane
