#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "skylane/world/random.hpp"
#include "skylane/world/types.hpp"

namespace skylane {

struct LinkModel {
  Tick base_delay = 0;
  Tick jitter = 0;  // uniform integer extra delay in [0, jitter]
  double loss_prob = 0.0;
  std::uint64_t queue_capacity = 1'000'000;
  std::uint64_t service_rate = 1'000'000;  // messages per tick
};

void validate_link(const LinkModel& link);
LinkModel link_from_json(const nlohmann::json& j);
nlohmann::json link_to_json(const LinkModel& link);

enum class Fate { kPending, kDelivered, kDroppedLoss, kDroppedOverflow };
const char* fate_name(Fate f);

struct Envelope {
  std::string topic;
  nlohmann::json payload;
  Tick publish_tick = 0;
  Tick deliver_tick = 0;
  Fate fate = Fate::kPending;
  std::uint64_t sequence = 0;
};

nlohmann::json envelope_to_json(const Envelope& e);

/// Topics are '/'-separated non-empty segments of [A-Za-z0-9_.-].
void validate_topic(std::string_view topic);
/// Patterns are topics whose last segment may be '*' (any non-empty subtree).
void validate_pattern(std::string_view pattern);
bool topic_matches(std::string_view pattern, std::string_view topic);

using SubscriptionId = std::uint32_t;

struct LinkCounters {
  std::uint64_t published = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_loss = 0;
  std::uint64_t dropped_overflow = 0;
};

/// In-process pub-sub with per-prefix simulated links.
///
/// A topic uses the link registered for its longest matching prefix
/// (segment-wise), else the default lossless link. Each link owns a random
/// stream keyed "bus/<prefix>" and a service queue drained at service_rate
/// messages per tick. Publishing is thread-safe; delivery is meant to run
/// from one context once per tick.
class MessageBus {
 public:
  explicit MessageBus(std::uint64_t seed);

  Envelope publish(const std::string& topic, nlohmann::json payload, Tick now);

  /// Removes and returns every envelope with deliver_tick <= now, ordered by
  /// (deliver_tick, topic, sequence), and copies each into matching inboxes.
  std::vector<Envelope> deliver_due(Tick now);

  SubscriptionId subscribe(const std::string& pattern);
  void unsubscribe(SubscriptionId id);
  /// Delivered envelopes queued for this subscription since the last drain.
  std::vector<Envelope> drain(SubscriptionId id);

  void set_link(const std::string& prefix, const LinkModel& link);
  /// Link in force for `prefix` exactly (default link when unregistered).
  LinkModel link(const std::string& prefix) const;
  /// Drops the registration so the prefix falls back to broader links.
  void clear_link(const std::string& prefix);
  const LinkModel& link_for_topic(std::string_view topic) const;

  /// Dropped envelopes since the last call, in publish order.
  std::vector<Envelope> take_drops();
  std::map<std::string, LinkCounters> counters() const;
  std::size_t pending() const;

 private:
  struct LinkState {
    LinkModel model;
    std::uint64_t queue_len = 0;
    Tick last_service = 0;
    LinkCounters counters;
  };
  struct Subscription {
    std::string pattern;
    std::vector<Envelope> inbox;
  };
  using Key = std::tuple<Tick, std::string, std::uint64_t>;

  LinkState& state_for(std::string_view topic, std::string& prefix_out);
  RandomStream& stream_for(const std::string& prefix);

  std::uint64_t seed_;
  mutable std::mutex mu_;
  std::map<std::string, LinkState> links_;  // "" = default
  std::map<std::string, RandomStream> streams_;
  std::map<std::string, std::uint64_t, std::less<>> next_seq_;
  std::map<Key, Envelope> pending_;
  std::map<SubscriptionId, Subscription> subs_;
  SubscriptionId next_sub_ = 1;
  std::vector<Envelope> drops_;
};

}  // namespace skylane
