#include "skylane/bus/bus.hpp"

#include <algorithm>
#include <cmath>

#include "skylane/errors.hpp"

namespace skylane {
namespace {

bool segment_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
         c == '.';
}

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t slash = s.find('/', start);
    out.push_back(s.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return out;
}

bool has_prefix(std::string_view topic, std::string_view prefix) {
  if (prefix.empty()) return true;
  if (topic.size() < prefix.size() || topic.substr(0, prefix.size()) != prefix) return false;
  return topic.size() == prefix.size() || topic[prefix.size()] == '/';
}

}  // namespace

void validate_link(const LinkModel& l) {
  if (!(l.loss_prob >= 0.0 && l.loss_prob <= 1.0))
    throw ValidationError("link: loss_prob must be in [0, 1]");
  if (l.service_rate == 0) throw ValidationError("link: service_rate must be >= 1");
  if (l.queue_capacity == 0) throw ValidationError("link: queue_capacity must be >= 1");
}

LinkModel link_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("link: expected an object");
  LinkModel l;
  l.base_delay = j.value("base_delay", l.base_delay);
  l.jitter = j.value("jitter", l.jitter);
  l.loss_prob = j.value("loss_prob", l.loss_prob);
  l.queue_capacity = j.value("queue_capacity", l.queue_capacity);
  l.service_rate = j.value("service_rate", l.service_rate);
  validate_link(l);
  return l;
}

nlohmann::json link_to_json(const LinkModel& l) {
  return {{"base_delay", l.base_delay},
          {"jitter", l.jitter},
          {"loss_prob", l.loss_prob},
          {"queue_capacity", l.queue_capacity},
          {"service_rate", l.service_rate}};
}

const char* fate_name(Fate f) {
  switch (f) {
    case Fate::kPending: return "pending";
    case Fate::kDelivered: return "delivered";
    case Fate::kDroppedLoss: return "dropped_loss";
    case Fate::kDroppedOverflow: return "dropped_overflow";
  }
  return "unknown";
}

nlohmann::json envelope_to_json(const Envelope& e) {
  return {{"topic", e.topic},         {"payload", e.payload}, {"publish_tick", e.publish_tick},
          {"deliver_tick", e.deliver_tick}, {"fate", fate_name(e.fate)}, {"sequence", e.sequence}};
}

void validate_topic(std::string_view topic) {
  if (topic.empty()) throw ValidationError("topic: empty");
  for (std::string_view seg : split(topic)) {
    if (seg.empty()) throw ValidationError("topic: empty segment in '" + std::string(topic) + "'");
    if (!std::all_of(seg.begin(), seg.end(), segment_char))
      throw ValidationError("topic: bad character in '" + std::string(topic) + "'");
  }
}

void validate_pattern(std::string_view pattern) {
  if (pattern == "*") return;
  if (pattern.size() >= 2 && pattern.substr(pattern.size() - 2) == "/*") {
    validate_topic(pattern.substr(0, pattern.size() - 2));
  } else {
    validate_topic(pattern);
  }
}

bool topic_matches(std::string_view pattern, std::string_view topic) {
  if (pattern == "*") return true;
  if (pattern.size() >= 2 && pattern.substr(pattern.size() - 2) == "/*") {
    const std::string_view base = pattern.substr(0, pattern.size() - 2);
    return topic.size() > base.size() + 1 && has_prefix(topic, base);
  }
  return pattern == topic;
}

MessageBus::MessageBus(std::uint64_t seed) : seed_(seed) { links_.emplace("", LinkState{}); }

MessageBus::LinkState& MessageBus::state_for(std::string_view topic, std::string& prefix_out) {
  LinkState* best = &links_.at("");
  prefix_out.clear();
  for (auto& [prefix, state] : links_) {
    if (!prefix.empty() && has_prefix(topic, prefix) && prefix.size() > prefix_out.size()) {
      best = &state;
      prefix_out = prefix;
    }
  }
  return *best;
}

RandomStream& MessageBus::stream_for(const std::string& prefix) {
  auto it = streams_.find(prefix);
  if (it == streams_.end()) it = streams_.emplace(prefix, RandomStream(seed_, "bus/" + prefix)).first;
  return it->second;
}

Envelope MessageBus::publish(const std::string& topic, nlohmann::json payload, Tick now) {
  validate_topic(topic);
  std::lock_guard lock(mu_);
  std::string prefix;
  LinkState& link = state_for(topic, prefix);
  const LinkModel& m = link.model;

  Envelope e;
  e.topic = topic;
  e.payload = std::move(payload);
  e.publish_tick = now;
  e.deliver_tick = now;
  auto seq_it = next_seq_.find(topic);
  if (seq_it == next_seq_.end()) seq_it = next_seq_.emplace(topic, 0).first;
  e.sequence = seq_it->second++;
  ++link.counters.published;

  // Drain the service queue up to now.
  if (now > link.last_service) {
    const std::uint64_t served = (now - link.last_service) * m.service_rate;
    link.queue_len = served >= link.queue_len ? 0 : link.queue_len - served;
    link.last_service = now;
  }

  if (m.loss_prob > 0.0 && stream_for(prefix).bernoulli(m.loss_prob)) {
    e.fate = Fate::kDroppedLoss;
    ++link.counters.dropped_loss;
    drops_.push_back(e);
    return e;
  }
  if (link.queue_len >= m.queue_capacity) {
    e.fate = Fate::kDroppedOverflow;
    ++link.counters.dropped_overflow;
    drops_.push_back(e);
    return e;
  }
  const std::uint64_t ahead = link.queue_len++;
  Tick extra = 0;
  if (m.jitter > 0) extra = static_cast<Tick>(stream_for(prefix).uniform_int(0, static_cast<std::int64_t>(m.jitter)));
  e.deliver_tick = now + m.base_delay + extra + ahead / m.service_rate;
  pending_.emplace(Key{e.deliver_tick, e.topic, e.sequence}, e);
  return e;
}

std::vector<Envelope> MessageBus::deliver_due(Tick now) {
  std::lock_guard lock(mu_);
  std::vector<Envelope> out;
  auto end = pending_.upper_bound(Key{now, std::string(1, '\x7f'), UINT64_MAX});
  for (auto it = pending_.begin(); it != end;) {
    Envelope e = std::move(it->second);
    it = pending_.erase(it);
    e.fate = Fate::kDelivered;
    std::string prefix;
    ++state_for(e.topic, prefix).counters.delivered;
    for (auto& [id, sub] : subs_) {
      if (topic_matches(sub.pattern, e.topic)) sub.inbox.push_back(e);
    }
    out.push_back(std::move(e));
  }
  return out;
}

SubscriptionId MessageBus::subscribe(const std::string& pattern) {
  validate_pattern(pattern);
  std::lock_guard lock(mu_);
  const SubscriptionId id = next_sub_++;
  subs_.emplace(id, Subscription{pattern, {}});
  return id;
}

void MessageBus::unsubscribe(SubscriptionId id) {
  std::lock_guard lock(mu_);
  subs_.erase(id);
}

std::vector<Envelope> MessageBus::drain(SubscriptionId id) {
  std::lock_guard lock(mu_);
  auto it = subs_.find(id);
  if (it == subs_.end()) throw LookupError("bus: unknown subscription");
  std::vector<Envelope> out;
  out.swap(it->second.inbox);
  return out;
}

void MessageBus::set_link(const std::string& prefix, const LinkModel& link) {
  if (!prefix.empty()) validate_topic(prefix);
  validate_link(link);
  std::lock_guard lock(mu_);
  links_[prefix].model = link;
}

LinkModel MessageBus::link(const std::string& prefix) const {
  std::lock_guard lock(mu_);
  auto it = links_.find(prefix);
  return it == links_.end() ? links_.at("").model : it->second.model;
}

void MessageBus::clear_link(const std::string& prefix) {
  std::lock_guard lock(mu_);
  if (prefix.empty()) {
    links_.at("").model = LinkModel{};
  } else {
    links_.erase(prefix);
  }
}

const LinkModel& MessageBus::link_for_topic(std::string_view topic) const {
  std::lock_guard lock(mu_);
  const LinkState* best = &links_.at("");
  std::size_t best_len = 0;
  for (const auto& [prefix, state] : links_) {
    if (!prefix.empty() && has_prefix(topic, prefix) && prefix.size() > best_len) {
      best = &state;
      best_len = prefix.size();
    }
  }
  return best->model;
}

std::vector<Envelope> MessageBus::take_drops() {
  std::lock_guard lock(mu_);
  std::vector<Envelope> out;
  out.swap(drops_);
  return out;
}

std::map<std::string, LinkCounters> MessageBus::counters() const {
  std::lock_guard lock(mu_);
  std::map<std::string, LinkCounters> out;
  for (const auto& [prefix, state] : links_) out[prefix] = state.counters;
  return out;
}

std::size_t MessageBus::pending() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

}  // namespace skylane
