#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include <json.hpp>

#include "skylane/engine/engine.hpp"
#include "skylane/gateway/stream_server.hpp"

namespace httplib {
class Server;
}

namespace skylane {

struct GatewayOptions {
  std::string host = "127.0.0.1";
  int http_port = 8080;    // 0: ephemeral, -1: no HTTP listener
  int stream_port = 8081;  // 0: ephemeral, -1: no stream listener
  std::string token;       // required; compared against every request but sim.status
  std::string out_dir;     // log directory for runs, empty for none
  int threads = 1;
  double pace = 0.0;                       // wall seconds per sim second; 0 runs flat out
  std::size_t client_buffer_bytes = 8 << 20;  // queued stream bytes before a client is dropped
};

enum class GatewayState { kIdle, kLoaded, kRunning, kPaused, kFinished, kError };
const char* gateway_state_name(GatewayState s);

struct ApiRequest {
  nlohmann::json id;  // echoed back verbatim
  std::string verb;
  nlohmann::json body = nlohmann::json::object();
  std::string token;
};

struct ApiResponse {
  nlohmann::json id;
  bool ok = true;
  std::string code;  // auth | protocol | state | invalid | internal
  std::string message;
  nlohmann::json body = nlohmann::json::object();
};

nlohmann::json response_to_json(const ApiResponse& r);
ApiRequest request_from_line(const nlohmann::json& j);

/// Pass-through authority: approves every plan/submit at max(requested, tick),
/// in plan-id order, as the built-in authority does under permissive_policy().
nlohmann::json echo_authority(Tick tick, const nlohmann::json& messages);

/// Client side of the external-subsystem handshake.
class ExternalClient {
 public:
  using Handler = std::function<nlohmann::json(Tick, const nlohmann::json& messages)>;

  /// Connects to the stream port and attaches for `role`. An empty `topics`
  /// receives every inbound topic of the role. Throws SchedulingError when
  /// the gateway refuses.
  ExternalClient(const std::string& host, int port, const std::string& token, Role role,
                 std::vector<std::string> topics = {});

  /// Answers one tick message. Returns false once the gateway hangs up.
  bool serve_one(const Handler& handler);
  /// Answers ticks until the gateway hangs up.
  void run(const Handler& handler);
  void close();

 private:
  std::unique_ptr<LineSocket> socket_;
};

/// Service gateway: HTTP request/response, the line-delimited stream and the
/// external-subsystem bridge around one engine. Every engine interaction is a
/// command on a single queue that the simulation thread drains at tick
/// boundaries.
class Gateway {
 public:
  /// Throws ValidationError when no token is configured.
  explicit Gateway(GatewayOptions options);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Opens the configured listeners.
  void start();
  /// Closes listeners and connections, finalizes a live run, joins threads.
  void stop();
  /// start(), then blocks until request_shutdown().
  void serve_forever();
  /// Async-signal-safe.
  void request_shutdown() { shutdown_requested_ = true; }

  int http_port() const { return http_port_; }
  int stream_port() const { return stream_ ? stream_->port() : -1; }

  /// Direct API entry; HTTP and stream requests land here too.
  ApiResponse handle(const ApiRequest& request);
  /// scenario.load without a client round trip. Throws on failure.
  void load_scenario_file(const std::string& path, std::optional<std::uint64_t> seed, std::optional<Tick> until);

  GatewayState state() const;
  /// Blocks until the run leaves the running/paused states or the timeout
  /// elapses; returns the state reached.
  GatewayState wait_done(double timeout_s);
  /// Report of the last finished run.
  std::optional<RunReport> report() const;
  std::string error() const;

 private:
  struct Client;
  struct Command {
    std::function<ApiResponse()> fn;
    std::promise<ApiResponse> done;
  };
  class SocketPeer;

  ApiResponse guarded(const ApiRequest& request, Client* client);
  ApiResponse dispatch(const ApiRequest& request, Client* client);
  ApiResponse enqueue(std::function<ApiResponse()> fn);
  void sim_loop();
  void step_once();
  void finish_run();
  void fail_run(const std::string& message);
  void refresh_status();
  void refresh_status_locked();
  void fan_out(const nlohmann::json& frame);

  ApiResponse do_load(const nlohmann::json& body);
  ApiResponse do_start();
  ApiResponse do_pause(bool pause);
  ApiResponse do_stop();
  ApiResponse do_network();
  ApiResponse do_publish(const std::string& topic, const nlohmann::json& payload);
  ApiResponse do_plan_query(const nlohmann::json& body);
  ApiResponse do_stats();

  void on_connection(std::shared_ptr<LineSocket> socket);
  void serve_client(const std::shared_ptr<LineSocket>& socket, const std::string& first_line);
  void attach_peer(const std::shared_ptr<LineSocket>& socket, const nlohmann::json& hello);

  GatewayOptions options_;
  std::unique_ptr<httplib::Server> http_;
  std::thread http_thread_;
  int http_port_ = -1;
  std::unique_ptr<StreamServer> stream_;
  std::atomic<bool> shutdown_requested_{false};
  bool started_ = false;
  bool stopped_ = false;

  // Guarded by mu_.
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::deque<std::shared_ptr<Command>> queue_;
  bool sim_stop_ = false;
  GatewayState state_ = GatewayState::kIdle;
  nlohmann::json status_;
  std::optional<RunReport> report_;
  std::string error_;
  std::shared_ptr<SocketPeer> peers_[2];

  // Owned by the simulation thread.
  std::unique_ptr<Engine> engine_;
  std::thread sim_thread_;

  std::mutex clients_mu_;
  std::list<std::shared_ptr<Client>> clients_;
};

}  // namespace skylane
