#pragma once

#include <atomic>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace skylane {

/// A connected TCP socket carrying newline-delimited JSON documents.
class LineSocket {
 public:
  explicit LineSocket(int fd);
  ~LineSocket();
  LineSocket(const LineSocket&) = delete;
  LineSocket& operator=(const LineSocket&) = delete;

  /// Throws SchedulingError when the connection cannot be made.
  static std::unique_ptr<LineSocket> connect(const std::string& host, int port);

  /// Next line without its terminator. nullopt on EOF, error or when
  /// `timeout_s` (negative: wait forever) elapses first.
  std::optional<std::string> read_line(double timeout_s = -1.0);
  /// Writes the line plus '\n'; false once the peer is gone.
  bool write_line(const std::string& line);
  /// Unblocks readers and writers on other threads.
  void shutdown();
  bool timed_out() const { return timed_out_; }

 private:
  int fd_;
  std::string buf_;
  std::mutex write_mu_;
  bool timed_out_ = false;
};

/// Accepts TCP connections and runs `handler` for each on its own thread.
class StreamServer {
 public:
  using Handler = std::function<void(std::shared_ptr<LineSocket>)>;

  /// Binds immediately; port 0 picks an ephemeral port. Throws
  /// SchedulingError when the address cannot be bound.
  StreamServer(const std::string& host, int port, Handler handler);
  ~StreamServer();

  int port() const { return port_; }
  /// Closes the listener and every connection, then joins all threads.
  void stop();

 private:
  void accept_loop();
  void reap();

  int listen_fd_ = -1;
  int port_ = 0;
  Handler handler_;
  std::thread acceptor_;
  std::mutex mu_;
  bool stopped_ = false;
  struct Conn {
    std::shared_ptr<LineSocket> socket;
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::list<Conn> conns_;
};

}  // namespace skylane
