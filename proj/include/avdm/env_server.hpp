#ifndef AVDM_ENV_SERVER_HPP
#define AVDM_ENV_SERVER_HPP

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <optional>
#include <string>

#include "avdm/simulation.hpp"
#include "avdm/wire.hpp"

namespace avdm {

/// Environment server: owns one simulation per client session and answers
/// newline-delimited JSON requests in order. One session at a time; run one
/// server process per parallel environment.
class EnvServer {
 public:
  /// Binds immediately; port 0 picks an ephemeral port (see port()).
  EnvServer(const std::string& host, std::uint16_t port,
            EnvConfig defaults = EnvConfig{})
      : defaults_(defaults) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("server: socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(listen_fd_);
      throw std::runtime_error("server: bad bind address " + host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(listen_fd_);
      throw std::runtime_error("server: cannot bind " + host + ":" +
                               std::to_string(port) + " (" +
                               std::strerror(errno) + ")");
    }
    if (::listen(listen_fd_, 1) != 0) {
      ::close(listen_fd_);
      throw std::runtime_error("server: listen() failed");
    }
    sockaddr_in got{};
    socklen_t len = sizeof(got);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&got), &len);
    port_ = ntohs(got.sin_port);
  }

  ~EnvServer() {
    stop();
    if (listen_fd_ >= 0) ::close(listen_fd_);
  }

  std::uint16_t port() const { return port_; }

  /// Accept loop; returns after stop() or an unrecoverable listen error.
  void run() {
    while (!stopping_.load()) {
      int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (stopping_.load()) break;
        if (errno == EINTR) continue;
        break;
      }
      timeval tv{};
      tv.tv_usec = 200 * 1000;  // re-check the stop flag periodically
      ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
      handle_session(fd);
      ::close(fd);
    }
  }

  void stop() {
    bool expected = false;
    if (stopping_.compare_exchange_strong(expected, true)) {
      // closing the listening socket unblocks accept()
      ::shutdown(listen_fd_, SHUT_RDWR);
    }
  }

 private:
  static constexpr std::size_t kMaxLine = 1 << 20;

  void handle_session(int fd) {
    std::optional<Simulation> sim;
    std::string buf;
    char chunk[4096];
    while (!stopping_.load()) {
      auto nl = buf.find('\n');
      if (nl == std::string::npos) {
        ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
        if (n == 0) return;  // client gone, discard the simulation
        if (n < 0) {
          if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
          return;
        }
        buf.append(chunk, static_cast<std::size_t>(n));
        if (buf.size() > kMaxLine) {
          send_all(fd, wire::error_line(0, "BAD_MESSAGE", "line too long"));
          return;
        }
        continue;
      }
      std::string line = buf.substr(0, nl);
      buf.erase(0, nl + 1);
      if (line.empty()) continue;
      bool close_session = false;
      std::string reply = handle_line(line, sim, close_session);
      if (!reply.empty() && !send_all(fd, reply)) return;
      if (close_session) return;
    }
  }

  std::string handle_line(const std::string& line, std::optional<Simulation>& sim,
                          bool& close_session) {
    nlohmann::json msg = nlohmann::json::parse(line, nullptr, false);
    if (msg.is_discarded() || !msg.is_object()) {
      return wire::error_line(0, "BAD_MESSAGE", "not a JSON object");
    }
    std::uint64_t seq = 0;
    if (msg.contains("seq") && msg["seq"].is_number_unsigned()) {
      seq = msg["seq"].get<std::uint64_t>();
    } else {
      return wire::error_line(0, "BAD_MESSAGE", "missing or invalid seq");
    }
    if (!msg.contains("type") || !msg["type"].is_string()) {
      return wire::error_line(seq, "BAD_MESSAGE", "missing type");
    }
    std::string type = msg["type"].get<std::string>();

    if (type == "hello") {
      int version = msg.value("version", -1);
      if (version != wire::kProtocolVersion) {
        close_session = true;
        return wire::error_line(seq, "UNSUPPORTED_VERSION",
                                "server speaks version " +
                                    std::to_string(wire::kProtocolVersion));
      }
      return wire::hello_ack_line(seq);
    }
    if (type == "reset") {
      try {
        EnvConfig cfg = msg.contains("config")
                            ? wire::env_config_from_json(msg.at("config"))
                            : defaults_;
        cfg.validate();
        std::uint64_t seed = msg.at("seed").get<std::uint64_t>();
        sim.emplace(cfg.sim, cfg.idm, cfg.mobil);
        StepResult r = sim->reset(seed);
        return wire::result_ack_line("reset_ack", seq, r);
      } catch (const nlohmann::json::exception& e) {
        return wire::error_line(seq, "BAD_MESSAGE", e.what());
      } catch (const std::invalid_argument& e) {
        return wire::error_line(seq, "BAD_CONFIG", e.what());
      }
    }
    if (type == "step") {
      if (!sim) return wire::error_line(seq, "NO_EPISODE", "reset first");
      if (sim->episode_done())
        return wire::error_line(seq, "EPISODE_DONE", "episode is over, reset");
      try {
        AgentAction a = wire::action_from_json(msg.at("action"));
        StepResult r = sim->step(a);
        return wire::result_ack_line("step_ack", seq, r);
      } catch (const nlohmann::json::exception& e) {
        return wire::error_line(seq, "BAD_MESSAGE", e.what());
      } catch (const std::invalid_argument& e) {
        return wire::error_line(seq, "BAD_MESSAGE", e.what());
      }
    }
    if (type == "bye") {
      close_session = true;  // no ack; the session just ends
      return "";
    }
    return wire::error_line(seq, "BAD_MESSAGE", "unknown type: " + type);
  }

  static bool send_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n <= 0) {
        if (n < 0 && errno == EINTR) continue;
        return false;
      }
      off += static_cast<std::size_t>(n);
    }
    return true;
  }

  EnvConfig defaults_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
};

/// Splits "HOST:PORT" into its parts.
inline std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& s) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("endpoint must be HOST:PORT, got: " + s);
  std::string host = s.substr(0, colon);
  int port = std::stoi(s.substr(colon + 1));
  if (port < 0 || port > 65535)
    throw std::invalid_argument("port out of range in: " + s);
  return {host, static_cast<std::uint16_t>(port)};
}

}  // namespace avdm

#endif  // AVDM_ENV_SERVER_HPP
