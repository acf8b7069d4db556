#ifndef AVDM_ENV_CLIENT_HPP
#define AVDM_ENV_CLIENT_HPP

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>

#include "avdm/env.hpp"
#include "avdm/wire.hpp"

namespace avdm {

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Error reported by the server over a healthy connection.
struct ProtocolError : std::runtime_error {
  ProtocolError(std::string code_, const std::string& message)
      : std::runtime_error(code_ + ": " + message), code(std::move(code_)) {}
  std::string code;
};

/// Blocking client with the same reset/step semantics as the in-process
/// environment. One outstanding request at a time; not shareable across
/// threads without external serialization.
class RemoteEnv : public Env {
 public:
  RemoteEnv(const std::string& host, std::uint16_t port, double timeout_s = 10.0) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw TransportError("client: socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd_);
      throw TransportError("client: bad host " + host);
    }
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(fd_);
      throw TransportError("client: connection to " + host + ":" +
                           std::to_string(port) + " refused (" +
                           std::strerror(errno) + ")");
    }
    timeval tv{};
    tv.tv_sec = static_cast<long>(timeout_s);
    tv.tv_usec = static_cast<long>((timeout_s - static_cast<double>(tv.tv_sec)) * 1e6);
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

    nlohmann::json ack = request(wire::hello_line(next_seq()));
    if (ack.value("type", "") != "hello_ack" ||
        ack.value("version", -1) != wire::kProtocolVersion) {
      throw ProtocolError("UNSUPPORTED_VERSION", "handshake failed");
    }
  }

  ~RemoteEnv() override {
    if (fd_ >= 0) {
      // best effort; the server also handles a plain disconnect
      std::string line = wire::bye_line(next_seq());
      (void)::send(fd_, line.data(), line.size(), MSG_NOSIGNAL);
      ::close(fd_);
    }
  }

  RemoteEnv(const RemoteEnv&) = delete;
  RemoteEnv& operator=(const RemoteEnv&) = delete;

  StepResult reset(const EnvConfig& config, std::uint64_t seed) override {
    nlohmann::json ack = request(wire::reset_line(next_seq(), config, seed));
    expect_type(ack, "reset_ack");
    return wire::step_result_from_json(ack.at("result"));
  }

  StepResult step(const AgentAction& action) override {
    nlohmann::json ack = request(wire::step_line(next_seq(), action));
    expect_type(ack, "step_ack");
    return wire::step_result_from_json(ack.at("result"));
  }

 private:
  std::uint64_t next_seq() { return ++seq_; }

  void expect_type(const nlohmann::json& msg, const char* type) {
    std::string got = msg.value("type", "");
    if (got == type) {
      if (msg.value("seq", std::uint64_t{0}) != seq_)
        throw ProtocolError("BAD_SEQ", "ack does not match request");
      return;
    }
    if (got == "error") {
      throw ProtocolError(msg.value("code", "UNKNOWN"),
                          msg.value("message", ""));
    }
    throw ProtocolError("UNEXPECTED", "unexpected message type: " + got);
  }

  nlohmann::json request(const std::string& line) {
    send_all(line);
    std::string reply = read_line();
    nlohmann::json msg = nlohmann::json::parse(reply, nullptr, false);
    if (msg.is_discarded() || !msg.is_object())
      throw ProtocolError("BAD_MESSAGE", "server sent malformed JSON");
    return msg;
  }

  void send_all(const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n <= 0) {
        if (n < 0 && errno == EINTR) continue;
        throw TransportError("client: send failed (connection lost)");
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    char chunk[4096];
    for (;;) {
      auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return line;
      }
      ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n == 0) throw TransportError("client: server closed the connection");
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK)
          throw TransportError("client: timeout waiting for server reply");
        throw TransportError(std::string("client: recv failed (") +
                             std::strerror(errno) + ")");
      }
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  int fd_ = -1;
  std::uint64_t seq_ = 0;
  std::string buf_;
};

}  // namespace avdm

#endif  // AVDM_ENV_CLIENT_HPP
