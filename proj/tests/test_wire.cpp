#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include "avdm/env_client.hpp"
#include "avdm/env_server.hpp"
#include "avdm/rng.hpp"

using namespace avdm;

namespace {

EnvConfig cf_env(double dt = 0.1) {
  EnvConfig c;
  c.sim.lane_count = 1;
  c.sim.time_step = dt;
  c.sim.observation = ObsMode::CF;
  return c;
}

EnvConfig lc_env(double dt = 0.5) {
  EnvConfig c;
  c.sim.lane_count = 3;
  c.sim.time_step = dt;
  c.sim.observation = ObsMode::LC;
  return c;
}

struct ServerFixture {
  EnvServer server{"127.0.0.1", 0};
  std::thread thread;
  ServerFixture() {
    thread = std::thread([this] { server.run(); });
  }
  ~ServerFixture() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
};

// bare-bones line client for protocol-level poking
struct RawClient {
  int fd = -1;
  std::string buf;
  explicit RawClient(std::uint16_t port) {
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
      throw std::runtime_error("raw connect failed");
    timeval tv{5, 0};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  }
  ~RawClient() { ::close(fd); }
  void send_line(const std::string& line) {
    std::string data = line + "\n";
    ASSERT_EQ(::send(fd, data.data(), data.size(), MSG_NOSIGNAL),
              static_cast<ssize_t>(data.size()));
  }
  std::string read_line() {
    char chunk[4096];
    for (;;) {
      auto nl = buf.find('\n');
      if (nl != std::string::npos) {
        std::string line = buf.substr(0, nl);
        buf.erase(0, nl + 1);
        return line;
      }
      ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
      if (n <= 0) return "";
      buf.append(chunk, static_cast<std::size_t>(n));
    }
  }
};

}  // namespace

TEST(Wire, JsonRoundTripIsBitExact) {
  EnvConfig c = lc_env();
  c.sim.time_step = 0.1;  // not exactly representable
  c.idm.max_accel = 1.0 / 3.0;
  c.mobil.politeness = 0.12345678901234567;
  EnvConfig back = wire::env_config_from_json(
      wire::json::parse(wire::to_json(c).dump()));
  EXPECT_EQ(back.sim.time_step, c.sim.time_step);
  EXPECT_EQ(back.idm.max_accel, c.idm.max_accel);
  EXPECT_EQ(back.mobil.politeness, c.mobil.politeness);

  StepResult r;
  r.observation = {0.1, -1.0 / 7.0, 1e-17, 0.9999999999999999};
  r.raw.gap = 123.45600000000002;
  r.done_reason = DoneReason::RoadEnd;
  r.episode_done = true;
  StepResult rb =
      wire::step_result_from_json(wire::json::parse(wire::to_json(r).dump()));
  EXPECT_EQ(rb.observation, r.observation);
  EXPECT_EQ(rb.raw.gap, r.raw.gap);
  EXPECT_EQ(rb.done_reason, r.done_reason);
}

TEST(Wire, HandshakeAndEpisodeOverLoopback) {
  ServerFixture f;
  RemoteEnv env("127.0.0.1", f.server.port());
  EnvConfig cfg = cf_env();
  StepResult r = env.reset(cfg, 42);
  EXPECT_EQ(r.observation.size(), 4u);
  AgentAction a;
  a.acceleration = 1.0;
  for (int i = 0; i < 100 && !r.episode_done; ++i) r = env.step(a);
  SUCCEED();
}

// remote and in-process environments must be indistinguishable: bit-identical
// step streams for identical (config, seed, action script)
TEST(Wire, LoopbackEquivalenceOracle) {
  ServerFixture f;
  for (std::uint64_t seed : {1ull, 7ull}) {
    for (EnvConfig cfg : {cf_env(0.1), lc_env(0.5)}) {
      RemoteEnv remote("127.0.0.1", f.server.port());
      LocalEnv local;
      StepResult rr = remote.reset(cfg, seed);
      StepResult rl = local.reset(cfg, seed);
      ASSERT_EQ(wire::to_json(rr).dump(), wire::to_json(rl).dump());
      Rng script(seed);
      for (int i = 0; i < 300; ++i) {
        if (rr.episode_done) {
          rr = remote.reset(cfg, seed + 100);
          rl = local.reset(cfg, seed + 100);
        }
        AgentAction a;
        a.acceleration = script.uniform(-4.0, 3.0);
        double u = script.uniform();
        a.lc = u < 0.05 ? LcDecision::LLC
                        : (u < 0.1 ? LcDecision::RLC : LcDecision::LK);
        rr = remote.step(a);
        rl = local.step(a);
        ASSERT_EQ(wire::to_json(rr).dump(), wire::to_json(rl).dump())
            << "seed " << seed << " step " << i;
      }
    }
  }
}

TEST(Wire, StepBeforeResetIsNoEpisode) {
  ServerFixture f;
  RemoteEnv env("127.0.0.1", f.server.port());
  AgentAction a;
  try {
    env.step(a);
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.code, "NO_EPISODE");
  }
}

TEST(Wire, StepAfterEpisodeEndIsError) {
  ServerFixture f;
  RemoteEnv env("127.0.0.1", f.server.port());
  EnvConfig cfg = cf_env(1.0);
  StepResult r = env.reset(cfg, 3);
  AgentAction a;
  a.acceleration = 3.0;
  for (int i = 0; i < 500 && !r.episode_done; ++i) r = env.step(a);
  ASSERT_TRUE(r.episode_done);
  try {
    env.step(a);
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.code, "EPISODE_DONE");
  }
}

TEST(Wire, BadConfigReported) {
  ServerFixture f;
  RemoteEnv env("127.0.0.1", f.server.port());
  EnvConfig cfg = cf_env();
  cfg.sim.lane_count = 2;
  try {
    env.reset(cfg, 1);
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.code, "BAD_CONFIG");
  }
}

TEST(Wire, VersionMismatchRefused) {
  ServerFixture f;
  RawClient raw(f.server.port());
  raw.send_line(R"({"type":"hello","seq":1,"version":99})");
  std::string reply = raw.read_line();
  auto j = nlohmann::json::parse(reply);
  EXPECT_EQ(j["type"], "error");
  EXPECT_EQ(j["code"], "UNSUPPORTED_VERSION");
  // server closes the session afterwards
  raw.send_line(R"({"type":"hello","seq":2,"version":1})");
  EXPECT_EQ(raw.read_line(), "");
}

TEST(Wire, SequenceEchoedInAcks) {
  ServerFixture f;
  RawClient raw(f.server.port());
  raw.send_line(R"({"type":"hello","seq":41,"version":1})");
  auto j = nlohmann::json::parse(raw.read_line());
  EXPECT_EQ(j["type"], "hello_ack");
  EXPECT_EQ(j["seq"], 41);
}

TEST(Wire, MalformedLinesGetBadMessageAndServerSurvives) {
  ServerFixture f;
  RawClient raw(f.server.port());
  Rng rng(99);
  const int lines = 2000;
  for (int i = 0; i < lines; ++i) {
    std::string junk;
    int kind = static_cast<int>(rng.below(5));
    if (kind == 0) {
      int len = 1 + static_cast<int>(rng.below(60));
      for (int k = 0; k < len; ++k) {
        char ch = static_cast<char>(32 + rng.below(94));
        if (ch == '\n') ch = ' ';
        junk += ch;
      }
    } else if (kind == 1) {
      junk = R"({"type":"step")";  // truncated JSON
    } else if (kind == 2) {
      junk = "[1,2,3]";  // valid JSON, not an object
    } else if (kind == 3) {
      junk = R"({"seq":1})";  // missing type
    } else {
      junk = R"({"type":"warp","seq":5})";  // unknown type
    }
    raw.send_line(junk);
    std::string reply = raw.read_line();
    ASSERT_FALSE(reply.empty()) << "server went silent at line " << i;
    auto j = nlohmann::json::parse(reply, nullptr, false);
    ASSERT_FALSE(j.is_discarded());
    EXPECT_EQ(j["type"], "error");
    EXPECT_EQ(j["code"], "BAD_MESSAGE");
  }
  // the same session still speaks the protocol
  raw.send_line(R"({"type":"hello","seq":123456,"version":1})");
  auto ok = nlohmann::json::parse(raw.read_line());
  EXPECT_EQ(ok["type"], "hello_ack");
}

TEST(Wire, ServerGoneYieldsTransportErrorNotHang) {
  auto server = std::make_unique<ServerFixture>();
  auto env = std::make_unique<RemoteEnv>("127.0.0.1", server->server.port(), 2.0);
  EnvConfig cfg = cf_env();
  env->reset(cfg, 1);
  server.reset();  // stop and join mid-episode
  AgentAction a;
  EXPECT_THROW(env->step(a), TransportError);
}

TEST(Wire, ConnectionRefused) {
  EXPECT_THROW(RemoteEnv("127.0.0.1", 1, 1.0), TransportError);
}

TEST(Wire, OneSessionAtATimeThenNextClient) {
  ServerFixture f;
  {
    RemoteEnv first("127.0.0.1", f.server.port());
    EnvConfig cfg = cf_env();
    first.reset(cfg, 5);
  }  // disconnect discards the simulation
  RemoteEnv second("127.0.0.1", f.server.port());
  AgentAction a;
  try {
    second.step(a);
    FAIL() << "fresh session must not inherit an episode";
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.code, "NO_EPISODE");
  }
}

TEST(Wire, EndpointParsing) {
  auto [host, port] = parse_endpoint("127.0.0.1:7777");
  EXPECT_EQ(host, "127.0.0.1");
  EXPECT_EQ(port, 7777);
  EXPECT_THROW(parse_endpoint("nocolon"), std::invalid_argument);
  EXPECT_THROW(parse_endpoint("x:99999"), std::invalid_argument);
}
