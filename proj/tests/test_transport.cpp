#include <gtest/gtest.h>

#include <thread>

#include "uagan/error.hpp"
#include "uagan/transport.hpp"

using namespace uagan;
using namespace std::chrono_literals;

namespace {

Bytes sample_frame(std::uint64_t round) {
  return encode_message(SynBatch{round, round + 1, Tensor::matrix({{1.0, 2.0}, {3.0, 4.0}}),
                                 std::nullopt});
}

// Echo every frame back, then a second copy, from a peer thread.
void echo_twice(Channel& peer, std::size_t frames) {
  for (std::size_t i = 0; i < frames; ++i) {
    auto f = peer.recv(5000ms);
    ASSERT_TRUE(f);
    peer.send(*f);
    peer.send(*f);
  }
}

}  // namespace

TEST(Inproc, SendThenRecv) {
  auto [a, b] = inproc_pair();
  const Bytes f = sample_frame(3);
  a->send(f);
  auto got = b->recv(1000ms);
  ASSERT_TRUE(got);
  EXPECT_EQ(decode_message(*got), decode_message(f));
}

TEST(Inproc, RecvTimesOut) {
  auto [a, b] = inproc_pair();
  EXPECT_FALSE(b->recv(20ms).has_value());
}

TEST(Inproc, ClosedPeer) {
  auto [a, b] = inproc_pair();
  a->send(sample_frame(1));
  a->close();
  EXPECT_TRUE(b->recv(100ms).has_value());
  EXPECT_THROW(b->recv(100ms), TransportError);
}

TEST(Inproc, OrderedAcrossThreads) {
  auto [a, b] = inproc_pair();
  std::thread t([&, &b = b] { echo_twice(*b, 50); });
  for (std::uint64_t i = 0; i < 50; ++i) a->send(sample_frame(i));
  for (std::uint64_t i = 0; i < 50; ++i) {
    for (int k = 0; k < 2; ++k) {
      auto f = a->recv(5000ms);
      ASSERT_TRUE(f);
      EXPECT_EQ(*f, sample_frame(i));
    }
  }
  t.join();
}

TEST(Loopback, HandlerRunsInline) {
  std::vector<Bytes> seen;
  auto ch = loopback_channel(
      [&](const Bytes& f) {
        seen.push_back(f);
        return std::vector<Bytes>{f, f};
      },
      {sample_frame(0)});
  auto first = ch->recv(0ms);
  ASSERT_TRUE(first);
  EXPECT_EQ(*first, sample_frame(0));
  EXPECT_FALSE(ch->recv(0ms));
  ch->send(sample_frame(5));
  EXPECT_EQ(seen.size(), 1u);
  EXPECT_EQ(*ch->recv(0ms), sample_frame(5));
  EXPECT_EQ(*ch->recv(0ms), sample_frame(5));
}

TEST(Recording, CapturesSentFrames) {
  auto transcript = std::make_shared<Transcript>();
  auto [a, b] = inproc_pair();
  auto rec = recording_channel(std::move(a), transcript);
  rec->send(sample_frame(1));
  rec->send(sample_frame(2));
  EXPECT_EQ(transcript->frames(), (std::vector<Bytes>{sample_frame(1), sample_frame(2)}));
  EXPECT_TRUE(b->recv(100ms));

  auto t2 = std::make_shared<Transcript>();
  auto handler = recording_handler([](const Bytes& f) { return std::vector<Bytes>{f}; }, t2);
  handler(sample_frame(7));
  EXPECT_EQ(t2->frames(), std::vector<Bytes>{sample_frame(7)});
}

TEST(TcpAddressParse, HostPort) {
  auto a = parse_tcp_address("127.0.0.1:5555");
  EXPECT_EQ(a.host, "127.0.0.1");
  EXPECT_EQ(a.port, 5555);
  EXPECT_THROW(parse_tcp_address("nohost"), ConfigError);
  EXPECT_THROW(parse_tcp_address("h:99999"), ConfigError);
  EXPECT_THROW(parse_tcp_address("h:abc"), ConfigError);
}

TEST(Tcp, LoopbackSendRecv) {
  TcpListener listener({"127.0.0.1", 0});
  ASSERT_NE(listener.port(), 0);
  std::unique_ptr<Channel> client;
  std::thread t([&] { client = tcp_connect({"127.0.0.1", listener.port()}, 5000ms); });
  auto server = listener.accept(5000ms);
  t.join();
  const Bytes f = sample_frame(9);
  client->send(f);
  auto got = server->recv(5000ms);
  ASSERT_TRUE(got);
  EXPECT_EQ(*got, f);
  EXPECT_EQ(decode_message(*got), decode_message(f));
  server->send(f);
  EXPECT_EQ(*client->recv(5000ms), f);
}

TEST(Tcp, LargeFramesAndOrder) {
  TcpListener listener({"127.0.0.1", 0});
  std::unique_ptr<Channel> client;
  std::thread t([&] { client = tcp_connect({"127.0.0.1", listener.port()}, 5000ms); });
  auto server = listener.accept(5000ms);
  t.join();
  Tensor big({4096, 2});
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<double>(i) * 0.5;
  std::thread echo([&] { echo_twice(*server, 10); });
  for (std::uint64_t r = 0; r < 10; ++r) {
    client->send(encode_message(SynBatch{r, r, big, std::nullopt}));
  }
  for (std::uint64_t r = 0; r < 10; ++r) {
    for (int k = 0; k < 2; ++k) {
      auto f = client->recv(5000ms);
      ASSERT_TRUE(f);
      auto msg = std::get<SynBatch>(decode_message(*f));
      EXPECT_EQ(msg.round, r);
      EXPECT_EQ(msg.samples, big);
    }
  }
  echo.join();
}

TEST(Tcp, PeerCloseIsTransportError) {
  TcpListener listener({"127.0.0.1", 0});
  std::unique_ptr<Channel> client;
  std::thread t([&] { client = tcp_connect({"127.0.0.1", listener.port()}, 5000ms); });
  auto server = listener.accept(5000ms);
  t.join();
  client->close();
  EXPECT_THROW(
      {
        for (int i = 0; i < 100; ++i) server->recv(100ms);
      },
      TransportError);
}

TEST(Tcp, AcceptTimesOut) {
  TcpListener listener({"127.0.0.1", 0});
  EXPECT_THROW(listener.accept(50ms), TimeoutError);
}

TEST(Tcp, RecvTimesOut) {
  TcpListener listener({"127.0.0.1", 0});
  std::unique_ptr<Channel> client;
  std::thread t([&] { client = tcp_connect({"127.0.0.1", listener.port()}, 5000ms); });
  auto server = listener.accept(5000ms);
  t.join();
  EXPECT_FALSE(server->recv(30ms).has_value());
}

TEST(Tcp, ConnectRefusedEventuallyFails) {
  std::uint16_t port;
  {
    TcpListener l({"127.0.0.1", 0});
    port = l.port();
  }
  EXPECT_THROW(tcp_connect({"127.0.0.1", port}, 200ms), TransportError);
}

TEST(Tcp, BindFailure) {
  TcpListener first({"127.0.0.1", 0});
  EXPECT_THROW(TcpListener({"127.0.0.1", first.port()}), TransportError);
}
