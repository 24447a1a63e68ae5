#pragma once

// Reliable, ordered, frame-preserving duplex channels between the center and
// the sites: in-process queues, a single-threaded loopback that runs the
// peer's handler inline, and TCP.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uagan/messages.hpp"

namespace uagan {

using Millis = std::chrono::milliseconds;

class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const Bytes& frame) = 0;
  // Next frame, or nullopt when `timeout` passes first. Throws
  // TransportError when the peer has closed and nothing is buffered.
  virtual std::optional<Bytes> recv(Millis timeout) = 0;
  virtual void close() = 0;
};

// Two connected in-process endpoints.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> inproc_pair();

// Frames sent through a loopback channel are handed to `handler` on the
// caller's thread; whatever it returns is queued for recv(). recv() never
// blocks. `initial` frames are readable before anything is sent.
using FrameHandler = std::function<std::vector<Bytes>(const Bytes&)>;
std::unique_ptr<Channel> loopback_channel(FrameHandler handler,
                                          std::vector<Bytes> initial = {});

// Thread-safe log of frames, used to audit what leaves a site.
class Transcript {
 public:
  void record(const Bytes& frame);
  std::vector<Bytes> frames() const;

 private:
  mutable std::mutex mu_;
  std::vector<Bytes> frames_;
};

// Copies every sent frame into `transcript` before forwarding it.
std::unique_ptr<Channel> recording_channel(std::unique_ptr<Channel> inner,
                                           std::shared_ptr<Transcript> transcript);
// Same for the frames a loopback handler emits.
FrameHandler recording_handler(FrameHandler inner, std::shared_ptr<Transcript> transcript);

struct TcpAddress {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 lets the listener pick a free port
};
// "host:port"
TcpAddress parse_tcp_address(const std::string& text);

class TcpListener {
 public:
  explicit TcpListener(const TcpAddress& addr);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  // Throws TimeoutError when nobody connects in time.
  std::unique_ptr<Channel> accept(Millis timeout);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Retries refused connections until `timeout` so sites may start before the
// center is listening.
std::unique_ptr<Channel> tcp_connect(const TcpAddress& addr, Millis timeout);

}  // namespace uagan
