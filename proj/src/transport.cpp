#include "uagan/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <thread>

#include "uagan/error.hpp"

namespace uagan {
namespace {

using Clock = std::chrono::steady_clock;

struct Queue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Bytes> frames;
  bool closed = false;
};

class InprocChannel : public Channel {
 public:
  InprocChannel(std::shared_ptr<Queue> in, std::shared_ptr<Queue> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~InprocChannel() override { close(); }

  void send(const Bytes& frame) override {
    {
      std::lock_guard lock(out_->mu);
      if (out_->closed) throw TransportError("inproc channel closed");
      out_->frames.push_back(frame);
    }
    out_->cv.notify_one();
  }

  std::optional<Bytes> recv(Millis timeout) override {
    std::unique_lock lock(in_->mu);
    if (!in_->cv.wait_for(lock, timeout,
                          [&] { return !in_->frames.empty() || in_->closed; })) {
      return std::nullopt;
    }
    if (in_->frames.empty()) throw TransportError("inproc peer closed");
    Bytes frame = std::move(in_->frames.front());
    in_->frames.pop_front();
    return frame;
  }

  void close() override {
    for (auto* q : {in_.get(), out_.get()}) {
      {
        std::lock_guard lock(q->mu);
        q->closed = true;
      }
      q->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Queue> in_;
  std::shared_ptr<Queue> out_;
};

class LoopbackChannel : public Channel {
 public:
  LoopbackChannel(FrameHandler handler, std::vector<Bytes> initial)
      : handler_(std::move(handler)),
        pending_(std::make_move_iterator(initial.begin()),
                 std::make_move_iterator(initial.end())) {}

  void send(const Bytes& frame) override {
    if (closed_) throw TransportError("loopback channel closed");
    for (auto& reply : handler_(frame)) pending_.push_back(std::move(reply));
  }

  std::optional<Bytes> recv(Millis) override {
    if (pending_.empty()) {
      if (closed_) throw TransportError("loopback channel closed");
      return std::nullopt;
    }
    Bytes frame = std::move(pending_.front());
    pending_.pop_front();
    return frame;
  }

  void close() override { closed_ = true; }

 private:
  FrameHandler handler_;
  std::deque<Bytes> pending_;
  bool closed_ = false;
};

class RecordingChannel : public Channel {
 public:
  RecordingChannel(std::unique_ptr<Channel> inner, std::shared_ptr<Transcript> t)
      : inner_(std::move(inner)), transcript_(std::move(t)) {}

  void send(const Bytes& frame) override {
    transcript_->record(frame);
    inner_->send(frame);
  }
  std::optional<Bytes> recv(Millis timeout) override { return inner_->recv(timeout); }
  void close() override { inner_->close(); }

 private:
  std::unique_ptr<Channel> inner_;
  std::shared_ptr<Transcript> transcript_;
};

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  ~TcpChannel() override { close(); }

  void send(const Bytes& frame) override {
    if (fd_ < 0) throw TransportError("tcp channel closed");
    std::size_t sent = 0;
    while (sent < frame.size()) {
      const ssize_t n = ::send(fd_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_text("tcp send"));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::optional<Bytes> recv(Millis timeout) override {
    const auto deadline = Clock::now() + timeout;
    for (;;) {
      if (auto frame = take_frame()) return frame;
      if (fd_ < 0 || eof_) throw TransportError("tcp peer closed");
      const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now());
      if (left.count() <= 0 && buf_.empty()) return std::nullopt;
      // A frame that has started arriving is always read to the end.
      const int wait = buf_.empty() ? static_cast<int>(left.count()) : -1;
      pollfd p{fd_, POLLIN, 0};
      const int r = ::poll(&p, 1, wait);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_text("tcp poll"));
      }
      if (r == 0) return std::nullopt;
      std::uint8_t chunk[1 << 16];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_text("tcp recv"));
      }
      if (n == 0) {
        eof_ = true;
        if (!buf_.empty()) throw TransportError("tcp peer closed mid-frame");
        continue;
      }
      buf_.insert(buf_.end(), chunk, chunk + n);
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  std::optional<Bytes> take_frame() {
    if (buf_.size() < kFrameHeaderSize) return std::nullopt;
    const FrameHeader h = decode_frame_header(buf_);
    const std::size_t total = kFrameHeaderSize + h.payload_size;
    if (buf_.size() < total) return std::nullopt;
    Bytes frame(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(total));
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(total));
    return frame;
  }

  int fd_;
  bool eof_ = false;
  Bytes buf_;
};

sockaddr_in resolve(const TcpAddress& addr) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(addr.port);
  if (::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) == 1) return sa;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(addr.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw TransportError("cannot resolve host '" + addr.host + "'");
  }
  sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return sa;
}

}  // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> inproc_pair() {
  auto a = std::make_shared<Queue>();
  auto b = std::make_shared<Queue>();
  return {std::make_unique<InprocChannel>(a, b), std::make_unique<InprocChannel>(b, a)};
}

std::unique_ptr<Channel> loopback_channel(FrameHandler handler, std::vector<Bytes> initial) {
  return std::make_unique<LoopbackChannel>(std::move(handler), std::move(initial));
}

void Transcript::record(const Bytes& frame) {
  std::lock_guard lock(mu_);
  frames_.push_back(frame);
}

std::vector<Bytes> Transcript::frames() const {
  std::lock_guard lock(mu_);
  return frames_;
}

std::unique_ptr<Channel> recording_channel(std::unique_ptr<Channel> inner,
                                           std::shared_ptr<Transcript> transcript) {
  return std::make_unique<RecordingChannel>(std::move(inner), std::move(transcript));
}

FrameHandler recording_handler(FrameHandler inner, std::shared_ptr<Transcript> transcript) {
  return [inner = std::move(inner), transcript = std::move(transcript)](const Bytes& in) {
    auto out = inner(in);
    for (const auto& f : out) transcript->record(f);
    return out;
  };
}

TcpAddress parse_tcp_address(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw ConfigError("tcp address must be host:port, got '" + text + "'");
  }
  TcpAddress addr;
  if (colon > 0) addr.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  char* end = nullptr;
  const unsigned long p = std::strtoul(port.c_str(), &end, 10);
  if (*end != '\0' || p > 65535) throw ConfigError("bad tcp port '" + port + "'");
  addr.port = static_cast<std::uint16_t>(p);
  return addr;
}

TcpListener::TcpListener(const TcpAddress& addr) {
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) throw TransportError(errno_text("socket"));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in sa = resolve(addr);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
    const std::string msg = errno_text("bind");
    ::close(fd_);
    throw TransportError(msg + " (" + addr.host + ":" + std::to_string(addr.port) + ")");
  }
  if (::listen(fd_, 64) != 0) {
    const std::string msg = errno_text("listen");
    ::close(fd_);
    throw TransportError(msg);
  }
  socklen_t len = sizeof sa;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len);
  port_ = ntohs(sa.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Channel> TcpListener::accept(Millis timeout) {
  pollfd p{fd_, POLLIN, 0};
  int r;
  do {
    r = ::poll(&p, 1, static_cast<int>(timeout.count()));
  } while (r < 0 && errno == EINTR);
  if (r < 0) throw TransportError(errno_text("poll"));
  if (r == 0) throw TimeoutError("no site connected within " + std::to_string(timeout.count()) + " ms");
  const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) throw TransportError(errno_text("accept"));
  return std::make_unique<TcpChannel>(fd);
}

std::unique_ptr<Channel> tcp_connect(const TcpAddress& addr, Millis timeout) {
  const sockaddr_in sa = resolve(addr);
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw TransportError(errno_text("socket"));
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) == 0) {
      return std::make_unique<TcpChannel>(fd);
    }
    const int err = errno;
    ::close(fd);
    if ((err != ECONNREFUSED && err != EINTR) || Clock::now() >= deadline) {
      errno = err;
      throw TransportError(errno_text("connect") + " (" + addr.host + ":" +
                           std::to_string(addr.port) + ")");
    }
    std::this_thread::sleep_for(Millis(20));
  }
}

}  // namespace uagan
