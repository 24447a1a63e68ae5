#include "uagan/messages.hpp"

#include <cstring>

#include "uagan/bytes.hpp"
#include "uagan/error.hpp"

namespace uagan {
namespace {

// Payload offsets are reported relative to the whole frame.
constexpr std::uint64_t kPayloadBase = kFrameHeaderSize;

void put_matrix(ByteWriter& w, const Tensor& t) {
  w.u64(t.rows());
  w.u64(t.cols());
  for (double v : t.data()) w.f64(v);
}

Tensor get_matrix(ByteReader& r) {
  const std::uint64_t rows = r.count(0);
  const std::uint64_t at = r.offset();
  const std::uint64_t cols = r.u64();
  if (cols != 0 && rows > r.remaining() / 8 / cols) {
    throw DecodeError("matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " exceeds payload",
                      at);
  }
  std::vector<double> data(rows * cols);
  for (double& v : data) v = r.f64();
  return Tensor({rows, cols}, std::move(data));
}

void put_reals(ByteWriter& w, const std::vector<double>& v) {
  w.u64(v.size());
  for (double x : v) w.f64(x);
}

std::vector<double> get_reals(ByteReader& r) {
  std::vector<double> v(r.count(8));
  for (double& x : v) x = r.f64();
  return v;
}

void encode_payload(ByteWriter& w, const SynBatch& m) {
  if (m.labels && m.labels->size() != m.samples.rows()) {
    throw ShapeError("syn batch: " + std::to_string(m.labels->size()) + " labels for " +
                     std::to_string(m.samples.rows()) + " rows");
  }
  w.u64(m.round);
  w.u64(m.batch_id);
  put_matrix(w, m.samples);
  w.u8(m.labels ? 1 : 0);
  if (m.labels) {
    w.u64(m.labels->size());
    for (int y : *m.labels) w.i64(y);
  }
}

void encode_payload(ByteWriter& w, const Feedback& m) {
  w.u64(m.round);
  w.u64(m.batch_id);
  w.u64(m.site_id);
  put_reals(w, m.predictions);
  put_matrix(w, m.gradients);
  w.f64(m.disc_loss);
}

void encode_payload(ByteWriter& w, const RoundControl& m) {
  w.u64(m.round);
  w.u8(static_cast<std::uint8_t>(m.directive));
}

void encode_payload(ByteWriter& w, const SiteHello& m) {
  w.u64(m.site_id);
  w.u64(m.num_samples);
  w.u64(m.class_counts.size());
  for (const auto& [label, n] : m.class_counts) {
    w.u64(label);
    w.u64(n);
  }
}

SynBatch decode_syn_batch(ByteReader& r) {
  SynBatch m;
  m.round = r.u64();
  m.batch_id = r.u64();
  m.samples = get_matrix(r);
  const std::uint64_t at = r.offset();
  const std::uint8_t has_labels = r.u8();
  if (has_labels > 1) throw DecodeError("bad label flag " + std::to_string(has_labels), at);
  if (has_labels) {
    std::vector<int> labels(r.count(8));
    for (int& y : labels) {
      const std::uint64_t pos = r.offset();
      const std::int64_t v = r.i64();
      if (v < 0 || v > INT32_MAX) throw DecodeError("label out of range", pos);
      y = static_cast<int>(v);
    }
    m.labels = std::move(labels);
  }
  return m;
}

Feedback decode_feedback(ByteReader& r) {
  Feedback m;
  m.round = r.u64();
  m.batch_id = r.u64();
  m.site_id = r.u64();
  m.predictions = get_reals(r);
  m.gradients = get_matrix(r);
  m.disc_loss = r.f64();
  return m;
}

RoundControl decode_round_control(ByteReader& r) {
  RoundControl m;
  m.round = r.u64();
  const std::uint64_t at = r.offset();
  const std::uint8_t d = r.u8();
  if (d > static_cast<std::uint8_t>(Directive::kShutdown)) {
    throw DecodeError("unknown directive " + std::to_string(d), at);
  }
  m.directive = static_cast<Directive>(d);
  return m;
}

SiteHello decode_site_hello(ByteReader& r) {
  SiteHello m;
  m.site_id = r.u64();
  m.num_samples = r.u64();
  const std::uint64_t n = r.count(16);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t at = r.offset();
    const std::uint64_t label = r.u64();
    const std::uint64_t count = r.u64();
    if (!m.class_counts.emplace(label, count).second) {
      throw DecodeError("duplicate class " + std::to_string(label), at);
    }
  }
  return m;
}

}  // namespace

MessageTag message_tag(const Message& msg) {
  return static_cast<MessageTag>(msg.index() + 1);
}

std::string message_tag_name(MessageTag tag) {
  switch (tag) {
    case MessageTag::kSynBatch: return "SynBatch";
    case MessageTag::kFeedback: return "Feedback";
    case MessageTag::kRoundControl: return "RoundControl";
    case MessageTag::kSiteHello: return "SiteHello";
  }
  return "unknown(" + std::to_string(static_cast<int>(tag)) + ")";
}

Bytes encode_message(const Message& msg) {
  ByteWriter payload;
  std::visit([&](const auto& m) { encode_payload(payload, m); }, msg);
  ByteWriter w;
  w.raw(std::string_view(kWireMagic, 4));
  w.u8(kWireVersion);
  w.u8(static_cast<std::uint8_t>(message_tag(msg)));
  w.u64(payload.size());
  w.raw(payload.bytes());
  return w.take();
}

FrameHeader decode_frame_header(std::span<const std::uint8_t> header) {
  ByteReader r(header.first(std::min(header.size(), kFrameHeaderSize)));
  const std::string magic = r.str(4);
  if (std::memcmp(magic.data(), kWireMagic, 4) != 0) throw DecodeError("bad magic", 0);
  const std::uint8_t version = r.u8();
  if (version != kWireVersion) {
    throw DecodeError("unsupported version " + std::to_string(version), 4);
  }
  const std::uint8_t tag = r.u8();
  if (tag < 1 || tag > 4) throw DecodeError("unknown message tag " + std::to_string(tag), 5);
  const std::uint64_t len = r.u64();
  return {static_cast<MessageTag>(tag), len};
}

Message decode_message(std::span<const std::uint8_t> frame) {
  const FrameHeader h = decode_frame_header(frame);
  const std::size_t available = frame.size() - kFrameHeaderSize;
  if (h.payload_size > available) {
    throw DecodeError("truncated frame: payload length " + std::to_string(h.payload_size) +
                          ", have " + std::to_string(available),
                      frame.size());
  }
  if (h.payload_size < available) {
    throw DecodeError("trailing bytes after frame", kFrameHeaderSize + h.payload_size);
  }
  ByteReader r(frame.subspan(kFrameHeaderSize), kPayloadBase);
  Message msg;
  switch (h.tag) {
    case MessageTag::kSynBatch: msg = decode_syn_batch(r); break;
    case MessageTag::kFeedback: msg = decode_feedback(r); break;
    case MessageTag::kRoundControl: msg = decode_round_control(r); break;
    case MessageTag::kSiteHello: msg = decode_site_hello(r); break;
  }
  if (!r.done()) throw DecodeError("payload longer than its fields", r.offset());
  return msg;
}

}  // namespace uagan
