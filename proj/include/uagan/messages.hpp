#pragma once

// Wire messages exchanged between the center and the sites.
//
// Frame: "UAFG", u8 version (1), u8 tag, u64 payload length, payload.
// Integers and reals are little-endian; arrays carry a u64 count prefix.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "uagan/tensor.hpp"

namespace uagan {

using Bytes = std::vector<std::uint8_t>;

inline constexpr char kWireMagic[4] = {'U', 'A', 'F', 'G'};
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 14;

enum class MessageTag : std::uint8_t {
  kSynBatch = 1,
  kFeedback = 2,
  kRoundControl = 3,
  kSiteHello = 4,
};

struct SynBatch {
  std::uint64_t round = 0;
  std::uint64_t batch_id = 0;
  Tensor samples;                         // m x dim
  std::optional<std::vector<int>> labels; // conditional runs only

  bool operator==(const SynBatch&) const = default;
};

struct Feedback {
  std::uint64_t round = 0;
  std::uint64_t batch_id = 0;
  std::uint64_t site_id = 0;
  std::vector<double> predictions;  // m
  Tensor gradients;                 // m x dim
  // Mean local discriminator objective over this round's discriminator steps.
  double disc_loss = 0.0;

  bool operator==(const Feedback&) const = default;
};

enum class Directive : std::uint8_t { kBegin = 0, kEnd = 1, kShutdown = 2 };

struct RoundControl {
  std::uint64_t round = 0;
  Directive directive = Directive::kBegin;

  bool operator==(const RoundControl&) const = default;
};

struct SiteHello {
  std::uint64_t site_id = 0;
  std::uint64_t num_samples = 0;                       // n_j
  std::map<std::uint64_t, std::uint64_t> class_counts; // empty when unconditional

  bool operator==(const SiteHello&) const = default;
};

using Message = std::variant<SynBatch, Feedback, RoundControl, SiteHello>;

MessageTag message_tag(const Message& msg);
std::string message_tag_name(MessageTag tag);

Bytes encode_message(const Message& msg);
// Throws DecodeError (with the byte offset) on bad magic, version, tag,
// length or truncated payload, and on trailing bytes after the frame.
Message decode_message(std::span<const std::uint8_t> frame);

// Header of a frame whose first kFrameHeaderSize bytes are `header`;
// returns the tag and payload length. Used by stream transports.
struct FrameHeader {
  MessageTag tag;
  std::uint64_t payload_size;
};
FrameHeader decode_frame_header(std::span<const std::uint8_t> header);

}  // namespace uagan
