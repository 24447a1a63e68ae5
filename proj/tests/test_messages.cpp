#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "test_util.hpp"
#include "uagan/error.hpp"
#include "uagan/messages.hpp"

using namespace uagan;

namespace {

Bytes load_hex(const std::string& name) {
  std::string hex = testutil::read_file(testutil::fixture("wire/" + name + ".hex"));
  while (!hex.empty() && (hex.back() == '\n' || hex.back() == '\r')) hex.pop_back();
  Bytes out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoul(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

// Values the fixture writer serialised.
std::vector<std::pair<std::string, Message>> golden_values() {
  return {
      {"round_control_begin", RoundControl{0, Directive::kBegin}},
      {"round_control_shutdown", RoundControl{42, Directive::kShutdown}},
      {"syn_batch", SynBatch{3, 7, Tensor::matrix({{1.5, -2.0}, {0.25, 1e-3}}), std::nullopt}},
      {"syn_batch_labels",
       SynBatch{3, 8, Tensor::matrix({{0.5, 0.5}, {-1.0, 4.0}}), std::vector<int>{1, 0}}},
      {"feedback",
       Feedback{3, 7, 2, {0.25, 0.75}, Tensor::matrix({{0.5, -0.5}, {1.0, 2.0}}), 1.375}},
      {"site_hello", SiteHello{1, 2500, {}}},
      {"site_hello_counts", SiteHello{0, 15, {{0, 10}, {3, 5}}}},
  };
}

std::uint64_t decode_offset(const Bytes& b) {
  try {
    decode_message(b);
  } catch (const DecodeError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "expected DecodeError";
  return ~0ull;
}

}  // namespace

TEST(WireGolden, DecodeAndReencodeBitExact) {
  for (const auto& [name, value] : golden_values()) {
    const Bytes bytes = load_hex(name);
    ASSERT_FALSE(bytes.empty()) << name;
    EXPECT_EQ(decode_message(bytes), value) << name;
    EXPECT_EQ(encode_message(value), bytes) << name;
  }
}

TEST(WireGolden, RoundControlBeginIsTwentyThreeBytes) {
  const Bytes b = encode_message(RoundControl{0, Directive::kBegin});
  ASSERT_EQ(b.size(), kFrameHeaderSize + 9);
  const Bytes want{'U', 'A', 'F', 'G', 1, 3, 9, 0, 0, 0, 0, 0, 0, 0,
                   0,   0,   0,   0,   0, 0, 0, 0, 0};
  EXPECT_EQ(b, want);
}

TEST(WireGolden, EveryTagCovered) {
  std::set<MessageTag> tags;
  for (const auto& [name, value] : golden_values()) tags.insert(message_tag(value));
  EXPECT_EQ(tags.size(), 4u);
}

TEST(Wire, RoundTripRandomMessages) {
  auto rng = make_rng(3);
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = uniform_index(rng, 20), dim = 1 + uniform_index(rng, 4);
    Tensor x = testutil::random_tensor({m, dim}, rng, -1e6, 1e6);
    std::vector<Message> msgs;
    std::optional<std::vector<int>> labels;
    if (t % 2) {
      labels.emplace();
      for (std::size_t i = 0; i < m; ++i) labels->push_back(static_cast<int>(uniform_index(rng, 10)));
    }
    msgs.push_back(SynBatch{static_cast<std::uint64_t>(t), rng(), x, labels});
    std::vector<double> preds(m);
    for (double& p : preds) p = uniform01(rng);
    msgs.push_back(Feedback{rng(), rng(), rng() % 100, preds, x, uniform(rng, -5, 5)});
    msgs.push_back(RoundControl{rng(), static_cast<Directive>(t % 3)});
    SiteHello h{rng() % 50, rng(), {}};
    for (int c = 0; c < t % 5; ++c) h.class_counts[rng() % 1000] = rng();
    msgs.push_back(h);
    for (const auto& msg : msgs) {
      const Bytes b = encode_message(msg);
      EXPECT_EQ(decode_message(b), msg);
      EXPECT_EQ(encode_message(decode_message(b)), b);
    }
  }
}

TEST(Wire, EveryTruncationIsAnError) {
  for (const auto& [name, value] : golden_values()) {
    const Bytes full = encode_message(value);
    for (std::size_t len = 0; len < full.size(); ++len) {
      Bytes cut(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(len));
      EXPECT_THROW(decode_message(cut), DecodeError) << name << " len " << len;
    }
  }
}

TEST(Wire, ErrorOffsets) {
  Bytes b = encode_message(RoundControl{5, Directive::kEnd});
  Bytes bad = b;
  bad[1] = 'X';
  EXPECT_EQ(decode_offset(bad), 0u);
  bad = b;
  bad[4] = 2;
  EXPECT_EQ(decode_offset(bad), 4u);
  bad = b;
  bad[5] = 9;
  EXPECT_EQ(decode_offset(bad), 5u);
  bad = b;
  bad.back() = 7;  // directive byte
  EXPECT_EQ(decode_offset(bad), b.size() - 1);
  bad = b;
  bad.push_back(0);
  EXPECT_THROW(decode_message(bad), DecodeError);
}

TEST(Wire, HeaderDecoding) {
  Bytes b = encode_message(SiteHello{2, 9, {}});
  auto h = decode_frame_header(std::span<const std::uint8_t>(b).first(kFrameHeaderSize));
  EXPECT_EQ(h.tag, MessageTag::kSiteHello);
  EXPECT_EQ(h.payload_size, b.size() - kFrameHeaderSize);
}

TEST(Wire, LabelCountMustMatchRows) {
  SynBatch s{1, 1, Tensor::matrix({{1, 2}}), std::vector<int>{0, 1}};
  EXPECT_THROW(encode_message(s), Error);
}
