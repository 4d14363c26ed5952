#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace plp::image {

using Bytes = std::vector<std::uint8_t>;

struct Size {
    int width = 0;
    int height = 0;
};

// Throws DecodeError(index) when the bytes are not a decodable image.
Size probe_size(std::span<const std::uint8_t> bytes, std::size_t index = 0);

// Re-encoded JPEG with the longest side capped at max_side, for LLM payloads.
Bytes encode_for_llm(std::span<const std::uint8_t> bytes, int max_side = 1024);

inline constexpr int kClipInputSize = 224;
inline constexpr float kClipMean[3] = {0.48145466f, 0.4578275f, 0.40821073f};
inline constexpr float kClipStd[3] = {0.26862954f, 0.26130258f, 0.27577711f};

// RGB decode, bicubic resize of the shorter side to 224, center crop,
// [0,1] scaling and channelwise normalization. Returns CHW floats (3*224*224).
std::vector<float> clip_preprocess(std::span<const std::uint8_t> bytes, std::size_t index = 0);

std::string base64_encode(std::span<const std::uint8_t> bytes);
Bytes base64_decode(std::string_view text);

// Synthetic PNG carrying its class label in a tEXt chunk. Used by the mock
// backend, which reads the label back with mock_label().
Bytes make_mock_png(const std::string& class_label, const std::string& item_id);

// Label stored by make_mock_png; nullopt when the chunk is absent.
// Throws DecodeError(index) when the bytes are not a well-formed PNG.
std::optional<std::string> mock_label(std::span<const std::uint8_t> bytes, std::size_t index = 0);

}  // namespace plp::image
