#pragma once

// Lossless baseline: zlib-wrapped DEFLATE (RFC 1950 over RFC 1951).

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace semcomp::codec {

using Bytes = std::vector<std::uint8_t>;

class CodecLevel {
 public:
  static constexpr int kLeast = 0;
  static constexpr int kMost = 9;

  /// Throws Error(InvalidLevel) outside [0, 9].
  explicit CodecLevel(int level);

  int value() const noexcept { return level_; }
  friend bool operator==(CodecLevel, CodecLevel) = default;

 private:
  int level_;
};

struct CodecResult {
  Bytes compressed;
  std::uint64_t original_len = 0;
  CodecLevel level{CodecLevel::kMost};
};

CodecResult deflate(std::span<const std::uint8_t> data, CodecLevel level);
CodecResult deflate(std::string_view data, CodecLevel level);

/// Throws Error(CorruptStream) on malformed, truncated or checksum-failing
/// input, and on trailing bytes after the stream end.
Bytes inflate(std::span<const std::uint8_t> compressed);

}  // namespace semcomp::codec
