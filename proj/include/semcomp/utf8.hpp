#pragma once

#include <string>
#include <string_view>

namespace semcomp::utf8 {

bool is_valid(std::string_view bytes) noexcept;

/// Decode to code points. Each byte of a malformed sequence becomes one
/// code point in the private range U+DC80..U+DCFF so distinct bad bytes stay
/// distinct.
std::u32string decode_lossy(std::string_view bytes);

}  // namespace semcomp::utf8
