#include "semcomp/codec.hpp"

#include <zlib.h>

#include <limits>
#include <string>

#include "semcomp/error.hpp"

namespace semcomp::codec {

CodecLevel::CodecLevel(int level) : level_(level) {
  if (level < 0 || level > 9) {
    throw Error(ErrorCode::InvalidLevel, "codec level " + std::to_string(level) + " not in [0, 9]");
  }
}

CodecResult deflate(std::span<const std::uint8_t> data, CodecLevel level) {
  if (data.size() > std::numeric_limits<uLong>::max()) {
    throw Error(ErrorCode::IoFailure, "input too large for a single zlib call");
  }
  uLongf bound = compressBound(static_cast<uLong>(data.size()));
  Bytes out(bound);
  const int rc = compress2(out.data(), &bound, data.data(), static_cast<uLong>(data.size()),
                           level.value());
  if (rc != Z_OK) throw Error(ErrorCode::CorruptStream, "compress2 failed with code " + std::to_string(rc));
  out.resize(bound);
  return {std::move(out), data.size(), level};
}

CodecResult deflate(std::string_view data, CodecLevel level) {
  return deflate(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()), level);
}

Bytes inflate(std::span<const std::uint8_t> compressed) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw Error(ErrorCode::CorruptStream, "inflateInit failed");

  Bytes out;
  std::uint8_t chunk[16384];
  zs.next_in = const_cast<Bytef*>(compressed.data());
  zs.avail_in = static_cast<uInt>(compressed.size());

  int rc = Z_OK;
  do {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    rc = ::inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) break;
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    // No progress with input exhausted means the stream was cut short.
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      rc = Z_BUF_ERROR;
      break;
    }
  } while (rc != Z_STREAM_END);

  const uInt trailing = zs.avail_in;
  const char* msg = zs.msg;
  inflateEnd(&zs);

  if (rc != Z_STREAM_END) {
    std::string reason = rc == Z_BUF_ERROR ? "truncated stream" : (msg ? msg : "inflate error");
    throw Error(ErrorCode::CorruptStream, reason);
  }
  if (trailing != 0) {
    throw Error(ErrorCode::CorruptStream, std::to_string(trailing) + " trailing bytes after stream end");
  }
  return out;
}

}  // namespace semcomp::codec
