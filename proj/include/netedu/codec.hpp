#pragma once

#include "netedu/bytes.hpp"
#include "netedu/error.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace netedu::codec {

inline constexpr std::uint8_t kFlag = 0x7E;
inline constexpr std::uint8_t kEsc = 0x7D;
inline constexpr std::uint8_t kEscXor = 0x20;
inline constexpr std::size_t kMaxStuffPayload = std::size_t{1} << 16;

class SizeError : public Error {
public:
    using Error::Error;
};

/// Malformed stuffed frame or vector encoding. `offset` is the byte
/// position where decoding gave up.
class FrameError : public Error {
public:
    FrameError(const std::string& what, std::size_t offset)
        : Error(what), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// FLAG, payload with 0x7E/0x7D escaped as (0x7D, b ^ 0x20), FLAG.
Bytes stuff(ByteView payload);
Bytes destuff(ByteView frame);

std::uint32_t crc32(ByteView data);

using IntVector = std::vector<std::int32_t>;

/// Big-endian two's complement, 4 bytes per value.
Bytes encode_vector(const IntVector& v);
IntVector decode_vector(ByteView b);
/// Wraps modulo 2^32.
std::int32_t sum_vector(const IntVector& v);

/// Incremental decoder for the stream form of a vector: a 4-byte big-endian
/// count followed by the values. Accepts input in arbitrary fragments.
class VectorStreamDecoder {
public:
    /// Consumes `chunk`; returns the vector once the message is complete.
    /// Bytes after a complete message are kept for the next one.
    std::optional<IntVector> feed(ByteView chunk);
    std::size_t buffered() const { return buf_.size(); }

private:
    Bytes buf_;
};

Bytes encode_vector_stream(const IntVector& v);

} // namespace netedu::codec
