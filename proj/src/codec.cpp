#include "netedu/codec.hpp"

#include <array>

namespace netedu::codec {

Bytes stuff(ByteView payload)
{
    if (payload.size() > kMaxStuffPayload)
        throw SizeError("payload of " + std::to_string(payload.size()) +
                        " bytes exceeds the 65536-byte stuffing limit");
    Bytes out;
    out.reserve(payload.size() + 2);
    out.push_back(kFlag);
    for (std::uint8_t b : payload) {
        if (b == kFlag || b == kEsc) {
            out.push_back(kEsc);
            out.push_back(b ^ kEscXor);
        } else {
            out.push_back(b);
        }
    }
    out.push_back(kFlag);
    return out;
}

Bytes destuff(ByteView frame)
{
    if (frame.empty() || frame.front() != kFlag)
        throw FrameError("frame does not start with FLAG", 0);
    if (frame.size() < 2 || frame.back() != kFlag)
        throw FrameError("frame does not end with FLAG", frame.empty() ? 0 : frame.size() - 1);

    Bytes out;
    const std::size_t end = frame.size() - 1;
    for (std::size_t i = 1; i < end; ++i) {
        const std::uint8_t b = frame[i];
        if (b == kFlag)
            throw FrameError("unescaped FLAG inside frame", i);
        if (b != kEsc) {
            out.push_back(b);
            continue;
        }
        if (i + 1 >= end)
            throw FrameError("dangling ESC at end of frame", i);
        const std::uint8_t next = frame[i + 1];
        if (next != (kFlag ^ kEscXor) && next != (kEsc ^ kEscXor))
            throw FrameError("invalid escape sequence", i);
        out.push_back(next ^ kEscXor);
        ++i;
    }
    return out;
}

namespace {

constexpr std::array<std::uint32_t, 256> make_crc_table()
{
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t n = 0; n < 256; ++n) {
        std::uint32_t c = n;
        for (int k = 0; k < 8; ++k)
            c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[n] = c;
    }
    return table;
}

// Reflected form of 0x04C11DB7.
constexpr auto kCrcTable = make_crc_table();

} // namespace

std::uint32_t crc32(ByteView data)
{
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::uint8_t b : data)
        c = kCrcTable[(c ^ b) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

Bytes encode_vector(const IntVector& v)
{
    Bytes out;
    out.reserve(v.size() * 4);
    for (std::int32_t x : v)
        put_be32(out, static_cast<std::uint32_t>(x));
    return out;
}

IntVector decode_vector(ByteView b)
{
    if (b.size() % 4 != 0)
        throw FrameError("vector encoding length " + std::to_string(b.size()) +
                             " is not a multiple of 4",
                         b.size() - b.size() % 4);
    IntVector v;
    v.reserve(b.size() / 4);
    for (std::size_t i = 0; i < b.size(); i += 4)
        v.push_back(static_cast<std::int32_t>(get_be32(b.data() + i)));
    return v;
}

std::int32_t sum_vector(const IntVector& v)
{
    std::uint32_t acc = 0;
    for (std::int32_t x : v)
        acc += static_cast<std::uint32_t>(x);
    return static_cast<std::int32_t>(acc);
}

Bytes encode_vector_stream(const IntVector& v)
{
    Bytes out;
    out.reserve(4 + v.size() * 4);
    put_be32(out, static_cast<std::uint32_t>(v.size()));
    for (std::int32_t x : v)
        put_be32(out, static_cast<std::uint32_t>(x));
    return out;
}

std::optional<IntVector> VectorStreamDecoder::feed(ByteView chunk)
{
    buf_.insert(buf_.end(), chunk.begin(), chunk.end());
    if (buf_.size() < 4) return std::nullopt;
    const std::size_t count = get_be32(buf_.data());
    const std::size_t need = 4 + count * 4;
    if (buf_.size() < need) return std::nullopt;
    IntVector v = decode_vector(ByteView(buf_).subspan(4, count * 4));
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(need));
    return v;
}

} // namespace netedu::codec
