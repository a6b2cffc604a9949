#include "netedu/bytes.hpp"
#include "netedu/prng.hpp"

namespace netedu {

std::string to_hex(ByteView data, std::string_view sep)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * (2 + sep.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (i && !sep.empty()) out += sep;
        out += digits[data[i] >> 4];
        out += digits[data[i] & 0x0F];
    }
    return out;
}

static int hex_digit(char c)
{
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

bool parse_hex(std::string_view text, Bytes& out)
{
    out.clear();
    int pending = -1;
    for (char c : text) {
        if (c == ' ' || c == ':' || c == '\t' || c == '\n' || c == '\r') continue;
        const int d = hex_digit(c);
        if (d < 0) return false;
        if (pending < 0) {
            pending = d;
        } else {
            out.push_back(static_cast<std::uint8_t>((pending << 4) | d));
            pending = -1;
        }
    }
    return pending < 0;
}

Bytes from_string(std::string_view s)
{
    return Bytes(s.begin(), s.end());
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t counter)
{
    SplitMix64 mix(seed);
    std::uint64_t h = mix.next();
    for (unsigned char c : label) {
        SplitMix64 step(h ^ c);
        h = step.next();
    }
    SplitMix64 last(h ^ counter);
    return last.next();
}

} // namespace netedu
