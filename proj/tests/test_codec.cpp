#include "netedu/codec.hpp"

#include "test_util.hpp"

#include <doctest.h>
#include <zlib.h>

#include <climits>

using namespace netedu;
using namespace netedu::codec;

namespace {

// Bit-at-a-time CRC-32, no table.
std::uint32_t crc32_bitwise(ByteView data)
{
    std::uint32_t crc = 0xFFFFFFFFu;
    for (auto b : data) {
        crc ^= b;
        for (int i = 0; i < 8; ++i) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
    return ~crc;
}

} // namespace

TEST_CASE("stuff examples")
{
    CHECK(stuff({}) == Bytes{0x7E, 0x7E});
    CHECK(stuff(Bytes{0x41, 0x42}) == Bytes{0x7E, 0x41, 0x42, 0x7E});
    CHECK(stuff(Bytes{0x7E}) == Bytes{0x7E, 0x7D, 0x5E, 0x7E});
    CHECK(stuff(Bytes{0x7D}) == Bytes{0x7E, 0x7D, 0x5D, 0x7E});
    CHECK_THROWS_AS(stuff(Bytes(kMaxStuffPayload + 1)), SizeError);
    CHECK_NOTHROW(stuff(Bytes(kMaxStuffPayload)));
}

TEST_CASE("destuff examples and errors")
{
    CHECK(destuff(Bytes{0x7E, 0x7E}).empty());
    CHECK(destuff(Bytes{0x7E, 0x7D, 0x5D, 0x7E}) == Bytes{0x7D});

    try {
        destuff(Bytes{0x7E, 0x7D, 0x7E});
        FAIL("expected a FrameError");
    } catch (const FrameError& e) {
        CHECK(e.offset() == 1);
    }
    CHECK_THROWS_AS(destuff(Bytes{0x41, 0x7E}), FrameError);
    CHECK_THROWS_AS(destuff(Bytes{0x7E, 0x41}), FrameError);
    CHECK_THROWS_AS(destuff(Bytes{0x7E}), FrameError);
    CHECK_THROWS_AS(destuff(Bytes{0x7E, 0x7D, 0x41, 0x7E}), FrameError);
    CHECK_THROWS_AS(destuff(Bytes{0x7E, 0x7E, 0x7E}), FrameError);
}

TEST_CASE("stuffing round trip and length")
{
    SplitMix64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        Bytes p = testutil::random_bytes(rng, rng.below(4097));
        // bias towards the special bytes
        for (auto& b : p)
            if (rng.below(8) == 0) b = rng.below(2) ? 0x7E : 0x7D;
        const Bytes s = stuff(p);
        const auto specials = std::count_if(p.begin(), p.end(), [](auto b) { return b == 0x7E || b == 0x7D; });
        REQUIRE(s.size() == p.size() + 2 + static_cast<std::size_t>(specials));
        REQUIRE(s.front() == 0x7E);
        REQUIRE(s.back() == 0x7E);
        REQUIRE(std::count(s.begin() + 1, s.end() - 1, 0x7E) == 0);
        REQUIRE(destuff(s) == p);
    }
}

TEST_CASE("crc32 check values")
{
    CHECK(crc32({}) == 0x00000000u);
    CHECK(crc32(from_string("123456789")) == 0xCBF43926u);
    CHECK(crc32_bitwise(from_string("123456789")) == 0xCBF43926u);
}

TEST_CASE("crc32 agrees with independent references")
{
    SplitMix64 rng(2024);
    for (int i = 0; i < 100; ++i) {
        const Bytes d = testutil::random_bytes(rng, rng.below(2000));
        const auto z = static_cast<std::uint32_t>(::crc32(0L, d.data(), static_cast<uInt>(d.size())));
        REQUIRE(crc32(d) == z);
        REQUIRE(crc32(d) == crc32_bitwise(d));
    }
}

TEST_CASE("crc32 residue")
{
    SplitMix64 rng(5);
    std::optional<std::uint32_t> residue;
    for (int i = 0; i < 100; ++i) {
        Bytes d = testutil::random_bytes(rng, 1 + rng.below(300));
        const std::uint32_t c = crc32(d);
        for (int k = 0; k < 4; ++k) d.push_back(static_cast<std::uint8_t>(c >> (8 * k)));
        if (!residue) residue = crc32(d);
        REQUIRE(crc32(d) == *residue);
    }
    CHECK(*residue == 0x2144DF1Cu);
}

TEST_CASE("vector encoding")
{
    CHECK(encode_vector({1, 2, 3}) == Bytes{0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 3});
    CHECK(sum_vector({1, 2, 3}) == 6);
    CHECK(encode_vector({}).empty());
    CHECK(sum_vector({}) == 0);
    CHECK(sum_vector({-1, 1}) == 0);
    CHECK(encode_vector({-1}) == Bytes{0xFF, 0xFF, 0xFF, 0xFF});
    CHECK(sum_vector({INT32_MAX, 1}) == INT32_MIN);
    CHECK_THROWS_AS(decode_vector(Bytes{0, 0, 1}), FrameError);

    SplitMix64 rng(3);
    for (int i = 0; i < 500; ++i) {
        IntVector v(rng.below(50));
        for (auto& x : v) x = static_cast<std::int32_t>(rng.next());
        REQUIRE(decode_vector(encode_vector(v)) == v);
    }
}

TEST_CASE("vector stream decoder copes with any split")
{
    const IntVector v{7, -2, 40, INT32_MIN};
    const Bytes msg = encode_vector_stream(v);
    CHECK(msg.size() == 4 + 4 * v.size());

    VectorStreamDecoder dec;
    std::optional<IntVector> got;
    for (std::size_t i = 0; i < msg.size(); ++i) {
        CHECK(!got);
        got = dec.feed(ByteView(msg).subspan(i, 1));
    }
    REQUIRE(got);
    CHECK(*got == v);

    // two messages in a single chunk
    Bytes two = encode_vector_stream({1});
    const Bytes second = encode_vector_stream({});
    two.insert(two.end(), second.begin(), second.end());
    VectorStreamDecoder d2;
    CHECK(d2.feed(two) == IntVector{1});
    CHECK(d2.feed({}) == IntVector{});
    CHECK(!d2.feed({}));
}
