#include "netedu/dissect.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

namespace netedu::dissect {

namespace {

constexpr std::uint32_t kMagicMicro = 0xA1B2C3D4;
constexpr std::uint32_t kMagicMicroSwapped = 0xD4C3B2A1;
constexpr std::uint32_t kMagicNano = 0xA1B23C4D;
constexpr std::uint32_t kMagicNanoSwapped = 0x4D3CB2A1;
constexpr std::uint32_t kMagicPcapng = 0x0A0D0D0A;

constexpr std::uint32_t kLinkEthernet = 1;
constexpr std::uint32_t kLinkRaw = 101;
constexpr std::uint32_t kLinkIpv4 = 228;

constexpr std::size_t kGlobalHeader = 24;
constexpr std::size_t kRecordHeader = 16;

void put_le32(Bytes& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_le16(Bytes& out, std::uint16_t v)
{
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

} // namespace

Capture read_pcap(ByteView data)
{
    if (data.size() < kGlobalHeader)
        throw ParseError("pcap global header truncated", data.size());

    const std::uint32_t magic = get_be32(data.data());
    bool big_endian;
    switch (magic) {
    case kMagicMicro: big_endian = true; break;
    case kMagicMicroSwapped: big_endian = false; break;
    case kMagicPcapng: throw ParseError("pcapng unsupported", 0);
    case kMagicNano:
    case kMagicNanoSwapped: throw ParseError("nanosecond pcap unsupported", 0);
    default: throw ParseError("bad pcap magic", 0);
    }
    auto u32 = [&](std::size_t off) {
        return big_endian ? get_be32(data.data() + off) : get_le32(data.data() + off);
    };

    Capture cap;
    switch (const std::uint32_t network = u32(20)) {
    case kLinkEthernet: cap.link_type = LinkType::Ethernet; break;
    case kLinkRaw:
    case kLinkIpv4: cap.link_type = LinkType::RawIP; break;
    default: throw ParseError("unsupported link type " + std::to_string(network), 20);
    }

    std::size_t off = kGlobalHeader;
    while (off < data.size()) {
        if (data.size() - off < kRecordHeader)
            throw ParseError("pcap record header truncated", off);
        const std::uint32_t sec = u32(off);
        const std::uint32_t usec = u32(off + 4);
        const std::uint32_t incl = u32(off + 8);
        const std::uint32_t orig = u32(off + 12);
        if (incl > orig)
            throw ParseError("record stores more bytes than were captured", off + 8);
        if (data.size() - off - kRecordHeader < incl)
            throw ParseError("pcap record truncated", off);
        TimedPacket pkt;
        pkt.timestamp_us = std::int64_t(sec) * 1'000'000 + usec;
        pkt.orig_len = orig;
        const auto body = data.subspan(off + kRecordHeader, incl);
        pkt.bytes.assign(body.begin(), body.end());
        cap.packets.push_back(std::move(pkt));
        off += kRecordHeader + incl;
    }
    return cap;
}

Capture read_pcap_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open capture " + path.string());
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return read_pcap(data);
}

Bytes write_pcap(const Capture& capture)
{
    Bytes out;
    put_le32(out, kMagicMicro);
    put_le16(out, 2);
    put_le16(out, 4);
    put_le32(out, 0);
    put_le32(out, 0);
    put_le32(out, 65535);
    put_le32(out, capture.link_type == LinkType::Ethernet ? kLinkEthernet : kLinkRaw);
    for (const auto& p : capture.packets) {
        put_le32(out, static_cast<std::uint32_t>(p.timestamp_us / 1'000'000));
        put_le32(out, static_cast<std::uint32_t>(p.timestamp_us % 1'000'000));
        put_le32(out, static_cast<std::uint32_t>(p.bytes.size()));
        put_le32(out, std::max<std::uint32_t>(p.orig_len, static_cast<std::uint32_t>(p.bytes.size())));
        out.insert(out.end(), p.bytes.begin(), p.bytes.end());
    }
    return out;
}

} // namespace netedu::dissect
