#pragma once

#include "netedu/bytes.hpp"
#include "netedu/error.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace netedu::dissect {

// ---------------------------------------------------------------------------
// Classic pcap
// ---------------------------------------------------------------------------

enum class LinkType { Ethernet, RawIP };

struct TimedPacket {
    std::int64_t timestamp_us = 0;
    std::uint32_t orig_len = 0;
    Bytes bytes;
};

struct Capture {
    LinkType link_type = LinkType::Ethernet;
    std::vector<TimedPacket> packets;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Microsecond pcap in either byte order. pcapng and nanosecond files are
/// rejected.
Capture read_pcap(ByteView data);
Capture read_pcap_file(const std::filesystem::path& path);
/// Little-endian microsecond pcap.
Bytes write_pcap(const Capture& capture);

// ---------------------------------------------------------------------------
// Field trees
// ---------------------------------------------------------------------------

using FieldValue = std::variant<std::uint64_t, Bytes>;

struct Field {
    std::string name;          // relative to the layer, e.g. "seq", "flags.syn"
    std::size_t byte_offset = 0;
    unsigned bit_offset = 0;   // 0 is the most significant bit of the byte
    std::size_t bit_width = 0;
    FieldValue raw_value;
    std::string display;
    bool masked = false;
};

struct Layer {
    std::string name;          // "eth", "ipv4", "tcp", "udp", "payload"
    std::vector<Field> fields;
    bool truncated = false;
};

/// Bytes of the packet not covered by any field (e.g. Ethernet padding).
struct Gap {
    std::size_t offset = 0;
    Bytes bytes;
};

struct PacketTree {
    std::vector<Layer> layers;
    std::vector<Gap> gaps;
    std::size_t length = 0;

    const Field* find(std::string_view path) const;
    const Layer* layer(std::string_view name) const;
};

class PathError : public Error {
public:
    explicit PathError(const std::string& path)
        : Error("unknown field path: " + path), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// Never throws; short headers mark the layer truncated and stop parsing.
PacketTree dissect_packet(ByteView pkt, LinkType link_type);

PacketTree mask_fields(PacketTree tree, std::span<const std::string> paths);

/// Rebuilds the packet from field raw values and gaps, masked or not.
Bytes reserialize(const PacketTree& tree);

/// Canonical text form: one `path = display` line per field; masked fields
/// render as `????`.
std::string render(const PacketTree& tree);

inline constexpr std::string_view kMaskedDisplay = "????";

/// 16 bytes per row with an offset gutter. Bytes overlapped by a masked
/// field are shown as `??` when `tree` is given.
std::string hexdump(ByteView pkt, const PacketTree* tree = nullptr);

/// One-line description, e.g. `10.0.0.1:40000 > 10.0.0.2:80 TCP [SYN] len=0`.
/// Masked fields are left out.
std::string summary(const PacketTree& tree);

/// Byte ranges [first, last) of every masked field.
std::vector<std::pair<std::size_t, std::size_t>> masked_byte_ranges(const PacketTree& tree);

enum class ChecksumStatus { Valid, Invalid, Disabled, NotApplicable };

struct ChecksumVerdict {
    std::string layer;
    ChecksumStatus status = ChecksumStatus::NotApplicable;
    std::uint16_t stored = 0;
    std::uint16_t computed = 0;
    std::string detail;
};

std::string_view to_string(ChecksumStatus s);

std::vector<ChecksumVerdict> verify_checksums(const PacketTree& tree, ByteView pkt);

/// RFC 1071 ones'-complement sum, folded, not inverted.
std::uint16_t ones_complement_sum(ByteView data, std::uint32_t initial = 0);

} // namespace netedu::dissect
