#include "netedu/dissect.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace netedu::dissect {

namespace {

std::uint64_t read_bits(ByteView pkt, std::size_t byte_offset, unsigned bit_offset, std::size_t width)
{
    std::uint64_t v = 0;
    std::size_t bit = byte_offset * 8 + bit_offset;
    for (std::size_t i = 0; i < width; ++i, ++bit) {
        const std::uint8_t b = pkt[bit / 8];
        v = (v << 1) | ((b >> (7 - bit % 8)) & 1u);
    }
    return v;
}

void write_bits(Bytes& out, std::size_t byte_offset, unsigned bit_offset, std::size_t width, std::uint64_t v)
{
    std::size_t bit = byte_offset * 8 + bit_offset;
    for (std::size_t i = 0; i < width; ++i, ++bit) {
        const unsigned shift = 7 - bit % 8;
        const std::uint8_t set = static_cast<std::uint8_t>(((v >> (width - 1 - i)) & 1u) << shift);
        out[bit / 8] = static_cast<std::uint8_t>((out[bit / 8] & ~(1u << shift)) | set);
    }
}

std::string hex_display(std::uint64_t v, int digits)
{
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%0*llx", digits, static_cast<unsigned long long>(v));
    return buf;
}

std::string ipv4_display(std::uint64_t v)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", unsigned(v >> 24 & 0xFF), unsigned(v >> 16 & 0xFF),
                  unsigned(v >> 8 & 0xFF), unsigned(v & 0xFF));
    return buf;
}

enum class Style { Dec, Hex, Ipv4 };

class LayerBuilder {
public:
    LayerBuilder(PacketTree& tree, std::string name, ByteView pkt) : pkt_(pkt)
    {
        tree.layers.push_back(Layer{std::move(name), {}, false});
        layer_ = &tree.layers.back();
    }

    void uint(std::string name, std::size_t byte_offset, unsigned bit_offset, std::size_t width,
              Style style = Style::Dec)
    {
        const std::uint64_t v = read_bits(pkt_, byte_offset, bit_offset, width);
        std::string display;
        switch (style) {
        case Style::Dec: display = std::to_string(v); break;
        case Style::Hex: display = hex_display(v, static_cast<int>((width + 3) / 4)); break;
        case Style::Ipv4: display = ipv4_display(v); break;
        }
        layer_->fields.push_back(Field{std::move(name), byte_offset, bit_offset, width, v, std::move(display), false});
    }

    void bytes(std::string name, std::size_t offset, std::size_t len, std::string_view sep = "")
    {
        if (len == 0) return;
        const auto span = pkt_.subspan(offset, len);
        Bytes raw(span.begin(), span.end());
        std::string display = to_hex(raw, sep);
        layer_->fields.push_back(Field{std::move(name), offset, 0, len * 8, std::move(raw), std::move(display), false});
    }

    void truncate() { layer_->truncated = true; }

private:
    ByteView pkt_;
    Layer* layer_;
};

void dissect_payload(PacketTree& tree, ByteView pkt, std::size_t offset, std::size_t end)
{
    if (end <= offset) return;
    LayerBuilder b(tree, "payload", pkt);
    b.bytes("data", offset, end - offset);
}

void dissect_tcp(PacketTree& tree, ByteView pkt, std::size_t off, std::size_t end)
{
    LayerBuilder b(tree, "tcp", pkt);
    if (end - off < 20) {
        b.truncate();
        return;
    }
    b.uint("srcport", off, 0, 16);
    b.uint("dstport", off + 2, 0, 16);
    b.uint("seq", off + 4, 0, 32);
    b.uint("ack", off + 8, 0, 32);
    b.uint("hdr_len", off + 12, 0, 4);
    b.uint("reserved", off + 12, 4, 4);
    static constexpr const char* flag_names[] = {"cwr", "ece", "urg", "ack", "psh", "rst", "syn", "fin"};
    for (unsigned i = 0; i < 8; ++i)
        b.uint(std::string("flags.") + flag_names[i], off + 13, i, 1);
    b.uint("window", off + 14, 0, 16);
    b.uint("checksum", off + 16, 0, 16, Style::Hex);
    b.uint("urgent", off + 18, 0, 16);
    const std::size_t hdr = std::size_t(pkt[off + 12] >> 4) * 4;
    if (hdr < 20 || off + hdr > end) {
        b.truncate();
        return;
    }
    b.bytes("options", off + 20, hdr - 20);
    dissect_payload(tree, pkt, off + hdr, end);
}

void dissect_udp(PacketTree& tree, ByteView pkt, std::size_t off, std::size_t end)
{
    LayerBuilder b(tree, "udp", pkt);
    if (end - off < 8) {
        b.truncate();
        return;
    }
    b.uint("srcport", off, 0, 16);
    b.uint("dstport", off + 2, 0, 16);
    b.uint("length", off + 4, 0, 16);
    b.uint("checksum", off + 6, 0, 16, Style::Hex);
    dissect_payload(tree, pkt, off + 8, end);
}

void dissect_ipv4(PacketTree& tree, ByteView pkt, std::size_t off)
{
    LayerBuilder b(tree, "ipv4", pkt);
    if (pkt.size() - off < 20) {
        b.truncate();
        return;
    }
    b.uint("version", off, 0, 4);
    b.uint("ihl", off, 4, 4);
    b.uint("dscp", off + 1, 0, 6);
    b.uint("ecn", off + 1, 6, 2);
    b.uint("len", off + 2, 0, 16);
    b.uint("id", off + 4, 0, 16, Style::Hex);
    b.uint("flags.rb", off + 6, 0, 1);
    b.uint("flags.df", off + 6, 1, 1);
    b.uint("flags.mf", off + 6, 2, 1);
    b.uint("frag_offset", off + 6, 3, 13);
    b.uint("ttl", off + 8, 0, 8);
    b.uint("proto", off + 9, 0, 8);
    b.uint("checksum", off + 10, 0, 16, Style::Hex);
    b.uint("src", off + 12, 0, 32, Style::Ipv4);
    b.uint("dst", off + 16, 0, 32, Style::Ipv4);

    const std::size_t ihl = std::size_t(pkt[off] & 0x0F) * 4;
    if (ihl < 20 || off + ihl > pkt.size()) {
        b.truncate();
        return;
    }
    b.bytes("options", off + 20, ihl - 20);

    const std::size_t total = get_be16(pkt.data() + off + 2);
    std::size_t end = pkt.size();
    if (total >= ihl && off + total < end) end = off + total;

    const std::uint16_t frag = get_be16(pkt.data() + off + 6);
    const bool fragment = (frag & 0x1FFF) != 0 || (frag & 0x2000) != 0;
    const std::uint8_t proto = pkt[off + 9];
    const std::size_t body = off + ihl;
    if (fragment)
        dissect_payload(tree, pkt, body, end);
    else if (proto == 6)
        dissect_tcp(tree, pkt, body, end);
    else if (proto == 17)
        dissect_udp(tree, pkt, body, end);
    else
        dissect_payload(tree, pkt, body, end);
}

void collect_gaps(PacketTree& tree, ByteView pkt)
{
    std::vector<bool> covered(pkt.size(), false);
    for (const auto& layer : tree.layers)
        for (const auto& f : layer.fields) {
            const std::size_t first = f.byte_offset;
            const std::size_t last = (f.byte_offset * 8 + f.bit_offset + f.bit_width + 7) / 8;
            for (std::size_t i = first; i < last && i < covered.size(); ++i) covered[i] = true;
        }
    for (std::size_t i = 0; i < pkt.size();) {
        if (covered[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < pkt.size() && !covered[j]) ++j;
        tree.gaps.push_back(Gap{i, Bytes(pkt.begin() + i, pkt.begin() + j)});
        i = j;
    }
}

std::string path_of(const Layer& layer, const Field& f)
{
    return layer.name + "." + f.name;
}

} // namespace

const Layer* PacketTree::layer(std::string_view name) const
{
    for (const auto& l : layers)
        if (l.name == name) return &l;
    return nullptr;
}

const Field* PacketTree::find(std::string_view path) const
{
    const auto dot = path.find('.');
    if (dot == std::string_view::npos) return nullptr;
    const Layer* l = layer(path.substr(0, dot));
    if (!l) return nullptr;
    const auto rest = path.substr(dot + 1);
    for (const auto& f : l->fields)
        if (f.name == rest) return &f;
    return nullptr;
}

PacketTree dissect_packet(ByteView pkt, LinkType link_type)
{
    PacketTree tree;
    tree.length = pkt.size();
    if (link_type == LinkType::Ethernet) {
        LayerBuilder b(tree, "eth", pkt);
        if (pkt.size() < 14) {
            b.truncate();
        } else {
            b.bytes("dst", 0, 6, ":");
            b.bytes("src", 6, 6, ":");
            b.uint("type", 12, 0, 16, Style::Hex);
            if (get_be16(pkt.data() + 12) == 0x0800)
                dissect_ipv4(tree, pkt, 14);
            else
                dissect_payload(tree, pkt, 14, pkt.size());
        }
    } else if (!pkt.empty() && (pkt[0] >> 4) == 4) {
        dissect_ipv4(tree, pkt, 0);
    } else {
        dissect_payload(tree, pkt, 0, pkt.size());
    }
    collect_gaps(tree, pkt);
    return tree;
}

PacketTree mask_fields(PacketTree tree, std::span<const std::string> paths)
{
    for (const auto& path : paths)
        if (!tree.find(path)) throw PathError(path);
    for (auto& layer : tree.layers)
        for (auto& f : layer.fields) {
            const std::string p = path_of(layer, f);
            if (std::find(paths.begin(), paths.end(), p) != paths.end()) f.masked = true;
        }
    return tree;
}

Bytes reserialize(const PacketTree& tree)
{
    Bytes out(tree.length, 0);
    for (const auto& layer : tree.layers)
        for (const auto& f : layer.fields) {
            if (const auto* v = std::get_if<std::uint64_t>(&f.raw_value))
                write_bits(out, f.byte_offset, f.bit_offset, f.bit_width, *v);
            else
                std::ranges::copy(std::get<Bytes>(f.raw_value), out.begin() + static_cast<std::ptrdiff_t>(f.byte_offset));
        }
    for (const auto& g : tree.gaps)
        std::ranges::copy(g.bytes, out.begin() + static_cast<std::ptrdiff_t>(g.offset));
    return out;
}

std::string render(const PacketTree& tree)
{
    std::string out;
    for (const auto& layer : tree.layers) {
        for (const auto& f : layer.fields) {
            out += path_of(layer, f);
            out += " = ";
            out += f.masked ? std::string(kMaskedDisplay) : f.display;
            out += '\n';
        }
        if (layer.truncated) out += "# " + layer.name + " truncated\n";
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> masked_byte_ranges(const PacketTree& tree)
{
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto& layer : tree.layers)
        for (const auto& f : layer.fields)
            if (f.masked)
                ranges.emplace_back(f.byte_offset, (f.byte_offset * 8 + f.bit_offset + f.bit_width + 7) / 8);
    return ranges;
}

std::string hexdump(ByteView pkt, const PacketTree* tree)
{
    std::vector<bool> hidden(pkt.size(), false);
    if (tree)
        for (auto [first, last] : masked_byte_ranges(*tree))
            for (std::size_t i = first; i < last && i < hidden.size(); ++i) hidden[i] = true;

    std::string out;
    char buf[16];
    for (std::size_t row = 0; row < pkt.size(); row += 16) {
        std::snprintf(buf, sizeof buf, "%04zx ", row);
        out += buf;
        for (std::size_t i = row; i < row + 16 && i < pkt.size(); ++i) {
            if (hidden[i]) {
                out += " ??";
            } else {
                std::snprintf(buf, sizeof buf, " %02x", pkt[i]);
                out += buf;
            }
        }
        out += '\n';
    }
    return out;
}

std::string summary(const PacketTree& tree)
{
    auto shown = [&](std::string_view path) -> std::string {
        const Field* f = tree.find(path);
        if (!f) return {};
        return f->masked ? std::string(kMaskedDisplay) : f->display;
    };
    std::ostringstream out;
    const bool ip = tree.layer("ipv4") != nullptr;
    const char* l4 = tree.layer("tcp") ? "tcp" : tree.layer("udp") ? "udp" : nullptr;
    if (ip) {
        out << shown("ipv4.src");
        if (l4) out << ':' << shown(std::string(l4) + ".srcport");
        out << " > " << shown("ipv4.dst");
        if (l4) out << ':' << shown(std::string(l4) + ".dstport");
    } else if (tree.layer("eth")) {
        out << shown("eth.src") << " > " << shown("eth.dst");
    }
    if (const Layer* tcp = tree.layer("tcp")) {
        out << " TCP";
        std::string flags;
        for (const auto& f : tcp->fields) {
            if (f.name.rfind("flags.", 0) != 0 || f.masked) continue;
            if (std::get<std::uint64_t>(f.raw_value)) {
                if (!flags.empty()) flags += ',';
                std::string n = f.name.substr(6);
                std::ranges::transform(n, n.begin(), ::toupper);
                flags += n;
            }
        }
        out << " [" << flags << "]";
        if (tree.find("tcp.seq")) out << " seq=" << shown("tcp.seq");
        if (tree.find("tcp.ack")) out << " ack=" << shown("tcp.ack");
        if (tree.find("tcp.window")) out << " win=" << shown("tcp.window");
    } else if (tree.layer("udp")) {
        out << " UDP";
    }
    std::size_t payload = 0;
    if (const Field* f = tree.find("payload.data")) payload = f->bit_width / 8;
    out << " len=" << payload;
    return out.str();
}

std::uint16_t ones_complement_sum(ByteView data, std::uint32_t initial)
{
    std::uint32_t sum = initial;
    std::size_t i = 0;
    for (; i + 1 < data.size(); i += 2) sum += get_be16(data.data() + i);
    if (i < data.size()) sum += std::uint32_t(data[i]) << 8;
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(sum);
}

std::string_view to_string(ChecksumStatus s)
{
    switch (s) {
    case ChecksumStatus::Valid: return "valid";
    case ChecksumStatus::Invalid: return "invalid";
    case ChecksumStatus::Disabled: return "disabled";
    case ChecksumStatus::NotApplicable: return "not_applicable";
    }
    return "?";
}

std::vector<ChecksumVerdict> verify_checksums(const PacketTree& tree, ByteView pkt)
{
    std::vector<ChecksumVerdict> out;
    const Layer* ip = tree.layer("ipv4");
    if (!ip) return out;

    const Field* version = tree.find("ipv4.version");
    ChecksumVerdict ipv = {"ipv4", ChecksumStatus::NotApplicable, 0, 0, {}};
    if (ip->truncated || !version) {
        ipv.detail = "header truncated";
        out.push_back(ipv);
        return out;
    }
    const std::size_t ip_off = version->byte_offset;
    const std::size_t ihl = std::size_t(pkt[ip_off] & 0x0F) * 4;
    Bytes header(pkt.begin() + ip_off, pkt.begin() + ip_off + ihl);
    ipv.stored = get_be16(header.data() + 10);
    header[10] = header[11] = 0;
    ipv.computed = static_cast<std::uint16_t>(~ones_complement_sum(header));
    ipv.status = ipv.stored == ipv.computed ? ChecksumStatus::Valid : ChecksumStatus::Invalid;
    if (ipv.status == ChecksumStatus::Invalid)
        ipv.detail = "stored " + hex_display(ipv.stored, 4) + ", computed " + hex_display(ipv.computed, 4);
    out.push_back(ipv);

    const char* l4 = tree.layer("tcp") ? "tcp" : tree.layer("udp") ? "udp" : nullptr;
    if (!l4) return out;
    const Layer* transport = tree.layer(l4);
    ChecksumVerdict tv = {l4, ChecksumStatus::NotApplicable, 0, 0, {}};
    const std::size_t total = get_be16(pkt.data() + ip_off + 2);
    const std::size_t seg_off = ip_off + ihl;
    if (transport->truncated || total < ihl || ip_off + total > pkt.size()) {
        tv.detail = "segment not fully captured";
        out.push_back(tv);
        return out;
    }
    const std::size_t seg_len = total - ihl;
    Bytes seg(pkt.begin() + seg_off, pkt.begin() + seg_off + seg_len);
    const std::size_t ck = std::string_view(l4) == "tcp" ? 16 : 6;
    tv.stored = get_be16(seg.data() + ck);
    if (std::string_view(l4) == "udp" && tv.stored == 0) {
        tv.status = ChecksumStatus::Disabled;
        tv.detail = "checksum disabled";
        out.push_back(tv);
        return out;
    }
    seg[ck] = seg[ck + 1] = 0;
    Bytes pseudo(pkt.begin() + ip_off + 12, pkt.begin() + ip_off + 20);
    pseudo.push_back(0);
    pseudo.push_back(pkt[ip_off + 9]);
    put_be16(pseudo, static_cast<std::uint16_t>(seg_len));
    std::uint16_t computed = static_cast<std::uint16_t>(~ones_complement_sum(seg, ones_complement_sum(pseudo)));
    if (std::string_view(l4) == "udp" && computed == 0) computed = 0xFFFF;
    tv.computed = computed;
    tv.status = tv.stored == tv.computed ? ChecksumStatus::Valid : ChecksumStatus::Invalid;
    if (tv.status == ChecksumStatus::Invalid)
        tv.detail = "stored " + hex_display(tv.stored, 4) + ", computed " + hex_display(tv.computed, 4);
    out.push_back(tv);
    return out;
}

} // namespace netedu::dissect
