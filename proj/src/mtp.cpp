#include "netedu/mtp.hpp"

#include "netedu/codec.hpp"

#include <algorithm>
#include <stdexcept>

namespace netedu::mtp {

Bytes encode_frame(const Frame& f)
{
    if (f.window > kMaxWindow) throw std::invalid_argument("window exceeds 31");
    if (f.payload.size() > kMaxPayload) throw std::invalid_argument("payload exceeds 512 bytes");
    if (f.type != FrameType::Data && !f.payload.empty())
        throw std::invalid_argument("ACK and FIN frames carry no payload");

    Bytes out;
    out.reserve(kHeaderSize + f.payload.size() + kCrcSize);
    out.push_back(static_cast<std::uint8_t>((static_cast<unsigned>(f.type) << 5) | f.window));
    out.push_back(f.seq);
    put_be16(out, static_cast<std::uint16_t>(f.payload.size()));
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    put_be32(out, codec::crc32(out));
    return out;
}

Frame decode_frame(ByteView bytes)
{
    using Kind = DecodeError::Kind;
    if (bytes.size() < kHeaderSize + kCrcSize)
        throw DecodeError(Kind::Framing, "datagram of " + std::to_string(bytes.size()) + " bytes is shorter than a frame");
    const std::size_t length = get_be16(bytes.data() + 2);
    if (length > kMaxPayload || bytes.size() != kHeaderSize + length + kCrcSize)
        throw DecodeError(Kind::Framing, "length field " + std::to_string(length) + " inconsistent with datagram size " +
                                             std::to_string(bytes.size()));
    const auto body = bytes.first(kHeaderSize + length);
    if (codec::crc32(body) != get_be32(bytes.data() + kHeaderSize + length))
        throw DecodeError(Kind::Integrity, "CRC mismatch");
    const unsigned type = bytes[0] >> 5;
    if (type > 2) throw DecodeError(Kind::UnknownType, "unknown frame type " + std::to_string(type));

    Frame f;
    f.type = static_cast<FrameType>(type);
    f.window = bytes[0] & 0x1F;
    f.seq = bytes[1];
    if (f.type != FrameType::Data && length != 0)
        throw DecodeError(Kind::Framing, "ACK/FIN frame with a payload");
    f.payload.assign(body.begin() + kHeaderSize, body.end());
    return f;
}

// ---------------------------------------------------------------------------
// Sender
// ---------------------------------------------------------------------------

Sender::Sender(SenderConfig cfg) : cfg_(cfg), peer_window_(std::min(cfg.window, kMaxWindow))
{
    if (cfg_.window > kMaxWindow) throw std::invalid_argument("sender window exceeds 31");
    if (!(cfg_.rto > 0)) throw std::invalid_argument("rto must be positive");
}

unsigned Sender::send_limit() const
{
    return std::min({peer_window_, cfg_.window, kMaxWindow});
}

std::size_t Sender::queued_bytes() const
{
    std::size_t n = 0;
    for (const auto& s : queue_) n += s.payload.size();
    return n;
}

Frame Sender::frame_for(const InFlight& f) const
{
    return Frame{f.fin ? FrameType::Fin : FrameType::Data, static_cast<std::uint8_t>(cfg_.window), f.seq, f.payload};
}

void Sender::pump(double now, std::vector<Frame>& out)
{
    while (!queue_.empty() && in_flight_.size() < send_limit()) {
        Segment seg = std::move(queue_.front());
        queue_.pop_front();
        in_flight_.push_back(InFlight{next_seq_++, seg.fin, std::move(seg.payload), now, 0, 0});
        if (!seg.fin) ++stats_.data_frames;
        out.push_back(frame_for(in_flight_.back()));
    }
}

std::vector<Frame> Sender::on_app_data(ByteView data, double now)
{
    if (closed_) throw std::logic_error("sender already closed");
    std::vector<Frame> out;
    if (data.empty()) return out;
    for (std::size_t off = 0; off < data.size(); off += kMaxPayload) {
        const auto piece = data.subspan(off, std::min(kMaxPayload, data.size() - off));
        queue_.push_back(Segment{Bytes(piece.begin(), piece.end()), false});
    }
    pump(now, out);
    return out;
}

std::vector<Frame> Sender::close(double now)
{
    std::vector<Frame> out;
    if (closed_) return out;
    closed_ = true;
    queue_.push_back(Segment{{}, true});
    pump(now, out);
    return out;
}

std::vector<Frame> Sender::on_ack(const Frame& ack, double now)
{
    if (ack.type != FrameType::Ack) throw std::invalid_argument("on_ack expects an ACK frame");
    ++stats_.acks;
    std::vector<Frame> out;
    peer_window_ = std::min<unsigned>(ack.window, kMaxWindow);

    const std::uint8_t base = in_flight_.empty() ? next_seq_ : in_flight_.front().seq;
    const unsigned acked = seq_distance(base, ack.seq);
    if (acked >= 1 && acked <= in_flight_.size()) {
        for (unsigned i = 0; i < acked; ++i) {
            if (in_flight_.front().fin) finished_ = true;
            in_flight_.pop_front();
        }
        dup_acks_ = 0;
    } else if (acked == 0 && !in_flight_.empty()) {
        if (++dup_acks_ == kDupAckThreshold) {
            InFlight& oldest = in_flight_.front();
            ++oldest.retransmit_count;
            oldest.send_time = now;
            ++stats_.retransmissions;
            ++stats_.fast_retransmits;
            out.push_back(frame_for(oldest));
            dup_acks_ = 0;
        }
    } else if (acked != 0) {
        ++stats_.ignored_acks;
    }
    pump(now, out);
    return out;
}

std::vector<Frame> Sender::on_tick(double now)
{
    std::vector<Frame> out;
    for (auto& f : in_flight_) {
        if (now < f.send_time + cfg_.rto) continue;   // same expression as next_deadline()
        if (++f.expiries >= kMaxExpiries)
            throw ConnectionAborted("frame " + std::to_string(f.seq) + " expired " + std::to_string(f.expiries) +
                                    " times without acknowledgment");
        ++f.retransmit_count;
        f.send_time = now;
        ++stats_.retransmissions;
        ++stats_.timeouts;
        out.push_back(frame_for(f));
    }
    return out;
}

std::optional<double> Sender::next_deadline() const
{
    if (in_flight_.empty()) return std::nullopt;
    double earliest = in_flight_.front().send_time;
    for (const auto& f : in_flight_) earliest = std::min(earliest, f.send_time);
    return earliest + cfg_.rto;
}

// ---------------------------------------------------------------------------
// Receiver
// ---------------------------------------------------------------------------

Receiver::Receiver(ReceiverConfig cfg) : cfg_(cfg)
{
    if (cfg_.window > kMaxWindow) throw std::invalid_argument("receiver window exceeds 31");
}

Frame Receiver::make_ack() const
{
    return Frame{FrameType::Ack, static_cast<std::uint8_t>(cfg_.window), expected_, {}};
}

Receiver::Result Receiver::on_frame(const Frame& f)
{
    Result result;
    if (f.type == FrameType::Ack) return result;
    ++stats_.frames;

    const unsigned ahead = seq_distance(expected_, f.seq);
    if (half_closed_) {
        ++stats_.duplicates;
    } else if (ahead == 0) {
        auto consume = [&](const Bytes& payload, bool fin) {
            if (fin) {
                half_closed_ = true;
            } else {
                result.delivered.insert(result.delivered.end(), payload.begin(), payload.end());
            }
            ++expected_;
        };
        consume(f.payload, f.type == FrameType::Fin);
        for (auto it = buffer_.find(expected_); !half_closed_ && it != buffer_.end(); it = buffer_.find(expected_)) {
            auto [payload, fin] = std::move(it->second);
            buffer_.erase(it);
            consume(payload, fin);
        }
        delivered_bytes_ += result.delivered.size();
    } else if (ahead < cfg_.window) {
        if (buffer_.count(f.seq)) {
            ++stats_.duplicates;
        } else {
            buffer_.emplace(f.seq, std::make_pair(f.payload, f.type == FrameType::Fin));
            ++stats_.buffered;
        }
    } else if (ahead >= kSeqSpace - kMaxWindow) {
        ++stats_.duplicates;
    } else {
        ++stats_.out_of_window;
    }
    result.ack = make_ack();
    return result;
}

} // namespace netedu::mtp
