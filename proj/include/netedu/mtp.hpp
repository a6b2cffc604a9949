#pragma once

#include "netedu/bytes.hpp"
#include "netedu/error.hpp"
#include "netedu/linksim.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace netedu::mtp {

inline constexpr std::size_t kMaxPayload = 512;
inline constexpr unsigned kMaxWindow = 31;
inline constexpr unsigned kSeqSpace = 256;
inline constexpr std::size_t kHeaderSize = 4;
inline constexpr std::size_t kCrcSize = 4;
inline constexpr int kDupAckThreshold = 3;
inline constexpr int kMaxExpiries = 10;
inline constexpr double kDefaultRto = 200;

enum class FrameType : std::uint8_t { Data = 0, Ack = 1, Fin = 2 };

struct Frame {
    FrameType type = FrameType::Data;
    std::uint8_t window = 0;   // 0..31
    std::uint8_t seq = 0;
    Bytes payload;

    bool operator==(const Frame&) const = default;
};

/// Raised by decode_frame.
class DecodeError : public Error {
public:
    enum class Kind { Framing, Integrity, UnknownType };
    DecodeError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Terminal failure of a connection (retransmission cap reached).
class ConnectionAborted : public Error {
public:
    using Error::Error;
};

/// byte 0: type << 5 | window; byte 1: seq; bytes 2-3: payload length
/// (big-endian); payload; CRC-32 of everything before it (big-endian).
Bytes encode_frame(const Frame& f);
Frame decode_frame(ByteView bytes);

inline std::uint8_t seq_distance(std::uint8_t from, std::uint8_t to)
{
    return static_cast<std::uint8_t>(to - from);
}

struct SenderConfig {
    unsigned window = kMaxWindow;   // local cap and initial peer window
    double rto = kDefaultRto;       // ms
};

struct SenderStats {
    std::uint64_t data_frames = 0;       // first transmissions, DATA only
    std::uint64_t retransmissions = 0;
    std::uint64_t fast_retransmits = 0;
    std::uint64_t timeouts = 0;
    std::uint64_t acks = 0;
    std::uint64_t ignored_acks = 0;
};

/// Sending half of a connection. Event driven; `now` is injected in ms.
class Sender {
public:
    struct InFlight {
        std::uint8_t seq;
        bool fin;
        Bytes payload;
        double send_time;
        int retransmit_count;
        int expiries;
    };

    explicit Sender(SenderConfig cfg = {});

    std::vector<Frame> on_app_data(ByteView data, double now);
    /// Queues FIN behind any pending data.
    std::vector<Frame> close(double now);
    std::vector<Frame> on_ack(const Frame& ack, double now);
    /// Throws ConnectionAborted on the 10th expiry of the same frame.
    std::vector<Frame> on_tick(double now);

    /// Earliest retransmission deadline, if anything is in flight.
    std::optional<double> next_deadline() const;

    bool finished() const { return finished_; }
    bool closed() const { return closed_; }
    std::uint8_t next_seq() const { return next_seq_; }
    unsigned peer_window() const { return peer_window_; }
    int dup_ack_count() const { return dup_acks_; }
    unsigned send_limit() const;
    const std::deque<InFlight>& in_flight() const { return in_flight_; }
    std::size_t queued_bytes() const;
    const SenderStats& stats() const { return stats_; }
    double rto() const { return cfg_.rto; }

private:
    struct Segment {
        Bytes payload;
        bool fin;
    };

    Frame frame_for(const InFlight& f) const;
    void pump(double now, std::vector<Frame>& out);

    SenderConfig cfg_;
    std::uint8_t next_seq_ = 0;
    unsigned peer_window_;
    int dup_acks_ = 0;
    bool closed_ = false;
    bool finished_ = false;
    std::deque<Segment> queue_;
    std::deque<InFlight> in_flight_;
    SenderStats stats_;
};

struct ReceiverConfig {
    unsigned window = kMaxWindow;
};

struct ReceiverStats {
    std::uint64_t frames = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t out_of_window = 0;
    std::uint64_t buffered = 0;
};

/// Receiving half. Cumulative ACKs; out-of-order frames inside the window
/// are buffered and delivered in order.
class Receiver {
public:
    struct Result {
        std::optional<Frame> ack;
        Bytes delivered;
    };

    explicit Receiver(ReceiverConfig cfg = {});

    Result on_frame(const Frame& f);

    std::uint8_t expected_seq() const { return expected_; }
    bool half_closed() const { return half_closed_; }
    unsigned local_window() const { return cfg_.window; }
    std::uint64_t delivered_bytes() const { return delivered_bytes_; }
    const std::map<std::uint8_t, std::pair<Bytes, bool>>& buffer() const { return buffer_; }
    const ReceiverStats& stats() const { return stats_; }

private:
    Frame make_ack() const;

    ReceiverConfig cfg_;
    std::uint8_t expected_ = 0;
    bool half_closed_ = false;
    std::uint64_t delivered_bytes_ = 0;
    std::map<std::uint8_t, std::pair<Bytes, bool>> buffer_;
    ReceiverStats stats_;
};

struct TransferOptions {
    SenderConfig sender;
    ReceiverConfig receiver;
};

struct TransferReport {
    Bytes delivered;
    std::uint64_t data_frames = 0;
    std::uint64_t frames_sent = 0;        // every frame the sender emitted
    std::uint64_t acks_sent = 0;
    std::uint64_t retransmissions = 0;
    std::uint64_t fast_retransmits = 0;
    std::uint64_t timeouts = 0;
    std::uint64_t fin_exchanges = 0;
    double completion_time = 0;
    std::size_t max_in_flight = 0;
    bool window_respected = true;
    linksim::EventLog log;
};

/// Runs sender (side a) and receiver (side b) through a simulated link until
/// the FIN is acknowledged. Sender aborts propagate as ConnectionAborted.
TransferReport transfer(ByteView file, const linksim::ImpairmentConfig& impairment,
                        const TransferOptions& options = {});

} // namespace netedu::mtp
