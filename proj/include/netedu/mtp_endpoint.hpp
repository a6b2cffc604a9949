#pragma once

#include "netedu/mtp.hpp"
#include "netedu/udp.hpp"

#include <filesystem>
#include <iosfwd>

namespace netedu::mtp {

struct SendOptions {
    net::Address peer;
    SenderConfig sender;
};

struct SendResult {
    std::uint64_t bytes = 0;
    SenderStats stats;
    std::uint64_t integrity_errors = 0;
    std::uint64_t malformed = 0;
    double duration_ms = 0;
};

/// Sends `data` to a receiver over real UDP and waits for the FIN to be
/// acknowledged. Diagnostics go to `log`. Throws ConnectionAborted when the
/// retransmission cap is hit; the message counts integrity errors seen.
SendResult send_file(ByteView data, const SendOptions& options, std::ostream& log);

struct RecvOptions {
    std::uint16_t port = 0;
    ReceiverConfig receiver;
    /// After the FIN, keep answering retransmissions until the link has
    /// been quiet this long.
    double linger_ms = 1000;
    /// Give up when nothing at all arrives for this long (0 = never).
    double idle_timeout_ms = 0;
};

struct RecvResult {
    Bytes data;
    bool complete = false;   // FIN received
    ReceiverStats stats;
    std::uint64_t integrity_errors = 0;
    std::uint64_t malformed = 0;
};

/// Receives one transfer on `socket`. The first valid frame fixes the peer.
RecvResult receive_file(net::UdpSocket& socket, const RecvOptions& options, std::ostream& log);

} // namespace netedu::mtp
