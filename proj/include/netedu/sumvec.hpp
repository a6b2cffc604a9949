#pragma once

#include "netedu/codec.hpp"
#include "netedu/error.hpp"
#include "netedu/udp.hpp"

#include <atomic>
#include <cstdint>
#include <thread>

namespace netedu::sumvec {

enum class Transport { Udp, ChoppedStream };

/// Reference vector-sum server. UDP: a datagram of big-endian int32 values
/// is answered with their 4-byte sum. TCP: count-prefixed vectors arrive as
/// an arbitrarily fragmented stream; each complete vector gets its sum.
class SumServer {
public:
    explicit SumServer(std::uint16_t udp_port = 0, std::uint16_t tcp_port = 0);
    ~SumServer();
    SumServer(const SumServer&) = delete;
    SumServer& operator=(const SumServer&) = delete;

    std::uint16_t udp_port() const { return udp_.local_port(); }
    std::uint16_t tcp_port() const { return tcp_port_; }

    void start();
    void stop();

private:
    void loop();

    net::UdpSocket udp_;
    int listen_fd_ = -1;
    std::uint16_t tcp_port_ = 0;
    std::atomic<bool> stop_{false};
    std::thread thread_;
};

struct RoundtripOptions {
    std::uint64_t seed = 0;       // chop pattern for the stream transport
    std::size_t max_chunk = 7;
    int timeout_ms = 2000;
};

/// Sends `v` to the server at 127.0.0.1:`port` and returns the reported sum.
/// The stream transport writes the message in chop_stream fragments.
std::int32_t sumvec_roundtrip(std::uint16_t port, const codec::IntVector& v, Transport transport,
                              const RoundtripOptions& options = {});

} // namespace netedu::sumvec
