#pragma once

#include "netedu/bytes.hpp"
#include "netedu/error.hpp"

#include <netinet/in.h>

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

namespace netedu::net {

class SocketError : public Error {
public:
    using Error::Error;
};

/// IPv4 address and port.
struct Address {
    sockaddr_in sa{};

    static Address loopback(std::uint16_t port);
    /// "host:port"; host may be a name or a dotted quad.
    static Address parse(const std::string& host_port);

    std::uint16_t port() const;
    std::string to_string() const;
    bool operator==(const Address& o) const;
};

struct Datagram {
    Bytes bytes;
    Address from;
};

inline constexpr std::size_t kMaxDatagram = 65507;

/// Owning UDP socket.
class UdpSocket {
public:
    /// Binds to `port` on all interfaces (0 picks a free port).
    explicit UdpSocket(std::uint16_t port = 0, bool loopback_only = false);
    ~UdpSocket();
    UdpSocket(const UdpSocket&) = delete;
    UdpSocket& operator=(const UdpSocket&) = delete;
    UdpSocket(UdpSocket&& o) noexcept;
    UdpSocket& operator=(UdpSocket&& o) noexcept;

    std::uint16_t local_port() const;
    int fd() const { return fd_; }

    void send_to(const Address& to, ByteView bytes);
    /// Waits up to `timeout_ms` (negative waits forever). Datagrams longer
    /// than kMaxDatagram are reported as truncated via `oversized`.
    std::optional<Datagram> receive(int timeout_ms, bool* oversized = nullptr);

private:
    int fd_ = -1;
};

/// Milliseconds on the monotonic clock since `origin`.
class Stopwatch {
public:
    Stopwatch() : origin_(std::chrono::steady_clock::now()) {}
    double elapsed_ms() const
    {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - origin_).count();
    }

private:
    std::chrono::steady_clock::time_point origin_;
};

/// Poll timeout in whole ms until `deadline`, rounded up, clamped at 0.
int timeout_until(double deadline_ms, double now_ms);

} // namespace netedu::net
