#include "netedu/udp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

namespace netedu::net {

namespace {

[[noreturn]] void fail(const std::string& what)
{
    throw SocketError(what + ": " + std::strerror(errno));
}

} // namespace

Address Address::loopback(std::uint16_t port)
{
    Address a;
    a.sa.sin_family = AF_INET;
    a.sa.sin_port = htons(port);
    a.sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    return a;
}

Address Address::parse(const std::string& host_port)
{
    const auto colon = host_port.rfind(':');
    if (colon == std::string::npos || colon + 1 == host_port.size())
        throw SocketError("expected HOST:PORT, got '" + host_port + "'");
    const std::string host = colon == 0 ? "127.0.0.1" : host_port.substr(0, colon);
    const std::string port = host_port.substr(colon + 1);
    char* end = nullptr;
    const long p = std::strtol(port.c_str(), &end, 10);
    if (*end != '\0' || p <= 0 || p > 65535) throw SocketError("bad port in '" + host_port + "'");

    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_DGRAM;
    addrinfo* res = nullptr;
    if (int rc = getaddrinfo(host.c_str(), nullptr, &hints, &res); rc != 0)
        throw SocketError("cannot resolve '" + host + "': " + gai_strerror(rc));
    Address a;
    std::memcpy(&a.sa, res->ai_addr, sizeof(sockaddr_in));
    freeaddrinfo(res);
    a.sa.sin_port = htons(static_cast<std::uint16_t>(p));
    return a;
}

std::uint16_t Address::port() const
{
    return ntohs(sa.sin_port);
}

std::string Address::to_string() const
{
    char buf[INET_ADDRSTRLEN] = {};
    inet_ntop(AF_INET, &sa.sin_addr, buf, sizeof buf);
    return std::string(buf) + ":" + std::to_string(port());
}

bool Address::operator==(const Address& o) const
{
    return sa.sin_addr.s_addr == o.sa.sin_addr.s_addr && sa.sin_port == o.sa.sin_port;
}

UdpSocket::UdpSocket(std::uint16_t port, bool loopback_only)
{
    fd_ = ::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0) fail("socket");
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(port);
    sa.sin_addr.s_addr = htonl(loopback_only ? INADDR_LOOPBACK : INADDR_ANY);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) {
        const int saved = errno;
        ::close(fd_);
        fd_ = -1;
        errno = saved;
        fail("bind port " + std::to_string(port));
    }
}

UdpSocket::~UdpSocket()
{
    if (fd_ >= 0) ::close(fd_);
}

UdpSocket::UdpSocket(UdpSocket&& o) noexcept : fd_(o.fd_)
{
    o.fd_ = -1;
}

UdpSocket& UdpSocket::operator=(UdpSocket&& o) noexcept
{
    if (this != &o) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = o.fd_;
        o.fd_ = -1;
    }
    return *this;
}

std::uint16_t UdpSocket::local_port() const
{
    sockaddr_in sa{};
    socklen_t len = sizeof sa;
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len) < 0) fail("getsockname");
    return ntohs(sa.sin_port);
}

void UdpSocket::send_to(const Address& to, ByteView bytes)
{
    const auto n = ::sendto(fd_, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&to.sa), sizeof to.sa);
    // A refused or unreachable peer is loss as far as the protocols are concerned.
    if (n < 0 && errno != ECONNREFUSED && errno != EHOSTUNREACH && errno != ENETUNREACH) fail("sendto");
}

std::optional<Datagram> UdpSocket::receive(int timeout_ms, bool* oversized)
{
    pollfd p{fd_, POLLIN, 0};
    for (;;) {
        const int rc = ::poll(&p, 1, timeout_ms);
        if (rc < 0) {
            if (errno == EINTR) continue;
            fail("poll");
        }
        if (rc == 0) return std::nullopt;
        break;
    }
    Datagram d;
    d.bytes.resize(kMaxDatagram + 1);
    socklen_t len = sizeof d.from.sa;
    const auto n = ::recvfrom(fd_, d.bytes.data(), d.bytes.size(), MSG_TRUNC, reinterpret_cast<sockaddr*>(&d.from.sa), &len);
    if (n < 0) {
        if (errno == ECONNREFUSED || errno == EAGAIN || errno == EINTR) return std::nullopt;
        fail("recvfrom");
    }
    if (oversized) *oversized = static_cast<std::size_t>(n) > kMaxDatagram;
    d.bytes.resize(std::min<std::size_t>(static_cast<std::size_t>(n), kMaxDatagram));
    return d;
}

int timeout_until(double deadline_ms, double now_ms)
{
    const double left = std::ceil(deadline_ms - now_ms);
    return left <= 0 ? 0 : static_cast<int>(left);
}

} // namespace netedu::net
