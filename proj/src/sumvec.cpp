#include "netedu/sumvec.hpp"

#include "netedu/linksim.hpp"

#include <arpa/inet.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>

namespace netedu::sumvec {

namespace {

Bytes sum_reply(const codec::IntVector& v)
{
    Bytes out;
    put_be32(out, static_cast<std::uint32_t>(codec::sum_vector(v)));
    return out;
}

bool write_all(int fd, ByteView data)
{
    while (!data.empty()) {
        const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data = data.subspan(static_cast<std::size_t>(n));
    }
    return true;
}

class Fd {
public:
    explicit Fd(int fd) : fd_(fd) {}
    ~Fd()
    {
        if (fd_ >= 0) ::close(fd_);
    }
    int get() const { return fd_; }

private:
    int fd_;
};

} // namespace

SumServer::SumServer(std::uint16_t udp_port, std::uint16_t tcp_port) : udp_(udp_port, true)
{
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0) throw net::SocketError("socket failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in sa = net::Address::loopback(tcp_port).sa;
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0 || ::listen(listen_fd_, 16) < 0) {
        ::close(listen_fd_);
        throw net::SocketError("cannot listen on TCP port " + std::to_string(tcp_port));
    }
    socklen_t len = sizeof sa;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&sa), &len);
    tcp_port_ = ntohs(sa.sin_port);
}

SumServer::~SumServer()
{
    stop();
    ::close(listen_fd_);
}

void SumServer::start()
{
    if (thread_.joinable()) return;
    stop_ = false;
    thread_ = std::thread([this] { loop(); });
}

void SumServer::stop()
{
    stop_ = true;
    if (thread_.joinable()) thread_.join();
}

void SumServer::loop()
{
    std::map<int, codec::VectorStreamDecoder> conns;
    while (!stop_) {
        std::vector<pollfd> fds{{udp_.fd(), POLLIN, 0}, {listen_fd_, POLLIN, 0}};
        for (const auto& [fd, dec] : conns) fds.push_back({fd, POLLIN, 0});
        if (::poll(fds.data(), fds.size(), 50) <= 0) continue;

        if (fds[0].revents & POLLIN) {
            if (auto dg = udp_.receive(0)) {
                try {
                    udp_.send_to(dg->from, sum_reply(codec::decode_vector(dg->bytes)));
                } catch (const codec::FrameError&) {
                    // not a whole number of integers: no reply
                }
            }
        }
        if (fds[1].revents & POLLIN) {
            const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
            if (fd >= 0) conns[fd];
        }
        for (std::size_t i = 2; i < fds.size(); ++i) {
            if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const int fd = fds[i].fd;
            std::uint8_t buf[4096];
            const auto n = ::recv(fd, buf, sizeof buf, 0);
            bool ok = n > 0;
            if (ok) {
                auto& dec = conns[fd];
                // recv returns whatever has arrived so far; the decoder
                // copes with any split.
                for (auto v = dec.feed(ByteView(buf, static_cast<std::size_t>(n))); v && ok; v = dec.feed({}))
                    ok = write_all(fd, sum_reply(*v));
            }
            if (!ok) {
                ::close(fd);
                conns.erase(fd);
            }
        }
    }
    for (const auto& [fd, dec] : conns) ::close(fd);
}

std::int32_t sumvec_roundtrip(std::uint16_t port, const codec::IntVector& v, Transport transport,
                              const RoundtripOptions& options)
{
    Bytes reply;
    if (transport == Transport::Udp) {
        net::UdpSocket sock(0, true);
        const Bytes msg = codec::encode_vector(v);
        if (msg.size() > net::kMaxDatagram) throw Error("vector too long for one datagram");
        sock.send_to(net::Address::loopback(port), msg);
        auto dg = sock.receive(options.timeout_ms);
        if (!dg) throw Error("no reply within " + std::to_string(options.timeout_ms) + " ms");
        reply = std::move(dg->bytes);
    } else {
        Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
        if (fd.get() < 0) throw net::SocketError("socket failed");
        int one = 1;
        ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        sockaddr_in sa = net::Address::loopback(port).sa;
        if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0)
            throw net::SocketError(std::string("connect: ") + std::strerror(errno));
        for (const auto& chunk : linksim::chop_stream(codec::encode_vector_stream(v), options.seed, options.max_chunk))
            if (!write_all(fd.get(), chunk)) throw net::SocketError("send failed");

        pollfd p{fd.get(), POLLIN, 0};
        while (reply.size() < 4) {
            if (::poll(&p, 1, options.timeout_ms) <= 0) throw Error("no reply within " + std::to_string(options.timeout_ms) + " ms");
            std::uint8_t buf[16];
            const auto n = ::recv(fd.get(), buf, sizeof buf, 0);
            if (n <= 0) break;
            reply.insert(reply.end(), buf, buf + n);
        }
    }
    if (reply.size() != 4) throw Error("malformed reply of " + std::to_string(reply.size()) + " bytes");
    return static_cast<std::int32_t>(get_be32(reply.data()));
}

} // namespace netedu::sumvec
