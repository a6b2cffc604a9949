#pragma once

#include "netedu/linksim.hpp"
#include "netedu/udp.hpp"

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace netedu::linksim {

struct ProxyConfig {
    std::uint16_t listen_port = 0;
    /// Side a. When unset, the proxy treats every sender other than b as a
    /// and replies to the most recent one.
    std::optional<net::Address> a;
    net::Address b;
    ImpairmentConfig impairment;
};

struct ProxyStats {
    std::uint64_t received = 0;
    std::uint64_t forwarded = 0;
    std::uint64_t oversized = 0;
    std::uint64_t unknown_source = 0;
};

/// Live UDP proxy applying the Link decision pipeline on the wall clock.
/// A single loop owns the socket, the Link and the delivery timers.
class Proxy {
public:
    explicit Proxy(ProxyConfig cfg);

    std::uint16_t port() const { return socket_.local_port(); }

    /// Forwards until `stop` becomes true. Packets still queued at that
    /// point are discarded; held packets are logged as released.
    void run(const std::atomic<bool>& stop);

    const EventLog& log() const { return link_.log(); }
    const ProxyStats& stats() const { return stats_; }
    const std::vector<std::string>& errors() const { return errors_; }

private:
    ProxyConfig cfg_;
    net::UdpSocket socket_;
    Link link_;
    std::optional<net::Address> a_;
    ProxyStats stats_;
    std::vector<std::string> errors_;
};

} // namespace netedu::linksim
