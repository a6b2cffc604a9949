#include "netedu/proxy.hpp"

#include <algorithm>

namespace netedu::linksim {

Proxy::Proxy(ProxyConfig cfg)
    : cfg_(std::move(cfg)), socket_(cfg_.listen_port), link_(cfg_.impairment), a_(cfg_.a)
{
    cfg_.impairment.validate();
}

void Proxy::run(const std::atomic<bool>& stop)
{
    const net::Stopwatch clock;
    constexpr int kPollSlice = 20;   // ms; bounds the reaction time to `stop`

    // Everything due by `now` leaves before a packet ingressing at `now`
    // is offered, which keeps the event log in time order.
    auto drain = [&](double now) {
        while (link_.next_time() && *link_.next_time() <= now) {
            Delivery d = link_.pop();
            const net::Address& to = d.direction == Direction::AtoB ? cfg_.b : *a_;
            socket_.send_to(to, d.bytes);
            ++stats_.forwarded;
        }
    };

    while (!stop.load()) {
        const double now = clock.elapsed_ms();
        drain(now);

        int wait = kPollSlice;
        if (auto next = link_.next_time()) wait = std::min(wait, net::timeout_until(*next, now));
        bool oversized = false;
        auto dg = socket_.receive(wait, &oversized);
        if (!dg) continue;

        ++stats_.received;
        if (oversized) {
            ++stats_.oversized;
            errors_.push_back("oversized datagram from " + dg->from.to_string() + " dropped");
            continue;
        }
        Direction dir;
        if (dg->from == cfg_.b) {
            if (!a_) continue;   // nobody to forward to yet
            dir = Direction::BtoA;
        } else if (!cfg_.a || dg->from == *cfg_.a) {
            a_ = dg->from;
            dir = Direction::AtoB;
        } else {
            ++stats_.unknown_source;
            continue;
        }
        const double t = clock.elapsed_ms();
        drain(t);
        link_.send(dir, t, std::move(dg->bytes));
    }
    if (link_.has_held()) link_.flush(clock.elapsed_ms());
}

} // namespace netedu::linksim
