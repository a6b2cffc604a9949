#include "netedu/newreno.hpp"

#include "netedu/linksim.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

namespace netedu::newreno {

namespace {

Bytes encode_u64(std::uint64_t v)
{
    Bytes b;
    put_be32(b, static_cast<std::uint32_t>(v >> 32));
    put_be32(b, static_cast<std::uint32_t>(v));
    return b;
}

std::uint64_t decode_u64(const Bytes& b)
{
    return (std::uint64_t(get_be32(b.data())) << 32) | get_be32(b.data() + 4);
}

// ACK-per-segment receiver answering with the next expected segment.
class SegmentReceiver {
public:
    std::uint64_t on_segment(std::uint64_t seg)
    {
        if (seg >= next_) buffered_.insert(seg);
        while (buffered_.count(next_)) {
            buffered_.erase(next_);
            ++next_;
        }
        return next_;
    }

private:
    std::uint64_t next_ = 1;
    std::set<std::uint64_t> buffered_;
};

// Segment-granularity New Reno sender state machine.
class NewRenoSender {
public:
    enum class Mode { SlowStartOrAvoidance, FastRecovery };

    NewRenoSender(const Scenario& s, Timeline& out)
        : total_(s.num_segments), rto_(s.rto), cwnd_(s.init_cwnd), ssthresh_(s.ssthresh0), out_(out) {}

    bool done() const { return snd_una_ > total_; }
    std::optional<double> deadline() const { return timer_; }

    std::vector<std::uint64_t> start(double now)
    {
        std::vector<std::uint64_t> tx;
        send_allowed(now, tx);
        return tx;
    }

    std::vector<std::uint64_t> on_ack(std::uint64_t ackno, double now)
    {
        std::vector<std::uint64_t> tx;
        const bool outstanding = snd_nxt_ > snd_una_;
        if (ackno > snd_una_) {
            new_ack(ackno, now, tx);
        } else if (ackno == snd_una_ && outstanding) {
            dup_ack(now, tx);
        }
        return tx;
    }

    std::vector<std::uint64_t> on_timer(double now)
    {
        std::vector<std::uint64_t> tx;
        const std::uint64_t flight = snd_nxt_ - snd_una_;
        ssthresh_ = std::max(std::floor(double(flight) / 2), 2.0);
        cwnd_ = 1;
        mode_ = Mode::SlowStartOrAvoidance;
        recover_ = snd_nxt_ - 1;
        dupacks_ = 0;
        log(now, EventKind::RtoFire, snd_una_);
        timer_ = now + rto_;
        snd_nxt_ = snd_una_;
        send_one(now, tx);
        send_allowed(now, tx);
        return tx;
    }

private:
    void log(double now, EventKind kind, std::uint64_t seg)
    {
        out_.push_back(Event{now, kind, seg, cwnd_, ssthresh_});
    }

    void send_one(double now, std::vector<std::uint64_t>& tx)
    {
        const std::uint64_t seg = snd_nxt_++;
        log(now, seg <= high_water_ ? EventKind::Retransmit : EventKind::Send, seg);
        high_water_ = std::max(high_water_, seg);
        if (!timer_) timer_ = now + rto_;
        tx.push_back(seg);
    }

    void retransmit_una(double now, std::vector<std::uint64_t>& tx)
    {
        log(now, EventKind::Retransmit, snd_una_);
        if (!timer_) timer_ = now + rto_;
        tx.push_back(snd_una_);
    }

    void send_allowed(double now, std::vector<std::uint64_t>& tx)
    {
        while (snd_nxt_ <= total_ && static_cast<double>(snd_nxt_ - snd_una_) + 1 <= cwnd_)
            send_one(now, tx);
    }

    void new_ack(std::uint64_t ackno, double now, std::vector<std::uint64_t>& tx)
    {
        const std::uint64_t acked = ackno - snd_una_;
        snd_una_ = ackno;
        if (snd_nxt_ < snd_una_) snd_nxt_ = snd_una_;
        dupacks_ = 0;
        timer_.reset();
        if (snd_nxt_ > snd_una_) timer_ = now + rto_;

        if (mode_ == Mode::FastRecovery) {
            if (ackno > recover_) {
                log(now, EventKind::AckRcvd, ackno - 1);
                cwnd_ = ssthresh_;
                mode_ = Mode::SlowStartOrAvoidance;
                log(now, EventKind::ExitFastRecovery, ackno - 1);
            } else {
                // Partial ACK: deflate by what was acknowledged, keep one
                // segment of credit, fill the next hole.
                cwnd_ = std::max(cwnd_ - static_cast<double>(acked) + 1, 1.0);
                log(now, EventKind::AckRcvd, ackno - 1);
                retransmit_una(now, tx);
            }
        } else {
            if (cwnd_ < ssthresh_)
                cwnd_ += 1;
            else
                cwnd_ += 1 / cwnd_;
            log(now, EventKind::AckRcvd, ackno - 1);
        }
        send_allowed(now, tx);
    }

    void dup_ack(double now, std::vector<std::uint64_t>& tx)
    {
        ++dupacks_;
        if (mode_ == Mode::FastRecovery) {
            cwnd_ += 1;
            log(now, EventKind::DupackRcvd, snd_una_ - 1);
            send_allowed(now, tx);
            return;
        }
        log(now, EventKind::DupackRcvd, snd_una_ - 1);
        if (dupacks_ != 3 || snd_una_ <= recover_) return;
        ssthresh_ = std::max(std::floor(double(snd_nxt_ - snd_una_) / 2), 2.0);
        cwnd_ = ssthresh_ + 3;
        recover_ = snd_nxt_ - 1;
        mode_ = Mode::FastRecovery;
        log(now, EventKind::EnterFastRecovery, snd_una_);
        retransmit_una(now, tx);
    }

    std::uint64_t total_;
    double rto_;
    double cwnd_;
    double ssthresh_;
    Timeline& out_;
    Mode mode_ = Mode::SlowStartOrAvoidance;
    std::uint64_t snd_una_ = 1;
    std::uint64_t snd_nxt_ = 1;
    std::uint64_t high_water_ = 0;
    std::uint64_t recover_ = 0;
    int dupacks_ = 0;
    std::optional<double> timer_;
};

} // namespace

Timeline measure(const Scenario& s)
{
    s.validate();
    Timeline timeline;
    if (s.num_segments == 0) return timeline;

    linksim::ImpairmentConfig cfg;
    cfg.base_delay = s.rtt / 2;
    cfg.drop_ordinals = s.loss_ordinals;
    cfg.direction = linksim::DirectionFilter::AtoB;
    linksim::Link link(cfg);

    NewRenoSender sender(s, timeline);
    SegmentReceiver receiver;
    const double horizon = 100 * s.rtt;

    auto transmit = [&](const std::vector<std::uint64_t>& segs, double now) {
        for (auto seg : segs) link.send(linksim::Direction::AtoB, now, encode_u64(seg));
    };

    transmit(sender.start(0), 0);
    while (!sender.done()) {
        const auto delivery_at = link.next_time();
        const auto deadline = sender.deadline();
        if (!delivery_at && !deadline) throw Error("measurement stalled with nothing outstanding");
        const bool deliver = delivery_at && (!deadline || *delivery_at <= *deadline);
        const double now = deliver ? *delivery_at : *deadline;
        if (now > horizon) throw NonTerminating("scenario did not complete within 100 round-trip times");

        if (!deliver) {
            transmit(sender.on_timer(now), now);
            continue;
        }
        linksim::Delivery d = link.pop();
        const std::uint64_t value = decode_u64(d.bytes);
        if (d.direction == linksim::Direction::AtoB)
            link.send(linksim::Direction::BtoA, now, encode_u64(receiver.on_segment(value)));
        else
            transmit(sender.on_ack(value, now), now);
    }
    return timeline;
}

} // namespace netedu::newreno
