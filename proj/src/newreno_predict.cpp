#include "netedu/newreno.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>

namespace netedu::newreno {

void Scenario::validate() const
{
    if (!(rtt > 0)) throw std::invalid_argument("rtt must be positive");
    if (!(init_cwnd >= 1)) throw std::invalid_argument("init_cwnd must be >= 1");
    if (!(ssthresh0 > 0)) throw std::invalid_argument("ssthresh0 must be positive");
    if (!(rto > 0)) throw std::invalid_argument("rto must be positive");
    if (loss_ordinals.count(0)) throw std::invalid_argument("loss ordinals are 1-indexed");
}

std::string_view to_string(EventKind k)
{
    switch (k) {
    case EventKind::Send: return "send";
    case EventKind::Retransmit: return "retransmit";
    case EventKind::AckRcvd: return "ack_rcvd";
    case EventKind::DupackRcvd: return "dupack_rcvd";
    case EventKind::RtoFire: return "rto_fire";
    case EventKind::EnterFastRecovery: return "enter_fast_recovery";
    case EventKind::ExitFastRecovery: return "exit_fast_recovery";
    }
    return "?";
}

EventKind parse_event_kind(std::string_view s)
{
    for (auto k : {EventKind::Send, EventKind::Retransmit, EventKind::AckRcvd, EventKind::DupackRcvd,
                   EventKind::RtoFire, EventKind::EnterFastRecovery, EventKind::ExitFastRecovery})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown timeline event kind: " + std::string(s));
}

namespace {

struct PendingAck {
    double t;
    std::uint64_t next_expected;
};

class Predictor {
public:
    explicit Predictor(const Scenario& s)
        : s_(s), cwnd_(s.init_cwnd), ssthresh_(s.ssthresh0), horizon_(100 * s.rtt) {}

    Timeline run()
    {
        if (s_.num_segments == 0) return out_;
        fill_window(0);
        while (una_ <= s_.num_segments) {
            const double ack_at = acks_.empty() ? kInf : acks_.front().t;
            const double rto_at = timer_ ? *timer_ : kInf;
            const double now = std::min(ack_at, rto_at);
            if (now == kInf) throw Error("prediction stalled with nothing outstanding");
            if (now > horizon_)
                throw NonTerminating("scenario did not complete within 100 round-trip times");
            if (ack_at <= rto_at) {
                const std::uint64_t ackno = acks_.front().next_expected;
                acks_.pop_front();
                on_ack(ackno, now);
            } else {
                on_timeout(now);
            }
        }
        return out_;
    }

private:
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    void emit(double t, EventKind kind, std::uint64_t seg)
    {
        out_.push_back(Event{t, kind, seg, cwnd_, ssthresh_});
    }

    // The receiver sees transmissions in send order because every segment
    // takes rtt/2, so its cumulative answer can be settled right here.
    void transmit(std::uint64_t seg, double now)
    {
        emit(now, seg > highest_sent_ ? EventKind::Send : EventKind::Retransmit, seg);
        highest_sent_ = std::max(highest_sent_, seg);
        if (!timer_) timer_ = now + s_.rto;
        if (s_.loss_ordinals.count(++ordinal_)) return;

        if (seg == rcv_next_) {
            ++rcv_next_;
            while (!out_of_order_.empty() && *out_of_order_.begin() == rcv_next_) {
                out_of_order_.erase(out_of_order_.begin());
                ++rcv_next_;
            }
        } else if (seg > rcv_next_) {
            out_of_order_.insert(seg);
        }
        acks_.push_back({now + s_.rtt, rcv_next_});
    }

    void fill_window(double now)
    {
        while (nxt_ <= s_.num_segments && double(nxt_ - una_ + 1) <= cwnd_) {
            transmit(nxt_, now);
            ++nxt_;
        }
    }

    double half_flight() const
    {
        return std::max(std::floor(double(nxt_ - una_) / 2), 2.0);
    }

    void on_ack(std::uint64_t ackno, double now)
    {
        if (ackno > una_) {
            const std::uint64_t newly = ackno - una_;
            una_ = ackno;
            nxt_ = std::max(nxt_, una_);
            dupacks_ = 0;
            if (nxt_ > una_)
                timer_ = now + s_.rto;
            else
                timer_.reset();

            if (in_recovery_ && ackno > recover_) {
                emit(now, EventKind::AckRcvd, ackno - 1);
                cwnd_ = ssthresh_;
                in_recovery_ = false;
                emit(now, EventKind::ExitFastRecovery, ackno - 1);
            } else if (in_recovery_) {
                cwnd_ = std::max(cwnd_ - double(newly) + 1, 1.0);
                emit(now, EventKind::AckRcvd, ackno - 1);
                transmit(una_, now);
            } else {
                cwnd_ += cwnd_ < ssthresh_ ? 1.0 : 1.0 / cwnd_;
                emit(now, EventKind::AckRcvd, ackno - 1);
            }
            fill_window(now);
            return;
        }
        if (ackno != una_ || nxt_ == una_) return;

        ++dupacks_;
        if (in_recovery_) {
            cwnd_ += 1;
            emit(now, EventKind::DupackRcvd, una_ - 1);
            fill_window(now);
        } else if (dupacks_ == 3 && ackno > recover_) {
            emit(now, EventKind::DupackRcvd, una_ - 1);
            ssthresh_ = half_flight();
            cwnd_ = ssthresh_ + 3;
            recover_ = nxt_ - 1;
            in_recovery_ = true;
            emit(now, EventKind::EnterFastRecovery, una_);
            transmit(una_, now);
        } else {
            emit(now, EventKind::DupackRcvd, una_ - 1);
        }
    }

    void on_timeout(double now)
    {
        ssthresh_ = half_flight();
        cwnd_ = 1;
        in_recovery_ = false;
        recover_ = nxt_ - 1;
        dupacks_ = 0;
        emit(now, EventKind::RtoFire, una_);
        timer_ = now + s_.rto;
        nxt_ = una_;
        transmit(nxt_, now);
        ++nxt_;
        fill_window(now);
    }

    const Scenario& s_;
    double cwnd_;
    double ssthresh_;
    double horizon_;
    std::uint64_t una_ = 1;
    std::uint64_t nxt_ = 1;
    std::uint64_t highest_sent_ = 0;
    std::uint64_t recover_ = 0;
    bool in_recovery_ = false;
    int dupacks_ = 0;
    std::uint64_t ordinal_ = 0;
    std::optional<double> timer_;

    std::uint64_t rcv_next_ = 1;
    std::set<std::uint64_t> out_of_order_;
    std::deque<PendingAck> acks_;

    Timeline out_;
};

} // namespace

Timeline predict(const Scenario& s)
{
    s.validate();
    return Predictor(s).run();
}

} // namespace netedu::newreno
