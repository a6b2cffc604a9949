#pragma once

#include "netedu/error.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace netedu::newreno {

/// A segment-level TCP transfer with deterministic losses. Times in ms,
/// windows in segments.
struct Scenario {
    double rtt = 20;
    std::uint64_t num_segments = 8;
    double init_cwnd = 1;
    double ssthresh0 = 64;
    double rto = 200;
    std::set<std::uint64_t> loss_ordinals;   // 1-indexed transmission ordinals
    std::uint32_t mss = 1460;

    void validate() const;
};

enum class EventKind {
    Send,
    Retransmit,
    AckRcvd,
    DupackRcvd,
    RtoFire,
    EnterFastRecovery,
    ExitFastRecovery,
};

std::string_view to_string(EventKind k);
EventKind parse_event_kind(std::string_view s);

/// For send/retransmit/rto_fire `seg` is the segment concerned; for ACK
/// events it is the highest segment cumulatively acknowledged.
struct Event {
    double t = 0;
    EventKind kind = EventKind::Send;
    std::uint64_t seg = 0;
    double cwnd_after = 0;
    double ssthresh_after = 0;

    bool operator==(const Event&) const = default;
};

using Timeline = std::vector<Event>;

/// Prediction exceeded 100 RTTs of simulated time.
class NonTerminating : public Error {
public:
    using Error::Error;
};

/// Computes the timeline directly: every segment has the same one-way delay,
/// so the receiver's answer to each transmission is known when it is sent.
Timeline predict(const Scenario& s);

/// Runs a New Reno sender and an ACK-per-segment receiver over the linksim
/// event core, dropping the scenario's transmission ordinals.
Timeline measure(const Scenario& s);

struct TimelineDiff {
    struct Mistimed {
        Event predicted;
        Event measured;
    };
    std::vector<Event> missing;   // predicted, absent from measured
    std::vector<Event> extra;     // measured, absent from predicted
    std::vector<Mistimed> mistimed;

    bool empty() const { return missing.empty() && extra.empty() && mistimed.empty(); }
};

/// Aligns events by (kind, seg) with a longest common subsequence and reports
/// unmatched events and matched pairs more than `tol` ms apart.
TimelineDiff compare(const Timeline& predicted, const Timeline& measured, double tol);

/// Tab-separated `t_ms kind seg cwnd ssthresh`, three decimals.
std::string format_timeline(const Timeline& t);
std::string format_diff(const TimelineDiff& d);

} // namespace netedu::newreno
