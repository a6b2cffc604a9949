#pragma once

#include "netedu/bytes.hpp"
#include "netedu/prng.hpp"

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace netedu::linksim {

enum class Direction { AtoB, BtoA };
enum class DirectionFilter { Both, AtoB, BtoA };

std::string_view to_string(Direction d);

/// Impairments applied to a UDP flow. Times are milliseconds.
struct ImpairmentConfig {
    std::uint64_t seed = 0;
    double base_delay = 0;
    double jitter = 0;          // uniform in [0, jitter]
    double loss_prob = 0;
    double dup_prob = 0;
    double reorder_prob = 0;
    std::set<std::uint64_t> drop_ordinals;   // 1-indexed, per direction
    DirectionFilter direction = DirectionFilter::Both;

    /// Throws std::invalid_argument when a probability leaves [0,1] or a
    /// delay is negative.
    void validate() const;
    bool impairs(Direction d) const;
};

enum class Action { Deliver, Drop, Duplicate, Hold, Release };

std::string_view to_string(Action a);

struct Event {
    double t = 0;
    Direction direction = Direction::AtoB;
    std::uint64_t ordinal = 0;
    Action action = Action::Deliver;
    double delay_applied = 0;

    bool operator==(const Event&) const = default;
};

using EventLog = std::vector<Event>;

/// Tab-separated `t_ms dir ordinal action delay_ms`, one event per line.
std::string format_event_log(const EventLog& log);
void write_event_log(std::ostream& out, const EventLog& log);

enum class DecisionKind { Pass, Drop, Duplicate, ReorderHold };

struct Decision {
    DecisionKind kind = DecisionKind::Pass;
    double extra_delay = 0;   // jitter part only
};

/// Consumes exactly four draws in the order loss, duplication, reorder,
/// jitter. drop_ordinals win over probabilistic loss. Impairments other than
/// delay are skipped for directions the filter excludes; the draws are
/// still consumed.
Decision next_decision(SplitMix64& rng, const ImpairmentConfig& cfg, std::uint64_t ordinal, Direction direction);

struct Delivery {
    double t = 0;
    Direction direction = Direction::AtoB;
    std::uint64_t ordinal = 0;
    Bytes bytes;
};

/// Incremental discrete-event link. Callers offer packets with send() in
/// non-decreasing time order and drain deliveries with pop() as simulated
/// time advances.
class Link {
public:
    explicit Link(ImpairmentConfig cfg);

    /// Returns the ordinal assigned to the packet in its direction.
    std::uint64_t send(Direction dir, double now, Bytes bytes);

    std::optional<double> next_time() const;
    /// Removes the earliest pending delivery. Precondition: next_time().
    Delivery pop();

    /// Releases packets still held for reordering at time `now`.
    void flush(double now);

    bool has_held() const;
    const EventLog& log() const { return log_; }
    const ImpairmentConfig& config() const { return cfg_; }

private:
    struct Pending {
        double t;
        std::uint64_t index;   // global ingress index
        int copy;              // 0 original, 1 duplicate
        Direction direction;
        std::uint64_t ordinal;
        double ingress;
        Bytes bytes;
    };
    struct Later {
        bool operator()(const Pending& a, const Pending& b) const
        {
            if (a.t != b.t) return a.t > b.t;
            if (a.index != b.index) return a.index > b.index;
            return a.copy > b.copy;
        }
    };

    ImpairmentConfig cfg_;
    SplitMix64 rng_;
    std::uint64_t ingress_count_ = 0;
    std::uint64_t ordinals_[2] = {0, 0};
    std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
    std::optional<Pending> held_[2];
    std::deque<Pending> released_;
    EventLog log_;
};

struct TimedPacket {
    double t = 0;
    Direction direction = Direction::AtoB;
    Bytes bytes;
};

struct SimulationResult {
    std::vector<Delivery> output;
    EventLog log;
};

/// Runs a whole input schedule through a Link. Packets still held when the
/// input is exhausted are released at the time of the last event.
SimulationResult simulate(const std::vector<TimedPacket>& packets, const ImpairmentConfig& cfg);

/// Splits `data` into chunks with sizes uniform in [1, max_chunk].
std::vector<Bytes> chop_stream(ByteView data, std::uint64_t seed, std::size_t max_chunk);

} // namespace netedu::linksim
