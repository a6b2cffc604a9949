#include "netedu/linksim.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace netedu::linksim {

std::string_view to_string(Direction d)
{
    return d == Direction::AtoB ? "a_to_b" : "b_to_a";
}

std::string_view to_string(Action a)
{
    switch (a) {
    case Action::Deliver: return "deliver";
    case Action::Drop: return "drop";
    case Action::Duplicate: return "duplicate";
    case Action::Hold: return "hold";
    case Action::Release: return "release";
    }
    return "?";
}

void ImpairmentConfig::validate() const
{
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument(std::string(name) + " must be within [0,1]");
    };
    prob(loss_prob, "loss_prob");
    prob(dup_prob, "dup_prob");
    prob(reorder_prob, "reorder_prob");
    if (!(base_delay >= 0)) throw std::invalid_argument("base_delay must be >= 0");
    if (!(jitter >= 0)) throw std::invalid_argument("jitter must be >= 0");
    if (drop_ordinals.count(0)) throw std::invalid_argument("drop ordinals are 1-indexed");
}

bool ImpairmentConfig::impairs(Direction d) const
{
    switch (direction) {
    case DirectionFilter::Both: return true;
    case DirectionFilter::AtoB: return d == Direction::AtoB;
    case DirectionFilter::BtoA: return d == Direction::BtoA;
    }
    return true;
}

Decision next_decision(SplitMix64& rng, const ImpairmentConfig& cfg, std::uint64_t ordinal, Direction direction)
{
    const double u_loss = rng.next_unit();
    const double u_dup = rng.next_unit();
    const double u_reorder = rng.next_unit();
    const double u_jitter = rng.next_unit();

    Decision d;
    d.extra_delay = u_jitter * cfg.jitter;
    if (!cfg.impairs(direction)) return d;
    if (cfg.drop_ordinals.count(ordinal) || u_loss < cfg.loss_prob)
        d.kind = DecisionKind::Drop;
    else if (u_dup < cfg.dup_prob)
        d.kind = DecisionKind::Duplicate;
    else if (u_reorder < cfg.reorder_prob)
        d.kind = DecisionKind::ReorderHold;
    return d;
}

std::string format_event_log(const EventLog& log)
{
    std::string out;
    char line[128];
    for (const auto& e : log) {
        std::snprintf(line, sizeof line, "%.3f\t%s\t%llu\t%s\t%.3f\n", e.t, to_string(e.direction).data(),
                      static_cast<unsigned long long>(e.ordinal), to_string(e.action).data(), e.delay_applied);
        out += line;
    }
    return out;
}

void write_event_log(std::ostream& out, const EventLog& log)
{
    out << format_event_log(log);
}

Link::Link(ImpairmentConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed)
{
    cfg_.validate();
}

std::uint64_t Link::send(Direction dir, double now, Bytes bytes)
{
    const int d = static_cast<int>(dir);
    const std::uint64_t ordinal = ++ordinals_[d];
    const std::uint64_t index = ingress_count_++;
    const Decision decision = next_decision(rng_, cfg_, ordinal, dir);

    if (decision.kind == DecisionKind::Drop) {
        log_.push_back({now, dir, ordinal, Action::Drop, 0});
        return ordinal;
    }

    Pending p{now + cfg_.base_delay + decision.extra_delay, index, 0, dir, ordinal, now, std::move(bytes)};
    if (decision.kind == DecisionKind::ReorderHold && !held_[d]) {
        log_.push_back({now, dir, ordinal, Action::Hold, 0});
        held_[d] = std::move(p);
        return ordinal;
    }
    if (decision.kind == DecisionKind::Duplicate) {
        Pending copy = p;
        copy.copy = 1;
        copy.t = now + cfg_.base_delay + rng_.next_unit() * cfg_.jitter;
        queue_.push(std::move(copy));
    }
    queue_.push(std::move(p));
    return ordinal;
}

std::optional<double> Link::next_time() const
{
    if (!released_.empty()) return released_.front().t;
    if (!queue_.empty()) return queue_.top().t;
    return std::nullopt;
}

Delivery Link::pop()
{
    if (!released_.empty()) {
        Pending p = std::move(released_.front());
        released_.pop_front();
        log_.push_back({p.t, p.direction, p.ordinal, Action::Release, p.t - p.ingress});
        return {p.t, p.direction, p.ordinal, std::move(p.bytes)};
    }
    Pending p = queue_.top();
    queue_.pop();
    log_.push_back({p.t, p.direction, p.ordinal, p.copy ? Action::Duplicate : Action::Deliver, p.t - p.ingress});

    auto& held = held_[static_cast<int>(p.direction)];
    if (p.copy == 0 && held && held->index < p.index) {
        held->t = p.t;
        released_.push_back(std::move(*held));
        held.reset();
    }
    return {p.t, p.direction, p.ordinal, std::move(p.bytes)};
}

void Link::flush(double now)
{
    for (auto& held : held_) {
        if (!held) continue;
        held->t = std::max(now, held->t);
        released_.push_back(std::move(*held));
        held.reset();
    }
    std::ranges::sort(released_, [](const Pending& a, const Pending& b) {
        return a.t != b.t ? a.t < b.t : a.index < b.index;
    });
}

bool Link::has_held() const
{
    return held_[0].has_value() || held_[1].has_value();
}

SimulationResult simulate(const std::vector<TimedPacket>& packets, const ImpairmentConfig& cfg)
{
    std::vector<const TimedPacket*> order;
    order.reserve(packets.size());
    for (const auto& p : packets) order.push_back(&p);
    std::ranges::stable_sort(order, [](const TimedPacket* a, const TimedPacket* b) { return a->t < b->t; });

    Link link(cfg);
    SimulationResult result;
    double last = 0;
    auto drain_before = [&](std::optional<double> limit) {
        while (auto t = link.next_time()) {
            if (limit && !(*t < *limit)) break;
            result.output.push_back(link.pop());
            last = std::max(last, result.output.back().t);
        }
    };
    for (const TimedPacket* p : order) {
        drain_before(p->t);
        link.send(p->direction, p->t, p->bytes);
        last = std::max(last, p->t);
    }
    drain_before(std::nullopt);
    if (link.has_held()) {
        link.flush(last);
        drain_before(std::nullopt);
    }
    result.log = link.log();
    return result;
}

std::vector<Bytes> chop_stream(ByteView data, std::uint64_t seed, std::size_t max_chunk)
{
    if (max_chunk < 1) throw std::invalid_argument("max_chunk must be >= 1");
    SplitMix64 rng(seed);
    std::vector<Bytes> chunks;
    std::size_t off = 0;
    while (off < data.size()) {
        const std::size_t want = 1 + static_cast<std::size_t>(rng.below(max_chunk));
        const std::size_t n = std::min(want, data.size() - off);
        chunks.emplace_back(data.begin() + off, data.begin() + off + n);
        off += n;
    }
    return chunks;
}

} // namespace netedu::linksim
