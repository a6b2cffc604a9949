#include "netedu/mtp.hpp"

#include <algorithm>

namespace netedu::mtp {

TransferReport transfer(ByteView file, const linksim::ImpairmentConfig& impairment, const TransferOptions& options)
{
    using linksim::Direction;

    linksim::Link link(impairment);
    Sender sender(options.sender);
    Receiver receiver(options.receiver);
    TransferReport report;
    double now = 0;

    auto emit = [&](const std::vector<Frame>& frames) {
        for (const auto& f : frames) {
            link.send(Direction::AtoB, now, encode_frame(f));
            ++report.frames_sent;
        }
        const std::size_t flight = sender.in_flight().size();
        report.max_in_flight = std::max(report.max_in_flight, flight);
        if (flight > std::min<std::size_t>(sender.peer_window(), kMaxWindow)) report.window_respected = false;
    };

    emit(sender.on_app_data(file, now));
    emit(sender.close(now));

    while (!sender.finished()) {
        const auto delivery_at = link.next_time();
        const auto deadline = sender.next_deadline();
        if (!delivery_at && !deadline) {
            if (link.has_held()) {
                link.flush(now);
                continue;
            }
            throw Error("transfer stalled: nothing in flight and no pending deliveries");
        }
        if (delivery_at && (!deadline || *delivery_at <= *deadline)) {
            now = *delivery_at;
            linksim::Delivery d = link.pop();
            Frame f;
            try {
                f = decode_frame(d.bytes);
            } catch (const DecodeError&) {
                continue;
            }
            if (d.direction == Direction::AtoB) {
                auto res = receiver.on_frame(f);
                report.delivered.insert(report.delivered.end(), res.delivered.begin(), res.delivered.end());
                if (res.ack) {
                    link.send(Direction::BtoA, now, encode_frame(*res.ack));
                    ++report.acks_sent;
                }
            } else if (f.type == FrameType::Ack) {
                emit(sender.on_ack(f, now));
            }
        } else {
            now = *deadline;
            emit(sender.on_tick(now));
        }
    }

    const SenderStats& s = sender.stats();
    report.data_frames = s.data_frames;
    report.retransmissions = s.retransmissions;
    report.fast_retransmits = s.fast_retransmits;
    report.timeouts = s.timeouts;
    report.fin_exchanges = 1;
    report.completion_time = now;
    report.log = link.log();
    return report;
}

} // namespace netedu::mtp
