#include "netedu/mtp_endpoint.hpp"

#include <ostream>

namespace netedu::mtp {

namespace {

// Returns the decoded frame, or nothing after counting and logging why
// the datagram was discarded.
std::optional<Frame> decode_logged(ByteView bytes, std::uint64_t& integrity, std::uint64_t& malformed,
                                   std::ostream& log)
{
    try {
        return decode_frame(bytes);
    } catch (const DecodeError& e) {
        if (e.kind() == DecodeError::Kind::Integrity) {
            ++integrity;
            log << "integrity error: " << e.what() << '\n';
        } else {
            ++malformed;
            log << "malformed frame: " << e.what() << '\n';
        }
        return std::nullopt;
    }
}

} // namespace

SendResult send_file(ByteView data, const SendOptions& options, std::ostream& log)
{
    net::UdpSocket socket(0);
    const net::Stopwatch clock;
    Sender sender(options.sender);
    SendResult result;
    result.bytes = data.size();

    auto transmit = [&](const std::vector<Frame>& frames) {
        for (const auto& f : frames) socket.send_to(options.peer, encode_frame(f));
    };

    transmit(sender.on_app_data(data, clock.elapsed_ms()));
    transmit(sender.close(clock.elapsed_ms()));

    try {
        while (!sender.finished()) {
            const double now = clock.elapsed_ms();
            if (auto deadline = sender.next_deadline(); deadline && *deadline <= now) {
                transmit(sender.on_tick(now));
                continue;
            }
            const auto deadline = sender.next_deadline();
            const int wait = deadline ? net::timeout_until(*deadline, now) : 100;
            auto dg = socket.receive(wait);
            if (!dg) continue;
            auto f = decode_logged(dg->bytes, result.integrity_errors, result.malformed, log);
            if (!f) continue;
            if (f->type != FrameType::Ack) {
                log << "ignoring non-ACK frame from " << dg->from.to_string() << '\n';
                continue;
            }
            transmit(sender.on_ack(*f, clock.elapsed_ms()));
        }
    } catch (const ConnectionAborted& e) {
        std::string msg = std::string("connection aborted: ") + e.what();
        if (result.integrity_errors > 0) msg += "; integrity errors (" + std::to_string(result.integrity_errors) + ")";
        throw ConnectionAborted(msg);
    }
    result.stats = sender.stats();
    result.duration_ms = clock.elapsed_ms();
    return result;
}

RecvResult receive_file(net::UdpSocket& socket, const RecvOptions& options, std::ostream& log)
{
    const net::Stopwatch clock;
    Receiver receiver(options.receiver);
    RecvResult result;
    std::optional<net::Address> peer;
    double last_activity = 0;

    for (;;) {
        const double now = clock.elapsed_ms();
        int wait = 100;
        if (receiver.half_closed()) {
            if (now - last_activity >= options.linger_ms) break;
            wait = net::timeout_until(last_activity + options.linger_ms, now);
        } else if (options.idle_timeout_ms > 0) {
            if (now - last_activity >= options.idle_timeout_ms) {
                log << "no traffic for " << options.idle_timeout_ms << " ms, giving up\n";
                break;
            }
            wait = net::timeout_until(last_activity + options.idle_timeout_ms, now);
        }
        auto dg = socket.receive(wait);
        if (!dg) continue;
        last_activity = clock.elapsed_ms();
        if (peer && !(dg->from == *peer)) {
            log << "ignoring datagram from " << dg->from.to_string() << '\n';
            continue;
        }
        auto f = decode_logged(dg->bytes, result.integrity_errors, result.malformed, log);
        if (!f) continue;
        if (!peer) peer = dg->from;
        auto r = receiver.on_frame(*f);
        result.data.insert(result.data.end(), r.delivered.begin(), r.delivered.end());
        if (r.ack) socket.send_to(*peer, encode_frame(*r.ack));
    }
    result.complete = receiver.half_closed();
    result.stats = receiver.stats();
    return result;
}

} // namespace netedu::mtp
