#include "netedu/bank.hpp"
#include "netedu/dissect.hpp"
#include "netedu/interop.hpp"
#include "netedu/mtp_endpoint.hpp"
#include "netedu/newreno.hpp"
#include "netedu/peerreview.hpp"
#include "netedu/proxy.hpp"
#include "netedu/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <iterator>
#include <thread>

using namespace netedu;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};
httplib::Server* g_server = nullptr;

void on_signal(int)
{
    g_stop = true;
    if (g_server) g_server->stop();
}

void install_signal_handlers()
{
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
}

Bytes read_all(const std::string& path)
{
    if (path == "-") return Bytes(std::istreambuf_iterator<char>(std::cin), {});
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_all(const std::string& path, ByteView data)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

void write_json(const std::string& path, const json& j)
{
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << '\n';
}

struct ImpairmentFlags {
    std::uint64_t seed = 0;
    double delay = 0;
    double jitter = 0;
    double loss = 0;
    double dup = 0;
    double reorder = 0;
    std::vector<std::uint64_t> drop;
    std::string direction = "both";

    void add(CLI::App* app)
    {
        app->add_option("--seed", seed, "PRNG seed");
        app->add_option("--delay", delay, "base one-way delay (ms)");
        app->add_option("--jitter", jitter, "uniform extra delay bound (ms)");
        app->add_option("--loss", loss, "loss probability");
        app->add_option("--dup", dup, "duplication probability");
        app->add_option("--reorder", reorder, "reorder probability");
        app->add_option("--drop", drop, "1-indexed ordinals to drop, per direction")->delimiter(',');
        app->add_option("--direction", direction, "impaired direction: both, a_to_b, b_to_a")
            ->check(CLI::IsMember({"both", "a_to_b", "b_to_a"}));
    }

    linksim::ImpairmentConfig config() const
    {
        linksim::ImpairmentConfig c;
        c.seed = seed;
        c.base_delay = delay;
        c.jitter = jitter;
        c.loss_prob = loss;
        c.dup_prob = dup;
        c.reorder_prob = reorder;
        c.drop_ordinals.insert(drop.begin(), drop.end());
        c.direction = direction == "a_to_b"   ? linksim::DirectionFilter::AtoB
                      : direction == "b_to_a" ? linksim::DirectionFilter::BtoA
                                              : linksim::DirectionFilter::Both;
        c.validate();
        return c;
    }
};

peerreview::Roster roster_from_json(const json& j)
{
    // {"projects": {"p1": ["alice", "bob"], "p2": ["carol"]}}
    peerreview::Roster r;
    for (const auto& [project, authors] : j.at("projects").items()) {
        r.projects.push_back(project);
        for (const auto& a : authors) r.authors[project].insert(a.get<std::string>());
    }
    r.validate();
    return r;
}

json allocation_to_json(const peerreview::Allocation& a, const peerreview::Roster& r)
{
    json out = {{"strategy", a.strategy == peerreview::Strategy::Balanced ? "balanced" : "choice"},
                {"seed", a.seed},
                {"assigned", a.assigned}};
    if (!a.chosen.empty()) out["chosen"] = a.chosen;
    out["coverage"] = peerreview::coverage_report(a, r);
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Networking lab toolkit: exercises, link simulator, transport protocol, New Reno predictor"};
    app.require_subcommand(1);

    // serve
    auto* serve = app.add_subcommand("serve", "run the exercise HTTP service");
    std::string bank_dir, listen = "127.0.0.1:8080", state_file, static_dir;
    bool strict = false;
    serve->add_option("--bank", bank_dir, "exercise bank directory")->required();
    serve->add_option("--listen", listen, "HOST:PORT to listen on");
    serve->add_option("--state", state_file, "append-only session log");
    serve->add_option("--static", static_dir, "directory of static web assets to serve at /");
    serve->add_flag("--strict", strict, "binary scoring instead of partial credit");

    // grade
    auto* grade = app.add_subcommand("grade", "grade one answer against a bank exercise");
    std::string exercise_id, answer_file;
    std::uint64_t grade_seed = 0;
    bool show = false;
    grade->add_option("--bank", bank_dir, "exercise bank directory")->required();
    grade->add_option("--exercise", exercise_id, "exercise id")->required();
    grade->add_option("--answer", answer_file, "submission JSON file, or - for stdin");
    grade->add_option("--seed", grade_seed, "instance seed");
    grade->add_flag("--strict", strict, "binary scoring");
    grade->add_flag("--show", show, "print the rendered instance instead of grading");

    // linksim
    auto* lsim = app.add_subcommand("linksim", "run the impairing UDP proxy");
    std::uint16_t lsim_port = 0;
    std::string side_a, side_b, log_file;
    double duration = 0;
    ImpairmentFlags imp;
    lsim->add_option("--listen", lsim_port, "UDP port to listen on")->required();
    lsim->add_option("--a", side_a, "HOST:PORT of side a (learned from traffic when omitted)");
    lsim->add_option("--b", side_b, "HOST:PORT of side b")->required();
    lsim->add_option("--log", log_file, "event log written on shutdown");
    lsim->add_option("--duration", duration, "stop after this many seconds (0 = until signalled)");
    imp.add(lsim);

    // mtp-send
    auto* msend = app.add_subcommand("mtp-send", "send a file with the transport protocol");
    std::string peer, file;
    unsigned window = mtp::kMaxWindow;
    double rto = mtp::kDefaultRto;
    msend->add_option("--peer", peer, "HOST:PORT of the receiver")->required();
    msend->add_option("--file", file, "file to send")->required();
    msend->add_option("--window", window, "send window (frames)")->check(CLI::Range(1u, mtp::kMaxWindow));
    msend->add_option("--rto", rto, "retransmission timeout (ms)")->check(CLI::PositiveNumber);

    // mtp-recv
    auto* mrecv = app.add_subcommand("mtp-recv", "receive one file with the transport protocol");
    std::uint16_t recv_port = 0;
    std::string out_file;
    double linger = 1000, idle = 0;
    mrecv->add_option("--listen", recv_port, "UDP port")->required();
    mrecv->add_option("--out", out_file, "where to write the received file")->required();
    mrecv->add_option("--window", window, "advertised window (frames)")->check(CLI::Range(0u, mtp::kMaxWindow));
    mrecv->add_option("--linger", linger, "ms of quiet after the FIN before exiting");
    mrecv->add_option("--idle-timeout", idle, "give up after this many ms without traffic (0 = never)");

    // newreno
    auto* nr = app.add_subcommand("newreno", "predict a New Reno send timeline");
    newreno::Scenario sc;
    std::vector<std::uint64_t> losses;
    bool nr_measure = false, nr_compare = false;
    double tol = 1;
    nr->add_option("--rtt", sc.rtt, "round-trip time (ms)");
    nr->add_option("--segments", sc.num_segments, "segments to send");
    nr->add_option("--loss", losses, "1-indexed transmission ordinals to drop")->delimiter(',');
    nr->add_option("--cwnd0", sc.init_cwnd, "initial window (segments)");
    nr->add_option("--ssthresh", sc.ssthresh0, "initial slow-start threshold (segments)");
    nr->add_option("--rto", sc.rto, "retransmission timeout (ms)");
    nr->add_flag("--measure", nr_measure, "print the simulated measurement instead of the prediction");
    nr->add_flag("--compare", nr_compare, "compare prediction and measurement");
    nr->add_option("--tol", tol, "comparison tolerance (ms)");

    // interop
    auto* iop = app.add_subcommand("interop", "run the interoperability matrix");
    std::string impls_file, workload, matrix_out;
    interop::RunOptions run;
    std::uint64_t iop_seed = 1;
    double iop_loss = 0.05, iop_reorder = 0.02, iop_delay = 10;
    iop->add_option("--impls", impls_file, "implementation list (JSON)")->required();
    iop->add_option("--file", workload, "workload file")->required();
    iop->add_option("--seed", iop_seed, "impairment seed");
    iop->add_option("--loss", iop_loss, "loss probability");
    iop->add_option("--reorder", iop_reorder, "reorder probability");
    iop->add_option("--delay", iop_delay, "one-way delay (ms)");
    iop->add_option("--timeout", run.timeout_s, "per-pair timeout (s)");
    iop->add_option("--parallel", run.parallel, "pairs run at once");
    iop->add_option("--out", matrix_out, "matrix JSON output");

    // allocate
    auto* alloc = app.add_subcommand("allocate", "allocate peer reviews");
    std::string roster_file, strategy = "balanced", alloc_out;
    std::uint64_t alloc_seed = 0;
    std::size_t k = 5;
    alloc->add_option("--roster", roster_file, "roster JSON")->required();
    alloc->add_option("--strategy", strategy, "balanced or choice")->check(CLI::IsMember({"balanced", "choice"}));
    alloc->add_option("--seed", alloc_seed, "seed");
    alloc->add_option("--k", k, "candidates per student (choice strategy)");
    alloc->add_option("--out", alloc_out, "allocation JSON output");

    // dissect
    auto* dis = app.add_subcommand("dissect", "print the field tree of every packet in a pcap");
    std::string pcap_file;
    bool with_hex = false, with_checks = false;
    dis->add_option("file", pcap_file, "classic pcap file")->required();
    dis->add_flag("--hex", with_hex, "append a hex dump per packet");
    dis->add_flag("--verify", with_checks, "verify IPv4/TCP/UDP checksums");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) {
            const auto bank = exercises::Bank::load(bank_dir);
            service::Config cfg;
            cfg.state_file = state_file;
            cfg.strict = strict;
            if (const char* s = std::getenv("NETEDU_TEACHER_SECRET"); s && *s) cfg.teacher_secret = s;
            service::Service svc(bank, cfg);
            httplib::Server server;
            svc.mount(server);
            if (!static_dir.empty() && !server.set_mount_point("/", static_dir))
                throw Error("static directory not found: " + static_dir);
            const auto colon = listen.rfind(':');
            if (colon == std::string::npos) throw Error("--listen expects HOST:PORT");
            const std::string host = listen.substr(0, colon);
            const int port = std::stoi(listen.substr(colon + 1));
            g_server = &server;
            install_signal_handlers();
            std::cerr << "serving " << bank.ids().size() << " exercises on " << listen << '\n';
            if (!server.listen(host, port)) throw Error("cannot listen on " + listen);
            return 0;
        }

        if (*grade) {
            const auto bank = exercises::Bank::load(bank_dir);
            const auto inst = bank.instantiate(exercise_id, grade_seed);
            if (show) {
                std::cout << bank.render(inst).dump(2) << '\n';
                return 0;
            }
            if (answer_file.empty()) throw Error("--answer is required unless --show is given");
            const Bytes raw = read_all(answer_file);
            json sub;
            try {
                sub = json::parse(raw.begin(), raw.end());
            } catch (const json::exception& e) {
                throw exercises::InputError(std::string("submission is not JSON: ") + e.what());
            }
            const auto v = bank.grade(inst, sub, strict);
            std::cout << exercises::to_json(v).dump(2) << '\n';
            return v.correct ? 0 : 1;
        }

        if (*lsim) {
            linksim::ProxyConfig cfg;
            cfg.listen_port = lsim_port;
            if (!side_a.empty()) cfg.a = net::Address::parse(side_a);
            cfg.b = net::Address::parse(side_b);
            cfg.impairment = imp.config();
            linksim::Proxy proxy(cfg);
            install_signal_handlers();
            std::thread timer;
            if (duration > 0)
                timer = std::thread([duration] {
                    const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(duration);
                    while (!g_stop && std::chrono::steady_clock::now() < until)
                        std::this_thread::sleep_for(std::chrono::milliseconds(20));
                    g_stop = true;
                });
            std::cerr << "linksim listening on port " << proxy.port() << '\n';
            proxy.run(g_stop);
            if (timer.joinable()) timer.join();
            for (const auto& e : proxy.errors()) std::cerr << e << '\n';
            if (!log_file.empty()) {
                std::ofstream out(log_file, std::ios::trunc);
                linksim::write_event_log(out, proxy.log());
            }
            return 0;
        }

        if (*msend) {
            mtp::SendOptions opt;
            opt.peer = net::Address::parse(peer);
            opt.sender.window = window;
            opt.sender.rto = rto;
            const Bytes data = read_all(file);
            try {
                const auto r = mtp::send_file(data, opt, std::cerr);
                std::cerr << "sent " << r.bytes << " bytes in " << r.stats.data_frames << " frames, "
                          << r.stats.retransmissions << " retransmissions (" << r.stats.fast_retransmits
                          << " fast), " << static_cast<long>(r.duration_ms) << " ms\n";
                return 0;
            } catch (const mtp::ConnectionAborted& e) {
                std::cerr << e.what() << '\n';
                return 2;
            }
        }

        if (*mrecv) {
            net::UdpSocket socket(recv_port);
            mtp::RecvOptions opt;
            opt.port = recv_port;
            opt.receiver.window = mrecv->count("--window") ? window : mtp::kMaxWindow;
            opt.linger_ms = linger;
            opt.idle_timeout_ms = idle;
            const auto r = mtp::receive_file(socket, opt, std::cerr);
            write_all(out_file, r.data);
            std::cerr << "received " << r.data.size() << " bytes" << (r.complete ? "" : " (incomplete)");
            if (r.integrity_errors) std::cerr << "; integrity errors (" << r.integrity_errors << ")";
            std::cerr << '\n';
            return r.complete ? 0 : 3;
        }

        if (*nr) {
            sc.loss_ordinals.insert(losses.begin(), losses.end());
            if (nr_compare) {
                const auto d = newreno::compare(newreno::predict(sc), newreno::measure(sc), tol);
                std::cout << format_diff(d);
                return d.empty() ? 0 : 1;
            }
            std::cout << format_timeline(nr_measure ? newreno::measure(sc) : newreno::predict(sc));
            return 0;
        }

        if (*iop) {
            const auto impls = interop::load_impls(impls_file);
            run.impairment = interop::default_impairment(iop_seed);
            run.impairment.loss_prob = iop_loss;
            run.impairment.reorder_prob = iop_reorder;
            run.impairment.base_delay = iop_delay;
            run.impairment.validate();
            const auto m = interop::run_matrix(impls, workload, run);
            std::cout << interop::format_table(m);
            for (const auto& c : m.cells)
                if (c.verdict != interop::Verdict::Pass)
                    std::cout << c.client << " -> " << c.server << ": " << c.detail << '\n';
            if (!matrix_out.empty()) write_json(matrix_out, interop::to_json(m));
            return 0;
        }

        if (*alloc) {
            std::ifstream in(roster_file);
            if (!in) throw Error("cannot open " + roster_file);
            const auto roster = roster_from_json(json::parse(in));
            const auto a = strategy == "balanced" ? peerreview::allocate_balanced(roster, alloc_seed)
                                                  : peerreview::allocate_choice(roster, alloc_seed, k);
            write_json(alloc_out, allocation_to_json(a, roster));
            return 0;
        }

        if (*dis) {
            const auto cap = dissect::read_pcap_file(pcap_file);
            for (std::size_t i = 0; i < cap.packets.size(); ++i) {
                const auto& pkt = cap.packets[i];
                const auto tree = dissect::dissect_packet(pkt.bytes, cap.link_type);
                std::cout << "# packet " << i << '\n' << dissect::render(tree);
                if (with_checks)
                    for (const auto& c : dissect::verify_checksums(tree, pkt.bytes))
                        std::cout << "# checksum " << c.layer << ": " << dissect::to_string(c.status)
                                  << (c.detail.empty() ? "" : " (" + c.detail + ")") << '\n';
                if (with_hex) std::cout << dissect::hexdump(pkt.bytes);
                if (i + 1 < cap.packets.size()) std::cout << '\n';
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
