// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "netedu/bank.hpp"
#include "netedu/codec.hpp"
#include "netedu/dissect.hpp"
#include "netedu/interop.hpp"
#include "netedu/linksim.hpp"
#include "netedu/mtp.hpp"
#include "netedu/newreno.hpp"
#include "netedu/peerreview.hpp"
#include "netedu/service.hpp"
#include "netedu/sumvec.hpp"

#include "test_util.hpp"

#include <zlib.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <future>
#include <iostream>
#include <set>
#include <sstream>

using namespace netedu;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (ok) return;
        if (pass) detail.clear();
        else detail += "; ";
        pass = false;
        detail += what;
    }
};

double elapsed_ms(std::chrono::steady_clock::time_point since)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct TempDir {
    std::filesystem::path path;
    TempDir()
    {
        char tmpl[] = "/tmp/netedu-acc-XXXXXX";
        path = mkdtemp(tmpl);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

// ---------------------------------------------------------------------------

Outcome newreno_scenario()
{
    Outcome o;
    newreno::Scenario s;
    s.rtt = 20;
    s.num_segments = 8;
    s.loss_ordinals = {6, 8};
    s.init_cwnd = 1;
    s.ssthresh0 = 64;
    s.rto = 200;

    const auto start = std::chrono::steady_clock::now();
    const auto predicted = newreno::predict(s);
    const auto measured = newreno::measure(s);
    const auto diff = newreno::compare(predicted, measured, 1.0);
    const double ms = elapsed_ms(start);

    o.require(diff.empty(), "prediction and measurement differ:\n" + newreno::format_diff(diff));
    o.require(ms < 1000, "took " + fmt("%.1f", ms) + " ms");

    // fast retransmit of 6: a retransmit of segment 6 right after the third
    // duplicate ACK for segment 5
    int dupacks = 0;
    bool fast = false;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const auto& e = predicted[i];
        if (e.kind == newreno::EventKind::DupackRcvd && e.seg == 5) ++dupacks;
        if (e.kind == newreno::EventKind::Retransmit && e.seg == 6 && dupacks >= 3 && i > 0 &&
            (predicted[i - 1].kind == newreno::EventKind::DupackRcvd ||
             predicted[i - 1].kind == newreno::EventKind::EnterFastRecovery))
            fast = true;
    }
    std::string how;
    for (const auto& e : predicted)
        if (e.kind == newreno::EventKind::Retransmit && e.seg == 6) {
            how = "segment 6 is retransmitted at " + fmt("%.0f", e.t) + " ms";
            break;
        }
    o.require(fast, "no fast retransmit of segment 6: only " + std::to_string(dupacks) +
                        " duplicate ACK(s) for segment 5 arrive, " + how + " after the RTO");
    const std::string met = (diff.empty() ? "empty diff, " : "") + std::to_string(predicted.size()) + " events, " +
                            fmt("%.1f", ms) + " ms";
    o.detail = o.pass ? met : o.detail + " (" + met + ")";
    return o;
}

Outcome mtp_delivery()
{
    Outcome o;
    SplitMix64 rng(2024);
    const Bytes file = testutil::random_bytes(rng, 1 << 20);
    double worst = 0;
    int ok = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        linksim::ImpairmentConfig cfg;
        cfg.seed = seed;
        cfg.loss_prob = 0.10;
        cfg.reorder_prob = 0.05;
        cfg.base_delay = 10;
        const auto start = std::chrono::steady_clock::now();
        try {
            const auto rep = mtp::transfer(file, cfg);
            const double ms = elapsed_ms(start);
            worst = std::max(worst, ms);
            if (rep.delivered == file && ms < 5000)
                ++ok;
            else
                o.require(false, "seed " + std::to_string(seed) + (rep.delivered == file ? " too slow" : " corrupted"));
        } catch (const std::exception& e) {
            o.require(false, "seed " + std::to_string(seed) + ": " + e.what());
        }
    }
    o.require(ok == 50, std::to_string(ok) + "/50 delivered");
    if (o.pass) o.detail = "50/50 identical, slowest run " + fmt("%.0f", worst) + " ms";
    return o;
}

Outcome determinism()
{
    Outcome o;
    int cases = 0;
    SplitMix64 rng(99);
    for (int i = 0; i < 4; ++i) {
        newreno::Scenario s;
        s.num_segments = 10 + rng.below(30);
        s.loss_ordinals = {1 + rng.below(10), 5 + rng.below(20)};
        o.require(newreno::format_timeline(newreno::predict(s)) == newreno::format_timeline(newreno::predict(s)) &&
                      newreno::format_timeline(newreno::measure(s)) == newreno::format_timeline(newreno::measure(s)),
                  "scenario " + std::to_string(i));
        ++cases;
    }
    const Bytes file = testutil::random_bytes(rng, 64 * 1024);
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        linksim::ImpairmentConfig cfg;
        cfg.seed = seed;
        cfg.loss_prob = 0.1;
        cfg.dup_prob = 0.05;
        cfg.reorder_prob = 0.05;
        cfg.jitter = 5;
        cfg.base_delay = 10;
        const auto a = mtp::transfer(file, cfg);
        const auto b = mtp::transfer(file, cfg);
        o.require(linksim::format_event_log(a.log) == linksim::format_event_log(b.log) && a.delivered == b.delivered,
                  "transfer seed " + std::to_string(seed));
        ++cases;
    }
    peerreview::Roster roster;
    for (int i = 0; i < 12; ++i) {
        roster.projects.push_back("p" + std::to_string(i));
        roster.authors["p" + std::to_string(i)] = {"s" + std::to_string(i)};
    }
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        o.require(peerreview::allocate_balanced(roster, seed).assigned ==
                          peerreview::allocate_balanced(roster, seed).assigned &&
                      peerreview::allocate_choice(roster, seed).assigned ==
                          peerreview::allocate_choice(roster, seed).assigned,
                  "allocation seed " + std::to_string(seed));
        ++cases;
    }
    if (o.pass) o.detail = std::to_string(cases) + " cases bit-identical";
    return o;
}

Outcome codec_properties()
{
    Outcome o;
    SplitMix64 rng(11);
    int bad = 0;
    for (int i = 0; i < 10000; ++i) {
        // bias toward the special bytes so escaping is exercised
        Bytes p(rng.below(300));
        for (auto& b : p) {
            const auto r = rng.below(4);
            b = r == 0 ? codec::kFlag : r == 1 ? codec::kEsc : static_cast<std::uint8_t>(rng.next());
        }
        if (codec::destuff(codec::stuff(p)) != p) ++bad;
    }
    o.require(bad == 0, std::to_string(bad) + " stuffing round trips failed");

    o.require(codec::crc32(from_string("123456789")) == 0xCBF43926u, "CRC-32 check value");
    int crc_bad = 0;
    for (int i = 0; i < 100; ++i) {
        const Bytes d = testutil::random_bytes(rng, rng.below(2000));
        if (codec::crc32(d) != ::crc32(0L, d.data(), static_cast<uInt>(d.size()))) ++crc_bad;
    }
    o.require(crc_bad == 0, std::to_string(crc_bad) + "/100 CRCs differ from zlib");

    int vec_bad = 0;
    for (int i = 0; i < 1000; ++i) {
        codec::IntVector v(rng.below(50));
        for (auto& x : v) x = static_cast<std::int32_t>(rng.next());
        v.push_back(-1);
        v.push_back(INT32_MIN);
        if (codec::decode_vector(codec::encode_vector(v)) != v) ++vec_bad;
    }
    o.require(vec_bad == 0, std::to_string(vec_bad) + " vector round trips failed");
    if (o.pass) o.detail = "10000 stuffing, 100 CRC vs zlib, 1000 vectors";
    return o;
}

Outcome dissector()
{
    Outcome o;
    std::size_t packets = 0;
    for (const char* name : {"handshake.pcap", "handshake_be.pcap", "mixed.pcap", "rawip.pcap"}) {
        const auto cap = dissect::read_pcap_file(testutil::fixture(name));
        for (std::size_t i = 0; i < cap.packets.size(); ++i) {
            const auto& bytes = cap.packets[i].bytes;
            const auto tree = dissect::dissect_packet(bytes, cap.link_type);
            o.require(dissect::reserialize(tree) == bytes, std::string(name) + " packet " + std::to_string(i));
            ++packets;
        }
    }

    SplitMix64 rng(12);
    std::size_t fuzz = 0;
    for (int i = 0; i < 10000; ++i) {
        const Bytes junk = testutil::random_bytes(rng, rng.below(128));
        try {
            const auto tree = dissect::dissect_packet(junk, i % 2 ? dissect::LinkType::RawIP : dissect::LinkType::Ethernet);
            if (dissect::reserialize(tree) != junk) o.require(false, "fuzz input " + std::to_string(i) + " not reproduced");
            ++fuzz;
        } catch (const std::exception& e) {
            o.require(false, std::string("fuzz input threw: ") + e.what());
        }
    }

    const auto hs = dissect::read_pcap_file(testutil::fixture("handshake.pcap"));
    const std::vector<std::vector<std::string>> want = {{"syn"}, {"syn", "ack"}, {"ack"}};
    o.require(hs.packets.size() == 3, "handshake fixture has " + std::to_string(hs.packets.size()) + " packets");
    for (std::size_t i = 0; i < hs.packets.size() && i < 3; ++i) {
        const auto tree = dissect::dissect_packet(hs.packets[i].bytes, hs.link_type);
        std::vector<std::string> set;
        for (const char* f : {"fin", "syn", "rst", "psh", "ack", "urg", "ece", "cwr"}) {
            const auto* field = tree.find(std::string("tcp.flags.") + f);
            if (field && std::get<std::uint64_t>(field->raw_value)) set.push_back(f);
        }
        o.require(set == want[i], "handshake packet " + std::to_string(i) + " flags");
    }
    if (o.pass) o.detail = std::to_string(packets) + " fixture packets reproduced, " + std::to_string(fuzz) + " fuzz inputs";
    return o;
}

Outcome exercise_engine()
{
    Outcome o;
    const auto bank = exercises::Bank::load(testutil::source_dir() / "bank");

    std::size_t mcqs = 0;
    for (const auto& id : bank.ids()) {
        const auto* q = std::get_if<exercises::McqQuestion>(bank.find(id));
        if (!q) continue;
        ++mcqs;
        std::set<std::size_t> right, wrong;
        for (std::uint64_t seed = 0; seed < 1000; ++seed) {
            const auto inst = exercises::instantiate_mcq(*q, seed);
            std::size_t c = 0, w = 0;
            std::set<std::size_t> distinct;
            for (const auto& d : inst.displayed) {
                if (d.correct) {
                    ++c;
                    right.insert(d.pool_index);
                } else {
                    ++w;
                    wrong.insert(d.pool_index);
                    distinct.insert(d.pool_index);
                }
            }
            if (c != 1 || w != q->n || distinct.size() != q->n) {
                o.require(false, id + " seed " + std::to_string(seed) + " has a bad answer mix");
                break;
            }
        }
        o.require(right.size() == q->correct_pool.size() && wrong.size() == q->incorrect_pool.size(),
                  id + " does not cover its pools");
    }
    o.require(mcqs > 0, "no mcq in the bank");

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto inst = bank.instantiate("handshake-order", seed);
        std::vector<std::size_t> perm = {0, 1, 2};
        int accepted = 0, with_feedback = 0;
        do {
            const auto v = bank.grade(inst, json{{"order", perm}});
            if (v.correct) ++accepted;
            else if (!v.feedback.empty() && !v.feedback[0].comment.empty()) ++with_feedback;
        } while (std::next_permutation(perm.begin(), perm.end()));
        o.require(accepted == 1 && with_feedback == 5,
                  "reorder seed " + std::to_string(seed) + ": " + std::to_string(accepted) + " accepted, " +
                      std::to_string(with_feedback) + " with feedback");
    }

    // leak scan over every student-scoped response of a scripted session
    service::Service svc(bank, {});
    std::vector<std::string> secrets;
    for (const auto& id : bank.ids())
        for (const auto& s : bank.secrets(id)) secrets.push_back(s);
    std::size_t scanned = 0;
    auto scan = [&](const service::Response& r) {
        const std::string dump = r.body.dump();
        for (const auto& s : secrets)
            if (s.size() >= 4 && dump.find(s) != std::string::npos) o.require(false, "response leaks " + s);
        if (r.body.contains("fields") && r.body.contains("masked")) {
            std::set<std::string> masked(r.body["masked"].begin(), r.body["masked"].end());
            for (const auto& f : r.body["fields"])
                if (masked.count(f["path"].get<std::string>()) && f["display"] != std::string(dissect::kMaskedDisplay))
                    o.require(false, "masked field " + f["path"].get<std::string>() + " shown");
        }
        ++scanned;
    };
    auto call = [&](const std::string& m, const std::string& path, std::map<std::string, std::string> q = {},
                    const std::string& body = "") { return svc.handle({m, path, std::move(q), {}, body}); };
    scan(call("GET", "/api/exercises"));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto created = call("POST", "/api/sessions", {}, json{{"seed", seed}}.dump());
        scan(created);
        const std::string s = created.body["session"];
        for (const auto& id : bank.ids()) {
            scan(call("GET", "/api/exercises/" + id));
            scan(call("GET", "/api/exercises/" + id, {{"session", s}}));
            scan(call("POST", "/api/exercises/" + id + "/answer", {{"session", s}},
                      R"({"answers": {"tcp.seq": "0"}, "answer": "0", "choice": 0, "order": [2,1,0]})"));
            scan(call("GET", "/api/exercises/" + id, {{"session", s}}));
            scan(call("POST", "/api/exercises/" + id + "/answer", {{"session", s}}, "{}"));
        }
        scan(call("GET", "/api/sessions/" + s + "/report"));
    }
    scan(call("GET", "/api/traces/synack-fields"));
    if (o.pass)
        o.detail = std::to_string(mcqs) + " mcq x 1000 seeds, 20 reorder instances, " + std::to_string(scanned) +
                   " responses scanned";
    return o;
}

Outcome interop_matrix()
{
    Outcome o;
    TempDir dir;
    SplitMix64 rng(21);
    const Bytes data = testutil::random_bytes(rng, 64 * 1024);
    const auto workload = dir.path / "workload.bin";
    std::ofstream(workload, std::ios::binary).write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));

    const std::string cli = NETEDU_CLI;
    const interop::ImplSpec ref{"reference", cli + " mtp-send --peer {peer} --file {file} --rto 100",
                                cli + " mtp-recv --listen {port} --out {out} --linger 500"};
    auto mutant = [](const std::string& mode) {
        const std::string bin = std::string(NETEDU_MUTANT) + " --mode " + mode;
        return interop::ImplSpec{mode, bin + " send --peer {peer} --file {file} --rto 100",
                                 bin + " recv --listen {port} --out {out} --linger 500"};
    };

    // reference against itself, seeds 1..20, four at a time
    int passed = 0;
    for (std::uint64_t base = 1; base <= 20; base += 4) {
        std::vector<std::future<interop::Cell>> runs;
        for (std::uint64_t seed = base; seed < base + 4; ++seed)
            runs.push_back(std::async(std::launch::async, [&, seed] {
                interop::RunOptions opt;
                opt.impairment = interop::default_impairment(seed);
                opt.impairment.loss_prob = 0.10;
                opt.timeout_s = 60;
                return interop::run_pair(ref, ref, workload, opt);
            }));
        for (std::size_t k = 0; k < runs.size(); ++k) {
            const auto cell = runs[k].get();
            if (cell.verdict == interop::Verdict::Pass && cell.received_sha256 == cell.workload_sha256)
                ++passed;
            else
                o.require(false, "seed " + std::to_string(base + k) + ": " + cell.detail);
        }
    }

    interop::RunOptions opt;
    opt.impairment = interop::default_impairment(7);
    opt.impairment.loss_prob = 0.10;
    opt.timeout_s = 8;
    const auto stuck = interop::run_pair(mutant("no-retransmit"), ref, workload, opt);
    o.require(stuck.verdict == interop::Verdict::Timeout, "no-retransmit mutant: " + std::string(interop::to_string(stuck.verdict)) + ", " + stuck.detail);
    opt.timeout_s = 15;
    const auto corrupt = interop::run_pair(ref, mutant("bad-crc"), workload, opt);
    o.require(corrupt.verdict == interop::Verdict::Fail && corrupt.detail.find("integrity errors") != std::string::npos,
              "bad-crc mutant: " + std::string(interop::to_string(corrupt.verdict)) + ", " + corrupt.detail);

    opt.timeout_s = 10;
    opt.impairment = interop::default_impairment(8);
    const auto m = interop::run_matrix({ref, mutant("no-retransmit"), mutant("bad-crc")}, workload, opt);
    std::size_t with_verdict = 0;
    for (const auto& c : m.cells)
        if (!c.detail.empty()) ++with_verdict;
    o.require(m.cells.size() == 9 && with_verdict == 9, "matrix has " + std::to_string(with_verdict) + " finished cells");
    o.require(m.at(0, 0).verdict == interop::Verdict::Pass, "matrix reference cell: " + m.at(0, 0).detail);
    if (o.pass)
        o.detail = std::to_string(passed) + "/20 self-interop, mutants: timeout / \"" +
                   corrupt.detail.substr(0, corrupt.detail.find(';', corrupt.detail.find("integrity"))) + "\", 9/9 cells";
    return o;
}

Outcome peer_review()
{
    Outcome o;
    SplitMix64 rng(31337);
    for (int trial = 0; trial < 1000 && o.pass; ++trial) {
        const std::size_t n = 3 + rng.below(48);
        peerreview::Roster roster;
        for (std::size_t i = 0; i < n; ++i) {
            roster.projects.push_back("p" + std::to_string(i));
            roster.authors["p" + std::to_string(i)] = {"s" + std::to_string(i)};
        }
        const auto bal = peerreview::allocate_balanced(roster, rng.next());
        std::map<std::string, std::size_t> counts;
        for (const auto& [s, ps] : bal.assigned)
            for (const auto& p : ps) {
                ++counts[p];
                o.require(p != roster.project_of(s), "self review for " + s);
            }
        std::set<std::size_t> distinct;
        for (const auto& p : roster.projects) distinct.insert(counts[p]);
        o.require(distinct.size() == 1, "unequal review counts with " + std::to_string(n) + " projects");

        const auto choice = peerreview::allocate_choice(roster, rng.next());
        for (const auto& [s, cands] : choice.assigned) {
            const std::set<std::string> u(cands.begin(), cands.end());
            o.require(cands.size() == std::min<std::size_t>(5, n - 1) && u.size() == cands.size() &&
                          !u.count(roster.project_of(s)),
                      "bad candidate set for " + s + " with " + std::to_string(n) + " projects");
        }
    }
    peerreview::Roster two;
    two.projects = {"p0", "p1"};
    two.authors = {{"p0", {"a"}}, {"p1", {"b"}}};
    bool infeasible = false;
    try {
        peerreview::allocate_balanced(two, 1);
    } catch (const peerreview::Infeasible&) {
        infeasible = true;
    }
    o.require(infeasible, "two projects did not raise the infeasibility error");
    if (o.pass) o.detail = "1000 rosters, N=2 infeasible";
    return o;
}

Outcome vector_sum_stream()
{
    Outcome o;
    sumvec::SumServer server;
    server.start();
    SplitMix64 rng(46);
    int ok = 0;
    for (int i = 0; i < 100; ++i) {
        codec::IntVector v(rng.below(400));
        std::uint32_t want = 0;
        for (auto& x : v) {
            x = static_cast<std::int32_t>(rng.next());
            want += static_cast<std::uint32_t>(x);
        }
        const std::size_t chunk = std::vector<std::size_t>{1, 3, 7}[i % 3];
        // the decoder alone, fed the same fragments
        codec::VectorStreamDecoder dec;
        std::optional<codec::IntVector> got;
        for (const auto& piece : linksim::chop_stream(codec::encode_vector_stream(v), i, chunk)) {
            if (auto r = dec.feed(piece)) got = r;
        }
        const bool local = got && *got == v;
        const auto sum = sumvec::sumvec_roundtrip(server.tcp_port(), v, sumvec::Transport::ChoppedStream,
                                                  {static_cast<std::uint64_t>(i), chunk, 2000});
        if (local && static_cast<std::uint32_t>(sum) == want)
            ++ok;
        else
            o.require(false, "vector " + std::to_string(i) + " (max_chunk " + std::to_string(chunk) + ")");
    }
    server.stop();
    if (o.pass) o.detail = std::to_string(ok) + "/100 sums correct";
    return o;
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"newreno-scenario", newreno_scenario},
        {"mtp-delivery", mtp_delivery},
        {"determinism", determinism},
        {"codec-properties", codec_properties},
        {"dissector", dissector},
        {"exercise-engine", exercise_engine},
        {"interop", interop_matrix},
        {"peer-review", peer_review},
        {"vector-sum-stream", vector_sum_stream},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << " (" << fmt("%.1f", elapsed_ms(start) / 1000) << " s): "
                  << o.detail << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed ? 1 : 0;
}
