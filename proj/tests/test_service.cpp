#include "netedu/service.hpp"

#include "netedu/dissect.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <httplib.h>

#include <filesystem>
#include <thread>

using namespace netedu;
using namespace netedu::service;
using nlohmann::json;

namespace {

const exercises::Bank& bank()
{
    static const exercises::Bank b = exercises::Bank::load(testutil::source_dir() / "bank");
    return b;
}

Response call(Service& svc, const std::string& method, const std::string& path,
              std::map<std::string, std::string> query = {}, const std::string& body = "",
              std::map<std::string, std::string> headers = {})
{
    return svc.handle(Request{method, path, std::move(query), std::move(headers), body});
}

std::string new_session(Service& svc, std::uint64_t seed)
{
    const auto r = call(svc, "POST", "/api/sessions", {}, json{{"seed", seed}}.dump());
    REQUIRE(r.status == 201);
    return r.body["session"];
}

void check_error(const Response& r, int status, const std::string& code)
{
    CHECK(r.status == status);
    CHECK(r.body["status"] == status);
    CHECK(r.body["code"] == code);
    CHECK(r.body["message"].is_string());
}

struct TempDir {
    std::filesystem::path path;
    TempDir()
    {
        char tmpl[] = "/tmp/netedu-svc-XXXXXX";
        path = mkdtemp(tmpl);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

} // namespace

TEST_CASE("session creation")
{
    Service svc(bank(), {});
    const auto r = call(svc, "POST", "/api/sessions", {}, R"({"seed": 42})");
    CHECK(r.status == 201);
    CHECK(r.body["seed"] == 42);
    const std::string id = r.body["session"];
    CHECK(id.size() == 32);
    CHECK(id.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(r.body["created_at"].is_string());

    const auto fresh = call(svc, "POST", "/api/sessions");
    CHECK(fresh.status == 201);
    CHECK(fresh.body["seed"].get<std::uint64_t>() < (1ULL << 53));
    CHECK(fresh.body["session"] != id);
    CHECK(call(svc, "POST", "/api/sessions", {}, R"({"seed": "17"})").body["seed"] == 17);
    CHECK(svc.session_count() == 3);

    check_error(call(svc, "POST", "/api/sessions", {}, "{nope"), 400, "malformed_request");
    check_error(call(svc, "POST", "/api/sessions", {}, R"({"seed": -1})"), 400, "malformed_request");
    check_error(call(svc, "POST", "/api/sessions", {}, R"({"seed": "x1"})"), 400, "malformed_request");
    check_error(call(svc, "POST", "/api/sessions", {}, "[]"), 400, "malformed_request");
}

TEST_CASE("routing errors")
{
    Service svc(bank(), {});
    check_error(call(svc, "GET", "/api/nothing"), 404, "not_found");
    check_error(call(svc, "GET", "/elsewhere"), 404, "not_found");
    check_error(call(svc, "DELETE", "/api/exercises"), 405, "method_not_allowed");
    check_error(call(svc, "GET", "/api/sessions"), 405, "method_not_allowed");
    check_error(call(svc, "GET", "/api/exercises/none"), 404, "exercise_not_found");
    check_error(call(svc, "GET", "/api/exercises/udp-reliability"), 400, "missing_session");
    check_error(call(svc, "GET", "/api/exercises/udp-reliability", {{"session", "abc"}}), 404, "session_not_found");
    check_error(call(svc, "GET", "/api/sessions/abc/report"), 404, "session_not_found");
    const auto s = new_session(svc, 1);
    check_error(call(svc, "POST", "/api/exercises/vector-size/answer", {{"session", s}}, R"({"answer":"12"})"), 409,
                "no_instance");
    check_error(call(svc, "POST", "/api/exercises/vector-size/answer", {}, R"({"answer":"12"})"), 400,
                "missing_session");
    call(svc, "GET", "/api/exercises/vector-size", {{"session", s}});
    check_error(call(svc, "POST", "/api/exercises/vector-size/answer", {{"session", s}}, "not json"), 400,
                "malformed_submission");
    check_error(call(svc, "POST", "/api/exercises/vector-size/answer", {{"session", s}}, R"({"answer": 12})"), 400,
                "malformed_submission");
    // a malformed submission does not consume the instance
    CHECK(call(svc, "POST", "/api/exercises/vector-size/answer", {{"session", s}}, R"({"answer":"12"})").status ==
          200);
}

TEST_CASE("exercise list and non-randomized access")
{
    Service svc(bank(), {});
    const auto r = call(svc, "GET", "/api/exercises");
    REQUIRE(r.status == 200);
    std::set<std::string> ids;
    for (const auto& e : r.body["exercises"]) {
        ids.insert(e["id"].get<std::string>());
        CHECK(e.contains("type"));
        CHECK(e.contains("prompt"));
        const bool randomized = e["randomized"];
        const auto view = call(svc, "GET", "/api/exercises/" + e["id"].get<std::string>());
        CHECK(view.status == (randomized ? 400 : 200));
    }
    CHECK(ids.size() == bank().ids().size());
}

TEST_CASE("answer flow, attempts and the report")
{
    Service svc(bank(), {});
    const auto s = new_session(svc, 9);
    const auto first = call(svc, "GET", "/api/exercises/vector-size", {{"session", s}});
    CHECK(first.body["attempt"] == 1);
    CHECK(first.body["session"] == s);
    auto wrong = call(svc, "POST", "/api/exercises/vector-size/answer", {{"session", s}}, R"({"answer":"3"})");
    CHECK(wrong.status == 200);
    CHECK(wrong.body["correct"] == false);
    CHECK(wrong.body["attempt"] == 1);
    CHECK(!wrong.body["feedback"].empty());
    check_error(call(svc, "POST", "/api/exercises/vector-size/answer", {{"session", s}}, R"({"answer":"12"})"), 409,
                "no_instance");
    CHECK(call(svc, "GET", "/api/exercises/vector-size", {{"session", s}}).body["attempt"] == 2);
    auto right = call(svc, "POST", "/api/exercises/vector-size/answer", {{"session", s}}, R"({"answer":"12"})");
    CHECK(right.body["correct"] == true);
    CHECK(right.body["score"] == 1.0);
    CHECK(right.body["attempt"] == 2);

    call(svc, "GET", "/api/exercises/handshake-first-flag", {{"session", s}});
    call(svc, "POST", "/api/exercises/handshake-first-flag/answer", {{"session", s}}, R"({"answer":"ACK"})");

    const auto rep = call(svc, "GET", "/api/sessions/" + s + "/report");
    REQUIRE(rep.status == 200);
    CHECK(rep.body["seed"] == 9);
    const auto& vs = rep.body["exercises"]["vector-size"];
    CHECK(vs["attempts"] == 2);
    REQUIRE(vs["history"].size() == 2);
    CHECK(vs["history"][0]["attempt"] == 1);
    CHECK(vs["history"][0]["submission"]["answer"] == "3");
    CHECK(vs["history"][0]["verdict"]["correct"] == false);
    CHECK(vs["history"][1]["attempt"] == 2);
    CHECK(vs["history"][1]["verdict"]["correct"] == true);
    CHECK(vs["history"][0]["timestamp"] <= vs["history"][1]["timestamp"]);
    CHECK(rep.body["exercises"]["handshake-first-flag"]["attempts"] == 1);
}

TEST_CASE("instances are stable until answered and derived from the session seed")
{
    Service a(bank(), {});
    Service b(bank(), {});
    const auto sa = new_session(a, 1234);
    const auto sb = new_session(b, 1234);
    for (const std::string id : {"udp-reliability", "newreno-fast-retransmit", "handshake-order"}) {
        const auto va = call(a, "GET", "/api/exercises/" + id, {{"session", sa}}).body;
        const auto again = call(a, "GET", "/api/exercises/" + id, {{"session", sa}}).body;
        const auto vb = call(b, "GET", "/api/exercises/" + id, {{"session", sb}}).body;
        CHECK(va == again);
        auto strip = [](json j) {
            j.erase("session");
            return j;
        };
        CHECK(strip(va) == strip(vb));


        const json sub = id == "handshake-order" ? json{{"order", {0, 1, 2}}} : json{{"choice", 0}};
        CHECK(call(a, "POST", "/api/exercises/" + id + "/answer", {{"session", sa}}, sub.dump()).status == 200);
        CHECK(call(b, "POST", "/api/exercises/" + id + "/answer", {{"session", sb}}, sub.dump()).status == 200);
        const auto na = call(a, "GET", "/api/exercises/" + id, {{"session", sa}}).body;
        const auto nb = call(b, "GET", "/api/exercises/" + id, {{"session", sb}}).body;
        CHECK(na["attempt"] == 2);
        CHECK(strip(na) == strip(nb));
    }
}

TEST_CASE("mcq sessions see different draws across seeds")
{
    Service svc(bank(), {});
    std::set<std::string> shown;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto s = new_session(svc, seed);
        shown.insert(call(svc, "GET", "/api/exercises/udp-reliability", {{"session", s}}).body["answers"].dump());
    }
    CHECK(shown.size() > 10);
}

TEST_CASE("no masked value leaks in student-scoped responses")
{
    Service svc(bank(), {.state_file = {}, .teacher_secret = std::string("t0p"), .strict = false, .snapshot_every = 500});
    std::vector<std::string> secrets;
    std::vector<std::string> mask_ids;
    for (const auto& id : bank().ids()) {
        const auto sec = bank().secrets(id);
        if (!sec.empty()) mask_ids.push_back(id);
        secrets.insert(secrets.end(), sec.begin(), sec.end());
    }
    REQUIRE(!mask_ids.empty());

    std::vector<Response> student;
    student.push_back(call(svc, "GET", "/api/exercises"));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto s = new_session(svc, seed);
        for (const auto& id : bank().ids()) {
            student.push_back(call(svc, "GET", "/api/exercises/" + id, {{"session", s}}));
            student.push_back(call(svc, "GET", "/api/exercises/" + id));
            // wrong and empty answers produce feedback that must not reveal the value
            student.push_back(call(svc, "POST", "/api/exercises/" + id + "/answer", {{"session", s}},
                                   R"({"answers": {"tcp.seq": "1", "ipv4.len": "2"}, "answer": "x", "choice": 0, "order": [0,1,2]})"));
            student.push_back(call(svc, "GET", "/api/exercises/" + id, {{"session", s}}));
            student.push_back(call(svc, "POST", "/api/exercises/" + id + "/answer", {{"session", s}}, "{}"));
        }
        student.push_back(call(svc, "GET", "/api/sessions/" + s + "/report"));
    }
    student.push_back(call(svc, "GET", "/api/traces/synack-fields"));   // no secret: refused

    std::size_t scanned = 0;
    for (const auto& r : student) {
        const std::string dump = r.body.dump();
        for (const auto& s : secrets)
            if (s.size() >= 4) REQUIRE_MESSAGE(dump.find(s) == std::string::npos, "leaked " << s << " in " << dump);
        ++scanned;
    }
    CHECK(scanned > 50);

    // short values (single flag bits and the like) are checked structurally
    for (const auto& id : mask_ids) {
        const auto r = call(svc, "GET", "/api/exercises/" + id);
        std::set<std::string> masked(r.body["masked"].begin(), r.body["masked"].end());
        for (const auto& f : r.body["fields"])
            if (masked.count(f["path"].get<std::string>())) CHECK(f["display"] == std::string(dissect::kMaskedDisplay));
        CHECK(r.body["text"].get<std::string>().find(std::string(dissect::kMaskedDisplay)) != std::string::npos);
    }

    // the teacher view does contain them, which shows the scan can see a leak
    const auto teacher = call(svc, "GET", "/api/traces/synack-fields", {}, "", {{kTeacherHeader, "t0p"}});
    REQUIRE(teacher.status == 200);
    const auto sec = bank().secrets("synack-fields");
    CHECK(std::any_of(sec.begin(), sec.end(), [&](const std::string& s) {
        return s.size() >= 4 && teacher.body.dump().find(s) != std::string::npos;
    }));
}

TEST_CASE("teacher trace endpoint")
{
    Service off(bank(), {});
    check_error(call(off, "GET", "/api/traces/synack-fields", {}, "", {{kTeacherHeader, "x"}}), 403, "teacher_disabled");

    Service on(bank(), {.state_file = {}, .teacher_secret = std::string("s3cret"), .strict = false, .snapshot_every = 500});
    check_error(call(on, "GET", "/api/traces/synack-fields"), 401, "unauthorized");
    check_error(call(on, "GET", "/api/traces/synack-fields", {}, "", {{kTeacherHeader, "wrong"}}), 401, "unauthorized");
    const std::map<std::string, std::string> auth = {{kTeacherHeader, "s3cret"}};
    check_error(call(on, "GET", "/api/traces/none", {}, "", auth), 404, "exercise_not_found");
    check_error(call(on, "GET", "/api/traces/vector-size", {}, "", auth), 404, "trace_not_found");

    const auto r = call(on, "GET", "/api/traces/synack-fields", {}, "", auth);
    REQUIRE(r.status == 200);
    // compare against the capture bytes read straight from the file: 24-byte
    // global header, then 16-byte record headers with the captured length at +8
    const Bytes file = testutil::read_file(testutil::source_dir() / "bank/captures/handshake.pcap");
    std::size_t off_ = 24;
    std::size_t i = 0;
    while (off_ + 16 <= file.size()) {
        const std::uint32_t incl = get_le32(&file[off_ + 8]);
        const Bytes pkt(file.begin() + off_ + 16, file.begin() + off_ + 16 + incl);
        REQUIRE(i < r.body["packets"].size());
        CHECK(r.body["packets"][i]["hex"] == to_hex(pkt));
        for (const auto& c : r.body["packets"][i]["checksums"]) CHECK(c["status"] == "valid");
        off_ += 16 + incl;
        ++i;
    }
    CHECK(i == r.body["packets"].size());
    CHECK(i == 3);
}

TEST_CASE("strict scoring")
{
    Service lenient(bank(), {});
    Service strict(bank(), {.state_file = {}, .teacher_secret = {}, .strict = true, .snapshot_every = 500});
    const std::string sub = R"({"answers": {"ipv4.len": "77", "tcp.flags.psh": "0"}})";
    for (auto* svc : {&lenient, &strict}) {
        const auto s = new_session(*svc, 3);
        call(*svc, "GET", "/api/exercises/http-request-fields", {{"session", s}});
        const auto r = call(*svc, "POST", "/api/exercises/http-request-fields/answer", {{"session", s}}, sub);
        CHECK(r.body["correct"] == false);
        CHECK(r.body["score"] == (svc == &strict ? 0.0 : 0.5));
    }
}

TEST_CASE("state log survives a restart")
{
    TempDir dir;
    const auto state = dir.path / "state.jsonl";
    std::string s;
    json shown;
    json report;
    {
        Service svc(bank(), {.state_file = state, .teacher_secret = {}, .strict = false, .snapshot_every = 500});
        s = new_session(svc, 77);
        call(svc, "GET", "/api/exercises/vector-size", {{"session", s}});
        call(svc, "POST", "/api/exercises/vector-size/answer", {{"session", s}}, R"({"answer":"4"})");
        shown = call(svc, "GET", "/api/exercises/udp-reliability", {{"session", s}}).body;
        report = call(svc, "GET", "/api/sessions/" + s + "/report").body;
    }
    {
        Service svc(bank(), {.state_file = state, .teacher_secret = {}, .strict = false, .snapshot_every = 500});
        CHECK(svc.session_count() == 1);
        CHECK(call(svc, "GET", "/api/sessions/" + s + "/report").body == report);
        // the pending instance is restored, not redrawn
        CHECK(call(svc, "GET", "/api/exercises/udp-reliability", {{"session", s}}).body == shown);
        CHECK(call(svc, "GET", "/api/exercises/vector-size", {{"session", s}}).body["attempt"] == 2);
    }
    // a torn final record is ignored
    {
        std::ofstream out(state, std::ios::app);
        out << R"({"op":"session","id":"ff)";
    }
    Service svc(bank(), {.state_file = state, .teacher_secret = {}, .strict = false, .snapshot_every = 500});
    CHECK(svc.session_count() == 1);
}

TEST_CASE("state log compaction")
{
    TempDir dir;
    const auto state = dir.path / "state.jsonl";
    std::vector<std::string> ids;
    json report;
    {
        Service svc(bank(), {.state_file = state, .teacher_secret = {}, .strict = false, .snapshot_every = 10});
        for (int i = 0; i < 12; ++i) ids.push_back(new_session(svc, i));
        call(svc, "GET", "/api/exercises/vector-size", {{"session", ids[0]}});
        call(svc, "POST", "/api/exercises/vector-size/answer", {{"session", ids[0]}}, R"({"answer":"12"})");
        report = call(svc, "GET", "/api/sessions/" + ids[0] + "/report").body;
    }
    const auto text = testutil::read_text(state);
    CHECK(text.rfind(R"({"op":"snapshot")", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);   // snapshot + 4 later records
    Service svc(bank(), {.state_file = state, .teacher_secret = {}, .strict = false, .snapshot_every = 10});
    CHECK(svc.session_count() == 12);
    CHECK(call(svc, "GET", "/api/sessions/" + ids[0] + "/report").body == report);
}

TEST_CASE("state log corruption in the middle is reported")
{
    TempDir dir;
    const auto state = dir.path / "state.jsonl";
    {
        std::ofstream out(state);
        out << "garbage\n" << R"({"op":"session","id":"aa","seed":1,"created_at":"x"})" << "\n";
    }
    CHECK_THROWS_AS(Service(bank(), {.state_file = state, .teacher_secret = {}, .strict = false, .snapshot_every = 500}),
                    Error);
}

TEST_CASE("concurrent sessions")
{
    Service svc(bank(), {});
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int t = 0; t < 8; ++t)
        threads.emplace_back([&, t] {
            for (int i = 0; i < 20; ++i) {
                const auto r = call(svc, "POST", "/api/sessions", {}, json{{"seed", t * 100 + i}}.dump());
                const std::string s = r.body["session"];
                call(svc, "GET", "/api/exercises/vector-size", {{"session", s}});
                if (call(svc, "POST", "/api/exercises/vector-size/answer", {{"session", s}}, R"({"answer":"12"})")
                        .body["correct"] == true)
                    ++ok;
            }
        });
    for (auto& th : threads) th.join();
    CHECK(ok == 160);
    CHECK(svc.session_count() == 160);
}

TEST_CASE("http smoke test")
{
    Service svc(bank(), {});
    httplib::Server server;
    svc.mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client cli("127.0.0.1", port);
    auto created = cli.Post("/api/sessions", R"({"seed": 5})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string s = json::parse(created->body)["session"];
    auto got = cli.Get("/api/exercises/handshake-first-flag?session=" + s);
    REQUIRE(got);
    CHECK(got->status == 200);
    CHECK(got->get_header_value("Content-Type") == "application/json");
    auto ans = cli.Post("/api/exercises/handshake-first-flag/answer?session=" + s, R"({"answer":" SYN "})",
                        "application/json");
    REQUIRE(ans);
    CHECK(json::parse(ans->body)["correct"] == true);
    auto missing = cli.Get("/api/bogus");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body)["code"] == "not_found");

    server.stop();
    th.join();
}
