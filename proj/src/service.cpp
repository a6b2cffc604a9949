#include "netedu/service.hpp"

#include "netedu/prng.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <random>
#include <sstream>

namespace netedu::service {

using nlohmann::json;
namespace ex = netedu::exercises;

Response error(int status, const std::string& code, const std::string& message)
{
    return {status, {{"status", status}, {"code", code}, {"message", message}}};
}

namespace {

std::string now_iso()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::uint64_t entropy64()
{
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string new_session_id()
{
    Bytes raw;
    put_be32(raw, static_cast<std::uint32_t>(entropy64()));
    put_be32(raw, static_cast<std::uint32_t>(entropy64()));
    put_be32(raw, static_cast<std::uint32_t>(entropy64()));
    put_be32(raw, static_cast<std::uint32_t>(entropy64()));
    return to_hex(raw);
}

std::vector<std::string> split_path(const std::string& path)
{
    std::vector<std::string> parts;
    std::string cur;
    for (char c : path) {
        if (c == '/') {
            if (!cur.empty()) parts.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) parts.push_back(std::move(cur));
    return parts;
}

json attempt_json(std::uint64_t attempt, const json& submission, const ex::Verdict& v, const std::string& ts)
{
    return {{"attempt", attempt}, {"submission", submission}, {"verdict", ex::to_json(v)}, {"timestamp", ts}};
}

// Applies one state-log record to the persisted mirror.
void apply_record(json& mirror, const json& rec)
{
    const std::string op = rec.at("op");
    if (op == "snapshot") {
        mirror = rec.at("sessions");
        return;
    }
    if (op == "session") {
        mirror[rec.at("id").get<std::string>()] = {
            {"seed", rec.at("seed")}, {"created_at", rec.at("created_at")}, {"exercises", json::object()}};
        return;
    }
    json& s = mirror.at(rec.at("session").get<std::string>());
    json& e = s["exercises"][rec.at("exercise").get<std::string>()];
    if (e.is_null()) e = {{"attempts", 0}, {"current", nullptr}, {"history", json::array()}};
    if (op == "render") {
        e["current"] = {{"attempt", rec.at("attempt")}, {"seed", rec.at("seed")}};
    } else if (op == "answer") {
        e["current"] = nullptr;
        e["attempts"] = rec.at("attempt").get<std::uint64_t>() + 1;
        e["history"].push_back(
            {{"attempt", rec.at("attempt")}, {"seed", rec.at("seed")}, {"submission", rec.at("submission")},
             {"verdict", rec.at("verdict")}, {"timestamp", rec.at("timestamp")}});
    } else {
        throw Error("unknown state record '" + op + "'");
    }
}

} // namespace

Service::Service(const ex::Bank& bank, Config cfg) : bank_(bank), cfg_(std::move(cfg))
{
    if (!cfg_.state_file.empty()) {
        replay();
        log_.open(cfg_.state_file, std::ios::app);
        if (!log_) throw Error("cannot open state file " + cfg_.state_file.string());
    }
}

Service::~Service() = default;

std::size_t Service::session_count() const
{
    std::shared_lock lock(sessions_mu_);
    return sessions_.size();
}

void Service::replay()
{
    std::ifstream in(cfg_.state_file);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            apply_record(mirror_, json::parse(line));
        } catch (const std::exception& e) {
            // A torn final line from a crash is tolerated; anything else is not.
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw Error(cfg_.state_file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    restore(mirror_);
}

void Service::restore(const json& snap)
{
    for (const auto& [id, s] : snap.items()) {
        auto session = std::make_shared<Session>();
        session->id = id;
        session->seed = s.at("seed").get<std::uint64_t>();
        session->created_at = s.at("created_at").get<std::string>();
        for (const auto& [exercise, e] : s.at("exercises").items()) {
            if (!bank_.find(exercise)) continue;
            ExerciseState st;
            st.attempts = e.at("attempts").get<std::uint64_t>();
            if (!e.at("current").is_null())
                st.current = bank_.instantiate(exercise, e["current"].at("seed").get<std::uint64_t>());
            for (const auto& h : e.at("history"))
                st.history.push_back(Attempt{h.at("attempt"), h.at("seed"), h.at("submission"),
                                             ex::verdict_from_json(h.at("verdict")), h.at("timestamp")});
            session->exercises.emplace(exercise, std::move(st));
        }
        sessions_[id] = std::move(session);
    }
}

json Service::snapshot() const
{
    return {{"op", "snapshot"}, {"sessions", mirror_}};
}

void Service::append(const json& record)
{
    std::lock_guard lock(log_mu_);
    apply_record(mirror_, record);
    if (!log_.is_open()) return;
    if (++appends_ < cfg_.snapshot_every) {
        log_ << record.dump() << '\n';
        log_.flush();
        return;
    }
    // Compact: write the whole state as one record, then swap files.
    appends_ = 0;
    const auto tmp = cfg_.state_file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << snapshot().dump() << '\n';
    }
    log_.close();
    std::filesystem::rename(tmp, cfg_.state_file);
    log_.open(cfg_.state_file, std::ios::app);
}

std::shared_ptr<Service::Session> Service::find_session(const std::string& id) const
{
    std::shared_lock lock(sessions_mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

ex::Instance Service::make_instance(const Session& s, const std::string& exercise, std::uint64_t attempt) const
{
    return bank_.instantiate(exercise, derive_seed(s.seed, exercise, attempt));
}

Response Service::handle(const Request& req)
{
    const auto parts = split_path(req.path);
    try {
        if (parts.size() < 2 || parts[0] != "api") return error(404, "not_found", "no such endpoint");
        const bool get = req.method == "GET";
        const bool post = req.method == "POST";
        auto wrong_method = [] { return error(405, "method_not_allowed", "method not allowed on this endpoint"); };

        if (parts[1] == "sessions") {
            if (parts.size() == 2) return post ? create_session(req) : wrong_method();
            if (parts.size() == 4 && parts[3] == "report") return get ? report(parts[2]) : wrong_method();
        } else if (parts[1] == "exercises") {
            if (parts.size() == 2) return get ? list_exercises() : wrong_method();
            if (parts.size() == 3) return get ? get_exercise(parts[2], req) : wrong_method();
            if (parts.size() == 4 && parts[3] == "answer") return post ? answer(parts[2], req) : wrong_method();
        } else if (parts[1] == "traces" && parts.size() == 3) {
            return get ? trace(parts[2], req) : wrong_method();
        }
        return error(404, "not_found", "no such endpoint");
    } catch (const std::exception& e) {
        return error(500, "internal_error", e.what());
    }
}

Response Service::create_session(const Request& req)
{
    std::uint64_t seed = 0;
    bool have_seed = false;
    if (!req.body.empty()) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            return error(400, "malformed_request", "body is not valid JSON");
        }
        if (!body.is_object()) return error(400, "malformed_request", "body must be a JSON object");
        if (body.contains("seed") && !body["seed"].is_null()) {
            const json& s = body["seed"];
            if (s.is_number_unsigned()) {
                seed = s.get<std::uint64_t>();
            } else if (s.is_string()) {
                try {
                    std::size_t used = 0;
                    seed = std::stoull(s.get<std::string>(), &used, 10);
                    if (used != s.get<std::string>().size()) throw std::invalid_argument("trailing");
                } catch (const std::exception&) {
                    return error(400, "malformed_request", "seed must be a non-negative integer");
                }
            } else {
                return error(400, "malformed_request", "seed must be a non-negative integer");
            }
            have_seed = true;
        }
    }
    // Entropy seeds stay below 2^53 so every JSON client reads them exactly.
    if (!have_seed) seed = entropy64() & ((std::uint64_t{1} << 53) - 1);

    auto session = std::make_shared<Session>();
    session->id = new_session_id();
    session->seed = seed;
    session->created_at = now_iso();
    {
        std::unique_lock lock(sessions_mu_);
        sessions_[session->id] = session;
    }
    append({{"op", "session"}, {"id", session->id}, {"seed", seed}, {"created_at", session->created_at}});
    return {201, {{"session", session->id}, {"seed", seed}, {"created_at", session->created_at}}};
}

Response Service::list_exercises()
{
    json list = json::array();
    for (const auto& id : bank_.ids()) {
        const ex::Exercise& e = *bank_.find(id);
        list.push_back({{"id", id}, {"type", ex::type_name(e)}, {"prompt", ex::prompt_of(e)},
                        {"randomized", ex::is_randomized(e)}});
    }
    return {200, {{"exercises", list}}};
}

Response Service::get_exercise(const std::string& id, const Request& req)
{
    const ex::Exercise* e = bank_.find(id);
    if (!e) return error(404, "exercise_not_found", "no exercise with id " + id);

    auto sid = req.query.find("session");
    if (sid == req.query.end()) {
        if (ex::is_randomized(*e))
            return error(400, "missing_session", "this exercise is randomized per session; pass ?session=");
        json body = bank_.render(bank_.instantiate(id, 0));
        return {200, body};
    }
    auto session = find_session(sid->second);
    if (!session) return error(404, "session_not_found", "no session " + sid->second);

    std::lock_guard lock(session->mu);
    ExerciseState& st = session->exercises[id];
    if (!st.current) {
        st.current = make_instance(*session, id, st.attempts);
        append({{"op", "render"}, {"session", session->id}, {"exercise", id}, {"attempt", st.attempts},
                {"seed", st.current->seed}});
    }
    json body = bank_.render(*st.current);
    body["session"] = session->id;
    body["attempt"] = st.attempts + 1;
    return {200, body};
}

Response Service::answer(const std::string& id, const Request& req)
{
    if (!bank_.find(id)) return error(404, "exercise_not_found", "no exercise with id " + id);
    auto sid = req.query.find("session");
    if (sid == req.query.end()) return error(400, "missing_session", "answers belong to a session; pass ?session=");
    auto session = find_session(sid->second);
    if (!session) return error(404, "session_not_found", "no session " + sid->second);

    json submission;
    try {
        submission = json::parse(req.body);
    } catch (const json::exception&) {
        return error(400, "malformed_submission", "body is not valid JSON");
    }

    std::lock_guard lock(session->mu);
    auto it = session->exercises.find(id);
    if (it == session->exercises.end() || !it->second.current)
        return error(409, "no_instance", "fetch the exercise in this session before answering");
    ExerciseState& st = it->second;

    ex::Verdict v;
    try {
        v = bank_.grade(*st.current, submission, cfg_.strict);
    } catch (const ex::InputError& e) {
        return error(400, "malformed_submission", e.what());
    }
    const std::string ts = now_iso();
    const std::uint64_t attempt = st.attempts;
    append({{"op", "answer"}, {"session", session->id}, {"exercise", id}, {"attempt", attempt},
            {"seed", st.current->seed}, {"submission", submission}, {"verdict", ex::to_json(v)}, {"timestamp", ts}});
    st.history.push_back(Attempt{attempt, st.current->seed, submission, v, ts});
    st.current.reset();
    ++st.attempts;

    json body = ex::to_json(v);
    body["attempt"] = attempt + 1;
    return {200, body};
}

Response Service::trace(const std::string& id, const Request& req)
{
    if (!cfg_.teacher_secret) return error(403, "teacher_disabled", "teacher endpoints are disabled on this server");
    auto h = req.headers.find(kTeacherHeader);
    if (h == req.headers.end() || h->second != *cfg_.teacher_secret)
        return error(401, "unauthorized", "missing or wrong teacher secret");
    const ex::Exercise* e = bank_.find(id);
    if (!e) return error(404, "exercise_not_found", "no exercise with id " + id);
    if (!std::holds_alternative<ex::TraceMaskQuestion>(*e) && !std::holds_alternative<ex::ReorderQuestion>(*e))
        return error(404, "trace_not_found", id + " has no capture");
    return {200, bank_.trace_view(id)};
}

Response Service::report(const std::string& session_id)
{
    auto session = find_session(session_id);
    if (!session) return error(404, "session_not_found", "no session " + session_id);
    std::lock_guard lock(session->mu);
    json exercises = json::object();
    for (const auto& [id, st] : session->exercises) {
        json history = json::array();
        for (const auto& a : st.history) history.push_back(attempt_json(a.attempt + 1, a.submission, a.verdict, a.timestamp));
        exercises[id] = {{"attempts", st.attempts}, {"history", history}};
    }
    return {200, {{"session", session->id}, {"seed", session->seed}, {"created_at", session->created_at},
                  {"exercises", exercises}}};
}

void Service::mount(httplib::Server& server)
{
    auto bridge = [this](const httplib::Request& in, httplib::Response& out) {
        Request req;
        req.method = in.method;
        req.path = in.path;
        for (const auto& [k, v] : in.params) req.query.emplace(k, v);
        for (const auto& [k, v] : in.headers) {
            std::string name = k;
            std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
            req.headers.emplace(name, v);
        }
        req.body = in.body;
        Response res = handle(req);
        out.status = res.status;
        out.set_content(res.body.dump(), "application/json");
    };
    for (const char* pattern : {R"(/api(/.*)?)"}) {
        server.Get(pattern, bridge);
        server.Post(pattern, bridge);
        server.Put(pattern, bridge);
        server.Delete(pattern, bridge);
    }
}

} // namespace netedu::service
