#pragma once

#include "netedu/bank.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

namespace httplib {
class Server;
}

namespace netedu::service {

struct Config {
    /// Append-only state log; empty keeps sessions in memory only.
    std::filesystem::path state_file;
    /// Shared secret for the teacher endpoints; unset disables them.
    std::optional<std::string> teacher_secret;
    /// Binary scoring instead of partial credit.
    bool strict = false;
    /// Rewrite the state log as one snapshot after this many appends.
    std::size_t snapshot_every = 500;
};

struct Request {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::map<std::string, std::string> headers;   // lower-case names
    std::string body;
};

struct Response {
    int status = 200;
    nlohmann::json body;
};

inline constexpr const char* kTeacherHeader = "x-teacher-secret";

/// Session workflow over an immutable exercise bank. handle() is safe to
/// call concurrently; each session is updated under its own lock.
class Service {
public:
    Service(const exercises::Bank& bank, Config cfg);
    ~Service();

    Response handle(const Request& req);

    /// Routes /api/* of `server` to handle().
    void mount(httplib::Server& server);

    std::size_t session_count() const;

private:
    struct Attempt {
        std::uint64_t attempt;
        std::uint64_t seed;
        nlohmann::json submission;
        exercises::Verdict verdict;
        std::string timestamp;
    };
    struct ExerciseState {
        std::uint64_t attempts = 0;   // answered so far
        std::optional<exercises::Instance> current;
        std::vector<Attempt> history;
    };
    struct Session {
        std::string id;
        std::uint64_t seed = 0;
        std::string created_at;
        std::mutex mu;
        std::map<std::string, ExerciseState> exercises;
    };

    Response create_session(const Request& req);
    Response list_exercises();
    Response get_exercise(const std::string& id, const Request& req);
    Response answer(const std::string& id, const Request& req);
    Response trace(const std::string& id, const Request& req);
    Response report(const std::string& session_id);

    std::shared_ptr<Session> find_session(const std::string& id) const;
    exercises::Instance make_instance(const Session& s, const std::string& exercise, std::uint64_t attempt) const;

    void append(const nlohmann::json& record);
    void replay();
    nlohmann::json snapshot() const;
    void restore(const nlohmann::json& snap);

    const exercises::Bank& bank_;
    Config cfg_;
    mutable std::shared_mutex sessions_mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::mutex log_mu_;
    // Persisted form of every session, kept beside the log so appends and
    // snapshots never need session locks.
    nlohmann::json mirror_ = nlohmann::json::object();
    std::ofstream log_;
    std::size_t appends_ = 0;
};

Response error(int status, const std::string& code, const std::string& message);

} // namespace netedu::service
