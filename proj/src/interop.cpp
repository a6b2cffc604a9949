#include "netedu/interop.hpp"

#include "netedu/proxy.hpp"

#include <openssl/evp.h>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace netedu::interop {

namespace fs = std::filesystem;
using nlohmann::json;

void ImplSpec::validate() const
{
    if (name.empty()) throw Error("implementation without a name");
    for (const char* p : {"{peer}", "{file}"})
        if (client.find(p) == std::string::npos) throw Error(name + ": client template lacks " + p);
    for (const char* p : {"{port}", "{out}"})
        if (server.find(p) == std::string::npos) throw Error(name + ": server template lacks " + p);
}

std::vector<ImplSpec> impls_from_json(const json& j)
{
    const json& list = j.is_object() && j.contains("impls") ? j["impls"] : j;
    if (!list.is_array()) throw Error("implementation file must hold a list");
    std::vector<ImplSpec> out;
    for (const auto& e : list) {
        ImplSpec s{e.at("name").get<std::string>(), e.at("client").get<std::string>(), e.at("server").get<std::string>()};
        s.validate();
        out.push_back(std::move(s));
    }
    if (out.empty()) throw Error("no implementations listed");
    return out;
}

std::vector<ImplSpec> load_impls(const fs::path& file)
{
    std::ifstream in(file);
    if (!in) throw Error("cannot open " + file.string());
    try {
        return impls_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw Error(file.string() + ": " + e.what());
    }
}

std::string_view to_string(Verdict v)
{
    switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Timeout: return "timeout";
    }
    return "?";
}

linksim::ImpairmentConfig default_impairment(std::uint64_t seed)
{
    linksim::ImpairmentConfig cfg;
    cfg.seed = seed;
    cfg.loss_prob = 0.05;
    cfg.reorder_prob = 0.02;
    cfg.base_delay = 10;
    return cfg;
}

std::string sha256_hex(ByteView data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
    return to_hex(ByteView(md, len));
}

namespace {

std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out += c;
    }
    return out + "'";
}

std::string expand(std::string tmpl, const std::vector<std::pair<std::string, std::string>>& values)
{
    for (const auto& [key, value] : values) {
        for (auto pos = tmpl.find(key); pos != std::string::npos; pos = tmpl.find(key, pos + value.size())) {
            tmpl.replace(pos, key.size(), value);
        }
    }
    return tmpl;
}

std::optional<Bytes> read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

std::string read_text(const fs::path& p)
{
    auto b = read_file(p);
    return b ? std::string(b->begin(), b->end()) : std::string();
}

class Child {
public:
    Child(const std::string& command, const fs::path& output)
    {
        const std::string out = output.string();
        pid_ = ::fork();
        if (pid_ < 0) throw Error("fork failed");
        if (pid_ == 0) {
            ::setpgid(0, 0);
            int fd = ::open(out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
            if (fd >= 0) {
                ::dup2(fd, 1);
                ::dup2(fd, 2);
                ::close(fd);
            }
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::setpgid(pid_, pid_);
    }
    ~Child() { kill(); }

    /// True once exited; status holds the wait status.
    bool wait_for(double seconds)
    {
        const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
        for (;;) {
            if (poll()) return true;
            if (std::chrono::steady_clock::now() >= until) return false;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
    }

    void kill()
    {
        if (done_) return;
        ::kill(-pid_, SIGKILL);
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status_, 0);
        done_ = true;
        killed_ = true;
    }

    bool killed() const { return killed_; }
    int exit_code() const { return WIFEXITED(status_) ? WEXITSTATUS(status_) : -1; }

    std::string describe() const
    {
        if (killed_) return "killed";
        if (WIFEXITED(status_)) return "exited with status " + std::to_string(WEXITSTATUS(status_));
        if (WIFSIGNALED(status_)) return "terminated by signal " + std::to_string(WTERMSIG(status_));
        return "ended";
    }

private:
    bool poll()
    {
        if (done_) return true;
        if (::waitpid(pid_, &status_, WNOHANG) == pid_) {
            done_ = true;
            // Stray grandchildren of the shell go with it.
            ::kill(-pid_, SIGKILL);
        }
        return done_;
    }

    pid_t pid_ = -1;
    int status_ = 0;
    bool done_ = false;
    bool killed_ = false;
};

std::size_t count_of(const std::string& text, const std::string& needle)
{
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + needle.size())) ++n;
    return n;
}

std::string last_line(const std::string& text)
{
    std::istringstream in(text);
    std::string line, last;
    while (std::getline(in, line))
        if (!line.empty()) last = line;
    return last;
}

std::uint16_t free_udp_port()
{
    net::UdpSocket probe(0, true);
    return probe.local_port();
}

fs::path make_work_dir(const fs::path& root)
{
    std::string tmpl = (root / "netedu-interop-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw Error("cannot create work directory under " + root.string());
    return tmpl;
}

} // namespace

Cell run_pair(const ImplSpec& client, const ImplSpec& server, const fs::path& workload, const RunOptions& options)
{
    Cell cell;
    cell.client = client.name;
    cell.server = server.name;
    const auto started = std::chrono::steady_clock::now();
    auto finish = [&](Verdict v, std::string detail) {
        cell.verdict = v;
        cell.detail = std::move(detail);
        cell.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        return cell;
    };

    const auto work = read_file(workload);
    if (!work) return finish(Verdict::Fail, "cannot read workload " + workload.string());
    cell.workload_sha256 = sha256_hex(*work);

    fs::path dir;
    try {
        dir = make_work_dir(options.work_root.empty() ? fs::temp_directory_path() : options.work_root);
    } catch (const std::exception& e) {
        return finish(Verdict::Fail, e.what());
    }
    const fs::path out = dir / "received.bin";

    std::string detail;
    Verdict verdict = Verdict::Fail;
    try {
        const std::uint16_t server_port = free_udp_port();
        linksim::ProxyConfig pcfg;
        pcfg.b = net::Address::loopback(server_port);
        pcfg.impairment = options.impairment;
        linksim::Proxy proxy(pcfg);
        std::atomic<bool> stop{false};
        std::thread proxy_thread([&] { proxy.run(stop); });
        struct Joiner {
            std::atomic<bool>& stop;
            std::thread& t;
            ~Joiner()
            {
                stop = true;
                if (t.joinable()) t.join();
            }
        } joiner{stop, proxy_thread};

        Child srv(expand(server.server, {{"{port}", std::to_string(server_port)}, {"{out}", shell_quote(out.string())}}),
                  dir / "server.log");
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        Child cli(expand(client.client, {{"{peer}", "127.0.0.1:" + std::to_string(proxy.port())},
                                         {"{file}", shell_quote(fs::absolute(workload).string())}}),
                  dir / "client.log");

        const bool client_done = cli.wait_for(options.timeout_s);
        if (!client_done) cli.kill();
        if (!srv.wait_for(client_done ? options.server_grace_s : 0)) srv.kill();
        stop = true;

        const std::string client_log = read_text(dir / "client.log");
        const std::string server_log = read_text(dir / "server.log");
        const auto received = read_file(out);
        if (received) {
            cell.bytes_transferred = received->size();
            cell.received_sha256 = sha256_hex(*received);
        }
        const bool equal = received && *received == *work;

        if (!client_done) {
            verdict = Verdict::Timeout;
            detail = "client did not finish within " + std::to_string(static_cast<int>(options.timeout_s)) + " s";
        } else if (cli.exit_code() != 0) {
            detail = "client " + cli.describe();
        } else if (!received) {
            detail = "server produced no output file";
        } else if (!equal) {
            detail = "received file differs from workload (" + std::to_string(received->size()) + " of " +
                     std::to_string(work->size()) + " bytes)";
        } else {
            verdict = Verdict::Pass;
            detail = "ok";
        }
        if (verdict != Verdict::Pass) {
            if (auto n = count_of(client_log, "integrity error"); n > 0)
                detail += "; integrity errors (" + std::to_string(n) + ") seen by client";
            if (auto n = count_of(server_log, "integrity error"); n > 0)
                detail += "; integrity errors (" + std::to_string(n) + ") seen by server";
            if (auto l = last_line(client_log); !l.empty()) detail += "; client: " + l;
            if (auto l = last_line(server_log); !l.empty()) detail += "; server: " + l;
        }
    } catch (const std::exception& e) {
        verdict = Verdict::Fail;
        detail = std::string("harness error: ") + e.what();
    }

    if (!options.keep_files) {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    return finish(verdict, detail);
}

Matrix run_matrix(const std::vector<ImplSpec>& impls, const fs::path& workload, const RunOptions& options)
{
    Matrix m;
    for (const auto& i : impls) m.impls.push_back(i.name);
    const std::size_t n = impls.size();
    m.cells.resize(n * n);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < n * n; k = next++) m.cells[k] = run_pair(impls[k / n], impls[k % n], workload, options);
    };
    const unsigned width = std::max(1u, std::min<unsigned>(options.parallel, static_cast<unsigned>(n * n)));
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < width; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return m;
}

json to_json(const Matrix& m)
{
    json cells = json::array();
    for (const auto& c : m.cells)
        cells.push_back({{"client", c.client},
                         {"server", c.server},
                         {"verdict", to_string(c.verdict)},
                         {"detail", c.detail},
                         {"bytes", c.bytes_transferred},
                         {"duration_ms", std::round(c.duration_ms)},
                         {"workload_sha256", c.workload_sha256},
                         {"received_sha256", c.received_sha256}});
    return {{"impls", m.impls}, {"cells", cells}};
}

std::string format_table(const Matrix& m)
{
    std::size_t w = std::string_view("client \\ server").size();
    for (const auto& name : m.impls) w = std::max(w, name.size());
    std::size_t cw = 7;
    for (const auto& name : m.impls) cw = std::max(cw, name.size());

    std::ostringstream out;
    auto pad = [](std::string s, std::size_t width) {
        s.resize(std::max(s.size(), width), ' ');
        return s;
    };
    out << pad("client \\ server", w);
    for (const auto& name : m.impls) out << "  " << pad(name, cw);
    out << '\n';
    for (std::size_t r = 0; r < m.impls.size(); ++r) {
        out << pad(m.impls[r], w);
        for (std::size_t c = 0; c < m.impls.size(); ++c) out << "  " << pad(std::string(to_string(m.at(r, c).verdict)), cw);
        out << '\n';
    }
    return out.str();
}

} // namespace netedu::interop
