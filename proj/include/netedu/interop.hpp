#pragma once

#include "netedu/bytes.hpp"
#include "netedu/error.hpp"
#include "netedu/linksim.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace netedu::interop {

/// One implementation under test. Client templates use {peer} and {file};
/// server templates use {port} and {out}.
struct ImplSpec {
    std::string name;
    std::string client;
    std::string server;

    /// Throws Error when a placeholder is missing.
    void validate() const;
};

std::vector<ImplSpec> load_impls(const std::filesystem::path& file);
std::vector<ImplSpec> impls_from_json(const nlohmann::json& j);

enum class Verdict { Pass, Fail, Timeout };
std::string_view to_string(Verdict v);

struct Cell {
    std::string client;
    std::string server;
    Verdict verdict = Verdict::Fail;
    std::string detail;
    std::uint64_t bytes_transferred = 0;
    double duration_ms = 0;
    std::string workload_sha256;
    std::string received_sha256;
};

struct RunOptions {
    linksim::ImpairmentConfig impairment;
    double timeout_s = 30;
    /// How long the server may keep running after the client is done.
    double server_grace_s = 3;
    unsigned parallel = 4;
    std::filesystem::path work_root;   // defaults to the system temp dir
    bool keep_files = false;
};

/// Impairment defaults for interop runs: loss 5%, reorder 2%, delay 10 ms.
linksim::ImpairmentConfig default_impairment(std::uint64_t seed);

/// Never throws for failures of the implementations; they end up in the
/// cell.
Cell run_pair(const ImplSpec& client, const ImplSpec& server, const std::filesystem::path& workload,
              const RunOptions& options);

struct Matrix {
    std::vector<std::string> impls;
    std::vector<Cell> cells;   // row-major: client index * n + server index

    const Cell& at(std::size_t client, std::size_t server) const { return cells[client * impls.size() + server]; }
};

/// All ordered pairs, cells filled in deterministic order.
Matrix run_matrix(const std::vector<ImplSpec>& impls, const std::filesystem::path& workload,
                  const RunOptions& options);

nlohmann::json to_json(const Matrix& m);
std::string format_table(const Matrix& m);

std::string sha256_hex(ByteView data);

} // namespace netedu::interop
