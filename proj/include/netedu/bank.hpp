#pragma once

#include "netedu/dissect.hpp"
#include "netedu/exercises.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace netedu::exercises {

using Exercise = std::variant<McqQuestion, ShortAnswerQuestion, TraceMaskQuestion, ReorderQuestion>;

std::string_view type_name(const Exercise& e);
const std::string& id_of(const Exercise& e);
const std::string& prompt_of(const Exercise& e);
/// MCQ and reorder questions draw a fresh randomization per attempt.
bool is_randomized(const Exercise& e);

struct LoadedCapture {
    dissect::Capture capture;
    std::vector<dissect::PacketTree> trees;
};

/// What a student was shown; grading refers back to it.
struct Instance {
    std::string exercise_id;
    std::uint64_t seed = 0;
    std::variant<std::monostate, McqInstance, ReorderInstance> data;
};

/// Immutable after load. Exercise files are JSON objects (or arrays of
/// them) with a `type` of mcq, short, trace_mask or trace_reorder.
class Bank {
public:
    static Bank load(const std::filesystem::path& dir);
    /// Parses definitions from memory; captures resolve against `root`.
    static Bank from_json(const nlohmann::json& exercises, const std::filesystem::path& root);

    const Exercise* find(const std::string& id) const;
    std::vector<std::string> ids() const;
    const LoadedCapture& capture(const std::string& name) const;

    Instance instantiate(const std::string& id, std::uint64_t seed) const;

    /// Student-facing view: no answer keys and no masked values.
    nlohmann::json render(const Instance& instance) const;

    /// Throws InputError for a submission that does not fit the exercise.
    Verdict grade(const Instance& instance, const nlohmann::json& submission, bool strict = false) const;

    /// Unmasked dissection of the capture behind a trace exercise.
    nlohmann::json trace_view(const std::string& id) const;

    /// Every value the student must not see for this exercise: masked raw
    /// values of trace_mask questions.
    std::vector<std::string> secrets(const std::string& id) const;

private:
    void add(Exercise e);

    std::filesystem::path root_;
    std::vector<std::string> order_;
    std::map<std::string, Exercise> exercises_;
    std::map<std::string, std::shared_ptr<const LoadedCapture>> captures_;
};

Exercise exercise_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Verdict& v);
Verdict verdict_from_json(const nlohmann::json& j);

} // namespace netedu::exercises
