#pragma once

#include "netedu/bytes.hpp"
#include "netedu/dissect.hpp"
#include "netedu/error.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace netedu::exercises {

/// Malformed exercise definition.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed submission (out-of-range index, non-permutation, ...).
class InputError : public Error {
public:
    using Error::Error;
};

struct FeedbackItem {
    std::string target;    // "answer", a field path, "position 2", ...
    std::string comment;

    bool operator==(const FeedbackItem&) const = default;
};

/// correct <=> score == 1; feedback is non-empty whenever score < 1.
struct Verdict {
    bool correct = false;
    double score = 0;
    std::vector<FeedbackItem> feedback;

    bool operator==(const Verdict&) const = default;
};

// ---------------------------------------------------------------------------
// Multiple choice
// ---------------------------------------------------------------------------

struct Answer {
    std::string text;
    std::string comment;
};

struct McqQuestion {
    std::string id;
    std::string prompt;
    std::vector<Answer> correct_pool;
    std::vector<Answer> incorrect_pool;
    std::size_t n = 1;   // invalid answers shown

    void validate() const;
};

struct McqChoice {
    bool correct = false;
    std::size_t pool_index = 0;

    bool operator==(const McqChoice&) const = default;
};

struct McqInstance {
    std::string question_id;
    std::vector<McqChoice> displayed;   // display order
    std::uint64_t seed = 0;

    bool operator==(const McqInstance&) const = default;
};

/// One correct and n incorrect answers drawn uniformly, then shuffled.
McqInstance instantiate_mcq(const McqQuestion& q, std::uint64_t seed);
const Answer& answer_of(const McqQuestion& q, const McqChoice& c);
Verdict grade_mcq(const McqQuestion& q, const McqInstance& instance, std::size_t chosen);

// ---------------------------------------------------------------------------
// Short answer
// ---------------------------------------------------------------------------

enum class GraderKind { ExactText, Integer, HexBytes, Stuffing };

std::string_view to_string(GraderKind k);

struct ShortAnswerQuestion {
    std::string id;
    std::string prompt;
    GraderKind grader = GraderKind::ExactText;
    std::string expected;       // text, integer or hex, depending on grader
    Bytes payload;              // stuffing grader: the payload to frame
    std::string feedback_wrong; // may contain {submitted}

    void validate() const;
};

/// Never throws on a bad submission; parse problems come back as feedback.
Verdict grade_short(const ShortAnswerQuestion& q, std::string_view submitted);

std::string normalize_text(std::string_view s);
/// Decimal or 0x-prefixed hexadecimal, optional sign.
bool parse_integer(std::string_view s, std::int64_t& out);

// ---------------------------------------------------------------------------
// Trace questions
// ---------------------------------------------------------------------------

struct TraceMaskQuestion {
    std::string id;
    std::string prompt;
    std::string capture;                          // path relative to the bank
    std::size_t packet_index = 0;
    std::vector<std::string> masked_paths;
    std::map<std::string, std::string> comments;  // per-field hint shown when wrong
};

struct RenderedTrace {
    dissect::PacketTree tree;   // masked
    std::string text;           // canonical field rendering
    std::string hexdump;        // masked bytes blanked
};

/// Throws ConfigError when nothing is masked, dissect::PathError when a path
/// does not resolve.
RenderedTrace render_trace_mask(const TraceMaskQuestion& q, const dissect::PacketTree& packet, ByteView bytes);

/// Score is the fraction of masked fields answered correctly.
Verdict grade_trace_mask(const TraceMaskQuestion& q, const dissect::PacketTree& packet,
                         const std::map<std::string, std::string>& answers, bool strict = false);

struct ReorderQuestion {
    std::string id;
    std::string prompt;
    std::string capture;
    std::vector<std::size_t> true_order;          // capture indices, chronological
    std::map<std::size_t, std::string> position_comments;   // 1-based position -> hint

    void validate() const;
};

struct ReorderInstance {
    std::string question_id;
    std::vector<std::size_t> shuffle;   // display index -> capture index
    std::uint64_t seed = 0;

    bool operator==(const ReorderInstance&) const = default;
};

/// Seeded Fisher-Yates; redrawn until it differs from the true order when
/// that is possible.
ReorderInstance instantiate_reorder(const ReorderQuestion& q, std::uint64_t seed);

/// `submitted[k]` is the display index the student puts at position k.
/// Correct iff shuffle[submitted[k]] == true_order[k] for all k.
Verdict grade_reorder(const ReorderQuestion& q, const ReorderInstance& instance,
                      const std::vector<std::size_t>& submitted, bool strict = false);

} // namespace netedu::exercises
