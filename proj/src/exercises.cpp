#include "netedu/exercises.hpp"

#include "netedu/codec.hpp"
#include "netedu/prng.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <numeric>
#include <set>

namespace netedu::exercises {

namespace {

Verdict finish(std::size_t right, std::size_t total, std::vector<FeedbackItem> feedback, bool strict)
{
    Verdict v;
    v.correct = right == total;
    v.score = strict ? (v.correct ? 1.0 : 0.0) : (total ? double(right) / double(total) : 1.0);
    v.feedback = std::move(feedback);
    return v;
}

std::string substitute(std::string text, std::string_view key, std::string_view value)
{
    for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
        text.replace(pos, key.size(), value);
    return text;
}

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

} // namespace

// ---------------------------------------------------------------------------
// MCQ
// ---------------------------------------------------------------------------

void McqQuestion::validate() const
{
    if (id.empty()) throw ConfigError("question without id");
    if (correct_pool.empty()) throw ConfigError(id + ": needs at least one correct answer");
    if (n < 1) throw ConfigError(id + ": n must be at least 1");
    if (incorrect_pool.size() < n)
        throw ConfigError(id + ": " + std::to_string(incorrect_pool.size()) + " incorrect answers cannot fill n=" +
                          std::to_string(n));
    for (const auto* pool : {&correct_pool, &incorrect_pool})
        for (const auto& a : *pool)
            if (a.comment.empty()) throw ConfigError(id + ": answer '" + a.text + "' has no comment");
}

McqInstance instantiate_mcq(const McqQuestion& q, std::uint64_t seed)
{
    q.validate();
    SplitMix64 rng(seed);
    McqInstance inst{q.id, {}, seed};
    inst.displayed.push_back({true, static_cast<std::size_t>(rng.below(q.correct_pool.size()))});

    std::vector<std::size_t> wrong(q.incorrect_pool.size());
    std::iota(wrong.begin(), wrong.end(), 0);
    for (std::size_t i = 0; i < q.n; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(wrong.size() - i));
        std::swap(wrong[i], wrong[j]);
        inst.displayed.push_back({false, wrong[i]});
    }
    shuffle(inst.displayed, rng);
    return inst;
}

const Answer& answer_of(const McqQuestion& q, const McqChoice& c)
{
    return c.correct ? q.correct_pool.at(c.pool_index) : q.incorrect_pool.at(c.pool_index);
}

Verdict grade_mcq(const McqQuestion& q, const McqInstance& instance, std::size_t chosen)
{
    if (chosen >= instance.displayed.size())
        throw InputError("answer index " + std::to_string(chosen) + " out of range (0.." +
                         std::to_string(instance.displayed.size() - 1) + ")");
    const McqChoice& c = instance.displayed[chosen];
    Verdict v;
    v.correct = c.correct;
    v.score = c.correct ? 1.0 : 0.0;
    v.feedback.push_back({"answer " + std::to_string(chosen), answer_of(q, c).comment});
    return v;
}

// ---------------------------------------------------------------------------
// Short answers
// ---------------------------------------------------------------------------

std::string_view to_string(GraderKind k)
{
    switch (k) {
    case GraderKind::ExactText: return "exact_text";
    case GraderKind::Integer: return "integer";
    case GraderKind::HexBytes: return "hex_bytes";
    case GraderKind::Stuffing: return "stuffing";
    }
    return "?";
}

std::string normalize_text(std::string_view s)
{
    std::string out;
    bool space = false;
    for (char c : trim(s)) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = true;
            continue;
        }
        if (space) out += ' ';
        space = false;
        out += c;
    }
    return out;
}

bool parse_integer(std::string_view text, std::int64_t& out)
{
    std::string s = trim(text);
    bool negative = false;
    std::string_view v = s;
    if (!v.empty() && (v[0] == '-' || v[0] == '+')) {
        negative = v[0] == '-';
        v.remove_prefix(1);
    }
    int base = 10;
    if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X')) {
        base = 16;
        v.remove_prefix(2);
    }
    if (v.empty()) return false;
    std::uint64_t magnitude = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), magnitude, base);
    if (ec != std::errc() || ptr != v.data() + v.size()) return false;
    if (magnitude > static_cast<std::uint64_t>(INT64_MAX)) return false;
    out = negative ? -static_cast<std::int64_t>(magnitude) : static_cast<std::int64_t>(magnitude);
    return true;
}

void ShortAnswerQuestion::validate() const
{
    if (id.empty()) throw ConfigError("question without id");
    Bytes scratch;
    std::int64_t n;
    switch (grader) {
    case GraderKind::ExactText:
        if (normalize_text(expected).empty()) throw ConfigError(id + ": empty expected text");
        break;
    case GraderKind::Integer:
        if (!parse_integer(expected, n)) throw ConfigError(id + ": expected value is not an integer");
        break;
    case GraderKind::HexBytes:
        if (!parse_hex(expected, scratch)) throw ConfigError(id + ": expected value is not hex");
        break;
    case GraderKind::Stuffing:
        if (payload.size() > codec::kMaxStuffPayload) throw ConfigError(id + ": payload too long to stuff");
        break;
    }
}

namespace {

Verdict wrong_with(const ShortAnswerQuestion& q, std::string_view submitted, std::vector<FeedbackItem> detail)
{
    Verdict v;
    v.feedback = std::move(detail);
    if (!q.feedback_wrong.empty())
        v.feedback.push_back({"answer", substitute(q.feedback_wrong, "{submitted}", trim(submitted))});
    if (v.feedback.empty()) v.feedback.push_back({"answer", "incorrect answer"});
    return v;
}

Verdict compare_bytes(const ShortAnswerQuestion& q, std::string_view submitted, const Bytes& expected,
                      std::string_view hint)
{
    Bytes got;
    if (!parse_hex(submitted, got))
        return wrong_with(q, submitted, {{"answer", "could not parse the answer as hexadecimal bytes"}});
    if (got == expected) return Verdict{true, 1.0, {}};

    const std::size_t common = std::min(got.size(), expected.size());
    std::size_t offset = 0;
    while (offset < common && got[offset] == expected[offset]) ++offset;
    std::string comment = "first mismatching byte at offset " + std::to_string(offset);
    if (offset == common)
        comment += got.size() < expected.size() ? " (answer is too short)" : " (answer is too long)";
    if (!hint.empty()) comment += "; " + std::string(hint);
    return wrong_with(q, submitted, {{"byte " + std::to_string(offset), comment}});
}

} // namespace

Verdict grade_short(const ShortAnswerQuestion& q, std::string_view submitted)
{
    switch (q.grader) {
    case GraderKind::ExactText:
        if (normalize_text(submitted) == normalize_text(q.expected)) return Verdict{true, 1.0, {}};
        return wrong_with(q, submitted, {});
    case GraderKind::Integer: {
        std::int64_t got, want;
        if (!parse_integer(q.expected, want)) throw ConfigError(q.id + ": expected value is not an integer");
        if (!parse_integer(submitted, got))
            return wrong_with(q, submitted, {{"answer", "could not parse the answer as a decimal or 0x-hex integer"}});
        if (got == want) return Verdict{true, 1.0, {}};
        return wrong_with(q, submitted, {});
    }
    case GraderKind::HexBytes: {
        Bytes want;
        if (!parse_hex(q.expected, want)) throw ConfigError(q.id + ": expected value is not hex");
        return compare_bytes(q, submitted, want, {});
    }
    case GraderKind::Stuffing:
        return compare_bytes(q, submitted, codec::stuff(q.payload),
                             "the frame starts and ends with 7E, and every 7E or 7D inside the payload is sent as "
                             "7D followed by the byte XOR 0x20");
    }
    throw ConfigError(q.id + ": unknown grader");
}

// ---------------------------------------------------------------------------
// Trace questions
// ---------------------------------------------------------------------------

RenderedTrace render_trace_mask(const TraceMaskQuestion& q, const dissect::PacketTree& packet, ByteView bytes)
{
    if (q.masked_paths.empty()) throw ConfigError(q.id + ": a mask question must mask at least one field");
    RenderedTrace out;
    out.tree = dissect::mask_fields(packet, q.masked_paths);
    out.text = dissect::render(out.tree);
    out.hexdump = dissect::hexdump(bytes, &out.tree);
    return out;
}

namespace {

bool field_matches(const dissect::Field& f, const std::string& submitted)
{
    const std::string s = trim(submitted);
    if (s.empty()) return false;
    if (s == f.display) return true;
    if (const auto* v = std::get_if<std::uint64_t>(&f.raw_value)) {
        std::int64_t got;
        return parse_integer(s, got) && got >= 0 && static_cast<std::uint64_t>(got) == *v;
    }
    Bytes got;
    return parse_hex(s, got) && got == std::get<Bytes>(f.raw_value);
}

} // namespace

Verdict grade_trace_mask(const TraceMaskQuestion& q, const dissect::PacketTree& packet,
                         const std::map<std::string, std::string>& answers, bool strict)
{
    if (q.masked_paths.empty()) throw ConfigError(q.id + ": a mask question must mask at least one field");
    std::size_t right = 0;
    std::vector<FeedbackItem> feedback;
    for (const auto& path : q.masked_paths) {
        const dissect::Field* f = packet.find(path);
        if (!f) throw dissect::PathError(path);
        auto it = answers.find(path);
        if (it == answers.end() || trim(it->second).empty()) {
            feedback.push_back({path, "unanswered"});
            continue;
        }
        if (field_matches(*f, it->second)) {
            ++right;
            continue;
        }
        auto hint = q.comments.find(path);
        feedback.push_back({path, hint != q.comments.end() ? "incorrect: " + hint->second : "incorrect value"});
    }
    return finish(right, q.masked_paths.size(), std::move(feedback), strict);
}

void ReorderQuestion::validate() const
{
    std::vector<std::size_t> sorted = true_order;
    std::ranges::sort(sorted);
    for (std::size_t i = 0; i < sorted.size(); ++i)
        if (sorted[i] != i) throw ConfigError(id + ": true order is not a permutation of the packet indices");
    if (true_order.empty()) throw ConfigError(id + ": nothing to reorder");
}

ReorderInstance instantiate_reorder(const ReorderQuestion& q, std::uint64_t seed)
{
    q.validate();
    SplitMix64 rng(seed);
    ReorderInstance inst{q.id, q.true_order, seed};
    if (q.true_order.size() < 2) return inst;
    do {
        shuffle(inst.shuffle, rng);
    } while (inst.shuffle == q.true_order);
    return inst;
}

Verdict grade_reorder(const ReorderQuestion& q, const ReorderInstance& instance,
                      const std::vector<std::size_t>& submitted, bool strict)
{
    const std::size_t n = instance.shuffle.size();
    if (submitted.size() != n)
        throw InputError("expected a permutation of " + std::to_string(n) + " display indices, got " +
                         std::to_string(submitted.size()) + " entries");
    std::set<std::size_t> seen;
    for (auto i : submitted) {
        if (i >= n) throw InputError("display index " + std::to_string(i) + " out of range");
        if (!seen.insert(i).second) throw InputError("display index " + std::to_string(i) + " repeated");
    }

    std::size_t right = 0;
    std::optional<std::size_t> first_wrong;
    for (std::size_t k = 0; k < n; ++k) {
        if (instance.shuffle[submitted[k]] == q.true_order[k])
            ++right;
        else if (!first_wrong)
            first_wrong = k;
    }
    std::vector<FeedbackItem> feedback;
    if (first_wrong) {
        const std::size_t pos = *first_wrong + 1;
        std::string comment = "packet #" + std::to_string(submitted[*first_wrong]) + " does not belong at position " +
                              std::to_string(pos);
        if (auto it = q.position_comments.find(pos); it != q.position_comments.end()) comment += ": " + it->second;
        feedback.push_back({"position " + std::to_string(pos), comment});
    }
    return finish(right, n, std::move(feedback), strict);
}

} // namespace netedu::exercises
