#include "netedu/bank.hpp"

#include <algorithm>
#include <fstream>

namespace netedu::exercises {

using nlohmann::json;

namespace {

std::string str(const json& j, const char* key)
{
    if (!j.contains(key) || !j[key].is_string()) throw ConfigError(std::string("missing string field '") + key + "'");
    return j[key].get<std::string>();
}

std::vector<Answer> answers(const json& j, const char* key)
{
    std::vector<Answer> out;
    if (!j.contains(key) || !j[key].is_array()) throw ConfigError(std::string("missing answer list '") + key + "'");
    for (const auto& a : j[key]) out.push_back({str(a, "text"), str(a, "comment")});
    return out;
}

GraderKind parse_grader(const std::string& s)
{
    for (auto k : {GraderKind::ExactText, GraderKind::Integer, GraderKind::HexBytes, GraderKind::Stuffing})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown grader '" + s + "'");
}

} // namespace

Exercise exercise_from_json(const json& j)
{
    const std::string type = str(j, "type");
    const std::string id = str(j, "id");
    const std::string prompt = str(j, "prompt");
    if (type == "mcq") {
        McqQuestion q{id, prompt, answers(j, "correct"), answers(j, "incorrect"), j.value("n", std::size_t{1})};
        q.validate();
        return q;
    }
    if (type == "short") {
        ShortAnswerQuestion q;
        q.id = id;
        q.prompt = prompt;
        q.grader = parse_grader(str(j, "grader"));
        if (q.grader == GraderKind::Stuffing) {
            if (!parse_hex(str(j, "payload"), q.payload)) throw ConfigError(id + ": payload is not hex");
        } else {
            q.expected = str(j, "expected");
        }
        q.feedback_wrong = j.value("feedback_wrong", std::string{});
        q.validate();
        return q;
    }
    if (type == "trace_mask") {
        TraceMaskQuestion q;
        q.id = id;
        q.prompt = prompt;
        q.capture = str(j, "capture");
        q.packet_index = j.value("packet", std::size_t{0});
        q.masked_paths = j.value("mask", std::vector<std::string>{});
        q.comments = j.value("comments", std::map<std::string, std::string>{});
        if (q.masked_paths.empty()) throw ConfigError(id + ": a mask question must mask at least one field");
        return q;
    }
    if (type == "trace_reorder") {
        ReorderQuestion q;
        q.id = id;
        q.prompt = prompt;
        q.capture = str(j, "capture");
        q.true_order = j.value("true_order", std::vector<std::size_t>{});
        if (j.contains("position_comments"))
            for (const auto& [k, v] : j["position_comments"].items()) q.position_comments[std::stoul(k)] = v.get<std::string>();
        return q;
    }
    throw ConfigError(id + ": unknown exercise type '" + type + "'");
}

std::string_view type_name(const Exercise& e)
{
    static constexpr std::string_view names[] = {"mcq", "short", "trace_mask", "trace_reorder"};
    return names[e.index()];
}

const std::string& id_of(const Exercise& e)
{
    return std::visit([](const auto& q) -> const std::string& { return q.id; }, e);
}

const std::string& prompt_of(const Exercise& e)
{
    return std::visit([](const auto& q) -> const std::string& { return q.prompt; }, e);
}

bool is_randomized(const Exercise& e)
{
    return std::holds_alternative<McqQuestion>(e) || std::holds_alternative<ReorderQuestion>(e);
}

json to_json(const Verdict& v)
{
    json fb = json::array();
    for (const auto& f : v.feedback) fb.push_back({{"target", f.target}, {"comment", f.comment}});
    return {{"correct", v.correct}, {"score", v.score}, {"feedback", fb}};
}

Verdict verdict_from_json(const json& j)
{
    Verdict v{j.at("correct").get<bool>(), j.at("score").get<double>(), {}};
    for (const auto& f : j.at("feedback")) v.feedback.push_back({f.at("target"), f.at("comment")});
    return v;
}

// ---------------------------------------------------------------------------

Bank Bank::from_json(const json& list, const std::filesystem::path& root)
{
    Bank bank;
    bank.root_ = root;
    auto add_one = [&](const json& j) {
        try {
            bank.add(exercise_from_json(j));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(j.value("id", std::string("?")) + ": " + e.what());
        }
    };
    if (list.is_array())
        for (const auto& j : list) add_one(j);
    else
        add_one(list);
    return bank;
}

Bank Bank::load(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir)) throw ConfigError("bank directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::ranges::sort(files);

    Bank bank;
    bank.root_ = dir;
    for (const auto& file : files) {
        std::ifstream in(file);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError(file.filename().string() + ": " + e.what());
        }
        Bank part = from_json(j, dir);
        for (const auto& id : part.order_) bank.add(part.exercises_.at(id));
    }
    return bank;
}

void Bank::add(Exercise e)
{
    const std::string id = id_of(e);
    if (exercises_.count(id)) throw ConfigError("duplicate exercise id " + id);

    auto load_capture = [&](const std::string& name) -> const LoadedCapture& {
        auto it = captures_.find(name);
        if (it == captures_.end()) {
            auto loaded = std::make_shared<LoadedCapture>();
            loaded->capture = dissect::read_pcap_file(root_ / name);
            for (const auto& p : loaded->capture.packets)
                loaded->trees.push_back(dissect::dissect_packet(p.bytes, loaded->capture.link_type));
            it = captures_.emplace(name, std::move(loaded)).first;
        }
        return *it->second;
    };

    if (auto* q = std::get_if<TraceMaskQuestion>(&e)) {
        const auto& cap = load_capture(q->capture);
        if (q->packet_index >= cap.trees.size()) throw ConfigError(id + ": packet index out of range");
        render_trace_mask(*q, cap.trees[q->packet_index], cap.capture.packets[q->packet_index].bytes);
    } else if (auto* r = std::get_if<ReorderQuestion>(&e)) {
        const auto& cap = load_capture(r->capture);
        if (r->true_order.empty()) {
            r->true_order.resize(cap.trees.size());
            for (std::size_t i = 0; i < r->true_order.size(); ++i) r->true_order[i] = i;
        }
        if (r->true_order.size() != cap.trees.size())
            throw ConfigError(id + ": true order does not cover every packet of the capture");
        r->validate();
    }
    order_.push_back(id);
    exercises_.emplace(id, std::move(e));
}

const Exercise* Bank::find(const std::string& id) const
{
    auto it = exercises_.find(id);
    return it == exercises_.end() ? nullptr : &it->second;
}

std::vector<std::string> Bank::ids() const
{
    return order_;
}

const LoadedCapture& Bank::capture(const std::string& name) const
{
    auto it = captures_.find(name);
    if (it == captures_.end()) throw Error("capture not loaded: " + name);
    return *it->second;
}

Instance Bank::instantiate(const std::string& id, std::uint64_t seed) const
{
    const Exercise* e = find(id);
    if (!e) throw InputError("unknown exercise " + id);
    Instance inst{id, seed, std::monostate{}};
    if (auto* q = std::get_if<McqQuestion>(e))
        inst.data = instantiate_mcq(*q, seed);
    else if (auto* r = std::get_if<ReorderQuestion>(e))
        inst.data = instantiate_reorder(*r, seed);
    return inst;
}

namespace {

json fields_json(const dissect::PacketTree& tree)
{
    json fields = json::array();
    for (const auto& layer : tree.layers)
        for (const auto& f : layer.fields)
            fields.push_back({{"path", layer.name + "." + f.name},
                              {"display", f.masked ? std::string(dissect::kMaskedDisplay) : f.display},
                              {"byte_offset", f.byte_offset},
                              {"bit_offset", f.bit_offset},
                              {"bit_width", f.bit_width},
                              {"masked", f.masked}});
    return fields;
}

json hex_bytes(ByteView bytes, const dissect::PacketTree* masked)
{
    std::vector<bool> hidden(bytes.size(), false);
    if (masked)
        for (auto [first, last] : dissect::masked_byte_ranges(*masked))
            for (std::size_t i = first; i < last && i < hidden.size(); ++i) hidden[i] = true;
    json out = json::array();
    for (std::size_t i = 0; i < bytes.size(); ++i)
        out.push_back(hidden[i] ? std::string("??") : to_hex(bytes.subspan(i, 1)));
    return out;
}

} // namespace

json Bank::render(const Instance& instance) const
{
    const Exercise* e = find(instance.exercise_id);
    if (!e) throw InputError("unknown exercise " + instance.exercise_id);
    json out = {{"id", id_of(*e)}, {"type", type_name(*e)}, {"prompt", prompt_of(*e)}};

    if (auto* q = std::get_if<McqQuestion>(e)) {
        const auto& inst = std::get<McqInstance>(instance.data);
        json list = json::array();
        for (std::size_t i = 0; i < inst.displayed.size(); ++i)
            list.push_back({{"index", i}, {"text", answer_of(*q, inst.displayed[i]).text}});
        out["answers"] = list;
    } else if (auto* s = std::get_if<ShortAnswerQuestion>(e)) {
        out["grader"] = to_string(s->grader);
        if (s->grader == GraderKind::Stuffing) out["payload"] = to_hex(s->payload, " ");
    } else if (auto* t = std::get_if<TraceMaskQuestion>(e)) {
        const auto& cap = capture(t->capture);
        const auto& bytes = cap.capture.packets[t->packet_index].bytes;
        const RenderedTrace r = render_trace_mask(*t, cap.trees[t->packet_index], bytes);
        out["packet"] = t->packet_index;
        out["fields"] = fields_json(r.tree);
        out["text"] = r.text;
        out["hexdump"] = r.hexdump;
        out["bytes"] = hex_bytes(bytes, &r.tree);
        out["masked"] = t->masked_paths;
    } else if (auto* ro = std::get_if<ReorderQuestion>(e)) {
        const auto& inst = std::get<ReorderInstance>(instance.data);
        const auto& cap = capture(ro->capture);
        json packets = json::array();
        for (std::size_t i = 0; i < inst.shuffle.size(); ++i) {
            const auto& tree = cap.trees[inst.shuffle[i]];
            packets.push_back({{"index", i},
                               {"summary", dissect::summary(tree)},
                               {"text", dissect::render(tree)},
                               {"fields", fields_json(tree)},
                               {"bytes", hex_bytes(cap.capture.packets[inst.shuffle[i]].bytes, nullptr)}});
        }
        out["packets"] = packets;
    }
    return out;
}

Verdict Bank::grade(const Instance& instance, const json& sub, bool strict) const
{
    const Exercise* e = find(instance.exercise_id);
    if (!e) throw InputError("unknown exercise " + instance.exercise_id);
    if (!sub.is_object()) throw InputError("submission must be a JSON object");

    if (auto* q = std::get_if<McqQuestion>(e)) {
        if (!sub.contains("choice") || !sub["choice"].is_number_integer() || sub["choice"].get<long long>() < 0)
            throw InputError("mcq submission needs a non-negative integer 'choice'");
        return grade_mcq(*q, std::get<McqInstance>(instance.data), sub["choice"].get<std::size_t>());
    }
    if (auto* s = std::get_if<ShortAnswerQuestion>(e)) {
        if (!sub.contains("answer") || !sub["answer"].is_string())
            throw InputError("short-answer submission needs a string 'answer'");
        Verdict v = grade_short(*s, sub["answer"].get<std::string>());
        return v;
    }
    if (auto* t = std::get_if<TraceMaskQuestion>(e)) {
        std::map<std::string, std::string> answers;
        if (sub.contains("answers")) {
            if (!sub["answers"].is_object()) throw InputError("'answers' must map field paths to values");
            for (const auto& [path, value] : sub["answers"].items()) {
                if (value.is_string())
                    answers[path] = value.get<std::string>();
                else if (value.is_number_unsigned() || value.is_number_integer())
                    answers[path] = value.dump();
                else
                    throw InputError("answer for " + path + " must be a string or an integer");
            }
        }
        const auto& cap = capture(t->capture);
        return grade_trace_mask(*t, cap.trees[t->packet_index], answers, strict);
    }
    const auto& ro = std::get<ReorderQuestion>(*e);
    if (!sub.contains("order") || !sub["order"].is_array()) throw InputError("reorder submission needs an 'order' list");
    std::vector<std::size_t> order;
    for (const auto& x : sub["order"]) {
        if (!x.is_number_integer() || x.get<long long>() < 0) throw InputError("'order' entries must be display indices");
        order.push_back(x.get<std::size_t>());
    }
    return grade_reorder(ro, std::get<ReorderInstance>(instance.data), order, strict);
}

json Bank::trace_view(const std::string& id) const
{
    const Exercise* e = find(id);
    if (!e) throw InputError("unknown exercise " + id);
    std::string name;
    if (auto* t = std::get_if<TraceMaskQuestion>(e))
        name = t->capture;
    else if (auto* r = std::get_if<ReorderQuestion>(e))
        name = r->capture;
    else
        throw InputError(id + " is not a trace exercise");

    const auto& cap = capture(name);
    json packets = json::array();
    for (std::size_t i = 0; i < cap.trees.size(); ++i) {
        const auto& bytes = cap.capture.packets[i].bytes;
        json checks = json::array();
        for (const auto& c : dissect::verify_checksums(cap.trees[i], bytes))
            checks.push_back({{"layer", c.layer}, {"status", dissect::to_string(c.status)}, {"detail", c.detail}});
        packets.push_back({{"index", i},
                           {"timestamp_us", cap.capture.packets[i].timestamp_us},
                           {"hex", to_hex(bytes)},
                           {"summary", dissect::summary(cap.trees[i])},
                           {"text", dissect::render(cap.trees[i])},
                           {"fields", fields_json(cap.trees[i])},
                           {"checksums", checks}});
    }
    return {{"id", id}, {"capture", name}, {"link_type", cap.capture.link_type == dissect::LinkType::Ethernet ? "ethernet" : "raw_ip"},
            {"packets", packets}};
}

std::vector<std::string> Bank::secrets(const std::string& id) const
{
    std::vector<std::string> out;
    const Exercise* e = find(id);
    const auto* t = e ? std::get_if<TraceMaskQuestion>(e) : nullptr;
    if (!t) return out;
    const auto& tree = capture(t->capture).trees[t->packet_index];
    for (const auto& path : t->masked_paths) {
        const dissect::Field* f = tree.find(path);
        if (!f) continue;
        out.push_back(f->display);
        if (const auto* v = std::get_if<std::uint64_t>(&f->raw_value)) {
            out.push_back(std::to_string(*v));
            char buf[24];
            std::snprintf(buf, sizeof buf, "%llx", static_cast<unsigned long long>(*v));
            out.push_back(buf);
        } else {
            out.push_back(to_hex(std::get<Bytes>(f->raw_value)));
        }
    }
    return out;
}

} // namespace netedu::exercises
