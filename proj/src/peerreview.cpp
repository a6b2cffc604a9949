#include "netedu/peerreview.hpp"

#include "netedu/prng.hpp"

#include <algorithm>

namespace netedu::peerreview {

std::vector<StudentId> Roster::students() const
{
    std::set<StudentId> all;
    for (const auto& [project, who] : authors) all.insert(who.begin(), who.end());
    return {all.begin(), all.end()};
}

const ProjectId& Roster::project_of(const StudentId& s) const
{
    for (const auto& [project, who] : authors)
        if (who.count(s)) return project;
    throw Error("student " + s + " authors no project");
}

void Roster::validate() const
{
    std::set<ProjectId> seen;
    for (const auto& p : projects) {
        if (!seen.insert(p).second) throw Error("duplicate project id " + p);
        auto it = authors.find(p);
        if (it == authors.end() || it->second.empty()) throw Error("project " + p + " has no author");
    }
    std::set<StudentId> students;
    for (const auto& [project, who] : authors) {
        if (!seen.count(project)) throw Error("authors listed for unknown project " + project);
        for (const auto& s : who)
            if (!students.insert(s).second) throw Error("student " + s + " authors more than one project");
    }
}

Allocation allocate_balanced(const Roster& roster, std::uint64_t seed)
{
    roster.validate();
    const std::size_t n = roster.projects.size();
    if (n < 3)
        throw Infeasible("balanced allocation needs at least 3 projects, got " + std::to_string(n));

    SplitMix64 rng(seed);
    std::vector<ProjectId> cycle = roster.projects;
    shuffle(cycle, rng);

    std::uint64_t s1, s2;
    for (;;) {
        s1 = 1 + rng.below(n - 1);
        s2 = 1 + rng.below(n - 1);
        if (s1 == s2) continue;
        // i reviews i+s1 and i+s2; a review comes back when 2*s1, 2*s2 or
        // s1+s2 is a multiple of n. Below 5 projects every pair does that.
        const bool mutual = (s1 + s2) % n == 0 || (2 * s1) % n == 0 || (2 * s2) % n == 0;
        if (mutual && n >= 5) continue;
        break;
    }

    Allocation a;
    a.strategy = Strategy::Balanced;
    a.seed = seed;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& first = cycle[(i + s1) % n];
        const auto& second = cycle[(i + s2) % n];
        for (const auto& student : roster.authors.at(cycle[i])) a.assigned[student] = {first, second};
    }
    return a;
}

Allocation allocate_choice(const Roster& roster, std::uint64_t seed, std::size_t k)
{
    roster.validate();
    const std::size_t n = roster.projects.size();
    if (n < 2) throw Infeasible("choice allocation needs at least 2 projects, got " + std::to_string(n));

    SplitMix64 rng(seed);
    Allocation a;
    a.strategy = Strategy::Choice;
    a.seed = seed;
    const std::size_t take = std::min(k, n - 1);
    for (const auto& student : roster.students()) {
        const ProjectId& own = roster.project_of(student);
        std::vector<ProjectId> foreign;
        for (const auto& p : roster.projects)
            if (p != own) foreign.push_back(p);
        // Partial Fisher-Yates: the first `take` slots end up uniform.
        for (std::size_t i = 0; i < take; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.below(foreign.size() - i));
            std::swap(foreign[i], foreign[j]);
        }
        foreign.resize(take);
        a.assigned[student] = std::move(foreign);
    }
    return a;
}

Allocation record_choice(Allocation allocation, const Roster& roster, const StudentId& student,
                         const std::vector<ProjectId>& chosen)
{
    if (allocation.strategy != Strategy::Choice) throw InvalidChoice("allocation does not use the choice strategy");
    auto it = allocation.assigned.find(student);
    if (it == allocation.assigned.end()) throw InvalidChoice("unknown student " + student);
    if (chosen.size() != 2 || chosen[0] == chosen[1])
        throw InvalidChoice("exactly two distinct projects must be chosen");
    const ProjectId& own = roster.project_of(student);
    for (const auto& p : chosen) {
        if (p == own) throw InvalidChoice("student " + student + " cannot review their own project " + p);
        if (std::find(it->second.begin(), it->second.end(), p) == it->second.end())
            throw InvalidChoice("project " + p + " is not among the candidates of " + student);
    }
    allocation.chosen[student] = chosen;
    return allocation;
}

std::map<ProjectId, std::size_t> coverage_report(const Allocation& allocation, const Roster& roster)
{
    std::map<ProjectId, std::size_t> counts;
    for (const auto& p : roster.projects) counts[p] = 0;
    const auto& source = allocation.strategy == Strategy::Balanced ? allocation.assigned : allocation.chosen;
    for (const auto& [student, projects] : source)
        for (const auto& p : projects) ++counts[p];
    return counts;
}

std::vector<ProjectId> uncovered(const std::map<ProjectId, std::size_t>& coverage)
{
    std::vector<ProjectId> out;
    for (const auto& [p, n] : coverage)
        if (n == 0) out.push_back(p);
    return out;
}

} // namespace netedu::peerreview
