#pragma once

#include "netedu/error.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace netedu::peerreview {

using ProjectId = std::string;
using StudentId = std::string;

struct Roster {
    std::vector<ProjectId> projects;
    std::map<ProjectId, std::set<StudentId>> authors;

    /// Students in id order.
    std::vector<StudentId> students() const;
    /// Project the student authors.
    const ProjectId& project_of(const StudentId& s) const;
    /// Every student authors exactly one project; every project has an author.
    void validate() const;
};

enum class Strategy { Balanced, Choice };

struct Allocation {
    Strategy strategy = Strategy::Balanced;
    std::uint64_t seed = 0;
    /// Balanced: the two projects to review. Choice: the candidate list.
    std::map<StudentId, std::vector<ProjectId>> assigned;
    /// Choice strategy only: the two projects each student picked.
    std::map<StudentId, std::vector<ProjectId>> chosen;
};

class Infeasible : public Error {
public:
    using Error::Error;
};

class InvalidChoice : public Error {
public:
    using Error::Error;
};

/// Two reviews per student. Projects are placed on a seeded random cycle;
/// the authors of the project at position i review the projects at
/// i + s1 and i + s2 (mod N) for distinct nonzero shifts s1, s2. Shift pairs
/// that make two projects review each other are redrawn when N >= 5. Every
/// project is therefore reviewed by the authors of exactly two other projects.
Allocation allocate_balanced(const Roster& roster, std::uint64_t seed);

/// min(k, N-1) distinct foreign candidates per student.
Allocation allocate_choice(const Roster& roster, std::uint64_t seed, std::size_t k = 5);

Allocation record_choice(Allocation allocation, const Roster& roster, const StudentId& student,
                         const std::vector<ProjectId>& chosen);

/// Reviews per project: balanced assignments, or recorded choices for the
/// choice strategy. Projects nobody reviews are listed with 0.
std::map<ProjectId, std::size_t> coverage_report(const Allocation& allocation, const Roster& roster);
std::vector<ProjectId> uncovered(const std::map<ProjectId, std::size_t>& coverage);

} // namespace netedu::peerreview
