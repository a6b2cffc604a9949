#include "netedu/newreno.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace netedu::newreno {

TimelineDiff compare(const Timeline& predicted, const Timeline& measured, double tol)
{
    const std::size_t n = predicted.size();
    const std::size_t m = measured.size();
    auto same = [&](std::size_t i, std::size_t j) {
        return predicted[i].kind == measured[j].kind && predicted[i].seg == measured[j].seg;
    };

    // lcs[i][j] = LCS length of predicted[i..] and measured[j..]
    std::vector<std::vector<std::uint32_t>> lcs(n + 1, std::vector<std::uint32_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            lcs[i][j] = same(i, j) ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);

    TimelineDiff diff;
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (same(i, j)) {
            if (std::fabs(predicted[i].t - measured[j].t) > tol)
                diff.mistimed.push_back({predicted[i], measured[j]});
            ++i;
            ++j;
        } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
            diff.missing.push_back(predicted[i++]);
        } else {
            diff.extra.push_back(measured[j++]);
        }
    }
    for (; i < n; ++i) diff.missing.push_back(predicted[i]);
    for (; j < m; ++j) diff.extra.push_back(measured[j]);
    return diff;
}

namespace {

std::string line(const Event& e)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.3f\t%s\t%llu\t%.3f\t%.3f", e.t, to_string(e.kind).data(),
                  static_cast<unsigned long long>(e.seg), e.cwnd_after, e.ssthresh_after);
    return buf;
}

} // namespace

std::string format_timeline(const Timeline& t)
{
    std::string out;
    for (const auto& e : t) out += line(e) + "\n";
    return out;
}

std::string format_diff(const TimelineDiff& d)
{
    std::string out;
    for (const auto& e : d.missing) out += "missing\t" + line(e) + "\n";
    for (const auto& e : d.extra) out += "extra\t" + line(e) + "\n";
    for (const auto& p : d.mistimed) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "\t(measured at %.3f)", p.measured.t);
        out += "mistimed\t" + line(p.predicted) + buf + "\n";
    }
    return out;
}

} // namespace netedu::newreno
