#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ctxguard/common.hpp"

namespace ctxguard {

// Mann-Whitney AUROC: probability a random positive outranks a random
// negative, ties credited 1/2. Rank-sum, O(n log n); exactly equal to
// pairwise counting.
inline double auroc(const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty() || neg.empty()) throw NumericError("auroc: empty score list");
    struct Entry { double score; bool is_pos; };
    std::vector<Entry> all;
    all.reserve(pos.size() + neg.size());
    for (double s : pos) all.push_back({s, true});
    for (double s : neg) all.push_back({s, false});
    std::sort(all.begin(), all.end(),
              [](const Entry& a, const Entry& b) { return a.score < b.score; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        // ranks i+1 .. j (1-based); tied entries share the average rank
        const double avg_rank = 0.5 * (double(i + 1) + double(j));
        for (std::size_t t = i; t < j; ++t) {
            if (all[t].is_pos) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double P = double(pos.size()), N = double(neg.size());
    const double U = rank_sum_pos - P * (P + 1.0) / 2.0;
    return U / (P * N);
}

// Minimal FPR over thresholds achieving TPR >= target. A score is predicted
// positive iff score > threshold; candidate thresholds are midpoints between
// adjacent distinct scores plus sentinels (no interpolation).
inline double fpr_at_tpr(const std::vector<double>& pos,
                         const std::vector<double>& neg, double target_tpr) {
    if (pos.empty() || neg.empty()) throw NumericError("fpr_at_tpr: empty score list");
    if (target_tpr <= 0.0 || target_tpr > 1.0)
        throw NumericError("fpr_at_tpr: target must be in (0, 1]");

    std::vector<double> sp = pos, sn = neg;
    std::sort(sp.begin(), sp.end());
    std::sort(sn.begin(), sn.end());

    std::vector<double> all;
    all.reserve(sp.size() + sn.size());
    all.insert(all.end(), sp.begin(), sp.end());
    all.insert(all.end(), sn.begin(), sn.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    std::vector<double> thresholds;
    thresholds.push_back(all.front() - 1.0);  // everything flagged
    for (std::size_t i = 0; i + 1 < all.size(); ++i)
        thresholds.push_back(0.5 * (all[i] + all[i + 1]));
    thresholds.push_back(all.back() + 1.0);  // nothing flagged

    double best = 1.0;
    bool attained = false;
    for (double t : thresholds) {
        const auto npos = sp.end() - std::upper_bound(sp.begin(), sp.end(), t);
        const double tpr = double(npos) / double(sp.size());
        if (tpr + 1e-12 < target_tpr) continue;
        const auto nneg = sn.end() - std::upper_bound(sn.begin(), sn.end(), t);
        const double fpr = double(nneg) / double(sn.size());
        if (!attained || fpr < best) { best = fpr; attained = true; }
    }
    return attained ? best : 1.0;
}

// Nearest-rank percentile: the ceil(p/100 * n)-th order statistic.
inline double nearest_rank_percentile(std::vector<double> values, double percentile) {
    if (values.empty()) throw NumericError("percentile of empty list");
    if (percentile <= 0.0 || percentile > 100.0)
        throw NumericError("percentile must be in (0, 100]");
    std::sort(values.begin(), values.end());
    const std::size_t rank = static_cast<std::size_t>(
        std::ceil(percentile / 100.0 * double(values.size())));
    return values[std::max<std::size_t>(rank, 1) - 1];
}

}  // namespace ctxguard
