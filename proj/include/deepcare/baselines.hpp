#pragma once

// Memoryless Markov baseline: diagnosis-to-diagnosis transition counts with
// Laplace smoothing; next-code scores average the transition rows of the
// codes present in the current admission.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "deepcare/data.hpp"
#include "deepcare/linalg.hpp"

namespace deepcare {

struct MarkovModel {
    std::size_t n_codes = 0;
    std::vector<std::uint64_t> counts;  // row-major |D| x |D| transition counts
    std::vector<std::uint64_t> row_totals;
    double alpha = 0.1;

    std::uint64_t count(std::size_t from, std::size_t to) const {
        return counts[from * n_codes + to];
    }

    // P(to | from) with add-alpha smoothing; an unseen source row is uniform
    // when alpha > 0.
    double transition_prob(std::size_t from, std::size_t to) const {
        const double denom =
            static_cast<double>(row_totals[from]) + alpha * static_cast<double>(n_codes);
        if (denom == 0.0) return 1.0 / static_cast<double>(n_codes);
        return (static_cast<double>(count(from, to)) + alpha) / denom;
    }
};

// Every (code at t-1) x (code at t) pair of consecutive admissions increments
// one count; aggregation commutes across patients.
inline MarkovModel fit_markov(const std::vector<PatientRecord>& train_set, std::size_t n_codes,
                              double alpha = 0.1) {
    if (alpha < 0.0) throw config_error("fit_markov: alpha must be >= 0");
    if (train_set.empty()) throw config_error("fit_markov: empty training set");
    MarkovModel m;
    m.n_codes = n_codes;
    m.alpha = alpha;
    m.counts.assign(n_codes * n_codes, 0);
    m.row_totals.assign(n_codes, 0);
    for (const auto& rec : train_set) {
        for (std::size_t t = 0; t + 1 < rec.admissions.size(); ++t) {
            for (std::size_t from : rec.admissions[t].diagnoses) {
                for (std::size_t to : rec.admissions[t + 1].diagnoses) {
                    ++m.counts[from * n_codes + to];
                    ++m.row_totals[from];
                }
            }
        }
    }
    return m;
}

// Q(d; t) = (1/|D_t|) sum_{j in D_t} P(d | j); a convex combination of
// stochastic rows, so itself a distribution.
inline Vec markov_scores(const MarkovModel& m, const std::vector<std::size_t>& current) {
    if (current.empty()) throw config_error("markov_scores: empty diagnosis set");
    Vec q(m.n_codes, 0.0);
    const double w = 1.0 / static_cast<double>(current.size());
    for (std::size_t from : current) {
        if (from >= m.n_codes) throw shape_error("markov_scores: code index out of range");
        for (std::size_t to = 0; to < m.n_codes; ++to)
            q[to] += w * m.transition_prob(from, to);
    }
    return q;
}

// Top-k by score, ties broken by ascending vocabulary index.
inline std::vector<std::size_t> top_k_indices(const Vec& scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    idx.resize(std::min(k, idx.size()));
    return idx;
}

inline std::vector<std::size_t> predict_next(const MarkovModel& m,
                                             const std::vector<std::size_t>& current,
                                             std::size_t k) {
    return top_k_indices(markov_scores(m, current), k);
}

}  // namespace deepcare
