#pragma once

// Task metrics (Precision@K for code ranking, F-score for risk) and the
// drivers that bind models to tasks.

#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "deepcare/baselines.hpp"
#include "deepcare/network.hpp"

namespace deepcare {

inline double precision_at_k(const std::vector<std::size_t>& predicted_ranked,
                             const std::vector<std::size_t>& relevant, std::size_t k) {
    if (k == 0) throw config_error("precision_at_k: k must be >= 1");
    if (predicted_ranked.size() < k)
        throw config_error("precision_at_k: fewer than k predictions");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t r : relevant)
            if (predicted_ranked[i] == r) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// F1 = 2PR/(P+R); degenerate cases (no predicted or no true positives) give 0.
inline double f_score(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw config_error("f_score: prediction/label length mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (predictions[i] == 1 && labels[i] == 1) ++c.tp;
        if (predictions[i] == 1 && labels[i] == 0) ++c.fp;
        if (predictions[i] == 0 && labels[i] == 1) ++c.fn;
        if (predictions[i] == 0 && labels[i] == 0) ++c.tn;
    }
    const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
    if (denom == 0.0) return 0.0;
    return 2.0 * static_cast<double>(c.tp) / denom;
}

struct EvalReport {
    std::string task;
    std::vector<std::size_t> k_list;
    std::vector<double> precision_at;  // aligned with k_list
    std::size_t n_queries = 0;         // (patient, step) pairs for ranking tasks

    std::optional<double> f1;  // risk tasks; empty when undefined
    double precision = 0.0;
    double recall = 0.0;
    ConfusionCounts counts;
    double threshold = 0.5;
    std::size_t n_patients = 0;
    std::string warning;

    // Human-readable table, percentages with one decimal.
    std::string table() const {
        std::ostringstream os;
        os << "task: " << task << "\n";
        os << std::fixed << std::setprecision(1);
        for (std::size_t i = 0; i < k_list.size(); ++i)
            os << "  Precision@" << k_list[i] << ": " << 100.0 * precision_at[i] << " (n="
               << n_queries << ")\n";
        if (!k_list.empty()) return os.str();
        if (f1)
            os << "  F-score: " << 100.0 * *f1 << "  precision: " << 100.0 * precision
               << "  recall: " << 100.0 * recall << "  (threshold " << std::setprecision(2)
               << threshold << ", n=" << n_patients << ")\n";
        else
            os << "  F-score: undefined (" << warning << ")\n";
        return os.str();
    }

    // Machine-readable single-line records: RESULT task=<t> metric=<m> value=<v> count=<n>
    std::string machine_lines() const {
        std::ostringstream os;
        os << std::setprecision(17);
        for (std::size_t i = 0; i < k_list.size(); ++i)
            os << "RESULT task=" << task << " metric=precision_at_" << k_list[i]
               << " value=" << precision_at[i] << " count=" << n_queries << "\n";
        if (k_list.empty()) {
            if (f1)
                os << "RESULT task=" << task << " metric=f_score value=" << *f1
                   << " count=" << n_patients << "\n";
            else
                os << "RESULT task=" << task << " metric=f_score value=nan count=" << n_patients
                   << "\n";
        }
        return os.str();
    }
};

// Scores over the code vocabulary at one admission step.
using StepScorer =
    std::function<Vec(const PatientRecord& record, std::size_t step)>;

inline StepScorer model_scorer(const Model& m) {
    return [&m](const PatientRecord& rec, std::size_t t) { return label_scores(m, rec, t); };
}

inline StepScorer markov_scorer(const MarkovModel& m) {
    return [&m](const PatientRecord& rec, std::size_t t) {
        return markov_scores(m, rec.admissions[t].diagnoses);
    };
}

// Ranks the next admission's diagnoses (or the current admission's
// interventions) at every eligible step; micro-averaged Precision@k over all
// (patient, step) pairs.
inline EvalReport evaluate_progression(const StepScorer& scorer,
                                       const std::vector<PatientRecord>& test_set,
                                       std::vector<std::size_t> k_list = {1, 2, 3},
                                       bool intervention_task = false) {
    EvalReport rep;
    rep.task = intervention_task ? "intervention_recommendation" : "disease_progression";
    rep.k_list = k_list;
    rep.precision_at.assign(k_list.size(), 0.0);
    for (const auto& rec : test_set) {
        const std::size_t n = rec.admissions.size();
        for (std::size_t t = 0; t < n; ++t) {
            const std::vector<std::size_t>* relevant = nullptr;
            if (intervention_task) {
                if (rec.admissions[t].interventions.empty()) continue;
                relevant = &rec.admissions[t].interventions;
            } else {
                if (t + 1 >= n) continue;
                relevant = &rec.admissions[t + 1].diagnoses;
            }
            const Vec scores = scorer(rec, t);
            const auto ranked = top_k_indices(scores, scores.size());
            for (std::size_t i = 0; i < k_list.size(); ++i)
                rep.precision_at[i] += precision_at_k(ranked, *relevant, k_list[i]);
            ++rep.n_queries;
        }
    }
    if (rep.n_queries > 0)
        for (double& v : rep.precision_at) v /= static_cast<double>(rep.n_queries);
    return rep;
}

using RiskScorer = std::function<double(const PatientRecord&)>;

// F-score over test patients with history truncated at the prediction point;
// probability >= threshold counts as a positive call.
inline EvalReport evaluate_risk(const RiskScorer& prob_of,
                                const std::vector<PatientRecord>& test_set,
                                double threshold = 0.5) {
    EvalReport rep;
    rep.task = "risk_prediction";
    rep.threshold = threshold;
    std::vector<int> preds, labels;
    for (const auto& rec : test_set) {
        if (!rec.prediction_point || !rec.risk_label) continue;
        const double p = prob_of(rec);
        preds.push_back(p >= threshold ? 1 : 0);
        labels.push_back(*rec.risk_label);
    }
    rep.n_patients = labels.size();
    bool any_pos = false;
    for (int y : labels) any_pos = any_pos || y == 1;
    if (labels.empty() || !any_pos) {
        rep.warning = labels.empty() ? "no labeled patients in test set"
                                     : "no positive labels in test set";
        return rep;
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (preds[i] == 1 && labels[i] == 1) ++rep.counts.tp;
        if (preds[i] == 1 && labels[i] == 0) ++rep.counts.fp;
        if (preds[i] == 0 && labels[i] == 1) ++rep.counts.fn;
        if (preds[i] == 0 && labels[i] == 0) ++rep.counts.tn;
    }
    rep.f1 = f_score(preds, labels);
    const double tp = static_cast<double>(rep.counts.tp);
    rep.precision = rep.counts.tp + rep.counts.fp == 0
                        ? 0.0
                        : tp / static_cast<double>(rep.counts.tp + rep.counts.fp);
    rep.recall = rep.counts.tp + rep.counts.fn == 0
                     ? 0.0
                     : tp / static_cast<double>(rep.counts.tp + rep.counts.fn);
    return rep;
}

inline EvalReport evaluate_risk(const Model& m, const std::vector<PatientRecord>& test_set,
                                double threshold = 0.5) {
    return evaluate_risk([&m](const PatientRecord& r) { return risk_probability(m, r); },
                         test_set, threshold);
}

}  // namespace deepcare
