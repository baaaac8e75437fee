#pragma once

// Record model, vocabulary, JSONL ingestion, dataset splitting and
// prediction-point / label machinery.
//
// Wire format (one patient per line, UTF-8, LF):
//   {"patient_id":"p001","admissions":[{"time_days":0.0,"method":1,
//    "diagnoses":["E11","I10"],"interventions":["1910"]},...],
//    "risk_label":1,"prediction_point":3}
// method: 1 = unplanned (emergency), 2 = planned. Unknown keys are rejected.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deepcare/linalg.hpp"

namespace deepcare {

// 1 month = 365.25/12 days; used for every month<->day conversion.
inline constexpr double kDaysPerMonth = 30.4375;

inline double months_to_days(double months) { return months * kDaysPerMonth; }
inline double days_to_months(double days) { return days / kDaysPerMonth; }

enum class AdmissionMethod : int { Unplanned = 1, Planned = 2 };

struct Vocabulary {
    std::vector<std::string> diagnosis_codes;     // sorted, unique
    std::vector<std::string> intervention_codes;  // sorted, unique

    std::size_t n_diag() const { return diagnosis_codes.size(); }
    std::size_t n_interv() const { return intervention_codes.size(); }

    std::size_t diag_index(const std::string& tok) const {
        auto it = std::lower_bound(diagnosis_codes.begin(), diagnosis_codes.end(), tok);
        if (it == diagnosis_codes.end() || *it != tok)
            throw parse_error("unknown diagnosis code '" + tok + "'");
        return static_cast<std::size_t>(it - diagnosis_codes.begin());
    }
    std::size_t interv_index(const std::string& tok) const {
        auto it = std::lower_bound(intervention_codes.begin(), intervention_codes.end(), tok);
        if (it == intervention_codes.end() || *it != tok)
            throw parse_error("unknown intervention code '" + tok + "'");
        return static_cast<std::size_t>(it - intervention_codes.begin());
    }
};

struct CodedAdmission {
    double time_days = 0.0;  // day offset from the patient's first admission
    AdmissionMethod method = AdmissionMethod::Unplanned;
    std::vector<std::size_t> diagnoses;      // sorted unique indices, non-empty
    std::vector<std::size_t> interventions;  // sorted unique indices, may be empty
};

struct PatientRecord {
    std::string patient_id;
    std::vector<CodedAdmission> admissions;  // time-ordered, length >= 2
    std::optional<int> risk_label;           // 0/1
    std::optional<std::size_t> prediction_point;  // index into admissions
};

inline void validate_record(const PatientRecord& r, const Vocabulary& vocab) {
    if (r.admissions.size() < 2)
        throw parse_error("patient " + r.patient_id + ": fewer than 2 admissions");
    double prev_t = -1.0;
    for (const auto& adm : r.admissions) {
        if (!(adm.time_days >= 0.0))
            throw parse_error("patient " + r.patient_id + ": negative time_days");
        if (adm.time_days < prev_t)
            throw parse_error("patient " + r.patient_id + ": admissions not sorted by time");
        prev_t = adm.time_days;
        if (adm.diagnoses.empty())
            throw parse_error("patient " + r.patient_id + ": admission with empty diagnoses");
        for (std::size_t d : adm.diagnoses)
            if (d >= vocab.n_diag())
                throw parse_error("patient " + r.patient_id + ": diagnosis index out of range");
        for (std::size_t s : adm.interventions)
            if (s >= vocab.n_interv())
                throw parse_error("patient " + r.patient_id + ": intervention index out of range");
        if (adm.method != AdmissionMethod::Unplanned && adm.method != AdmissionMethod::Planned)
            throw parse_error("patient " + r.patient_id + ": method must be 1 or 2");
    }
    if (r.prediction_point && *r.prediction_point >= r.admissions.size())
        throw parse_error("patient " + r.patient_id + ": prediction_point out of range");
    if (r.risk_label && *r.risk_label != 0 && *r.risk_label != 1)
        throw parse_error("patient " + r.patient_id + ": risk_label must be 0 or 1");
}

namespace detail {

struct RawAdmission {
    double time_days;
    int method;
    std::vector<std::string> diagnoses;
    std::vector<std::string> interventions;
};

struct RawRecord {
    std::string patient_id;
    std::vector<RawAdmission> admissions;
    std::optional<int> risk_label;
    std::optional<std::size_t> prediction_point;
};

inline void reject_unknown_keys(const nlohmann::json& obj,
                                std::initializer_list<const char*> allowed,
                                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw parse_error(where + ": unknown key '" + it.key() + "'");
    }
}

inline RawRecord parse_record_json(const std::string& line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string where = "line " + std::to_string(line_no);
    if (!j.is_object()) throw parse_error(where + ": expected an object");
    reject_unknown_keys(j, {"patient_id", "admissions", "risk_label", "prediction_point"}, where);
    RawRecord rec;
    try {
        rec.patient_id = j.at("patient_id").get<std::string>();
        for (const auto& ja : j.at("admissions")) {
            reject_unknown_keys(ja, {"time_days", "method", "diagnoses", "interventions"},
                                where + " patient " + rec.patient_id);
            RawAdmission adm;
            adm.time_days = ja.at("time_days").get<double>();
            adm.method = ja.at("method").get<int>();
            adm.diagnoses = ja.at("diagnoses").get<std::vector<std::string>>();
            if (ja.contains("interventions"))
                adm.interventions = ja.at("interventions").get<std::vector<std::string>>();
            rec.admissions.push_back(std::move(adm));
        }
        if (j.contains("risk_label")) rec.risk_label = j.at("risk_label").get<int>();
        if (j.contains("prediction_point"))
            rec.prediction_point = j.at("prediction_point").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(where + ": " + e.what());
    }
    return rec;
}

}  // namespace detail

struct Dataset {
    std::vector<PatientRecord> records;
    Vocabulary vocab;
};

// Two passes: collect the code vocabulary (sorted unique), then resolve
// indices and validate every record invariant.
inline Dataset load_jsonl_stream(std::istream& in) {
    std::vector<detail::RawRecord> raw;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        raw.push_back(detail::parse_record_json(line, line_no));
    }

    Dataset ds;
    for (const auto& r : raw) {
        for (const auto& a : r.admissions) {
            for (const auto& d : a.diagnoses) ds.vocab.diagnosis_codes.push_back(d);
            for (const auto& s : a.interventions) ds.vocab.intervention_codes.push_back(s);
        }
    }
    auto sort_unique = [](std::vector<std::string>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    sort_unique(ds.vocab.diagnosis_codes);
    sort_unique(ds.vocab.intervention_codes);

    for (const auto& r : raw) {
        PatientRecord rec;
        rec.patient_id = r.patient_id;
        rec.risk_label = r.risk_label;
        rec.prediction_point = r.prediction_point;
        for (const auto& a : r.admissions) {
            CodedAdmission adm;
            adm.time_days = a.time_days;
            adm.method = static_cast<AdmissionMethod>(a.method);
            for (const auto& d : a.diagnoses) adm.diagnoses.push_back(ds.vocab.diag_index(d));
            for (const auto& s : a.interventions)
                adm.interventions.push_back(ds.vocab.interv_index(s));
            auto dedupe = [](std::vector<std::size_t>& v) {
                std::sort(v.begin(), v.end());
                v.erase(std::unique(v.begin(), v.end()), v.end());
            };
            dedupe(adm.diagnoses);
            dedupe(adm.interventions);
            rec.admissions.push_back(std::move(adm));
        }
        validate_record(rec, ds.vocab);
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

inline Dataset load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");
    return load_jsonl_stream(in);
}

inline std::string record_to_json(const PatientRecord& r, const Vocabulary& vocab) {
    nlohmann::json j;
    j["patient_id"] = r.patient_id;
    nlohmann::json adms = nlohmann::json::array();
    for (const auto& a : r.admissions) {
        nlohmann::json ja;
        ja["time_days"] = a.time_days;
        ja["method"] = static_cast<int>(a.method);
        std::vector<std::string> diag, interv;
        for (std::size_t d : a.diagnoses) diag.push_back(vocab.diagnosis_codes[d]);
        for (std::size_t s : a.interventions) interv.push_back(vocab.intervention_codes[s]);
        ja["diagnoses"] = diag;
        ja["interventions"] = interv;
        adms.push_back(std::move(ja));
    }
    j["admissions"] = std::move(adms);
    if (r.risk_label) j["risk_label"] = *r.risk_label;
    if (r.prediction_point) j["prediction_point"] = *r.prediction_point;
    return j.dump();
}

inline void save_jsonl(const std::vector<PatientRecord>& records, const Vocabulary& vocab,
                       std::ostream& out) {
    for (const auto& r : records) out << record_to_json(r, vocab) << "\n";
}

inline void save_jsonl(const std::vector<PatientRecord>& records, const Vocabulary& vocab,
                       const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write '" + path + "'");
    save_jsonl(records, vocab, out);
}

struct Split {
    std::vector<PatientRecord> train, valid, test;
};

// Shuffled 2/3, 1/6, 1/6 partition. Sizes: train = ceil(2n/3), the remainder
// halves with an odd extra record going to valid.
inline Split split_dataset(std::vector<PatientRecord> records, std::uint64_t seed) {
    const std::size_t n = records.size();
    if (n < 6) throw config_error("split: need at least 6 records, got " + std::to_string(n));
    Rng rng(Rng::mix(seed, 0x51A9B7C3ULL));
    rng.shuffle(records);
    const std::size_t n_train = (2 * n + 2) / 3;  // ceil(2n/3)
    const std::size_t rem = n - n_train;
    const std::size_t n_valid = (rem + 1) / 2;
    Split s;
    s.train.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.valid.assign(records.begin() + static_cast<std::ptrdiff_t>(n_train),
                   records.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
    s.test.assign(records.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), records.end());
    return s;
}

// A prediction point is eligible when a full label horizon of follow-up fits
// inside the recorded timeline; the final admission therefore never
// qualifies, so every chosen point leaves at least one admission of history
// and at least one follow-up admission.
inline std::vector<std::size_t> eligible_prediction_points(const PatientRecord& r,
                                                           double horizon_months) {
    const double horizon_days = months_to_days(horizon_months);
    const double last_t = r.admissions.back().time_days;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < r.admissions.size(); ++i) {
        if (r.admissions[i].time_days + horizon_days <= last_t) out.push_back(i);
    }
    return out;
}

struct PredictionPointStats {
    std::size_t kept = 0;
    std::size_t excluded = 0;  // records with no eligible discharge
};

inline PredictionPointStats choose_prediction_points(std::vector<PatientRecord>& records,
                                                     double horizon_months, Rng& rng) {
    PredictionPointStats stats;
    std::vector<PatientRecord> kept;
    kept.reserve(records.size());
    for (auto& r : records) {
        auto eligible = eligible_prediction_points(r, horizon_months);
        if (eligible.empty()) {
            ++stats.excluded;
            continue;
        }
        r.prediction_point = eligible[static_cast<std::size_t>(rng.below(eligible.size()))];
        kept.push_back(std::move(r));
        ++stats.kept;
    }
    records = std::move(kept);
    return stats;
}

// 1 iff at least `min_count` unplanned admissions fall in
// (t_pred, t_pred + X months], right end closed.
inline int count_unplanned_in_window(const PatientRecord& r, std::size_t pred_point,
                                     double horizon_months) {
    const double t0 = r.admissions[pred_point].time_days;
    const double t1 = t0 + months_to_days(horizon_months);
    int count = 0;
    for (std::size_t i = pred_point + 1; i < r.admissions.size(); ++i) {
        const auto& adm = r.admissions[i];
        if (adm.time_days > t0 && adm.time_days <= t1 &&
            adm.method == AdmissionMethod::Unplanned)
            ++count;
    }
    return count;
}

inline int label_readmission(const PatientRecord& r, double horizon_months) {
    if (!r.prediction_point) throw config_error("label_readmission: prediction_point not set");
    return count_unplanned_in_window(r, *r.prediction_point, horizon_months) >= 1 ? 1 : 0;
}

inline int label_high_risk(const PatientRecord& r, double horizon_months) {
    if (!r.prediction_point) throw config_error("label_high_risk: prediction_point not set");
    return count_unplanned_in_window(r, *r.prediction_point, horizon_months) >= 3 ? 1 : 0;
}

}  // namespace deepcare
