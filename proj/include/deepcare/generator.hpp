#pragma once

// Synthetic cohort generator with planted long-range structure. It stands in
// for private hospital data and plants exactly the phenomena the model family
// claims to exploit:
//
//   * a chronic onset code that permanently raises unplanned-admission hazard
//     and spawns a complication code whose probability grows with elapsed
//     time since onset (timescale chronic_ramp_days);
//   * acute codes whose hazard boost decays exponentially with the configured
//     half-life, and which open a "flare" phase of short gaps and a flare
//     marker code;
//   * interventions that multiply the next admission's hazard by
//     intervention_reduction per code and shorten flares;
//   * per-patient persistent condition codes that recur across admissions.
//
// Admission method draws are pure Bernoulli outputs of the hazard trace and
// feed nothing back into codes, gaps or interventions. The label probability
// therefore has the closed form 1 - prod_j (1 - pi_j) over the follow-up
// window, which the tests use as a Monte-Carlo oracle.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "deepcare/data.hpp"
#include "deepcare/linalg.hpp"

namespace deepcare {

struct GeneratorConfig {
    std::size_t n_patients = 1000;
    std::size_t n_diag_codes = 60;    // >= n_acute_codes + 3 special + 1 background
    std::size_t n_interv_codes = 15;  // split into acute / chronic / other pools
    std::size_t n_acute_codes = 5;

    double mean_admissions = 6.0;  // truncated-geometric mean, minimum 2
    std::size_t max_admissions = 40;

    // Inter-admission gaps in days, log-normal; flares use the short regime.
    double gap_log_mu = std::log(90.0);
    double gap_log_sigma = 1.0;
    double flare_gap_log_mu = std::log(12.0);
    double flare_gap_log_sigma = 0.5;

    // Unplanned-admission hazard. pi_t = 1 - exp(-h_t) with
    // h_t = base_hazard * (1 + chronic_boost * active)
    //                   * prod_acutes (1 + acute_boost * 2^(-age/half_life))
    //                   * intervention_reduction^(codes at t-1).
    double base_hazard = 0.35;
    double chronic_boost = 3.0;
    double acute_boost = 4.0;
    double acute_half_life_days = 120.0;
    double intervention_reduction = 0.55;

    double chronic_prevalence = 0.5;
    double chronic_onset_prob = 0.18;
    double chronic_ramp_days = 540.0;
    double complication_max_prob = 0.8;

    double acute_rate = 0.3;
    double flare_code_prob = 0.75;
    double flare_persist = 0.6;  // per-step continuation; halved once treated

    double treat_prob = 0.7;

    std::size_t n_persistent = 3;
    double persistent_rate = 0.5;
    double noise_rate = 0.8;  // expected background codes per admission

    double label_horizon_months = 12.0;
    std::uint64_t seed = 1;
};

inline void validate_config(const GeneratorConfig& c) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw config_error(std::string("generator: ") + name + " must be positive");
    };
    if (c.n_patients == 0) throw config_error("generator: n_patients must be positive");
    if (c.n_diag_codes < c.n_acute_codes + 4)
        throw config_error("generator: n_diag_codes too small for the code pools");
    if (c.n_interv_codes < 3) throw config_error("generator: need at least 3 intervention codes");
    if (c.mean_admissions < 2.0) throw config_error("generator: mean_admissions must be >= 2");
    positive(c.base_hazard, "base_hazard");
    positive(c.acute_half_life_days, "acute_half_life_days");
    positive(c.chronic_ramp_days, "chronic_ramp_days");
    positive(c.label_horizon_months, "label_horizon_months");
    positive(c.gap_log_sigma, "gap_log_sigma");
    if (c.chronic_boost < 0.0 || c.acute_boost < 0.0)
        throw config_error("generator: hazard boosts must be >= 0");
    if (c.intervention_reduction <= 0.0 || c.intervention_reduction > 1.0)
        throw config_error("generator: intervention_reduction must be in (0,1]");
    if (c.n_persistent == 0) throw config_error("generator: n_persistent must be positive");
}

// Code layout inside the generator's own (sorted) vocabulary.
struct GeneratorCodebook {
    Vocabulary vocab;
    std::size_t chronic = 0;       // onset marker, emitted once
    std::size_t complication = 0;  // grows with time since onset
    std::size_t flare = 0;         // short-gap phase marker
    std::vector<std::size_t> acute;
    std::vector<std::size_t> background;
    std::vector<std::size_t> treat_acute;
    std::vector<std::size_t> treat_chronic;
    std::vector<std::size_t> treat_other;
};

inline GeneratorCodebook make_codebook(const GeneratorConfig& cfg) {
    GeneratorCodebook cb;
    auto pad3 = [](std::size_t i) {
        std::string s = std::to_string(i);
        while (s.size() < 3) s = "0" + s;
        return s;
    };
    std::vector<std::string> diag;
    diag.push_back("C00");  // chronic onset
    diag.push_back("C01");  // complication
    diag.push_back("F00");  // flare marker
    for (std::size_t i = 0; i < cfg.n_acute_codes; ++i) diag.push_back("A" + pad3(i));
    const std::size_t n_background = cfg.n_diag_codes - 3 - cfg.n_acute_codes;
    for (std::size_t i = 0; i < n_background; ++i) diag.push_back("B" + pad3(i));

    std::vector<std::string> interv;
    const std::size_t n_ta = std::max<std::size_t>(1, cfg.n_interv_codes / 3);
    const std::size_t n_tc = std::max<std::size_t>(1, cfg.n_interv_codes / 3);
    const std::size_t n_to = cfg.n_interv_codes - n_ta - n_tc;
    for (std::size_t i = 0; i < n_ta; ++i) interv.push_back("TA" + pad3(i));
    for (std::size_t i = 0; i < n_tc; ++i) interv.push_back("TC" + pad3(i));
    for (std::size_t i = 0; i < n_to; ++i) interv.push_back("TO" + pad3(i));

    std::sort(diag.begin(), diag.end());
    std::sort(interv.begin(), interv.end());
    cb.vocab.diagnosis_codes = diag;
    cb.vocab.intervention_codes = interv;

    cb.chronic = cb.vocab.diag_index("C00");
    cb.complication = cb.vocab.diag_index("C01");
    cb.flare = cb.vocab.diag_index("F00");
    for (std::size_t i = 0; i < cfg.n_acute_codes; ++i)
        cb.acute.push_back(cb.vocab.diag_index("A" + pad3(i)));
    for (std::size_t i = 0; i < n_background; ++i)
        cb.background.push_back(cb.vocab.diag_index("B" + pad3(i)));
    for (std::size_t i = 0; i < n_ta; ++i)
        cb.treat_acute.push_back(cb.vocab.interv_index("TA" + pad3(i)));
    for (std::size_t i = 0; i < n_tc; ++i)
        cb.treat_chronic.push_back(cb.vocab.interv_index("TC" + pad3(i)));
    for (std::size_t i = 0; i < n_to; ++i)
        cb.treat_other.push_back(cb.vocab.interv_index("TO" + pad3(i)));
    return cb;
}

struct GeneratedPatient {
    PatientRecord record;
    Vec unplanned_prob;          // pi_t per admission (the hazard trace)
    double analytic_label_prob;  // 1 - prod over follow-up window of (1 - pi_t); -1 if unlabeled
};

namespace detail {

struct AcuteEvent {
    double time_days;
};

inline double hazard_at(const GeneratorConfig& cfg, double t_now, bool chronic_active,
                        const std::vector<AcuteEvent>& acutes, std::size_t prev_interv_count) {
    double h = cfg.base_hazard;
    if (chronic_active) h *= 1.0 + cfg.chronic_boost;
    for (const auto& ev : acutes) {
        const double age = t_now - ev.time_days;
        if (age <= 0.0) continue;
        h *= 1.0 + cfg.acute_boost * std::exp2(-age / cfg.acute_half_life_days);
    }
    for (std::size_t i = 0; i < prev_interv_count; ++i) h *= cfg.intervention_reduction;
    return h;
}

}  // namespace detail

inline GeneratedPatient generate_patient(const GeneratorConfig& cfg, const GeneratorCodebook& cb,
                                         std::size_t patient_index, Rng& rng) {
    GeneratedPatient gp;
    gp.record.patient_id = [&] {
        std::string s = std::to_string(patient_index);
        while (s.size() < 6) s = "0" + s;
        return "p" + s;
    }();

    const double p_extra = 1.0 / (cfg.mean_admissions - 1.0);
    std::size_t n_adm = 2 + static_cast<std::size_t>(rng.geometric(p_extra));
    n_adm = std::min(n_adm, cfg.max_admissions);

    // Per-patient latent state.
    std::vector<std::size_t> persistent;
    {
        std::vector<std::size_t> pool = cb.background;
        rng.shuffle(pool);
        for (std::size_t i = 0; i < std::min(cfg.n_persistent, pool.size()); ++i)
            persistent.push_back(pool[i]);
    }
    const bool chronic_prone = rng.bernoulli(cfg.chronic_prevalence);
    bool chronic_onset = false;
    double onset_time = 0.0;
    bool flare_active = false;
    bool flare_treated = false;
    std::vector<detail::AcuteEvent> acutes;

    double t_now = 0.0;
    std::size_t prev_interv_count = 0;
    for (std::size_t t = 0; t < n_adm; ++t) {
        if (t > 0) {
            const double gap = flare_active
                                   ? rng.lognormal(cfg.flare_gap_log_mu, cfg.flare_gap_log_sigma)
                                   : rng.lognormal(cfg.gap_log_mu, cfg.gap_log_sigma);
            t_now += gap;
            if (flare_active) {
                double persist = cfg.flare_persist * (flare_treated ? 0.5 : 1.0);
                if (!rng.bernoulli(persist)) {
                    flare_active = false;
                    flare_treated = false;
                }
            }
        }

        CodedAdmission adm;
        adm.time_days = t_now;

        std::vector<std::size_t> codes;
        bool acute_here = false;
        // Chronic onset fires once, then complications emerge over time.
        if (chronic_prone && !chronic_onset && rng.bernoulli(cfg.chronic_onset_prob)) {
            chronic_onset = true;
            onset_time = t_now;
            codes.push_back(cb.chronic);
        } else if (chronic_onset && t_now > onset_time) {
            const double elapsed = t_now - onset_time;
            const double pc =
                cfg.complication_max_prob * (1.0 - std::exp2(-elapsed / cfg.chronic_ramp_days));
            if (rng.bernoulli(pc)) codes.push_back(cb.complication);
        }
        if (rng.bernoulli(cfg.acute_rate)) {
            acute_here = true;
            codes.push_back(cb.acute[rng.below(cb.acute.size())]);
            acutes.push_back({t_now});
            flare_active = true;
            flare_treated = false;
        }
        if (flare_active && !acute_here && rng.bernoulli(cfg.flare_code_prob))
            codes.push_back(cb.flare);
        for (std::size_t q : persistent)
            if (rng.bernoulli(cfg.persistent_rate)) codes.push_back(q);
        // Background noise, expected noise_rate codes.
        {
            double expect = cfg.noise_rate;
            while (expect > 0.0) {
                const double p = std::min(1.0, expect);
                if (rng.bernoulli(p)) codes.push_back(cb.background[rng.below(cb.background.size())]);
                expect -= 1.0;
            }
        }
        if (codes.empty()) codes.push_back(persistent[rng.below(persistent.size())]);
        // Dedupe in priority order (signal codes were pushed first), cap at 5
        // admission codes, then sort for the record invariant.
        {
            std::vector<std::size_t> unique_codes;
            for (std::size_t c : codes)
                if (std::find(unique_codes.begin(), unique_codes.end(), c) == unique_codes.end())
                    unique_codes.push_back(c);
            if (unique_codes.size() > 5) unique_codes.resize(5);
            std::sort(unique_codes.begin(), unique_codes.end());
            adm.diagnoses = unique_codes;
        }

        // Interventions; acute treatment damps the flare and next hazard.
        std::vector<std::size_t> interv;
        if (acute_here && rng.bernoulli(cfg.treat_prob)) {
            interv.push_back(cb.treat_acute[rng.below(cb.treat_acute.size())]);
            flare_treated = true;
        }
        if (chronic_onset && rng.bernoulli(cfg.treat_prob * 0.5))
            interv.push_back(cb.treat_chronic[rng.below(cb.treat_chronic.size())]);
        if (!cb.treat_other.empty() && rng.bernoulli(0.15))
            interv.push_back(cb.treat_other[rng.below(cb.treat_other.size())]);
        std::sort(interv.begin(), interv.end());
        interv.erase(std::unique(interv.begin(), interv.end()), interv.end());
        adm.interventions = interv;

        // Method: Bernoulli output of the hazard trace; no feedback.
        const bool chronic_active_before = chronic_onset && onset_time < t_now;
        std::vector<detail::AcuteEvent> prior_acutes;
        for (const auto& ev : acutes)
            if (ev.time_days < t_now) prior_acutes.push_back(ev);
        const double h =
            detail::hazard_at(cfg, t_now, chronic_active_before, prior_acutes, prev_interv_count);
        const double pi = 1.0 - std::exp(-h);
        gp.unplanned_prob.push_back(pi);
        adm.method = rng.bernoulli(pi) ? AdmissionMethod::Unplanned : AdmissionMethod::Planned;

        prev_interv_count = adm.interventions.size();
        gp.record.admissions.push_back(std::move(adm));
    }

    // Prediction point + label; unlabeled when no point has a full horizon
    // of follow-up.
    gp.analytic_label_prob = -1.0;
    auto eligible = eligible_prediction_points(gp.record, cfg.label_horizon_months);
    if (!eligible.empty()) {
        const std::size_t pp = eligible[static_cast<std::size_t>(rng.below(eligible.size()))];
        gp.record.prediction_point = pp;
        gp.record.risk_label = label_readmission(gp.record, cfg.label_horizon_months);
        const double t0 = gp.record.admissions[pp].time_days;
        const double t1 = t0 + months_to_days(cfg.label_horizon_months);
        double none = 1.0;
        for (std::size_t j = pp + 1; j < gp.record.admissions.size(); ++j) {
            const double tj = gp.record.admissions[j].time_days;
            if (tj > t0 && tj <= t1) none *= 1.0 - gp.unplanned_prob[j];
        }
        gp.analytic_label_prob = 1.0 - none;
    }
    return gp;
}

inline std::vector<GeneratedPatient> generate_cohort_traced(const GeneratorConfig& cfg) {
    validate_config(cfg);
    const GeneratorCodebook cb = make_codebook(cfg);
    std::vector<GeneratedPatient> out;
    out.reserve(cfg.n_patients);
    for (std::size_t i = 0; i < cfg.n_patients; ++i) {
        // Independent per-patient substream; patients can be generated in any
        // order (or in parallel) with identical output.
        Rng rng(Rng::mix(cfg.seed, 0xC0480C7ULL, i));
        out.push_back(generate_patient(cfg, cb, i, rng));
    }
    return out;
}

inline Dataset generate_cohort(const GeneratorConfig& cfg) {
    Dataset ds;
    ds.vocab = make_codebook(cfg).vocab;
    for (auto& gp : generate_cohort_traced(cfg)) ds.records.push_back(std::move(gp.record));
    return ds;
}

}  // namespace deepcare
