#pragma once

// Canonical gradient-verification instance shared by the gradcheck CLI
// subcommand, the unit tests and the acceptance suite: a fixed-seed 3-patient
// dataset (4-6 admissions each) and a small M=4, K=5 model per configuration.
//
// The instance is conditioned so that every influential parameter has a
// gradient safely above the central-difference noise floor: moderate gap
// spread (so the cubic time features neither vanish nor saturate the forget
// gate), init scale 0.8, a zero forget bias and a small parametric-time
// matrix. Saturated gates have true sensitivities below what h = 1e-5
// differences can resolve, which would measure noise rather than gradients.

#include <string>
#include <vector>

#include "deepcare/generator.hpp"
#include "deepcare/gradients.hpp"

namespace deepcare {

inline Dataset gradcheck_dataset() {
    GeneratorConfig gcfg;
    gcfg.n_patients = 12;
    gcfg.n_diag_codes = 10;
    gcfg.n_interv_codes = 6;
    gcfg.n_acute_codes = 2;
    gcfg.mean_admissions = 6.0;
    gcfg.max_admissions = 6;
    gcfg.gap_log_mu = std::log(90.0);
    gcfg.gap_log_sigma = 0.6;
    gcfg.seed = 9;
    Dataset all = generate_cohort(gcfg);
    Dataset ds;
    ds.vocab = all.vocab;
    for (auto& r : all.records) {
        if (ds.records.size() == 3) break;
        if (r.admissions.size() < 5) continue;
        r.prediction_point = r.admissions.size() - 1;
        r.risk_label = ds.records.size() % 2 ? 1 : 0;
        ds.records.push_back(std::move(r));
    }
    return ds;
}

inline Model gradcheck_model(const ModelConfig& cfg, const Vocabulary& vocab) {
    Model m = init_model(cfg, vocab, 7, 0.8);
    if (cfg.cell != CellKind::PlainRnn) {
        m.params.cell.lstm.b_f = Vec(cfg.hidden_dim, 0.0);
        if (!m.params.cell.q_f.empty()) {
            Rng qr(99);
            fill_uniform(m.params.cell.q_f, qr, 0.08);
        }
    }
    return m;
}

struct GradCheckRun {
    std::string config;
    double worst_rel_error;
    std::string worst_tensor;
};

struct StandardGradCheck {
    std::vector<GradCheckRun> runs;
    double worst = 0.0;
    std::string worst_config;
};

// The full sweep: {NoTime, Decay, Parametric} x {max, sum, mean} with
// interventions on, under both the risk and the labeling objective, plus the
// two plain cells.
inline StandardGradCheck run_standard_gradcheck(double h = 1e-5) {
    const Dataset ds = gradcheck_dataset();
    StandardGradCheck out;
    auto one = [&](const ModelConfig& cfg, const std::string& name) {
        Model m = gradcheck_model(cfg, ds.vocab);
        const GradCheckReport rep = grad_check(m, ds.records, nullptr, h);
        out.runs.push_back({name, rep.worst_rel_error, rep.worst_tensor});
        if (rep.worst_rel_error > out.worst) {
            out.worst = rep.worst_rel_error;
            out.worst_config = name;
        }
    };
    const char* tm_names[] = {"none", "decay", "param"};
    const char* pm_names[] = {"max", "sum", "mean"};
    for (int tm = 0; tm < 3; ++tm) {
        for (int pm = 0; pm < 3; ++pm) {
            for (TaskKind task : {TaskKind::Risk, TaskKind::NextDiagnosis}) {
                ModelConfig cfg;
                cfg.cell = CellKind::DeepCare;
                cfg.time_mode = static_cast<TimeMode>(tm);
                cfg.pooling = static_cast<PoolingMode>(pm);
                cfg.task = task;
                cfg.interventions = true;
                cfg.embed_dim = 4;
                cfg.hidden_dim = 5;
                cfg.head_hidden = 4;
                one(cfg, std::string("deepcare/") + tm_names[tm] + "/" + pm_names[pm] +
                             (task == TaskKind::Risk ? "/risk" : "/label"));
            }
        }
    }
    for (CellKind cell : {CellKind::PlainRnn, CellKind::PlainLstm}) {
        for (TaskKind task : {TaskKind::Risk, TaskKind::NextDiagnosis}) {
            ModelConfig cfg;
            cfg.cell = cell;
            cfg.task = task;
            cfg.embed_dim = 4;
            cfg.hidden_dim = 5;
            cfg.head_hidden = 4;
            one(cfg, std::string(cell == CellKind::PlainRnn ? "rnn" : "lstm") +
                         (task == TaskKind::Risk ? "/risk" : "/label"));
        }
    }
    return out;
}

}  // namespace deepcare
