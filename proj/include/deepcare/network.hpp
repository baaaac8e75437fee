#pragma once

// Full sequence models: embedding -> recurrent cell (left to right) ->
// multiscale recency pooling -> neural risk head, plus the per-step
// sequence-labeling head and the loss functions. The forward pass records a
// tape of intermediates that the gradients module replays in reverse.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "deepcare/cells.hpp"
#include "deepcare/data.hpp"
#include "deepcare/embedding.hpp"
#include "deepcare/linalg.hpp"

namespace deepcare {

enum class CellKind { PlainRnn, PlainLstm, DeepCare };
enum class TaskKind { Risk, NextDiagnosis, CurrentIntervention, PretrainAux };

inline constexpr double kInfLookback = std::numeric_limits<double>::infinity();
inline constexpr double kProbClamp = 1e-12;

struct ModelConfig {
    CellKind cell = CellKind::DeepCare;
    PoolingMode pooling = PoolingMode::MeanAdm;
    TimeMode time_mode = TimeMode::Parametric;
    bool interventions = true;
    TaskKind task = TaskKind::Risk;
    std::size_t embed_dim = 10;   // M
    std::size_t hidden_dim = 20;  // K
    std::size_t head_hidden = 10; // risk-head hidden width; 0 = direct logistic
    std::vector<double> lookbacks_months = {12.0, 24.0, kInfLookback};
    bool uniform_attention = false;  // test hook: r_t = 1 in pooling

    std::size_t n_scales() const { return lookbacks_months.size(); }
    bool uses_intervention_embedding() const {
        return cell == CellKind::DeepCare && interventions;
    }
    // The recommendation head must not see the admission's own interventions
    // through the output gate.
    bool zero_current_intervention() const {
        return task == TaskKind::CurrentIntervention || task == TaskKind::PretrainAux;
    }
    bool has_risk_head() const { return task == TaskKind::Risk; }
    bool has_diag_head() const {
        return task == TaskKind::NextDiagnosis || task == TaskKind::PretrainAux;
    }
    bool has_interv_head() const {
        return task == TaskKind::CurrentIntervention || task == TaskKind::PretrainAux;
    }
};

inline void validate_model_config(const ModelConfig& cfg) {
    if (cfg.embed_dim == 0 || cfg.hidden_dim == 0)
        throw config_error("model: embed_dim and hidden_dim must be >= 1");
    if (cfg.lookbacks_months.empty()) throw config_error("model: need at least one look-back");
    for (std::size_t i = 0; i + 1 < cfg.lookbacks_months.size(); ++i) {
        if (!(cfg.lookbacks_months[i] < cfg.lookbacks_months[i + 1]))
            throw config_error("model: look-backs must be strictly ascending");
        if (std::isinf(cfg.lookbacks_months[i]))
            throw config_error("model: only the last look-back may be inf");
    }
    if (cfg.lookbacks_months.front() <= 0.0)
        throw config_error("model: look-backs must be positive");
}

struct HeadParams {
    Mat u_h;  // head_hidden x (scales*K); empty when head_hidden == 0
    Vec b_h;
    Mat u_y;  // 1 x head_hidden (or 1 x scales*K when direct)
    Vec b_y;  // 1
};

struct Params {
    EmbeddingParams emb;
    RnnParams rnn;
    DeepCareParams cell;
    HeadParams head;
    Mat v_diag;    // |D| x K sequence-labeling head
    Mat v_interv;  // |I| x K
};

// Fixed tensor enumeration; also the checkpoint serialization order.
template <class ParamsT, class F>
void for_each_tensor(ParamsT& p, const ModelConfig& cfg, F&& f) {
    f("emb.A", false, p.emb.A.a);
    if (cfg.uses_intervention_embedding()) f("emb.B", false, p.emb.B.a);
    if (cfg.cell == CellKind::PlainRnn) {
        f("rnn.w_in", false, p.rnn.w_in.a);
        f("rnn.w_rec", false, p.rnn.w_rec.a);
        f("rnn.b", true, p.rnn.b);
    } else {
        f("cell.w_i", false, p.cell.lstm.w_i.a);
        f("cell.w_f", false, p.cell.lstm.w_f.a);
        f("cell.w_o", false, p.cell.lstm.w_o.a);
        f("cell.w_c", false, p.cell.lstm.w_c.a);
        f("cell.u_i", false, p.cell.lstm.u_i.a);
        f("cell.u_f", false, p.cell.lstm.u_f.a);
        f("cell.u_o", false, p.cell.lstm.u_o.a);
        f("cell.u_c", false, p.cell.lstm.u_c.a);
        f("cell.b_i", true, p.cell.lstm.b_i);
        f("cell.b_f", true, p.cell.lstm.b_f);
        f("cell.b_o", true, p.cell.lstm.b_o);
        f("cell.b_c", true, p.cell.lstm.b_c);
        if (cfg.cell == CellKind::DeepCare && cfg.interventions) {
            f("cell.p_o", false, p.cell.p_o.a);
            f("cell.p_f", false, p.cell.p_f.a);
        }
        if (cfg.cell == CellKind::DeepCare && cfg.time_mode == TimeMode::Parametric) {
            f("cell.q_f", false, p.cell.q_f.a);
        }
    }
    if (cfg.has_risk_head()) {
        if (cfg.head_hidden > 0) {
            f("head.u_h", false, p.head.u_h.a);
            f("head.b_h", true, p.head.b_h);
        }
        f("head.u_y", false, p.head.u_y.a);
        f("head.b_y", true, p.head.b_y);
    }
    if (cfg.has_diag_head()) f("v_diag", false, p.v_diag.a);
    if (cfg.has_interv_head()) f("v_interv", false, p.v_interv.a);
}

struct Model {
    ModelConfig cfg;
    Vocabulary vocab;
    Params params;
};

inline Params zero_params_like(const Model& m) {
    Params z = m.params;
    for_each_tensor(z, m.cfg, [](const char*, bool, std::vector<double>& data) {
        std::fill(data.begin(), data.end(), 0.0);
    });
    return z;
}

// Uniform(-init_scale, init_scale) for all weights; the forget-gate bias
// starts at +1 to keep early memory flowing.
inline Model init_model(const ModelConfig& cfg, const Vocabulary& vocab, std::uint64_t seed,
                        double init_scale = 0.05) {
    validate_model_config(cfg);
    Model m;
    m.cfg = cfg;
    m.vocab = vocab;
    const std::size_t M = cfg.embed_dim;
    const std::size_t K = cfg.hidden_dim;
    Params& p = m.params;
    p.emb.A = Mat(M, vocab.n_diag());
    if (cfg.uses_intervention_embedding()) p.emb.B = Mat(M, vocab.n_interv());
    if (cfg.cell == CellKind::PlainRnn) {
        p.rnn.w_in = Mat(K, M);
        p.rnn.w_rec = Mat(K, K);
        p.rnn.b = Vec(K, 0.0);
    } else {
        p.cell.lstm.w_i = Mat(K, M);
        p.cell.lstm.w_f = Mat(K, M);
        p.cell.lstm.w_o = Mat(K, M);
        p.cell.lstm.w_c = Mat(K, M);
        p.cell.lstm.u_i = Mat(K, K);
        p.cell.lstm.u_f = Mat(K, K);
        p.cell.lstm.u_o = Mat(K, K);
        p.cell.lstm.u_c = Mat(K, K);
        p.cell.lstm.b_i = Vec(K, 0.0);
        p.cell.lstm.b_f = Vec(K, 1.0);
        p.cell.lstm.b_o = Vec(K, 0.0);
        p.cell.lstm.b_c = Vec(K, 0.0);
        if (cfg.cell == CellKind::DeepCare && cfg.interventions) {
            p.cell.p_o = Mat(K, M);
            p.cell.p_f = Mat(K, M);
        }
        if (cfg.cell == CellKind::DeepCare && cfg.time_mode == TimeMode::Parametric)
            p.cell.q_f = Mat(K, 3);
    }
    if (cfg.has_risk_head()) {
        const std::size_t in_w = cfg.n_scales() * K;
        if (cfg.head_hidden > 0) {
            p.head.u_h = Mat(cfg.head_hidden, in_w);
            p.head.b_h = Vec(cfg.head_hidden, 0.0);
            p.head.u_y = Mat(1, cfg.head_hidden);
        } else {
            p.head.u_y = Mat(1, in_w);
        }
        p.head.b_y = Vec(1, 0.0);
    }
    if (cfg.has_diag_head()) p.v_diag = Mat(vocab.n_diag(), K);
    if (cfg.has_interv_head()) p.v_interv = Mat(vocab.n_interv(), K);

    Rng rng(Rng::mix(seed, 0x1417ULL));
    for_each_tensor(p, cfg, [&](const char* name, bool is_bias, std::vector<double>& data) {
        if (is_bias) return;  // biases keep their deliberate initial values
        (void)name;
        for (double& x : data) x = rng.uniform(-init_scale, init_scale);
    });
    return m;
}

// ---------------------------------------------------------------------------
// Dropout plan: all stochastic choices for one sequence, sampled up front so
// that a forward pass is a deterministic function of (params, record, plan).

struct DropoutConfig {
    double p_code = 1.0;  // keep-probabilities
    double p_feat = 1.0;
    double p_in = 1.0;
    double p_hidd = 1.0;
};

inline void validate_dropout(const DropoutConfig& d) {
    for (double p : {d.p_code, d.p_feat, d.p_in, d.p_hidd})
        if (!(p > 0.0 && p <= 1.0))
            throw config_error("dropout keep-probabilities must lie in (0,1]");
}

// Inverted dropout mask: entries are 1/keep_p with probability keep_p, else
// 0. keep_p = 1 yields all ones.
inline Vec sample_mask(std::size_t n, double keep_p, Rng& rng) {
    Vec mask(n, 1.0);
    if (keep_p >= 1.0) return mask;
    const double scale = 1.0 / keep_p;
    for (double& v : mask) v = rng.bernoulli(keep_p) ? scale : 0.0;
    return mask;
}

inline void apply_mask(Vec& x, const Vec& mask) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= mask[i];
}

struct StepMasks {
    std::vector<std::size_t> diag;    // surviving codes
    std::vector<std::size_t> interv;  // may drop to empty
    Vec x_mask, p_mask;               // feature masks, length M
};

struct DropoutPlan {
    std::vector<StepMasks> steps;
    Vec in_mask;   // nnet input units
    Vec hid_mask;  // nnet hidden units
};

// Code dropout resamples until at least one diagnosis survives;
// interventions may drop to empty.
inline std::vector<std::size_t> drop_codes(const std::vector<std::size_t>& codes, double keep_p,
                                           bool keep_at_least_one, Rng& rng) {
    if (keep_p >= 1.0) return codes;
    std::vector<std::size_t> out;
    do {
        out.clear();
        for (std::size_t c : codes)
            if (rng.bernoulli(keep_p)) out.push_back(c);
    } while (keep_at_least_one && out.empty() && !codes.empty());
    return out;
}

inline DropoutPlan sample_dropout_plan(const PatientRecord& record, std::size_t end_index,
                                       const ModelConfig& cfg, const DropoutConfig& d, Rng& rng) {
    DropoutPlan plan;
    const std::size_t M = cfg.embed_dim;
    for (std::size_t t = 0; t <= end_index; ++t) {
        StepMasks sm;
        sm.diag = drop_codes(record.admissions[t].diagnoses, d.p_code, true, rng);
        sm.interv = cfg.uses_intervention_embedding()
                        ? drop_codes(record.admissions[t].interventions, d.p_code, false, rng)
                        : std::vector<std::size_t>{};
        sm.x_mask = sample_mask(M, d.p_feat, rng);
        sm.p_mask = cfg.uses_intervention_embedding() ? sample_mask(M, d.p_feat, rng) : Vec{};
        plan.steps.push_back(std::move(sm));
    }
    if (cfg.has_risk_head()) {
        plan.in_mask = sample_mask(cfg.n_scales() * cfg.hidden_dim, d.p_in, rng);
        if (cfg.head_hidden > 0) plan.hid_mask = sample_mask(cfg.head_hidden, d.p_hidd, rng);
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Forward pass with tape.

struct StepTrace {
    std::vector<std::size_t> diag, interv;  // codes actually embedded
    PoolTrace diag_trace, interv_trace;
    Vec x, p;  // cell inputs (after feature dropout); p empty if unused
    double dt_days = 0.0;
    int method = 1;
    DeepCareStepTrace cell;  // also holds plain-LSTM traces
    Vec h;                   // output state (all cell kinds)
};

struct Tape {
    std::vector<StepTrace> steps;
    // Risk head.
    std::vector<Vec> pool_w;  // per scale, normalized weight per step
    Vec pooled;               // scales*K, before input dropout
    Vec pooled_in;            // head input (after dropout)
    Vec a_h;                  // hidden activation
    Vec a_h_drop;
    double z = 0.0;
    double prob = 0.5;
    int label = 0;
    // Label heads; an empty vector marks an ineligible step.
    std::vector<Vec> diag_probs;
    std::vector<Vec> interv_probs;
    double loss = 0.0;
    // Individual loss terms in a fixed order; the finite-difference oracle
    // differences these term by term to beat the quantization of the total.
    Vec loss_terms;
};

inline double recency_weight(int method, double dt_to_end_months, bool uniform_attention) {
    if (uniform_attention) return 1.0;
    if (dt_to_end_months < 0.0) throw config_error("recency_weight: negative elapsed time");
    return 1.0 / (static_cast<double>(method) + std::log(1.0 + dt_to_end_months));
}

inline void forward_states(const Model& m, const PatientRecord& record, std::size_t end_index,
                           const DropoutPlan* plan, Tape& tape) {
    const ModelConfig& cfg = m.cfg;
    const std::size_t M = cfg.embed_dim;
    if (record.admissions.empty()) throw config_error("forward: empty record");
    if (end_index >= record.admissions.size())
        throw config_error("forward: end index out of range");
    const bool use_p = cfg.uses_intervention_embedding();

    CellState state = CellState::zero(cfg.hidden_dim);
    Vec h_prev_rnn(cfg.hidden_dim, 0.0);
    tape.steps.clear();
    tape.steps.reserve(end_index + 1);

    for (std::size_t t = 0; t <= end_index; ++t) {
        const CodedAdmission& adm = record.admissions[t];
        StepTrace st;
        st.method = static_cast<int>(adm.method);
        st.dt_days = t == 0 ? 0.0 : adm.time_days - record.admissions[t - 1].time_days;
        st.diag = plan ? plan->steps[t].diag : adm.diagnoses;
        st.interv = use_p ? (plan ? plan->steps[t].interv : adm.interventions)
                          : std::vector<std::size_t>{};

        st.x = pool_columns(m.params.emb.A, st.diag, cfg.pooling, &st.diag_trace);
        if (use_p) st.p = pool_columns(m.params.emb.B, st.interv, cfg.pooling, &st.interv_trace);
        if (plan) {
            apply_mask(st.x, plan->steps[t].x_mask);
            if (use_p) apply_mask(st.p, plan->steps[t].p_mask);
        }

        switch (cfg.cell) {
            case CellKind::PlainRnn: {
                st.h = rnn_step(st.x, h_prev_rnn, m.params.rnn);
                h_prev_rnn = st.h;
                break;
            }
            case CellKind::PlainLstm: {
                state = deepcare_step(st.x, Vec{}, Vec{}, 1, 0.0, state, m.params.cell,
                                      TimeMode::NoTime, &st.cell);
                st.h = st.cell.h;
                break;
            }
            case CellKind::DeepCare: {
                Vec p_cur, p_prev;
                if (use_p) {
                    p_cur = cfg.zero_current_intervention() ? Vec{} : st.p;
                    p_prev = t == 0 ? Vec(M, 0.0) : tape.steps[t - 1].p;
                }
                state = deepcare_step(st.x, p_cur, p_prev, st.method, st.dt_days, state,
                                      m.params.cell, cfg.time_mode, &st.cell);
                st.h = st.cell.h;
                break;
            }
        }
        tape.steps.push_back(std::move(st));
    }
}

// Multiscale recency pooling: for each look-back window, the recency-weighted
// mean of the included output states, windows measured in months back from
// the final included admission.
inline Vec multiscale_pool(const Model& m, const PatientRecord& record, std::size_t end_index,
                           Tape& tape) {
    const ModelConfig& cfg = m.cfg;
    const std::size_t K = cfg.hidden_dim;
    const double t_end = record.admissions[end_index].time_days;
    const std::size_t n_steps = tape.steps.size();

    Vec r(n_steps);
    Vec dt_months(n_steps);
    for (std::size_t t = 0; t < n_steps; ++t) {
        dt_months[t] = days_to_months(t_end - record.admissions[t].time_days);
        r[t] = recency_weight(tape.steps[t].method, dt_months[t], cfg.uniform_attention);
    }

    tape.pool_w.assign(cfg.n_scales(), Vec(n_steps, 0.0));
    Vec pooled(cfg.n_scales() * K, 0.0);
    for (std::size_t s = 0; s < cfg.n_scales(); ++s) {
        const double lb = cfg.lookbacks_months[s];
        double wsum = 0.0;
        for (std::size_t t = 0; t < n_steps; ++t)
            if (dt_months[t] <= lb) wsum += r[t];
        for (std::size_t t = 0; t < n_steps; ++t) {
            if (dt_months[t] > lb) continue;
            const double w = r[t] / wsum;
            tape.pool_w[s][t] = w;
            for (std::size_t k = 0; k < K; ++k) pooled[s * K + k] += w * tape.steps[t].h[k];
        }
    }
    tape.pooled = pooled;
    return pooled;
}

inline double cross_entropy(double p, int y) {
    if (std::isnan(p)) return p;  // poisoned activations must surface, not clamp away
    const double pc = std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
    return y ? -std::log(pc) : -std::log(1.0 - pc);
}

// Mean negative log-likelihood of the target set under one softmax.
inline double multilabel_set_loss(const Vec& dist, const std::vector<std::size_t>& target_set) {
    if (target_set.empty()) throw config_error("multilabel_set_loss: empty target set");
    double loss = 0.0;
    for (std::size_t c : target_set) {
        if (c >= dist.size()) throw shape_error("multilabel_set_loss: target out of range");
        if (std::isnan(dist[c])) return dist[c];
        loss += -std::log(std::max(dist[c], kProbClamp));
    }
    return loss / static_cast<double>(target_set.size());
}

inline Vec label_head(const Vec& h, const Mat& v) { return softmax(matvec(v, h)); }

// Logistic risk head over the pooled state; head_hidden == 0 degenerates to
// plain logistic regression on the pooled vector.
inline double risk_head_forward(const Model& m, const DropoutPlan* plan, Tape& tape) {
    const ModelConfig& cfg = m.cfg;
    tape.pooled_in = tape.pooled;
    if (plan) apply_mask(tape.pooled_in, plan->in_mask);
    const Vec* head_in = &tape.pooled_in;
    if (cfg.head_hidden > 0) {
        Vec zh = matvec(m.params.head.u_h, tape.pooled_in);
        add_in_place(zh, m.params.head.b_h);
        tape.a_h = sigmoid(zh);
        tape.a_h_drop = tape.a_h;
        if (plan) apply_mask(tape.a_h_drop, plan->hid_mask);
        head_in = &tape.a_h_drop;
    }
    tape.z = matvec(m.params.head.u_y, *head_in)[0] + m.params.head.b_y[0];
    tape.prob = sigmoid(tape.z);
    return tape.prob;
}

inline std::size_t risk_end_index(const PatientRecord& record) {
    if (!record.prediction_point)
        throw config_error("risk task: record " + record.patient_id + " has no prediction point");
    return *record.prediction_point;
}

// Scalar training loss for one sequence; fills the tape.
inline double forward_loss(const Model& m, const PatientRecord& record, Tape& tape,
                           const DropoutPlan* plan = nullptr) {
    const ModelConfig& cfg = m.cfg;
    tape = Tape{};
    if (cfg.task == TaskKind::Risk) {
        if (!record.risk_label)
            throw config_error("risk task: record " + record.patient_id + " has no label");
        const std::size_t end = risk_end_index(record);
        forward_states(m, record, end, plan, tape);
        multiscale_pool(m, record, end, tape);
        risk_head_forward(m, plan, tape);
        tape.label = *record.risk_label;
        tape.loss = cross_entropy(tape.prob, tape.label);
        tape.loss_terms.push_back(tape.loss);
        return tape.loss;
    }

    const std::size_t end = record.admissions.size() - 1;
    forward_states(m, record, end, plan, tape);
    double loss = 0.0;
    const std::size_t n = tape.steps.size();
    if (cfg.has_diag_head()) {
        tape.diag_probs.assign(n, Vec{});
        for (std::size_t t = 0; t + 1 < n; ++t) {
            tape.diag_probs[t] = label_head(tape.steps[t].h, m.params.v_diag);
            const double term =
                multilabel_set_loss(tape.diag_probs[t], record.admissions[t + 1].diagnoses);
            tape.loss_terms.push_back(term);
            loss += term;
        }
    }
    if (cfg.has_interv_head()) {
        tape.interv_probs.assign(n, Vec{});
        for (std::size_t t = 0; t < n; ++t) {
            if (record.admissions[t].interventions.empty()) continue;
            tape.interv_probs[t] = label_head(tape.steps[t].h, m.params.v_interv);
            const double term =
                multilabel_set_loss(tape.interv_probs[t], record.admissions[t].interventions);
            tape.loss_terms.push_back(term);
            loss += term;
        }
    }
    tape.loss = loss;
    return loss;
}

// Evaluation-mode conveniences (no dropout).
inline double risk_probability(const Model& m, const PatientRecord& record) {
    if (m.cfg.task != TaskKind::Risk) throw config_error("risk_probability: not a risk model");
    Tape tape;
    const std::size_t end = risk_end_index(record);
    forward_states(m, record, end, nullptr, tape);
    multiscale_pool(m, record, end, tape);
    return risk_head_forward(m, nullptr, tape);
}

// Scores over the label vocabulary at step t (diagnoses of the next
// admission or interventions of the current one, per the model's task).
inline Vec label_scores(const Model& m, const PatientRecord& record, std::size_t t) {
    Tape tape;
    forward_states(m, record, t, nullptr, tape);
    const Mat& v = m.cfg.task == TaskKind::CurrentIntervention ? m.params.v_interv
                                                               : m.params.v_diag;
    return label_head(tape.steps[t].h, v);
}

}  // namespace deepcare
