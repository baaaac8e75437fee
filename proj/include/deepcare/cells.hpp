#pragma once

// Recurrent step functions: plain RNN, standard LSTM, and the time- and
// intervention-aware cell. The extended cell scales the input gate by the
// admission method (1/m_t), moderates the output gate by the current
// intervention vector and the forget gate by the previous one, and shapes
// forgetting over the elapsed gap either by a fixed decay
// d(dt) = 1/ln(e + dt_days) or by a learned response to
// q_dt = (dt/60, (dt/180)^2, (dt/365)^3).

#include <cmath>
#include <string>

#include "deepcare/linalg.hpp"

namespace deepcare {

enum class TimeMode { NoTime, Decay, Parametric };

// Elapsed days are clamped before the cubic time features so a single
// decade-plus gap cannot dominate the gate pre-activation.
inline constexpr double kMaxGapDays = 3650.0;

struct RnnParams {
    Mat w_in;   // K x M
    Mat w_rec;  // K x K
    Vec b;      // K
};

struct LstmParams {
    Mat w_i, w_f, w_o, w_c;  // K x M
    Mat u_i, u_f, u_o, u_c;  // K x K
    Vec b_i, b_f, b_o, b_c;  // K
};

// Extends LstmParams with the intervention and time weights.
struct DeepCareParams {
    LstmParams lstm;
    Mat p_o;  // K x M, current intervention -> output gate
    Mat p_f;  // K x M, previous intervention -> forget gate
    Mat q_f;  // K x 3, parametric time -> forget gate
};

struct CellState {
    Vec c;  // memory
    Vec h;  // output state

    static CellState zero(std::size_t k) { return CellState{Vec(k, 0.0), Vec(k, 0.0)}; }
};

// h_t = tanh(b + W_rec h_{t-1} + W_in x_t); callers pass h_prev = 0 at t = 0,
// which reproduces the h_0 = tanh(b + W_in x_0) first-step rule.
inline Vec rnn_step(const Vec& x, const Vec& h_prev, const RnnParams& p) {
    Vec z = matvec(p.w_in, x);
    add_in_place(z, matvec(p.w_rec, h_prev));
    add_in_place(z, p.b);
    return tanh_vec(z);
}

inline CellState lstm_step(const Vec& x, const CellState& prev, const LstmParams& p) {
    Vec zi = matvec(p.w_i, x);
    add_in_place(zi, matvec(p.u_i, prev.h));
    add_in_place(zi, p.b_i);
    Vec zf = matvec(p.w_f, x);
    add_in_place(zf, matvec(p.u_f, prev.h));
    add_in_place(zf, p.b_f);
    Vec zo = matvec(p.w_o, x);
    add_in_place(zo, matvec(p.u_o, prev.h));
    add_in_place(zo, p.b_o);
    Vec zg = matvec(p.w_c, x);
    add_in_place(zg, matvec(p.u_c, prev.h));
    add_in_place(zg, p.b_c);

    const Vec i = sigmoid(zi);
    const Vec f = sigmoid(zf);
    const Vec o = sigmoid(zo);
    const Vec g = tanh_vec(zg);

    CellState out;
    out.c.resize(i.size());
    out.h.resize(i.size());
    for (std::size_t k = 0; k < i.size(); ++k) {
        out.c[k] = f[k] * prev.c[k] + i[k] * g[k];
        out.h[k] = o[k] * std::tanh(out.c[k]);
    }
    return out;
}

// Monotone forgetting over the elapsed gap, d(0) = 1 exactly and
// d(dt) in (0,1]. The natural log pairs with the additive e.
inline double time_decay(double dt_days) {
    if (dt_days <= 0.0) return 1.0;
    static const double kE = std::exp(1.0);
    return std::min(1.0, 1.0 / std::log(kE + dt_days));
}

inline Vec time_features(double dt_days) {
    const double d = std::min(dt_days, kMaxGapDays);
    return Vec{d / 60.0, (d / 180.0) * (d / 180.0), (d / 365.0) * (d / 365.0) * (d / 365.0)};
}

// Q_f q_dt, the learned time contribution to the forget-gate pre-activation
// (Parametric mode only).
inline Vec forget_time_contribution(double dt_days, const Mat& q_f, TimeMode mode) {
    if (mode != TimeMode::Parametric)
        throw config_error("forget_time_contribution: requires Parametric time mode");
    return matvec(q_f, time_features(dt_days));
}

// Everything the backward pass needs from one extended-cell step.
struct DeepCareStepTrace {
    Vec i, f, o, g;  // final gate activations (i includes 1/m, f includes decay)
    Vec f_sig;       // sigma(z_f) before the decay multiplier (Decay mode)
    double decay = 1.0;
    Vec q;  // time features (Parametric mode)
    Vec c, tanh_c, h;
};

// One extended step. `p_cur` moderates the output gate, `p_prev` the forget
// gate (zero vector at t = 0); either may be empty to disable intervention
// gating. `method` is 1 (unplanned) or 2 (planned).
inline CellState deepcare_step(const Vec& x, const Vec& p_cur, const Vec& p_prev, int method,
                               double dt_days, const CellState& prev, const DeepCareParams& p,
                               TimeMode mode, DeepCareStepTrace* trace = nullptr) {
    if (dt_days < 0.0)
        throw config_error("deepcare_step: negative elapsed time " + std::to_string(dt_days));
    if (method != 1 && method != 2)
        throw config_error("deepcare_step: method must be 1 or 2");

    Vec zi = matvec(p.lstm.w_i, x);
    add_in_place(zi, matvec(p.lstm.u_i, prev.h));
    add_in_place(zi, p.lstm.b_i);

    Vec zo = matvec(p.lstm.w_o, x);
    add_in_place(zo, matvec(p.lstm.u_o, prev.h));
    if (!p_cur.empty()) add_in_place(zo, matvec(p.p_o, p_cur));
    add_in_place(zo, p.lstm.b_o);

    Vec zf = matvec(p.lstm.w_f, x);
    add_in_place(zf, matvec(p.lstm.u_f, prev.h));
    if (!p_prev.empty()) add_in_place(zf, matvec(p.p_f, p_prev));
    Vec q;
    if (mode == TimeMode::Parametric) {
        q = time_features(dt_days);
        add_in_place(zf, matvec(p.q_f, q));
    }
    add_in_place(zf, p.lstm.b_f);

    Vec zg = matvec(p.lstm.w_c, x);
    add_in_place(zg, matvec(p.lstm.u_c, prev.h));
    add_in_place(zg, p.lstm.b_c);

    const double inv_m = 1.0 / static_cast<double>(method);
    Vec i = sigmoid(zi);
    for (double& v : i) v *= inv_m;
    const Vec o = sigmoid(zo);
    Vec f_sig = sigmoid(zf);
    Vec f = f_sig;
    double decay = 1.0;
    if (mode == TimeMode::Decay) {
        decay = time_decay(dt_days);
        for (double& v : f) v *= decay;
    }
    const Vec g = tanh_vec(zg);

    CellState out;
    const std::size_t k_dim = i.size();
    out.c.resize(k_dim);
    out.h.resize(k_dim);
    Vec tanh_c(k_dim);
    for (std::size_t k = 0; k < k_dim; ++k) {
        out.c[k] = f[k] * prev.c[k] + i[k] * g[k];
        tanh_c[k] = std::tanh(out.c[k]);
        out.h[k] = o[k] * tanh_c[k];
    }
    if (trace) {
        trace->i = std::move(i);
        trace->f = std::move(f);
        trace->o = o;
        trace->g = g;
        trace->f_sig = (mode == TimeMode::Decay) ? std::move(f_sig) : Vec{};
        trace->decay = decay;
        trace->q = std::move(q);
        trace->c = out.c;
        trace->tanh_c = std::move(tanh_c);
        trace->h = out.h;
    }
    return out;
}

}  // namespace deepcare
