#pragma once

// Exact reverse accumulation through the unrolled sequence for every
// parameter of every model variant, plus an independent central-difference
// oracle used to verify it.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "deepcare/network.hpp"

namespace deepcare {

using GradStore = Params;  // shape-matched gradient buffers

namespace detail {

inline Vec avg_onehot(std::size_t n, const std::vector<std::size_t>& set) {
    Vec v(n, 0.0);
    const double w = 1.0 / static_cast<double>(set.size());
    for (std::size_t c : set) v[c] += w;
    return v;
}

}  // namespace detail

// Gradients of forward_loss w.r.t. every parameter, replaying the tape in
// reverse. The tape (including any dropout plan used) must come from a
// forward pass under the same parameters.
inline GradStore backward(const Model& m, const PatientRecord& record, const Tape& tape,
                          const DropoutPlan* plan = nullptr) {
    const ModelConfig& cfg = m.cfg;
    const Params& p = m.params;
    GradStore g = zero_params_like(m);
    const std::size_t n = tape.steps.size();
    if (n == 0) throw config_error("backward: tape is empty");
    const std::size_t K = cfg.hidden_dim;
    const bool use_p = cfg.uses_intervention_embedding();

    std::vector<Vec> dh(n, Vec(K, 0.0));
    std::vector<Vec> dp(n);  // gradient w.r.t. the (dropped) intervention vectors
    if (use_p)
        for (auto& v : dp) v.assign(cfg.embed_dim, 0.0);

    // Head contributions into dh.
    if (cfg.task == TaskKind::Risk) {
        const double dz = tape.prob - static_cast<double>(tape.label);
        Vec dpooled_in(tape.pooled_in.size(), 0.0);
        if (cfg.head_hidden > 0) {
            for (std::size_t j = 0; j < cfg.head_hidden; ++j)
                g.head.u_y(0, j) += dz * tape.a_h_drop[j];
            g.head.b_y[0] += dz;
            Vec da_h(cfg.head_hidden);
            for (std::size_t j = 0; j < cfg.head_hidden; ++j) da_h[j] = p.head.u_y(0, j) * dz;
            if (plan) apply_mask(da_h, plan->hid_mask);
            Vec dzh(cfg.head_hidden);
            for (std::size_t j = 0; j < cfg.head_hidden; ++j)
                dzh[j] = da_h[j] * tape.a_h[j] * (1.0 - tape.a_h[j]);
            add_outer(g.head.u_h, dzh, tape.pooled_in);
            add_in_place(g.head.b_h, dzh);
            matvec_t_add(p.head.u_h, dzh, dpooled_in);
        } else {
            for (std::size_t j = 0; j < tape.pooled_in.size(); ++j)
                g.head.u_y(0, j) += dz * tape.pooled_in[j];
            g.head.b_y[0] += dz;
            for (std::size_t j = 0; j < tape.pooled_in.size(); ++j)
                dpooled_in[j] = p.head.u_y(0, j) * dz;
        }
        if (plan) apply_mask(dpooled_in, plan->in_mask);
        for (std::size_t s = 0; s < cfg.n_scales(); ++s)
            for (std::size_t t = 0; t < n; ++t) {
                const double w = tape.pool_w[s][t];
                if (w == 0.0) continue;
                for (std::size_t k = 0; k < K; ++k) dh[t][k] += w * dpooled_in[s * K + k];
            }
    }
    if (cfg.has_diag_head()) {
        for (std::size_t t = 0; t < n; ++t) {
            if (tape.diag_probs[t].empty()) continue;
            Vec dlogits = tape.diag_probs[t];
            const Vec onehot =
                detail::avg_onehot(dlogits.size(), record.admissions[t + 1].diagnoses);
            for (std::size_t c = 0; c < dlogits.size(); ++c) dlogits[c] -= onehot[c];
            add_outer(g.v_diag, dlogits, tape.steps[t].h);
            matvec_t_add(p.v_diag, dlogits, dh[t]);
        }
    }
    if (cfg.has_interv_head()) {
        for (std::size_t t = 0; t < n; ++t) {
            if (tape.interv_probs[t].empty()) continue;
            Vec dlogits = tape.interv_probs[t];
            const Vec onehot =
                detail::avg_onehot(dlogits.size(), record.admissions[t].interventions);
            for (std::size_t c = 0; c < dlogits.size(); ++c) dlogits[c] -= onehot[c];
            add_outer(g.v_interv, dlogits, tape.steps[t].h);
            matvec_t_add(p.v_interv, dlogits, dh[t]);
        }
    }

    // Reverse sweep through the recurrence.
    Vec dc_next(K, 0.0);
    for (std::size_t ti = n; ti-- > 0;) {
        const StepTrace& st = tape.steps[ti];
        Vec dx(cfg.embed_dim, 0.0);

        if (cfg.cell == CellKind::PlainRnn) {
            Vec dz(K);
            for (std::size_t k = 0; k < K; ++k)
                dz[k] = dh[ti][k] * (1.0 - st.h[k] * st.h[k]);
            add_outer(g.rnn.w_in, dz, st.x);
            if (ti > 0) {
                add_outer(g.rnn.w_rec, dz, tape.steps[ti - 1].h);
                matvec_t_add(p.rnn.w_rec, dz, dh[ti - 1]);
            }
            add_in_place(g.rnn.b, dz);
            matvec_t_add(p.rnn.w_in, dz, dx);
        } else {
            const DeepCareStepTrace& ct = st.cell;
            const double m_t =
                cfg.cell == CellKind::DeepCare ? static_cast<double>(st.method) : 1.0;
            Vec dc(K);
            Vec d_o(K), d_i(K), d_f(K), d_g(K);
            const Vec* c_prev = ti > 0 ? &tape.steps[ti - 1].cell.c : nullptr;
            for (std::size_t k = 0; k < K; ++k) {
                d_o[k] = dh[ti][k] * ct.tanh_c[k];
                dc[k] = dc_next[k] + dh[ti][k] * ct.o[k] * (1.0 - ct.tanh_c[k] * ct.tanh_c[k]);
                d_i[k] = dc[k] * ct.g[k];
                d_g[k] = dc[k] * ct.i[k];
                d_f[k] = c_prev ? dc[k] * (*c_prev)[k] : 0.0;
            }
            for (std::size_t k = 0; k < K; ++k) dc_next[k] = dc[k] * ct.f[k];

            Vec dz_o(K), dz_i(K), dz_f(K), dz_g(K);
            for (std::size_t k = 0; k < K; ++k) {
                dz_o[k] = d_o[k] * ct.o[k] * (1.0 - ct.o[k]);
                dz_g[k] = d_g[k] * (1.0 - ct.g[k] * ct.g[k]);
                // i = sigma(z_i)/m, so dL/dz_i = (di/m) sigma (1-sigma).
                const double sig = ct.i[k] * m_t;
                dz_i[k] = d_i[k] / m_t * sig * (1.0 - sig);
                if (ct.f_sig.empty()) {
                    dz_f[k] = d_f[k] * ct.f[k] * (1.0 - ct.f[k]);
                } else {
                    dz_f[k] = d_f[k] * ct.decay * ct.f_sig[k] * (1.0 - ct.f_sig[k]);
                }
            }

            const LstmParams& lp = p.cell.lstm;
            LstmParams& lg = g.cell.lstm;
            add_outer(lg.w_i, dz_i, st.x);
            add_outer(lg.w_f, dz_f, st.x);
            add_outer(lg.w_o, dz_o, st.x);
            add_outer(lg.w_c, dz_g, st.x);
            if (ti > 0) {
                const Vec& h_prev = tape.steps[ti - 1].h;
                add_outer(lg.u_i, dz_i, h_prev);
                add_outer(lg.u_f, dz_f, h_prev);
                add_outer(lg.u_o, dz_o, h_prev);
                add_outer(lg.u_c, dz_g, h_prev);
                matvec_t_add(lp.u_i, dz_i, dh[ti - 1]);
                matvec_t_add(lp.u_f, dz_f, dh[ti - 1]);
                matvec_t_add(lp.u_o, dz_o, dh[ti - 1]);
                matvec_t_add(lp.u_c, dz_g, dh[ti - 1]);
            }
            add_in_place(lg.b_i, dz_i);
            add_in_place(lg.b_f, dz_f);
            add_in_place(lg.b_o, dz_o);
            add_in_place(lg.b_c, dz_g);
            matvec_t_add(lp.w_i, dz_i, dx);
            matvec_t_add(lp.w_f, dz_f, dx);
            matvec_t_add(lp.w_o, dz_o, dx);
            matvec_t_add(lp.w_c, dz_g, dx);

            if (cfg.cell == CellKind::DeepCare) {
                if (use_p && !cfg.zero_current_intervention()) {
                    add_outer(g.cell.p_o, dz_o, st.p);
                    matvec_t_add(p.cell.p_o, dz_o, dp[ti]);
                }
                if (use_p && ti > 0) {
                    add_outer(g.cell.p_f, dz_f, tape.steps[ti - 1].p);
                    matvec_t_add(p.cell.p_f, dz_f, dp[ti - 1]);
                }
                if (cfg.time_mode == TimeMode::Parametric) add_outer(g.cell.q_f, dz_f, ct.q);
            }
        }

        // Scatter into the embeddings; dp[ti] is complete here (its forget
        // contribution arrived while processing step ti+1).
        if (plan) apply_mask(dx, plan->steps[ti].x_mask);
        pool_backward(g.emb.A, st.diag, cfg.pooling, st.diag_trace, dx);
        if (use_p) {
            Vec dpv = dp[ti];
            if (plan) apply_mask(dpv, plan->steps[ti].p_mask);
            pool_backward(g.emb.B, st.interv, cfg.pooling, st.interv_trace, dpv);
        }
    }
    return g;
}

inline double batch_loss(const Model& m, const std::vector<PatientRecord>& records,
                         const std::vector<DropoutPlan>* plans = nullptr) {
    double total = 0.0;
    Tape tape;
    for (std::size_t i = 0; i < records.size(); ++i)
        total += forward_loss(m, records[i], tape, plans ? &(*plans)[i] : nullptr);
    return total;
}

// dst += scale * src over every tensor (same config on both sides).
inline void params_axpy(Params& dst, const Params& src, const ModelConfig& cfg,
                        double scale = 1.0) {
    std::vector<Vec*> d;
    std::vector<const Vec*> s;
    for_each_tensor(dst, cfg, [&](const char*, bool, Vec& v) { d.push_back(&v); });
    for_each_tensor(const_cast<Params&>(src), cfg,
                    [&](const char*, bool, Vec& v) { s.push_back(&v); });
    for (std::size_t j = 0; j < d.size(); ++j)
        for (std::size_t e = 0; e < d[j]->size(); ++e) (*d[j])[e] += scale * (*s[j])[e];
}

inline GradStore batch_backward(const Model& m, const std::vector<PatientRecord>& records,
                                const std::vector<DropoutPlan>* plans = nullptr) {
    GradStore total = zero_params_like(m);
    Tape tape;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const DropoutPlan* plan = plans ? &(*plans)[i] : nullptr;
        forward_loss(m, records[i], tape, plan);
        params_axpy(total, backward(m, records[i], tape, plan), m.cfg);
    }
    return total;
}

// Central finite differences over every coordinate; O(P) forward passes, so
// only suitable for small verification models. The plus/minus losses are
// differenced term by term (see Tape::loss_terms), which keeps the rounding
// noise at the scale of one loss term instead of the whole batch sum.
inline GradStore finite_diff_grad(const Model& m, const std::vector<PatientRecord>& records,
                                  const std::vector<DropoutPlan>* plans = nullptr,
                                  double h = 1e-5) {
    Model work = m;
    GradStore fd = zero_params_like(m);
    std::vector<Vec*> param_t, grad_t;
    for_each_tensor(work.params, m.cfg, [&](const char*, bool, Vec& v) { param_t.push_back(&v); });
    for_each_tensor(fd, m.cfg, [&](const char*, bool, Vec& v) { grad_t.push_back(&v); });

    auto collect_terms = [&](Vec& out) {
        out.clear();
        Tape tape;
        for (std::size_t i = 0; i < records.size(); ++i) {
            forward_loss(work, records[i], tape, plans ? &(*plans)[i] : nullptr);
            out.insert(out.end(), tape.loss_terms.begin(), tape.loss_terms.end());
        }
    };
    Vec plus, minus;
    for (std::size_t j = 0; j < param_t.size(); ++j) {
        Vec& theta = *param_t[j];
        for (std::size_t e = 0; e < theta.size(); ++e) {
            const double saved = theta[e];
            theta[e] = saved + h;
            collect_terms(plus);
            theta[e] = saved - h;
            collect_terms(minus);
            theta[e] = saved;
            if (plus.size() != minus.size())
                throw config_error("finite_diff_grad: loss term count changed under perturbation");
            double diff = 0.0;
            for (std::size_t t = 0; t < plus.size(); ++t) diff += plus[t] - minus[t];
            (*grad_t[j])[e] = diff / (2.0 * h);
        }
    }
    return fd;
}

struct GradCheckReport {
    double worst_rel_error = 0.0;
    std::string worst_tensor;
    std::size_t worst_index = 0;
    std::map<std::string, double> per_tensor;
    std::size_t skipped_ties = 0;
};

namespace detail {

// Coordinates (row, col) of the diagnosis/intervention embeddings where the
// max-pooling argmax ties within eps; finite differences are invalid across
// the subgradient kink there.
inline std::set<std::pair<std::size_t, std::size_t>> max_tie_coords(
    const Mat& emb, const std::vector<std::size_t>& codes, double eps) {
    std::set<std::pair<std::size_t, std::size_t>> out;
    if (codes.size() < 2) return out;
    for (std::size_t i = 0; i < emb.rows; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        double second = best;
        for (std::size_t c : codes) {
            const double v = emb(i, c);
            if (v > best) {
                second = best;
                best = v;
            } else if (v > second) {
                second = v;
            }
        }
        if (best - second < eps)
            for (std::size_t c : codes)
                if (best - emb(i, c) < eps) out.insert({i, c});
    }
    return out;
}

}  // namespace detail

// Compares analytic and central-difference gradients; relative error uses
// max(|ga|, |gfd|, 1e-8) in the denominator.
inline GradCheckReport grad_check(const Model& m, const std::vector<PatientRecord>& records,
                                  const std::vector<DropoutPlan>* plans = nullptr,
                                  double h = 1e-5, double tie_eps = 1e-9) {
    GradStore analytic = batch_backward(m, records, plans);
    GradStore fd = finite_diff_grad(m, records, plans, h);

    std::set<std::pair<std::size_t, std::size_t>> skip_a, skip_b;
    if (m.cfg.pooling == PoolingMode::MaxAdm) {
        for (std::size_t r = 0; r < records.size(); ++r) {
            const PatientRecord& rec = records[r];
            const std::size_t end = m.cfg.task == TaskKind::Risk ? risk_end_index(rec)
                                                                 : rec.admissions.size() - 1;
            for (std::size_t t = 0; t <= end; ++t) {
                const auto& diag = plans ? (*plans)[r].steps[t].diag : rec.admissions[t].diagnoses;
                auto ties = detail::max_tie_coords(m.params.emb.A, diag, tie_eps);
                skip_a.insert(ties.begin(), ties.end());
                if (m.cfg.uses_intervention_embedding()) {
                    const auto& interv =
                        plans ? (*plans)[r].steps[t].interv : rec.admissions[t].interventions;
                    auto tb = detail::max_tie_coords(m.params.emb.B, interv, tie_eps);
                    skip_b.insert(tb.begin(), tb.end());
                }
            }
        }
    }

    GradCheckReport rep;
    rep.skipped_ties = skip_a.size() + skip_b.size();
    std::vector<std::pair<std::string, std::pair<Vec*, Vec*>>> pairs;
    {
        std::vector<std::pair<std::string, Vec*>> an, fdv;
        for_each_tensor(analytic, m.cfg,
                        [&](const char* nm, bool, Vec& v) { an.push_back({nm, &v}); });
        for_each_tensor(fd, m.cfg, [&](const char* nm, bool, Vec& v) { fdv.push_back({nm, &v}); });
        for (std::size_t j = 0; j < an.size(); ++j)
            pairs.push_back({an[j].first, {an[j].second, fdv[j].second}});
    }
    for (auto& [name, pr] : pairs) {
        double worst = 0.0;
        const Vec& ga = *pr.first;
        const Vec& gf = *pr.second;
        const bool is_a = name == "emb.A";
        const bool is_b = name == "emb.B";
        const std::size_t cols = is_a ? m.params.emb.A.cols : (is_b ? m.params.emb.B.cols : 0);
        for (std::size_t e = 0; e < ga.size(); ++e) {
            if (is_a && skip_a.count({e / cols, e % cols})) continue;
            if (is_b && skip_b.count({e / cols, e % cols})) continue;
            const double denom = std::max({std::fabs(ga[e]), std::fabs(gf[e]), 1e-8});
            const double rel = std::fabs(ga[e] - gf[e]) / denom;
            if (rel > worst) worst = rel;
            if (rel > rep.worst_rel_error) {
                rep.worst_rel_error = rel;
                rep.worst_tensor = name;
                rep.worst_index = e;
            }
        }
        rep.per_tensor[name] = worst;
    }
    return rep;
}

}  // namespace deepcare
