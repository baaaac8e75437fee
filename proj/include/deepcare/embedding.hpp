#pragma once

// Code-set embedding: maps an admission's diagnosis and intervention sets to
// the fixed 2M-dimensional vector [x_t, p_t] by pooling learned embedding
// columns.

#include <algorithm>
#include <cmath>
#include <vector>

#include "deepcare/data.hpp"
#include "deepcare/linalg.hpp"

namespace deepcare {

enum class PoolingMode { MaxAdm, SumAdm, MeanAdm };

struct EmbeddingParams {
    Mat A;  // M x |D| diagnosis embedding
    Mat B;  // M x |I| intervention embedding
};

inline EmbeddingParams init_embeddings(std::size_t embed_dim, const Vocabulary& vocab, Rng& rng,
                                       double init_scale = 0.05) {
    if (embed_dim == 0) throw config_error("init_embeddings: embed_dim must be >= 1");
    EmbeddingParams p;
    p.A = Mat(embed_dim, vocab.n_diag());
    p.B = Mat(embed_dim, vocab.n_interv());
    fill_uniform(p.A, rng, init_scale);
    fill_uniform(p.B, rng, init_scale);
    return p;
}

// Forward bookkeeping needed to route gradients back through the pooling
// rule.
struct PoolTrace {
    Vec sum;                          // SumAdm: raw elementwise column sum s
    std::vector<std::size_t> argmax;  // MaxAdm: winning code per dimension
};

// Pools the columns of E selected by `codes`. An empty set yields the zero
// vector. SumAdm computes s / sqrt(|s|) elementwise with s = 0 mapped to 0.
// Codes are summed in sorted order so any ordering of the same set produces
// bit-identical output.
inline Vec pool_columns(const Mat& E, const std::vector<std::size_t>& codes_in, PoolingMode mode,
                        PoolTrace* trace = nullptr) {
    const std::size_t m = E.rows;
    Vec out(m, 0.0);
    for (std::size_t c : codes_in) {
        if (c >= E.cols) throw shape_error("pool_columns: code index out of range");
    }
    if (codes_in.empty()) return out;
    std::vector<std::size_t> codes = codes_in;
    if (!std::is_sorted(codes.begin(), codes.end())) std::sort(codes.begin(), codes.end());
    switch (mode) {
        case PoolingMode::MaxAdm: {
            std::vector<std::size_t> amax(m, codes[0]);
            for (std::size_t i = 0; i < m; ++i) out[i] = E(i, codes[0]);
            for (std::size_t k = 1; k < codes.size(); ++k) {
                for (std::size_t i = 0; i < m; ++i) {
                    const double v = E(i, codes[k]);
                    if (v > out[i]) {
                        out[i] = v;
                        amax[i] = codes[k];
                    }
                }
            }
            if (trace) trace->argmax = std::move(amax);
            break;
        }
        case PoolingMode::SumAdm: {
            Vec s(m, 0.0);
            for (std::size_t c : codes)
                for (std::size_t i = 0; i < m; ++i) s[i] += E(i, c);
            for (std::size_t i = 0; i < m; ++i)
                out[i] = s[i] == 0.0 ? 0.0 : s[i] / std::sqrt(std::fabs(s[i]));
            if (trace) trace->sum = std::move(s);
            break;
        }
        case PoolingMode::MeanAdm: {
            for (std::size_t c : codes)
                for (std::size_t i = 0; i < m; ++i) out[i] += E(i, c);
            const double inv = 1.0 / static_cast<double>(codes.size());
            for (double& v : out) v *= inv;
            break;
        }
    }
    return out;
}

// Scatters d(pooled) into the embedding gradient. Max routes to the argmax
// column; mean distributes 1/h; sum-norm applies d/ds [s/sqrt(|s|)] =
// 1/(2 sqrt(|s|)) with zero gradient at the s = 0 guard.
inline void pool_backward(Mat& dE, const std::vector<std::size_t>& codes, PoolingMode mode,
                          const PoolTrace& trace, const Vec& dout) {
    if (codes.empty()) return;
    const std::size_t m = dE.rows;
    switch (mode) {
        case PoolingMode::MaxAdm:
            for (std::size_t i = 0; i < m; ++i) dE(i, trace.argmax[i]) += dout[i];
            break;
        case PoolingMode::SumAdm:
            for (std::size_t i = 0; i < m; ++i) {
                const double s = trace.sum[i];
                if (s == 0.0) continue;
                const double ds = dout[i] * 0.5 / std::sqrt(std::fabs(s));
                for (std::size_t c : codes) dE(i, c) += ds;
            }
            break;
        case PoolingMode::MeanAdm: {
            const double inv = 1.0 / static_cast<double>(codes.size());
            for (std::size_t i = 0; i < m; ++i) {
                const double d = dout[i] * inv;
                for (std::size_t c : codes) dE(i, c) += d;
            }
            break;
        }
    }
}

struct AdmissionEmbedding {
    Vec x;  // pooled diagnoses
    Vec p;  // pooled interventions (zero vector when the set is empty)
    PoolTrace diag_trace;
    PoolTrace interv_trace;
};

// `diagnoses` must be non-empty (code dropout resamples rather than emptying
// the set); `interventions` may be empty.
inline AdmissionEmbedding embed_admission(const std::vector<std::size_t>& diagnoses,
                                          const std::vector<std::size_t>& interventions,
                                          const EmbeddingParams& params, PoolingMode mode) {
    if (diagnoses.empty()) throw config_error("embed_admission: empty diagnosis set");
    AdmissionEmbedding e;
    e.x = pool_columns(params.A, diagnoses, mode, &e.diag_trace);
    e.p = pool_columns(params.B, interventions, mode, &e.interv_trace);
    return e;
}

}  // namespace deepcare
