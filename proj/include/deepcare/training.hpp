#pragma once

// Optimization protocol: shuffled minibatch SGD with L2 on weight matrices,
// the halving learning-rate schedule with growing patience, the three-site
// dropout scheme, auxiliary-task pretraining and versioned binary
// checkpoints.

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "deepcare/gradients.hpp"
#include "deepcare/network.hpp"

namespace deepcare {

struct TrainConfig {
    std::size_t batch_size = 16;
    double lr_init = 0.01;
    double lr_floor = 0.0001;
    std::size_t n_epoch_max = 200;
    int n_wait_init = 5;
    int n_wait_cap = 15;
    int n_wait_step = 2;
    double improve_tol = 1e-6;  // "smaller training cost" tolerance
    double l2_lambda = 1e-4;    // weight matrices only, never biases
    double p_code = 0.9;        // keep-probabilities
    double p_feat = 0.9;
    double p_in = 0.8;
    double p_hidd = 0.8;
    double init_scale = 0.05;
    std::uint64_t seed = 1;
    int threads = 1;

    DropoutConfig dropout() const { return DropoutConfig{p_code, p_feat, p_in, p_hidd}; }
};

inline void validate_train_config(const TrainConfig& tc) {
    if (tc.batch_size == 0) throw config_error("train: batch_size must be positive");
    if (!(tc.lr_floor < tc.lr_init)) throw config_error("train: lr_floor must be < lr_init");
    if (tc.n_wait_init <= 0) throw config_error("train: n_wait_init must be positive");
    validate_dropout(tc.dropout());
}

// Halving schedule with growing patience: after n_wait consecutive
// non-improving epochs, lr /= 2 and n_wait <- min(cap, n_wait + step).
// Training stops once lr drops below lr_floor (or at the epoch cap, which the
// caller enforces).
struct LrSchedule {
    double lr;
    int n_wait;
    int stall = 0;
    double best = std::numeric_limits<double>::infinity();

    double lr_floor;
    int n_wait_cap;
    int n_wait_step;
    double tol;

    explicit LrSchedule(const TrainConfig& tc)
        : lr(tc.lr_init),
          n_wait(tc.n_wait_init),
          lr_floor(tc.lr_floor),
          n_wait_cap(tc.n_wait_cap),
          n_wait_step(tc.n_wait_step),
          tol(tc.improve_tol) {}

    void step(bool improved) {
        if (improved) {
            stall = 0;
            return;
        }
        if (++stall >= n_wait) {
            lr *= 0.5;
            n_wait = std::min(n_wait_cap, n_wait + n_wait_step);
            stall = 0;
        }
    }

    void observe(double train_loss) {
        const bool improved = train_loss < best - tol;
        if (improved) best = train_loss;
        step(improved);
    }

    bool stopped() const { return lr < lr_floor; }
};

// Whether a record can contribute a training loss for the task.
inline bool trainable(const PatientRecord& r, const ModelConfig& cfg) {
    switch (cfg.task) {
        case TaskKind::Risk:
            return r.prediction_point.has_value() && r.risk_label.has_value();
        case TaskKind::NextDiagnosis:
            return r.admissions.size() >= 2;
        case TaskKind::CurrentIntervention:
        case TaskKind::PretrainAux:
            for (const auto& a : r.admissions)
                if (!a.interventions.empty()) return true;
            return cfg.task == TaskKind::PretrainAux && r.admissions.size() >= 2;
    }
    return false;
}

inline std::vector<PatientRecord> filter_trainable(const std::vector<PatientRecord>& rs,
                                                   const ModelConfig& cfg) {
    std::vector<PatientRecord> out;
    for (const auto& r : rs)
        if (trainable(r, cfg)) out.push_back(r);
    return out;
}

// theta <- theta - lr * (grad / batch + l2 * theta); L2 skips biases.
inline void apply_update(Params& params, const Params& grads, const ModelConfig& cfg, double lr,
                         double l2, std::size_t batch_size) {
    std::vector<Vec*> pt;
    std::vector<std::pair<const Vec*, bool>> gt;
    for_each_tensor(params, cfg, [&](const char*, bool, Vec& v) { pt.push_back(&v); });
    for_each_tensor(const_cast<Params&>(grads), cfg,
                    [&](const char*, bool is_bias, Vec& v) { gt.push_back({&v, is_bias}); });
    const double inv_b = 1.0 / static_cast<double>(batch_size);
    for (std::size_t j = 0; j < pt.size(); ++j) {
        Vec& theta = *pt[j];
        const Vec& g = *gt[j].first;
        const double decay = gt[j].second ? 0.0 : l2;
        for (std::size_t e = 0; e < theta.size(); ++e)
            theta[e] -= lr * (g[e] * inv_b + decay * theta[e]);
    }
}

namespace detail {

struct SeqResult {
    double loss = 0.0;
    GradStore grads;
};

inline SeqResult seq_forward_backward(const Model& m, const PatientRecord& rec,
                                      const TrainConfig& tc, std::uint64_t epoch,
                                      std::uint64_t position) {
    // Per-(epoch, position) dropout substream: results do not depend on the
    // thread count.
    Rng rng(Rng::mix(tc.seed ^ 0xD80F00DULL, epoch, position));
    const std::size_t end =
        m.cfg.task == TaskKind::Risk ? risk_end_index(rec) : rec.admissions.size() - 1;
    const DropoutPlan plan = sample_dropout_plan(rec, end, m.cfg, tc.dropout(), rng);
    SeqResult out;
    Tape tape;
    out.loss = forward_loss(m, rec, tape, &plan);
    out.grads = backward(m, rec, tape, &plan);
    return out;
}

}  // namespace detail

// One pass over the training set: shuffled minibatches, forward/backward per
// sequence (optionally fanned out over threads, reduced in sequence order),
// one parameter update per batch. Returns the mean per-sequence loss.
inline double sgd_epoch(const std::vector<PatientRecord>& train_set, Model& model,
                        const TrainConfig& tc, double lr, std::uint64_t epoch) {
    if (train_set.empty()) throw config_error("sgd_epoch: empty training set");
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(Rng::mix(tc.seed ^ 0x5113FF1EULL, epoch));
    shuffle_rng.shuffle(order);

    double total_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
        const std::size_t bsz = std::min(tc.batch_size, order.size() - start);
        std::vector<detail::SeqResult> results(bsz);
        auto run = [&](std::size_t lo, std::size_t hi) {
            for (std::size_t b = lo; b < hi; ++b) {
                results[b] = detail::seq_forward_backward(model, train_set[order[start + b]], tc,
                                                          epoch, start + b);
            }
        };
        if (tc.threads <= 1 || bsz == 1) {
            run(0, bsz);
        } else {
            const std::size_t nt = std::min<std::size_t>(tc.threads, bsz);
            std::vector<std::thread> pool;
            const std::size_t chunk = (bsz + nt - 1) / nt;
            for (std::size_t t = 0; t < nt; ++t)
                pool.emplace_back(run, t * chunk, std::min(bsz, (t + 1) * chunk));
            for (auto& th : pool) th.join();
        }
        GradStore batch_grads = zero_params_like(model);
        double batch_loss_sum = 0.0;
        for (std::size_t b = 0; b < bsz; ++b) {
            batch_loss_sum += results[b].loss;
            params_axpy(batch_grads, results[b].grads, model.cfg);
        }
        if (!std::isfinite(batch_loss_sum)) {
            std::ostringstream msg;
            msg << "sgd_epoch: non-finite loss in epoch " << epoch << ", batch at position "
                << start << " (lr=" << lr << "); record ids:";
            for (std::size_t b = 0; b < bsz; ++b)
                msg << " " << train_set[order[start + b]].patient_id;
            throw std::runtime_error(msg.str());
        }
        total_loss += batch_loss_sum;
        apply_update(model.params, batch_grads, model.cfg, lr, tc.l2_lambda, bsz);
    }
    return total_loss / static_cast<double>(train_set.size());
}

inline double mean_eval_loss(const Model& m, const std::vector<PatientRecord>& records) {
    if (records.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    Tape tape;
    for (const auto& r : records) total += forward_loss(m, r, tape, nullptr);
    return total / static_cast<double>(records.size());
}

struct EpochStat {
    std::size_t epoch;
    double train_loss;
    double valid_loss;
    double lr;
    int n_wait;
};

struct TrainResult {
    Model model;  // parameters of the best validation epoch
    std::vector<EpochStat> history;
    double best_valid = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::uint64_t rng_state = 0;
};

inline void write_metrics_line(std::ostream& os, const EpochStat& s) {
    os << s.epoch << " " << std::setprecision(17) << s.train_loss << " " << s.valid_loss << " "
       << s.lr << " " << s.n_wait << "\n";
}

// Full run: schedule driven by training cost, model selection by validation
// loss (training loss when no validation split is given).
inline TrainResult train_model(const std::vector<PatientRecord>& train_in,
                               const std::vector<PatientRecord>& valid_in, Model model,
                               const TrainConfig& tc, std::ostream* metrics = nullptr) {
    validate_train_config(tc);
    const auto train_set = filter_trainable(train_in, model.cfg);
    const auto valid_set = filter_trainable(valid_in, model.cfg);
    if (train_set.empty()) throw config_error("train: no trainable records for this task");

    LrSchedule sched(tc);
    TrainResult res;
    res.model = model;
    Params best_params = model.params;

    for (std::size_t epoch = 1; epoch <= tc.n_epoch_max; ++epoch) {
        const double train_loss = sgd_epoch(train_set, model, tc, sched.lr, epoch);
        const double valid_loss =
            valid_set.empty() ? train_loss : mean_eval_loss(model, valid_set);
        sched.observe(train_loss);
        EpochStat st{epoch, train_loss, valid_loss, sched.lr, sched.n_wait};
        res.history.push_back(st);
        if (metrics) write_metrics_line(*metrics, st);
        if (valid_loss < res.best_valid) {
            res.best_valid = valid_loss;
            res.best_epoch = epoch;
            best_params = model.params;
        }
        if (sched.stopped()) break;
    }
    res.model.params = best_params;
    res.rng_state = Rng::mix(tc.seed, res.history.size());
    return res;
}

// ---------------------------------------------------------------------------
// Checkpoint: versioned binary container. Layout (all integers and floats
// little-endian):
//   magic "DCCKPT\0\0", u32 version,
//   model config (enums as u8, dims as u64, look-backs as f64 array),
//   train config, vocabulary (length-prefixed strings),
//   epoch u64, rng state u64, best validation loss f64,
//   tensors in declared order (u64 element count + f64 data each).

inline constexpr char kCheckpointMagic[8] = {'D', 'C', 'C', 'K', 'P', 'T', 0, 0};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    }
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
    if (!os) throw io_error("checkpoint: write failed");
}

template <class T>
T read_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) throw io_error("checkpoint: truncated file");
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    }
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_le<std::uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!os) throw io_error("checkpoint: write failed");
}

inline std::string read_string(std::istream& is) {
    const auto n = read_le<std::uint64_t>(is);
    if (n > (1ULL << 20)) throw io_error("checkpoint: implausible string length");
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw io_error("checkpoint: truncated file");
    return s;
}

}  // namespace detail

struct Checkpoint {
    Model model;
    TrainConfig train;
    std::uint64_t epoch = 0;
    std::uint64_t rng_state = 0;
    double best_valid = std::numeric_limits<double>::infinity();
};

inline void save_checkpoint(const Checkpoint& ck, std::ostream& os) {
    using namespace detail;
    os.write(kCheckpointMagic, 8);
    write_le<std::uint32_t>(os, kCheckpointVersion);
    const ModelConfig& cfg = ck.model.cfg;
    write_le<std::uint8_t>(os, static_cast<std::uint8_t>(cfg.cell));
    write_le<std::uint8_t>(os, static_cast<std::uint8_t>(cfg.pooling));
    write_le<std::uint8_t>(os, static_cast<std::uint8_t>(cfg.time_mode));
    write_le<std::uint8_t>(os, cfg.interventions ? 1 : 0);
    write_le<std::uint8_t>(os, static_cast<std::uint8_t>(cfg.task));
    write_le<std::uint8_t>(os, cfg.uniform_attention ? 1 : 0);
    write_le<std::uint64_t>(os, cfg.embed_dim);
    write_le<std::uint64_t>(os, cfg.hidden_dim);
    write_le<std::uint64_t>(os, cfg.head_hidden);
    write_le<std::uint64_t>(os, cfg.lookbacks_months.size());
    for (double lb : cfg.lookbacks_months) write_le<double>(os, lb);

    const TrainConfig& tc = ck.train;
    write_le<std::uint64_t>(os, tc.batch_size);
    write_le<double>(os, tc.lr_init);
    write_le<double>(os, tc.lr_floor);
    write_le<std::uint64_t>(os, tc.n_epoch_max);
    write_le<std::int32_t>(os, tc.n_wait_init);
    write_le<std::int32_t>(os, tc.n_wait_cap);
    write_le<std::int32_t>(os, tc.n_wait_step);
    write_le<double>(os, tc.improve_tol);
    write_le<double>(os, tc.l2_lambda);
    write_le<double>(os, tc.p_code);
    write_le<double>(os, tc.p_feat);
    write_le<double>(os, tc.p_in);
    write_le<double>(os, tc.p_hidd);
    write_le<double>(os, tc.init_scale);
    write_le<std::uint64_t>(os, tc.seed);
    write_le<std::int32_t>(os, tc.threads);

    const Vocabulary& vocab = ck.model.vocab;
    write_le<std::uint64_t>(os, vocab.diagnosis_codes.size());
    for (const auto& s : vocab.diagnosis_codes) write_string(os, s);
    write_le<std::uint64_t>(os, vocab.intervention_codes.size());
    for (const auto& s : vocab.intervention_codes) write_string(os, s);

    write_le<std::uint64_t>(os, ck.epoch);
    write_le<std::uint64_t>(os, ck.rng_state);
    write_le<double>(os, ck.best_valid);

    for_each_tensor(const_cast<Params&>(ck.model.params), cfg,
                    [&](const char*, bool, Vec& data) {
                        write_le<std::uint64_t>(os, data.size());
                        for (double v : data) write_le<double>(os, v);
                    });
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write '" + path + "'");
    save_checkpoint(ck, os);
}

inline Checkpoint load_checkpoint(std::istream& is) {
    using namespace detail;
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw io_error("checkpoint: bad magic (not a checkpoint file)");
    const auto version = read_le<std::uint32_t>(is);
    if (version != kCheckpointVersion)
        throw io_error("checkpoint: version " + std::to_string(version) +
                       " not supported (expected " + std::to_string(kCheckpointVersion) + ")");

    Checkpoint ck;
    ModelConfig cfg;
    cfg.cell = static_cast<CellKind>(read_le<std::uint8_t>(is));
    cfg.pooling = static_cast<PoolingMode>(read_le<std::uint8_t>(is));
    cfg.time_mode = static_cast<TimeMode>(read_le<std::uint8_t>(is));
    cfg.interventions = read_le<std::uint8_t>(is) != 0;
    cfg.task = static_cast<TaskKind>(read_le<std::uint8_t>(is));
    cfg.uniform_attention = read_le<std::uint8_t>(is) != 0;
    cfg.embed_dim = read_le<std::uint64_t>(is);
    cfg.hidden_dim = read_le<std::uint64_t>(is);
    cfg.head_hidden = read_le<std::uint64_t>(is);
    cfg.lookbacks_months.resize(read_le<std::uint64_t>(is));
    for (double& lb : cfg.lookbacks_months) lb = read_le<double>(is);

    TrainConfig tc;
    tc.batch_size = read_le<std::uint64_t>(is);
    tc.lr_init = read_le<double>(is);
    tc.lr_floor = read_le<double>(is);
    tc.n_epoch_max = read_le<std::uint64_t>(is);
    tc.n_wait_init = read_le<std::int32_t>(is);
    tc.n_wait_cap = read_le<std::int32_t>(is);
    tc.n_wait_step = read_le<std::int32_t>(is);
    tc.improve_tol = read_le<double>(is);
    tc.l2_lambda = read_le<double>(is);
    tc.p_code = read_le<double>(is);
    tc.p_feat = read_le<double>(is);
    tc.p_in = read_le<double>(is);
    tc.p_hidd = read_le<double>(is);
    tc.init_scale = read_le<double>(is);
    tc.seed = read_le<std::uint64_t>(is);
    tc.threads = read_le<std::int32_t>(is);

    Vocabulary vocab;
    vocab.diagnosis_codes.resize(read_le<std::uint64_t>(is));
    for (auto& s : vocab.diagnosis_codes) s = read_string(is);
    vocab.intervention_codes.resize(read_le<std::uint64_t>(is));
    for (auto& s : vocab.intervention_codes) s = read_string(is);

    ck.epoch = read_le<std::uint64_t>(is);
    ck.rng_state = read_le<std::uint64_t>(is);
    ck.best_valid = read_le<double>(is);

    // Rebuild parameter shapes from the header, then fill from the stream and
    // validate the per-tensor element counts.
    Model shaped = init_model(cfg, vocab, 0, 0.0);
    for_each_tensor(shaped.params, cfg, [&](const char* name, bool, Vec& data) {
        const auto n = read_le<std::uint64_t>(is);
        if (n != data.size())
            throw io_error("checkpoint: tensor '" + std::string(name) + "' has " +
                           std::to_string(n) + " elements, expected " +
                           std::to_string(data.size()));
        for (double& v : data) v = read_le<double>(is);
    });
    ck.model = std::move(shaped);
    ck.train = tc;
    return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open '" + path + "'");
    return load_checkpoint(is);
}

// ---------------------------------------------------------------------------
// Pretraining: train the sequence-labeling objectives (next-admission
// diagnoses + current-admission interventions) on the bottom layer, then hand
// the learned embedding matrices to the risk model.

inline EmbeddingParams pretrain_auxiliary(const std::vector<PatientRecord>& train,
                                          const std::vector<PatientRecord>& valid,
                                          ModelConfig cfg, const Vocabulary& vocab,
                                          TrainConfig tc, std::size_t n_epochs,
                                          std::ostream* metrics = nullptr) {
    cfg.task = TaskKind::PretrainAux;
    Model model = init_model(cfg, vocab, tc.seed, tc.init_scale);
    if (n_epochs == 0) return model.params.emb;
    tc.n_epoch_max = n_epochs;
    TrainResult res = train_model(train, valid, std::move(model), tc, metrics);
    return res.model.params.emb;
}

}  // namespace deepcare
