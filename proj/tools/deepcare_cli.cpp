// Operator surface: generate / train / pretrain / predict / evaluate /
// gradcheck / inspect. Every subcommand accepts a flat key=value config file
// via --config (flags override it, defaults fill the rest) and prints the
// fully-resolved configuration before running.
//
// Exit codes: 0 ok, 1 runtime error, 2 usage error, 3 gradcheck tolerance
// failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "deepcare/deepcare.hpp"

namespace dc = deepcare;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitGradcheck = 3;

dc::CellKind parse_cell(const std::string& s) {
    if (s == "rnn") return dc::CellKind::PlainRnn;
    if (s == "lstm") return dc::CellKind::PlainLstm;
    if (s == "deepcare") return dc::CellKind::DeepCare;
    throw dc::config_error("unknown cell '" + s + "' (rnn|lstm|deepcare)");
}

dc::PoolingMode parse_pooling(const std::string& s) {
    if (s == "max") return dc::PoolingMode::MaxAdm;
    if (s == "sum") return dc::PoolingMode::SumAdm;
    if (s == "mean") return dc::PoolingMode::MeanAdm;
    throw dc::config_error("unknown pooling '" + s + "' (max|sum|mean)");
}

dc::TimeMode parse_time(const std::string& s) {
    if (s == "none") return dc::TimeMode::NoTime;
    if (s == "decay") return dc::TimeMode::Decay;
    if (s == "param") return dc::TimeMode::Parametric;
    throw dc::config_error("unknown time mode '" + s + "' (none|decay|param)");
}

dc::TaskKind parse_task(const std::string& s) {
    if (s == "risk") return dc::TaskKind::Risk;
    if (s == "progression") return dc::TaskKind::NextDiagnosis;
    if (s == "intervention") return dc::TaskKind::CurrentIntervention;
    throw dc::config_error("unknown task '" + s + "' (risk|progression|intervention)");
}

std::vector<double> parse_lookbacks(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "inf")
            out.push_back(dc::kInfLookback);
        else
            out.push_back(std::stod(tok));
    }
    if (out.empty()) throw dc::config_error("empty look-back list");
    return out;
}

void print_resolved(const CLI::App* sub) {
    std::cout << "# resolved config [" << sub->get_name() << "]\n";
    std::cout << sub->config_to_str(true, false);
    std::cout << "# end config\n";
}

struct ModelFlags {
    std::string cell = "deepcare";
    std::string pooling = "mean";
    std::string time = "param";
    std::string interventions = "on";
    std::string task = "risk";
    std::size_t M = 10, K = 20, D = 10;
    std::string lookbacks = "12,24,inf";
};

struct TrainFlags {
    std::size_t batch = 16;
    double lr = 0.01;
    double lr_floor = 0.0001;
    std::size_t epochs = 200;
    int wait = 5, wait_cap = 15, wait_step = 2;
    double l2 = 1e-4;
    double p_code = 0.9, p_feat = 0.9, p_in = 0.8, p_hidd = 0.8;
    double init_scale = 0.05;
    std::uint64_t seed = 1;
    std::uint64_t split_seed = 1;
    int threads = 1;
};

void add_model_flags(CLI::App* sub, ModelFlags& mf, bool with_task = true) {
    sub->add_option("--cell", mf.cell, "recurrent cell: rnn|lstm|deepcare");
    sub->add_option("--pooling", mf.pooling, "admission pooling: max|sum|mean");
    sub->add_option("--time", mf.time, "time mechanism: none|decay|param");
    sub->add_option("--interventions", mf.interventions, "intervention gating: on|off");
    if (with_task) sub->add_option("--task", mf.task, "risk|progression|intervention");
    sub->add_option("--M", mf.M, "embedding dimension");
    sub->add_option("--K", mf.K, "hidden dimension");
    sub->add_option("--D", mf.D, "risk-head hidden width (0 = direct logistic)");
    sub->add_option("--lookbacks", mf.lookbacks, "pooling look-backs in months, e.g. 12,24,inf");
}

void add_train_flags(CLI::App* sub, TrainFlags& tf) {
    sub->add_option("--batch", tf.batch, "minibatch size");
    sub->add_option("--lr", tf.lr, "initial learning rate");
    sub->add_option("--lr-floor", tf.lr_floor, "stop once lr falls below this");
    sub->add_option("--epochs", tf.epochs, "maximum epochs");
    sub->add_option("--wait", tf.wait, "initial patience (epochs)");
    sub->add_option("--wait-cap", tf.wait_cap, "patience ceiling");
    sub->add_option("--wait-step", tf.wait_step, "patience growth per halving");
    sub->add_option("--l2", tf.l2, "L2 constant (weights only)");
    sub->add_option("--p-code", tf.p_code, "code dropout keep-probability");
    sub->add_option("--p-feat", tf.p_feat, "feature dropout keep-probability");
    sub->add_option("--p-in", tf.p_in, "nnet input keep-probability");
    sub->add_option("--p-hidd", tf.p_hidd, "nnet hidden keep-probability");
    sub->add_option("--init-scale", tf.init_scale, "uniform init half-width");
    sub->add_option("--seed", tf.seed, "training seed");
    sub->add_option("--split-seed", tf.split_seed, "train/valid/test split seed");
    sub->add_option("--threads", tf.threads, "parallel sequences per batch (1 = bit-reproducible default)");
}

dc::ModelConfig make_model_config(const ModelFlags& mf) {
    dc::ModelConfig cfg;
    cfg.cell = parse_cell(mf.cell);
    cfg.pooling = parse_pooling(mf.pooling);
    cfg.time_mode = parse_time(mf.time);
    if (mf.interventions == "on")
        cfg.interventions = true;
    else if (mf.interventions == "off")
        cfg.interventions = false;
    else
        throw dc::config_error("--interventions must be on|off");
    cfg.task = parse_task(mf.task);
    cfg.embed_dim = mf.M;
    cfg.hidden_dim = mf.K;
    cfg.head_hidden = mf.D;
    cfg.lookbacks_months = parse_lookbacks(mf.lookbacks);
    return cfg;
}

dc::TrainConfig make_train_config(const TrainFlags& tf) {
    dc::TrainConfig tc;
    tc.batch_size = tf.batch;
    tc.lr_init = tf.lr;
    tc.lr_floor = tf.lr_floor;
    tc.n_epoch_max = tf.epochs;
    tc.n_wait_init = tf.wait;
    tc.n_wait_cap = tf.wait_cap;
    tc.n_wait_step = tf.wait_step;
    tc.l2_lambda = tf.l2;
    tc.p_code = tf.p_code;
    tc.p_feat = tf.p_feat;
    tc.p_in = tf.p_in;
    tc.p_hidd = tf.p_hidd;
    tc.init_scale = tf.init_scale;
    tc.seed = tf.seed;
    tc.threads = tf.threads;
    return tc;
}

int run_generate(const std::string& out_path, const dc::GeneratorConfig& gcfg) {
    dc::Dataset ds = dc::generate_cohort(gcfg);
    dc::save_jsonl(ds.records, ds.vocab, out_path);
    std::size_t labeled = 0, positives = 0;
    for (const auto& r : ds.records) {
        if (r.risk_label) {
            ++labeled;
            positives += static_cast<std::size_t>(*r.risk_label);
        }
    }
    std::cout << "wrote " << ds.records.size() << " patients to " << out_path << " ("
              << ds.vocab.n_diag() << " diagnosis codes, " << ds.vocab.n_interv()
              << " intervention codes, " << labeled << " labeled, " << positives
              << " positive)\n";
    return 0;
}

int run_train(const std::string& data_path, const std::string& out_path,
              const std::string& metrics_path, const ModelFlags& mf, const TrainFlags& tf,
              const std::string& init_emb_path, bool pretrain_mode,
              std::size_t pretrain_epochs) {
    dc::Dataset ds = dc::load_jsonl(data_path);
    dc::Split split = dc::split_dataset(ds.records, tf.split_seed);

    dc::ModelConfig cfg = make_model_config(mf);
    if (pretrain_mode) cfg.task = dc::TaskKind::PretrainAux;
    dc::TrainConfig tc = make_train_config(tf);

    dc::Model model = dc::init_model(cfg, ds.vocab, tc.seed, tc.init_scale);
    if (!init_emb_path.empty()) {
        dc::Checkpoint pre = dc::load_checkpoint(init_emb_path);
        if (pre.model.params.emb.A.rows != model.params.emb.A.rows ||
            pre.model.params.emb.A.cols != model.params.emb.A.cols)
            throw dc::config_error("--init-embeddings: embedding shape mismatch");
        model.params.emb.A = pre.model.params.emb.A;
        if (!model.params.emb.B.empty() && !pre.model.params.emb.B.empty())
            model.params.emb.B = pre.model.params.emb.B;
    }

    std::ostringstream metrics;
    if (pretrain_mode && pretrain_epochs > 0) tc.n_epoch_max = pretrain_epochs;
    dc::TrainResult res = dc::train_model(split.train, split.valid, std::move(model), tc, &metrics);

    dc::Checkpoint ck;
    ck.model = std::move(res.model);
    ck.train = tc;
    ck.epoch = res.history.size();
    ck.rng_state = res.rng_state;
    ck.best_valid = res.best_valid;
    dc::save_checkpoint(ck, out_path);

    if (!metrics_path.empty()) {
        std::ofstream mout(metrics_path, std::ios::binary);
        if (!mout) throw dc::io_error("cannot write '" + metrics_path + "'");
        mout << metrics.str();
    }
    std::cout << "trained " << res.history.size() << " epochs; best valid loss " << res.best_valid
              << " at epoch " << res.best_epoch << "; checkpoint written to " << out_path << "\n";
    return 0;
}

int run_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path, std::size_t k) {
    dc::Checkpoint ck = dc::load_checkpoint(model_path);
    dc::Dataset ds = dc::load_jsonl(data_path);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw dc::io_error("cannot write '" + out_path + "'");
    const dc::Model& m = ck.model;
    if (m.cfg.task == dc::TaskKind::Risk) {
        out << "# patient_id probability predicted_label\n";
        for (const auto& rec : ds.records) {
            if (!rec.prediction_point) continue;
            const double p = dc::risk_probability(m, rec);
            out << rec.patient_id << " " << p << " " << (p >= 0.5 ? 1 : 0) << "\n";
        }
    } else {
        const bool interv = m.cfg.task == dc::TaskKind::CurrentIntervention;
        const auto& names = interv ? m.vocab.intervention_codes : m.vocab.diagnosis_codes;
        out << "# patient_id step top_codes\n";
        for (const auto& rec : ds.records) {
            for (std::size_t t = 0; t < rec.admissions.size(); ++t) {
                const dc::Vec scores = dc::label_scores(m, rec, t);
                const auto top = dc::top_k_indices(scores, k);
                out << rec.patient_id << " " << t << " ";
                for (std::size_t i = 0; i < top.size(); ++i)
                    out << (i ? "," : "") << names[top[i]];
                out << "\n";
            }
        }
    }
    std::cout << "predictions written to " << out_path << "\n";
    return 0;
}

int run_evaluate(const std::string& model_path, const std::string& data_path,
                 const std::string& subset, std::uint64_t split_seed, double threshold,
                 bool markov_baseline, double markov_alpha, const std::string& relabel,
                 double horizon_months) {
    dc::Dataset ds = dc::load_jsonl(data_path);
    dc::Split split = dc::split_dataset(ds.records, split_seed);
    std::vector<dc::PatientRecord>* eval_set = &split.test;
    if (subset == "all")
        eval_set = &ds.records;
    else if (subset == "valid")
        eval_set = &split.valid;
    else if (subset != "test")
        throw dc::config_error("--subset must be test|valid|all");

    if (relabel != "none") {
        dc::Rng rng(dc::Rng::mix(split_seed, 0xAB5ULL));
        for (auto* set : {&split.train, &split.valid, eval_set}) {
            dc::choose_prediction_points(*set, horizon_months, rng);
            for (auto& r : *set)
                r.risk_label = relabel == "highrisk" ? dc::label_high_risk(r, horizon_months)
                                                     : dc::label_readmission(r, horizon_months);
        }
    }

    if (markov_baseline) {
        dc::MarkovModel mk = dc::fit_markov(split.train, ds.vocab.n_diag(), markov_alpha);
        dc::EvalReport rep = dc::evaluate_progression(dc::markov_scorer(mk), *eval_set);
        std::cout << rep.table() << rep.machine_lines();
        return 0;
    }

    dc::Checkpoint ck = dc::load_checkpoint(model_path);
    const dc::Model& m = ck.model;
    dc::EvalReport rep;
    switch (m.cfg.task) {
        case dc::TaskKind::Risk:
            rep = dc::evaluate_risk(m, *eval_set, threshold);
            break;
        case dc::TaskKind::NextDiagnosis:
            rep = dc::evaluate_progression(dc::model_scorer(m), *eval_set);
            break;
        case dc::TaskKind::CurrentIntervention:
            rep = dc::evaluate_progression(dc::model_scorer(m), *eval_set, {1, 2, 3}, true);
            break;
        default:
            throw dc::config_error("evaluate: checkpoint holds a pretraining model");
    }
    std::cout << rep.table() << rep.machine_lines();
    return 0;
}

int run_gradcheck(double h, double tolerance, bool verbose) {
    const dc::StandardGradCheck result = dc::run_standard_gradcheck(h);
    if (verbose)
        for (const auto& run : result.runs)
            std::cout << "config " << run.config << " worst=" << run.worst_rel_error << " ("
                      << run.worst_tensor << ")\n";
    std::cout << "gradcheck: " << result.runs.size() << " configurations, worst relative error "
              << result.worst << " (" << result.worst_config << "), tolerance " << tolerance
              << "\n";
    if (result.worst > tolerance) {
        std::cout << "gradcheck FAILED\n";
        return kExitGradcheck;
    }
    std::cout << "gradcheck OK\n";
    return 0;
}

int run_inspect(const std::string& model_path, const std::string& out_path, double dt_max,
                double dt_step) {
    dc::Checkpoint ck = dc::load_checkpoint(model_path);
    const dc::Model& m = ck.model;
    if (m.cfg.cell != dc::CellKind::DeepCare || m.cfg.time_mode != dc::TimeMode::Parametric)
        throw dc::config_error("inspect: checkpoint must hold a parametric-time model");
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw dc::io_error("cannot write '" + out_path + "'");
    out << "delta_days,channel,contribution\n";
    for (double dt = 0.0; dt <= dt_max; dt += dt_step) {
        const dc::Vec contrib =
            dc::forget_time_contribution(dt, m.params.cell.q_f, m.cfg.time_mode);
        for (std::size_t k = 0; k < contrib.size(); ++k)
            out << dt << "," << k << "," << contrib[k] << "\n";
    }
    std::cout << "forgetting curves written to " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DeepCare-style time-aware sequence models over coded admissions"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value config file; flags override");

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic cohort as JSONL");
    dc::GeneratorConfig gcfg;
    std::string gen_out = "cohort.jsonl";
    gen->add_option("--out", gen_out, "output JSONL path");
    gen->add_option("--patients", gcfg.n_patients, "number of patients");
    gen->add_option("--diag-codes", gcfg.n_diag_codes, "diagnosis vocabulary size");
    gen->add_option("--interv-codes", gcfg.n_interv_codes, "intervention vocabulary size");
    gen->add_option("--mean-admissions", gcfg.mean_admissions, "mean admissions per patient");
    gen->add_option("--gap-log-mu", gcfg.gap_log_mu, "log-normal mu of gaps (days)");
    gen->add_option("--gap-log-sigma", gcfg.gap_log_sigma, "log-normal sigma of gaps");
    gen->add_option("--base-hazard", gcfg.base_hazard, "baseline unplanned hazard");
    gen->add_option("--chronic-boost", gcfg.chronic_boost, "chronic hazard boost");
    gen->add_option("--acute-boost", gcfg.acute_boost, "acute hazard boost");
    gen->add_option("--acute-half-life", gcfg.acute_half_life_days, "acute decay half-life (days)");
    gen->add_option("--intervention-reduction", gcfg.intervention_reduction,
                    "hazard multiplier per intervention code");
    gen->add_option("--chronic-ramp-days", gcfg.chronic_ramp_days,
                    "complication emergence timescale (days)");
    gen->add_option("--horizon-months", gcfg.label_horizon_months, "label horizon (months)");
    gen->add_option("--seed", gcfg.seed, "generator seed");

    // train / pretrain
    ModelFlags train_mf;
    TrainFlags train_tf;
    std::string train_data, train_out = "model.ckpt", train_metrics, train_init_emb;
    auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
    train->add_option("--data", train_data, "input JSONL")->required();
    train->add_option("--out", train_out, "checkpoint path");
    train->add_option("--metrics", train_metrics, "per-epoch metrics log path");
    train->add_option("--init-embeddings", train_init_emb,
                      "checkpoint whose embedding matrices seed this run");
    add_model_flags(train, train_mf);
    add_train_flags(train, train_tf);

    ModelFlags pre_mf;
    TrainFlags pre_tf;
    std::string pre_data, pre_out = "pretrain.ckpt", pre_metrics;
    std::size_t pre_epochs = 30;
    auto* pretrain = app.add_subcommand(
        "pretrain", "train the auxiliary labeling tasks; checkpoint seeds later runs");
    pretrain->add_option("--data", pre_data, "input JSONL")->required();
    pretrain->add_option("--out", pre_out, "checkpoint path");
    pretrain->add_option("--metrics", pre_metrics, "per-epoch metrics log path");
    pretrain->add_option("--pretrain-epochs", pre_epochs, "epoch cap for pretraining");
    add_model_flags(pretrain, pre_mf, false);
    add_train_flags(pretrain, pre_tf);

    // predict
    std::string pred_model, pred_data, pred_out = "predictions.txt";
    std::size_t pred_k = 3;
    auto* predict = app.add_subcommand("predict", "per-patient probabilities or code rankings");
    predict->add_option("--model", pred_model, "checkpoint path")->required();
    predict->add_option("--data", pred_data, "input JSONL")->required();
    predict->add_option("--out", pred_out, "output path");
    predict->add_option("--k", pred_k, "codes per ranking line");

    // evaluate
    std::string eval_model, eval_data, eval_subset = "test", eval_relabel = "none";
    std::uint64_t eval_split_seed = 1;
    double eval_threshold = 0.5, eval_alpha = 0.1, eval_horizon = 12.0;
    bool eval_markov = false;
    auto* evaluate = app.add_subcommand("evaluate", "run task metrics on a data split");
    evaluate->add_option("--model", eval_model, "checkpoint path");
    evaluate->add_option("--data", eval_data, "input JSONL")->required();
    evaluate->add_option("--subset", eval_subset, "test|valid|all");
    evaluate->add_option("--split-seed", eval_split_seed, "split seed (match training)");
    evaluate->add_option("--threshold", eval_threshold, "positive-call threshold");
    evaluate->add_flag("--markov", eval_markov, "evaluate the Markov baseline instead");
    evaluate->add_option("--markov-alpha", eval_alpha, "Laplace smoothing");
    evaluate->add_option("--relabel", eval_relabel,
                         "none|readmission|highrisk: re-derive labels at fresh points");
    evaluate->add_option("--horizon-months", eval_horizon, "label horizon for --relabel");

    // gradcheck
    double gc_h = 1e-5, gc_tol = 1e-4;
    bool gc_verbose = false;
    auto* gradcheck =
        app.add_subcommand("gradcheck", "verify analytic gradients against central differences");
    gradcheck->add_option("--h", gc_h, "finite-difference step");
    gradcheck->add_option("--tolerance", gc_tol, "max relative error");
    gradcheck->add_flag("--verbose", gc_verbose, "print per-configuration results");

    // inspect
    std::string ins_model, ins_out = "forgetting.csv";
    double ins_dt_max = 2000.0, ins_dt_step = 10.0;
    auto* inspect =
        app.add_subcommand("inspect", "dump learned forgetting curves over a gap grid as CSV");
    inspect->add_option("--model", ins_model, "checkpoint path")->required();
    inspect->add_option("--out", ins_out, "CSV path");
    inspect->add_option("--dt-max", ins_dt_max, "largest gap (days)");
    inspect->add_option("--dt-step", ins_dt_step, "grid step (days)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            print_resolved(gen);
            return run_generate(gen_out, gcfg);
        }
        if (train->parsed()) {
            print_resolved(train);
            return run_train(train_data, train_out, train_metrics, train_mf, train_tf,
                             train_init_emb, false, 0);
        }
        if (pretrain->parsed()) {
            print_resolved(pretrain);
            return run_train(pre_data, pre_out, pre_metrics, pre_mf, pre_tf, "", true, pre_epochs);
        }
        if (predict->parsed()) {
            print_resolved(predict);
            return run_predict(pred_model, pred_data, pred_out, pred_k);
        }
        if (evaluate->parsed()) {
            print_resolved(evaluate);
            if (!eval_markov && eval_model.empty())
                throw dc::config_error("evaluate: --model is required unless --markov is set");
            return run_evaluate(eval_model, eval_data, eval_subset, eval_split_seed,
                                eval_threshold, eval_markov, eval_alpha, eval_relabel,
                                eval_horizon);
        }
        if (gradcheck->parsed()) {
            print_resolved(gradcheck);
            return run_gradcheck(gc_h, gc_tol, gc_verbose);
        }
        if (inspect->parsed()) {
            print_resolved(inspect);
            return run_inspect(ins_model, ins_out, ins_dt_max, ins_dt_step);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
