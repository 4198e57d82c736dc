#include "gbt/pipeline.hpp"
#include "gbt/rng.hpp"

#include <json.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gbt {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string protocol_name(Protocol p) {
    return p == Protocol::paper ? "paper" : "holdout";
}

Protocol protocol_from_name(const std::string& s) {
    if (s == "paper") return Protocol::paper;
    if (s == "holdout") return Protocol::holdout;
    throw std::runtime_error("unknown protocol: " + s);
}

} // namespace

std::string RunConfig::to_json() const {
    ordered_json j;
    j["data"] = data_path;
    j["target"] = target_column;
    j["train_fraction"] = train_fraction;
    j["seed"] = seed;
    j["stratified"] = stratified;
    std::vector<std::string> fams;
    for (Family f : families) fams.push_back(family_name(f));
    j["families"] = fams;
    j["beta"] = beta;
    j["n_trials"] = n_trials;
    j["threshold"] = threshold;
    j["out"] = out_dir;
    j["protocol"] = protocol_name(protocol);
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    auto j = ordered_json::parse(text);
    RunConfig c;
    c.data_path = j.at("data").get<std::string>();
    c.target_column = j.value("target", std::string("target"));
    c.train_fraction = j.value("train_fraction", 0.65);
    c.seed = j.value("seed", uint64_t{42});
    c.stratified = j.value("stratified", true);
    if (j.contains("families")) {
        c.families.clear();
        for (const auto& f : j.at("families"))
            c.families.push_back(family_from_name(f.get<std::string>()));
    }
    c.beta = j.value("beta", 2.7);
    c.n_trials = j.value("n_trials", 300);
    c.threshold = j.value("threshold", 0.5);
    c.out_dir = j.value("out", std::string("out"));
    c.protocol = protocol_from_name(j.value("protocol", std::string("paper")));
    return c;
}

BoostParams baseline_params(Family family, uint64_t seed) {
    BoostParams p;
    p.seed = seed;
    switch (family) {
        case Family::adaboost:
            p.n_stages = 50;
            p.growth.max_depth = 1;  // stumps
            break;
        case Family::xgb:
            p.n_stages = 100;
            p.eta = 0.1;
            p.growth.max_depth = 3;
            p.growth.lambda = 1.0;
            break;
        case Family::lgbm:
            p.n_stages = 100;
            p.eta = 0.1;
            p.growth.max_depth = 12;
            p.growth.max_leaves = 31;
            p.growth.lambda = 1.0;
            p.goss_a = 0.2;
            p.goss_b = 0.1;
            break;
        case Family::catboost_like:
            p.n_stages = 100;
            p.eta = 0.1;
            p.growth.max_depth = 6;
            p.growth.lambda = 1.0;
            p.ordered = false;
            break;
    }
    return p;
}

tpe::SearchSpace default_space(Family family) {
    tpe::SearchSpace sp;
    sp.add_int_uniform("n_stages", 30, 300);
    if (family == Family::adaboost) {
        sp.add_int_uniform("max_depth", 1, 4);
        sp.add_int_uniform("min_samples_leaf", 1, 10);
        return sp;
    }
    sp.add_log_uniform("eta", 0.02, 0.3);
    sp.add_log_uniform("lambda", 1e-3, 10.0);
    sp.add_uniform("gamma", 0.0, 2.0);
    sp.add_int_uniform("min_samples_leaf", 1, 10);
    switch (family) {
        case Family::xgb:
            sp.add_int_uniform("max_depth", 2, 8);
            break;
        case Family::lgbm:
            sp.add_int_uniform("max_depth", 3, 12);
            sp.add_int_uniform("max_leaves", 4, 64);
            sp.add_uniform("goss_a", 0.05, 0.5);
            sp.add_uniform("goss_b", 0.05, 0.5);
            break;
        case Family::catboost_like:
            sp.add_int_uniform("max_depth", 2, 8);
            sp.add_categorical("ordered", {"false", "true"});
            break;
        default:
            break;
    }
    return sp;
}

BoostParams params_from_trial(Family family, const tpe::Params& params, uint64_t seed) {
    BoostParams p = baseline_params(family, seed);
    auto get = [&](const char* name) { return params.at(name); };
    p.n_stages = static_cast<int>(tpe::as_int(get("n_stages")));
    p.growth.min_samples_leaf = static_cast<int>(tpe::as_int(get("min_samples_leaf")));
    if (family == Family::adaboost) {
        p.growth.max_depth = static_cast<int>(tpe::as_int(get("max_depth")));
        return p;
    }
    p.eta = tpe::as_double(get("eta"));
    p.growth.lambda = tpe::as_double(get("lambda"));
    p.growth.gamma = tpe::as_double(get("gamma"));
    p.growth.max_depth = static_cast<int>(tpe::as_int(get("max_depth")));
    if (family == Family::lgbm) {
        p.growth.max_leaves = static_cast<int>(tpe::as_int(get("max_leaves")));
        p.goss_a = tpe::as_double(get("goss_a"));
        p.goss_b = tpe::as_double(get("goss_b"));
        if (p.goss_a + p.goss_b > 1.0)
            throw std::runtime_error("infeasible GOSS parameters (a + b > 1)");
    }
    if (family == Family::catboost_like)
        p.ordered = tpe::as_string(get("ordered")) == "true";
    return p;
}

Ensemble train_family(const Dataset& train, Family family, const BoostParams& p) {
    if (family == Family::adaboost) return train_adaboost(train, p);
    return train_gradient(train, p, family);
}

namespace {

std::pair<Dataset, Dataset> load_and_split(const RunConfig& cfg, Dataset* full = nullptr) {
    Dataset ds = load_csv(cfg.data_path, cfg.target_column);
    SplitSpec spec{cfg.train_fraction, cfg.seed, cfg.stratified};
    auto split = stratified_split(ds, spec);
    if (full) *full = std::move(ds);
    return split;
}

std::string dataset_to_csv(const Dataset& ds, const std::string& target_column) {
    std::string out;
    for (const auto& n : ds.feature_names) out += n + ",";
    out += target_column + "\n";
    for (size_t r = 0; r < ds.n_rows; ++r) {
        for (size_t c = 0; c < ds.n_cols; ++c) out += fmt(ds.at(r, c)) + ",";
        out += std::to_string(ds.labels[r]) + "\n";
    }
    return out;
}

std::string roc_to_csv(const RocCurve& roc) {
    std::string out = "threshold,fpr,tpr\n";
    for (const auto& pt : roc.points)
        out += fmt(pt.threshold) + "," + fmt(pt.fpr) + "," + fmt(pt.tpr) + "\n";
    return out;
}

ordered_json eval_to_json_obj(const EvalReport& r) {
    return ordered_json::parse(eval_report_to_json(r));
}

void write_eval_outputs(const fs::path& dir, const std::string& stem,
                        const EvalReport& report) {
    write_file(dir / (stem + ".json"), eval_report_to_json(report) + "\n");
    write_file(dir / ("roc_" + stem + ".csv"), roc_to_csv(report.roc));
}

} // namespace

void write_manifest(const RunConfig& cfg, const std::string& command) {
    fs::create_directories(cfg.out_dir);
    ordered_json j;
    j["tool"] = "gbt";
    j["model_format_version"] = 1;
    j["command"] = command;
    j["config"] = ordered_json::parse(cfg.to_json());
    write_file(fs::path(cfg.out_dir) / "manifest.json", j.dump(2) + "\n");
}

CommandResult cmd_inspect(const RunConfig& cfg) {
    CommandResult res;
    Dataset ds = load_csv(cfg.data_path, cfg.target_column);
    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    auto counts = ds.class_counts();
    ordered_json cj;
    cj["n_rows"] = ds.n_rows;
    cj["n_cols"] = ds.n_cols;
    cj["class_counts"] = {{"0", counts[0]}, {"1", counts[1]}};
    write_file(dir / "class_counts.json", cj.dump(2) + "\n");

    auto summaries = summarize(ds);
    std::string sc = "feature,min,max,mean,median\n";
    ordered_json sj = ordered_json::array();
    for (const auto& s : summaries) {
        sc += s.name + "," + fmt(s.min) + "," + fmt(s.max) + "," + fmt(s.mean) + "," +
              fmt(s.median) + "\n";
        sj.push_back({{"feature", s.name},
                      {"min", s.min},
                      {"max", s.max},
                      {"mean", s.mean},
                      {"median", s.median}});
    }
    write_file(dir / "summary.csv", sc);
    write_file(dir / "summary.json", sj.dump(2) + "\n");

    std::string hc = "feature,class,bin,count\n";
    for (const auto& s : summaries) {
        for (size_t b = 0; b < s.hist_class0.size(); ++b)
            hc += s.name + ",0," + std::to_string(b) + "," +
                  std::to_string(s.hist_class0[b]) + "\n";
        for (size_t b = 0; b < s.hist_class1.size(); ++b)
            hc += s.name + ",1," + std::to_string(b) + "," +
                  std::to_string(s.hist_class1[b]) + "\n";
    }
    write_file(dir / "histograms.csv", hc);

    auto rho = spearman_matrix(ds);
    std::string rc = "feature";
    for (const auto& n : ds.feature_names) rc += "," + n;
    rc += "\n";
    ordered_json rj = ordered_json::array();
    for (size_t a = 0; a < ds.n_cols; ++a) {
        rc += ds.feature_names[a];
        ordered_json row = ordered_json::array();
        for (size_t b = 0; b < ds.n_cols; ++b) {
            double v = rho[a * ds.n_cols + b];
            rc += "," + (std::isnan(v) ? std::string("nan") : fmt(v));
            row.push_back(std::isnan(v) ? ordered_json(nullptr) : ordered_json(v));
        }
        rc += "\n";
        rj.push_back(std::move(row));
    }
    write_file(dir / "spearman.csv", rc);
    write_file(dir / "spearman.json", rj.dump() + "\n");

    write_manifest(cfg, "inspect");
    res.messages.push_back("inspect: " + std::to_string(ds.n_rows) + " rows, " +
                           std::to_string(ds.n_cols) + " features");
    return res;
}

CommandResult cmd_split(const RunConfig& cfg) {
    CommandResult res;
    auto [train, test] = load_and_split(cfg);
    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_file(dir / "train.csv", dataset_to_csv(train, cfg.target_column));
    write_file(dir / "test.csv", dataset_to_csv(test, cfg.target_column));
    write_manifest(cfg, "split");
    res.messages.push_back("split: train=" + std::to_string(train.n_rows) +
                           " test=" + std::to_string(test.n_rows));
    return res;
}

CommandResult cmd_baseline(const RunConfig& cfg) {
    CommandResult res;
    auto [train, test] = load_and_split(cfg);
    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    for (Family family : cfg.families) {
        std::string fam = family_name(family);
        try {
            BoostParams p = baseline_params(family, cfg.seed);
            Ensemble model = train_family(train, family, p);
            save_model(model, (dir / ("model_" + fam + ".json")).string());
            EvalReport report = evaluate(model, test, cfg.threshold, cfg.beta);
            write_eval_outputs(dir, "eval_" + fam, report);
            res.messages.push_back("baseline " + fam + ": auc=" + fmt(report.roc.auc) +
                                   " recall=" + fmt(report.recall));
        } catch (const std::exception& ex) {
            res.ok = false;
            res.messages.push_back("baseline " + fam + " FAILED: " + ex.what());
        }
    }
    write_manifest(cfg, "baseline");
    return res;
}

namespace {

struct TuneOutcome {
    tpe::Study study;
    Ensemble best_model;
    EvalReport best_report;
};

TuneOutcome tune_family(const RunConfig& cfg, Family family, const Dataset& train,
                        const Dataset& test, std::ostream* log) {
    // Objective data per protocol: "paper" tunes against the test split;
    // holdout carves a validation set out of the training split instead.
    Dataset obj_train = train, obj_eval = test;
    if (cfg.protocol == Protocol::holdout) {
        SplitSpec vs{0.75, derive_seed(cfg.seed, "holdout-" + family_name(family)), true};
        auto [tr, va] = stratified_split(train, vs);
        obj_train = std::move(tr);
        obj_eval = std::move(va);
    }

    uint64_t study_seed = derive_seed(cfg.seed, "tune-" + family_name(family));
    auto objective = [&](const tpe::Params& params) {
        BoostParams p = params_from_trial(family, params, study_seed);
        Ensemble model = train_family(obj_train, family, p);
        EvalReport r = evaluate(model, obj_eval, cfg.threshold, cfg.beta);
        if (!metric_defined(r.f_beta)) throw std::runtime_error("undefined f_beta");
        return r.f_beta;
    };

    auto on_trial = [&](const tpe::Trial& t) {
        if (log) *log << tpe::trial_to_json(t) << "\n";
    };

    TuneOutcome out;
    out.study = tpe::run_study(default_space(family), objective, cfg.n_trials,
                               study_seed, {}, on_trial);
    const tpe::Trial* best = out.study.best_trial();
    if (!best) throw std::runtime_error("no complete trials for " + family_name(family));

    BoostParams p = params_from_trial(family, best->params, study_seed);
    out.best_model = train_family(train, family, p);
    out.best_report = evaluate(out.best_model, test, cfg.threshold, cfg.beta);
    return out;
}

} // namespace

CommandResult cmd_tune(const RunConfig& cfg) {
    CommandResult res;
    auto [train, test] = load_and_split(cfg);
    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    std::string delta = "family,fn_baseline,fn_tuned,fbeta_baseline,fbeta_tuned,"
                        "auc_baseline,auc_tuned,recall_baseline,recall_tuned\n";
    for (Family family : cfg.families) {
        std::string fam = family_name(family);
        try {
            Ensemble baseline = train_family(train, family, baseline_params(family, cfg.seed));
            EvalReport base_report = evaluate(baseline, test, cfg.threshold, cfg.beta);

            std::ofstream log(dir / ("study_" + fam + ".jsonl"));
            TuneOutcome out = tune_family(cfg, family, train, test, &log);

            save_model(out.best_model, (dir / ("model_" + fam + "_tuned.json")).string());
            write_eval_outputs(dir, "eval_" + fam + "_tuned", out.best_report);

            ordered_json bj;
            bj["family"] = fam;
            bj["best_trial"] = out.study.best;
            bj["best_objective"] = out.study.best_trial()->objective;
            bj["n_trials"] = out.study.trials.size();
            bj["n_complete"] = out.study.n_complete();
            write_file(dir / ("study_" + fam + "_best.json"), bj.dump(2) + "\n");

            delta += fam + "," + std::to_string(base_report.cm.fn) + "," +
                     std::to_string(out.best_report.cm.fn) + "," +
                     fmt(base_report.f_beta) + "," + fmt(out.best_report.f_beta) + "," +
                     fmt(base_report.roc.auc) + "," + fmt(out.best_report.roc.auc) + "," +
                     fmt(base_report.recall) + "," + fmt(out.best_report.recall) + "\n";
            res.messages.push_back("tune " + fam + ": fbeta " + fmt(base_report.f_beta) +
                                   " -> " + fmt(out.best_report.f_beta));
        } catch (const std::exception& ex) {
            res.ok = false;
            res.messages.push_back("tune " + fam + " FAILED: " + ex.what());
        }
    }
    write_file(dir / "delta.csv", delta);
    write_manifest(cfg, "tune");
    return res;
}

CommandResult cmd_evaluate(const RunConfig& cfg, const std::string& model_path) {
    CommandResult res;
    auto [train, test] = load_and_split(cfg);
    (void)train;
    Ensemble model = load_model(model_path);
    EvalReport report = evaluate(model, test, cfg.threshold, cfg.beta);
    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_eval_outputs(dir, "eval", report);
    write_manifest(cfg, "evaluate " + model_path);
    res.messages.push_back("evaluate: auc=" + fmt(report.roc.auc) +
                           " recall=" + fmt(report.recall));
    return res;
}

CommandResult cmd_explain(const RunConfig& cfg, const std::string& model_path) {
    CommandResult res;
    auto [train, test] = load_and_split(cfg);
    (void)train;
    Ensemble model = load_model(model_path);
    if (model.n_features != test.n_cols)
        throw std::runtime_error("model/dataset dimension mismatch");

    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    std::string ac = "instance,base_value";
    for (const auto& n : model.feature_names) ac += ",phi " + n;
    ac += ",margin,local_accuracy_err\n";
    double worst = 0.0;
    for (size_t r = 0; r < test.n_rows; ++r) {
        auto a = shap_tree(model, {test.row(r), test.n_cols});
        double margin = model.predict_margin({test.row(r), test.n_cols});
        double sum = a.base_value;
        for (double phi : a.phi) sum += phi;
        double err = std::abs(sum - margin);
        worst = std::max(worst, err);
        ac += std::to_string(r) + "," + fmt(a.base_value);
        for (double phi : a.phi) ac += "," + fmt(phi);
        ac += "," + fmt(margin) + "," + fmt(err) + "\n";
    }
    write_file(dir / "attributions.csv", ac);

    auto gi = global_importance(model, test);
    std::string gc = "rank,feature,mean_abs_phi\n";
    for (size_t i = 0; i < gi.ranking.size(); ++i) {
        size_t f = gi.ranking[i];
        gc += std::to_string(i) + "," + model.feature_names[f] + "," +
              fmt(gi.mean_abs_phi[f]) + "\n";
    }
    write_file(dir / "global_importance.csv", gc);

    write_manifest(cfg, "explain " + model_path);
    res.ok = worst <= 1e-6;
    res.messages.push_back("explain: worst local-accuracy error " + fmt(worst));
    return res;
}

CommandResult replay_manifest(const std::string& manifest_path) {
    auto j = ordered_json::parse(read_file(manifest_path));
    RunConfig cfg = RunConfig::from_json(j.at("config").dump());
    std::string command = j.at("command").get<std::string>();
    std::istringstream ss(command);
    std::string verb, arg;
    ss >> verb;
    std::getline(ss, arg);
    if (!arg.empty() && arg.front() == ' ') arg.erase(0, 1);
    if (verb == "inspect") return cmd_inspect(cfg);
    if (verb == "split") return cmd_split(cfg);
    if (verb == "baseline") return cmd_baseline(cfg);
    if (verb == "tune") return cmd_tune(cfg);
    if (verb == "evaluate") return cmd_evaluate(cfg, arg);
    if (verb == "explain") return cmd_explain(cfg, arg);
    throw std::runtime_error("manifest has unknown command: " + verb);
}

} // namespace gbt
