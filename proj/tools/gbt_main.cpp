#include "gbt/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

void add_common(CLI::App* cmd, gbt::RunConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "JSON config file; flags override it");
    cmd->add_option("--data", cfg.data_path, "input CSV file");
    cmd->add_option("--target", cfg.target_column, "target column name");
    cmd->add_option("--train-frac", cfg.train_fraction, "training fraction of the split");
    cmd->add_option("--seed", cfg.seed, "root seed; all phases derive from it");
    cmd->add_flag("--no-stratify", [&cfg](int64_t) { cfg.stratified = false; },
                  "disable stratified splitting");
    cmd->add_option("--family", [&cfg](const std::vector<std::string>& vals) {
                        cfg.families.clear();
                        for (const auto& v : vals)
                            cfg.families.push_back(gbt::family_from_name(v));
                        return true;
                    },
                    "family selection (adaboost|xgb|lgbm|catboost_like); repeatable");
    cmd->add_option("--beta", cfg.beta, "beta of the F_beta objective");
    cmd->add_option("--trials", cfg.n_trials, "tuner trials per family");
    cmd->add_option("--threshold", cfg.threshold, "classification threshold");
    cmd->add_option("--out", cfg.out_dir, "output directory");
    cmd->add_option("--protocol", [&cfg](const std::vector<std::string>& vals) {
                        cfg.protocol = vals.at(0) == "holdout" ? gbt::Protocol::holdout
                                                               : gbt::Protocol::paper;
                        return vals.at(0) == "holdout" || vals.at(0) == "paper";
                    },
                    "tuning protocol: paper (test-set objective) or holdout");
}

// Flags override the config file, so parse twice: first pass finds --config,
// second pass reapplies flags on top of the loaded file.
int run(int argc, char** argv) {
    gbt::RunConfig cfg;
    std::string config_path;
    std::string model_path;
    std::string manifest_path;

    CLI::App app{"gradient-boosting breast-cancer classification toolkit"};
    app.require_subcommand(1);

    auto* inspect = app.add_subcommand("inspect", "dataset summary, class counts, "
                                                  "histograms, Spearman matrix");
    auto* split = app.add_subcommand("split", "write the train/test split as CSV");
    auto* baseline = app.add_subcommand("baseline", "train and evaluate the untuned models");
    auto* tune = app.add_subcommand("tune", "TPE search maximizing F_beta, then retrain best");
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a saved model on the test split");
    auto* explain = app.add_subcommand("explain", "per-instance SHAP attributions and "
                                                  "global importance for a saved model");
    auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");

    for (CLI::App* c : {inspect, split, baseline, tune, evaluate, explain})
        add_common(c, cfg, config_path);
    evaluate->add_option("model", model_path, "model JSON file")->required();
    explain->add_option("model", model_path, "model JSON file")->required();
    replay->add_option("manifest", manifest_path, "manifest.json from a previous run")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        gbt::CommandResult res;
        if (replay->parsed()) {
            res = gbt::replay_manifest(manifest_path);
        } else {
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                if (!in) throw std::runtime_error("cannot open config " + config_path);
                std::stringstream ss;
                ss << in.rdbuf();
                cfg = gbt::RunConfig::from_json(ss.str());
                // re-parse so explicit flags win over the file
                app.clear();
                app.parse(argc, argv);
            }
            if (cfg.data_path.empty())
                throw std::runtime_error("--data (or a config file) is required");

            if (inspect->parsed()) res = gbt::cmd_inspect(cfg);
            else if (split->parsed()) res = gbt::cmd_split(cfg);
            else if (baseline->parsed()) res = gbt::cmd_baseline(cfg);
            else if (tune->parsed()) res = gbt::cmd_tune(cfg);
            else if (evaluate->parsed()) res = gbt::cmd_evaluate(cfg, model_path);
            else if (explain->parsed()) res = gbt::cmd_explain(cfg, model_path);
        }
        for (const auto& m : res.messages) std::cout << m << "\n";
        return res.ok ? 0 : 1;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) { return run(argc, argv); }
