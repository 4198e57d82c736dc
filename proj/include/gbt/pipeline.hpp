#pragma once

#include "gbt/dataset.hpp"
#include "gbt/ensemble.hpp"
#include "gbt/explain.hpp"
#include "gbt/metrics.hpp"
#include "gbt/tpe.hpp"

#include <string>
#include <vector>

namespace gbt {

enum class Protocol { paper, holdout };

struct RunConfig {
    std::string data_path;
    std::string target_column = "target";
    double train_fraction = 0.65;
    uint64_t seed = 42;
    bool stratified = true;
    std::vector<Family> families = {Family::adaboost, Family::xgb, Family::lgbm,
                                    Family::catboost_like};
    double beta = 2.7;
    int n_trials = 300;
    double threshold = 0.5;
    std::string out_dir = "out";
    Protocol protocol = Protocol::paper;

    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
};

// Pinned per-family training defaults used by the baseline phase.
BoostParams baseline_params(Family family, uint64_t seed);

// Per-family hyperparameter spaces for the tuner.
tpe::SearchSpace default_space(Family family);

// Map a trial's parameter assignment onto BoostParams. Throws when the
// assignment is infeasible (the GOSS a+b constraint), failing the trial.
BoostParams params_from_trial(Family family, const tpe::Params& params, uint64_t seed);

Ensemble train_family(const Dataset& train, Family family, const BoostParams& p);

struct CommandResult {
    bool ok = true;
    std::vector<std::string> messages;
};

CommandResult cmd_inspect(const RunConfig& cfg);
CommandResult cmd_split(const RunConfig& cfg);
CommandResult cmd_baseline(const RunConfig& cfg);
CommandResult cmd_tune(const RunConfig& cfg);
CommandResult cmd_evaluate(const RunConfig& cfg, const std::string& model_path);
CommandResult cmd_explain(const RunConfig& cfg, const std::string& model_path);

// Re-run the command recorded in a manifest file.
CommandResult replay_manifest(const std::string& manifest_path);

void write_manifest(const RunConfig& cfg, const std::string& command);

} // namespace gbt
