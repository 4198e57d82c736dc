#pragma once

#include "gbt/rng.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace gbt::tpe {

struct UniformParam {
    std::string name;
    double lo, hi;
};
struct LogUniformParam {
    std::string name;
    double lo, hi;  // lo > 0
};
struct IntUniformParam {
    std::string name;
    long lo, hi;
};
struct CategoricalParam {
    std::string name;
    std::vector<std::string> choices;
};

using ParamSpec =
    std::variant<UniformParam, LogUniformParam, IntUniformParam, CategoricalParam>;

struct SearchSpace {
    std::vector<ParamSpec> params;

    void add_uniform(std::string name, double lo, double hi);
    void add_log_uniform(std::string name, double lo, double hi);
    void add_int_uniform(std::string name, long lo, long hi);
    void add_categorical(std::string name, std::vector<std::string> choices);

    std::string to_json() const;
    static SearchSpace from_json(const std::string& text);
};

using ParamValue = std::variant<double, long, std::string>;
using Params = std::map<std::string, ParamValue>;

enum class TrialState { complete, failed };

struct Trial {
    int id = 0;
    Params params;
    double objective = 0.0;
    TrialState state = TrialState::complete;
};

struct TpeOptions {
    int n_startup = 10;
    double gamma = 0.25;       // top quantile forming the good set
    int n_candidates = 24;
    double bandwidth_floor_frac = 0.01;  // fraction of parameter range
};

struct Study {
    SearchSpace space;
    std::vector<Trial> trials;
    int best = -1;  // trial id; earliest wins ties
    uint64_t seed = 0;
    TpeOptions options;

    const Trial* best_trial() const;
    size_t n_complete() const;
};

// Next parameter assignment: prior sampling during startup, then per-parameter
// Parzen good/bad density ratio maximization over n_candidates draws from the
// good density. Deterministic given (study state, seed).
Params suggest(const Study& study, Rng& rng);

using Objective = std::function<double(const Params&)>;

// Sequential suggest -> evaluate -> record loop; objective exceptions mark the
// trial failed and keep it out of the surrogate.
Study run_study(const SearchSpace& space, const Objective& objective,
                int n_trials, uint64_t seed, TpeOptions options = {},
                const std::function<void(const Trial&)>& on_trial = nullptr);

double as_double(const ParamValue& v);
long as_int(const ParamValue& v);
const std::string& as_string(const ParamValue& v);

std::string trial_to_json(const Trial& t);

} // namespace gbt::tpe
