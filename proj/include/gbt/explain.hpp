#pragma once

#include "gbt/dataset.hpp"
#include "gbt/ensemble.hpp"

#include <span>
#include <vector>

namespace gbt {

// Attributions are on the margin (log-odds) scale, where additivity is exact.
struct Attribution {
    std::vector<double> phi;   // one entry per feature
    double base_value = 0.0;   // expected margin over the background
};

struct GlobalImportance {
    std::vector<double> mean_abs_phi;   // indexed by feature
    std::vector<size_t> ranking;        // feature indices, descending importance
};

// Exact Shapley values with an interventional value function: f(S) is the
// mean margin over background rows with the features in S pinned to x.
// Cost is 2^M model sweeps, so M is capped at 15.
Attribution shap_exact(const Ensemble& model, std::span<const double> x,
                       const Dataset& background);

// Path-dependent polynomial algorithm over the per-node training covers
// recorded at fit time.
Attribution shap_tree(const Ensemble& model, std::span<const double> x);

GlobalImportance global_importance(const Ensemble& model, const Dataset& ds);

// Cover-weighted expected margin of the whole model (the tree-SHAP base value).
double expected_margin(const Ensemble& model);

} // namespace gbt
