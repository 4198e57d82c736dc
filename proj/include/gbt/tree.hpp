#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gbt {

enum class Growth { level_wise, leaf_wise, oblivious };

struct GrowthParams {
    int max_depth = 6;
    int max_leaves = 31;
    int min_samples_leaf = 1;
    double lambda = 1.0;   // L2 penalty on leaf weights
    double gamma = 0.0;    // per-split penalty
    Growth growth = Growth::level_wise;
};

struct Node {
    bool is_leaf = true;
    size_t feature = 0;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    // sum of hessians (gradient trees) or sample weights (classification
    // trees) over the training rows reaching this node; used by tree SHAP
    double cover = 0.0;
};

struct Tree {
    std::vector<Node> nodes;
    int root = 0;

    double predict(std::span<const double> x) const;
    size_t n_leaves() const;
    int depth() const;
};

// Result of scanning one node for its best split.
struct SplitCandidate {
    bool found = false;
    size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

// Second-order split gain: 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - (GL+GR)^2/(HL+HR+l)] - gamma
double split_gain(double gl, double hl, double gr, double hr,
                  double lambda, double gamma);

double leaf_weight(double g_sum, double h_sum, double lambda);

// Weighted-Gini classification tree for the adaptive-boosting weak learner.
// Labels in {-1,+1}; leaf value is the weighted majority class.
Tree fit_classification_tree(const std::vector<double>& features, size_t n_cols,
                             std::span<const int> labels_pm1,
                             std::span<const double> sample_weights,
                             const GrowthParams& params);

// Second-order gradient tree over per-row (g, h); growth strategy per params.
Tree fit_gradient_tree(const std::vector<double>& features, size_t n_cols,
                       std::span<const double> g, std::span<const double> h,
                       const GrowthParams& params);

// Best split of a row subset by exact greedy scan over midpoint thresholds.
// Ties broken by (lower feature, lower threshold). Exposed for the oracles.
SplitCandidate best_split(const std::vector<double>& features, size_t n_cols,
                          std::span<const double> g, std::span<const double> h,
                          std::span<const size_t> rows, const GrowthParams& params);

} // namespace gbt
