#pragma once

#include "gbt/dataset.hpp"
#include "gbt/tree.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gbt {

enum class Family { adaboost, xgb, lgbm, catboost_like };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

struct Stage {
    Tree tree;
    double coefficient = 1.0;  // alpha_m for adaboost, eta for gradient families
};

struct Ensemble {
    Family family = Family::xgb;
    std::vector<Stage> stages;
    double base_score = 0.0;
    double eta = 0.1;
    size_t n_features = 0;
    std::vector<std::string> feature_names;

    double predict_margin(std::span<const double> x) const;
    double predict_proba(std::span<const double> x) const;
    int predict_label(std::span<const double> x, double threshold = 0.5) const;

    std::vector<double> margins(const Dataset& ds) const;
    std::vector<double> probas(const Dataset& ds) const;
};

struct BoostParams {
    int n_stages = 100;
    double eta = 0.1;
    GrowthParams growth;
    double goss_a = 0.2;   // kept top fraction by |g|
    double goss_b = 0.1;   // sampled fraction of the rest
    bool goss = false;
    bool ordered = false;  // permutation-prefix gradients (catboost_like)
    uint64_t seed = 0;
};

struct AdaBoostStageTrace {
    double err = 0.0;
    double alpha = 0.0;
    std::vector<double> weights;  // after the stage's reweight + renormalize
};

Ensemble train_adaboost(const Dataset& train, const BoostParams& p,
                        std::vector<AdaBoostStageTrace>* trace = nullptr);

Ensemble train_gradient(const Dataset& train, const BoostParams& p, Family variant);

// Total logistic loss of the margins against labels; used by the descent tests.
double logistic_loss(std::span<const double> margins, std::span<const int> labels);

double sigmoid(double x);

void save_model(const Ensemble& e, const std::string& path);
Ensemble load_model(const std::string& path);
std::string model_to_json(const Ensemble& e);
Ensemble model_from_json(const std::string& text);

} // namespace gbt
