#include "gbt/ensemble.hpp"
#include "gbt/kernels.hpp"
#include "gbt/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gbt {

std::string family_name(Family f) {
    switch (f) {
        case Family::adaboost: return "adaboost";
        case Family::xgb: return "xgb";
        case Family::lgbm: return "lgbm";
        case Family::catboost_like: return "catboost_like";
    }
    throw std::logic_error("bad family");
}

Family family_from_name(const std::string& name) {
    if (name == "adaboost") return Family::adaboost;
    if (name == "xgb") return Family::xgb;
    if (name == "lgbm") return Family::lgbm;
    if (name == "catboost_like") return Family::catboost_like;
    throw std::runtime_error("unknown family: " + name);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double Ensemble::predict_margin(std::span<const double> x) const {
    if (x.size() != n_features)
        throw std::invalid_argument("feature dimension mismatch");
    double m = base_score;
    for (const auto& s : stages) m += s.coefficient * s.tree.predict(x);
    return m;
}

double Ensemble::predict_proba(std::span<const double> x) const {
    double m = predict_margin(x);
    // adaboost margins live on the alpha scale; sigma(2m) matches the
    // exponential-loss posterior and keeps the sign rule at threshold 0.5
    return family == Family::adaboost ? sigmoid(2.0 * m) : sigmoid(m);
}

int Ensemble::predict_label(std::span<const double> x, double threshold) const {
    return predict_proba(x) >= threshold ? 1 : 0;
}

std::vector<double> Ensemble::margins(const Dataset& ds) const {
    if (ds.n_cols != n_features)
        throw std::invalid_argument("feature dimension mismatch");
    std::vector<double> out(ds.n_rows, base_score);
    std::vector<double> pred(ds.n_rows);
    for (const auto& s : stages) {
        for (size_t r = 0; r < ds.n_rows; ++r)
            pred[r] = s.tree.predict({ds.row(r), ds.n_cols});
        kernels::axpy(s.coefficient, pred, out);
    }
    return out;
}

std::vector<double> Ensemble::probas(const Dataset& ds) const {
    auto m = margins(ds);
    double scale = family == Family::adaboost ? 2.0 : 1.0;
    for (double& v : m) v = sigmoid(scale * v);
    return m;
}

double logistic_loss(std::span<const double> margins, std::span<const int> labels) {
    double loss = 0.0;
    for (size_t i = 0; i < margins.size(); ++i) {
        double m = margins[i];
        loss += std::log1p(std::exp(-std::abs(m))) + std::max(m, 0.0) -
                static_cast<double>(labels[i]) * m;
    }
    return loss;
}

Ensemble train_adaboost(const Dataset& train, const BoostParams& p,
                        std::vector<AdaBoostStageTrace>* trace) {
    auto counts = train.class_counts();
    if (counts[0] == 0 || counts[1] == 0)
        throw std::runtime_error("adaboost needs both classes in training data");

    size_t n = train.n_rows;
    std::vector<int> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = train.labels[i] == 1 ? 1 : -1;

    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    constexpr double kErrClip = 1e-10;

    Ensemble e;
    e.family = Family::adaboost;
    e.base_score = 0.0;
    e.eta = 1.0;
    e.n_features = train.n_cols;
    e.feature_names = train.feature_names;

    std::vector<double> pred(n);
    for (int m = 0; m < p.n_stages; ++m) {
        Tree tree = fit_classification_tree(train.features, train.n_cols, y, w,
                                            p.growth);
        for (size_t i = 0; i < n; ++i)
            pred[i] = tree.predict({train.row(i), train.n_cols});

        double err = 0.0;
        for (size_t i = 0; i < n; ++i)
            if ((pred[i] > 0 ? 1 : -1) != y[i]) err += w[i];
        err = std::clamp(err, kErrClip, 1.0 - kErrClip);
        double alpha = 0.5 * std::log((1.0 - err) / err);

        for (size_t i = 0; i < n; ++i)
            w[i] *= std::exp(-alpha * static_cast<double>(y[i]) * pred[i]);
        double w_sum = kernels::sum(w);
        for (double& wi : w) wi /= w_sum;

        e.stages.push_back({std::move(tree), alpha});
        if (trace) trace->push_back({err, alpha, w});
    }
    return e;
}

namespace {

struct SubMatrix {
    std::vector<double> features;
    std::vector<double> g, h;
};

SubMatrix gather_rows(const Dataset& ds, std::span<const size_t> rows,
                      std::span<const double> g, std::span<const double> h) {
    SubMatrix sm;
    sm.features.reserve(rows.size() * ds.n_cols);
    for (size_t r : rows) {
        sm.features.insert(sm.features.end(), ds.row(r), ds.row(r) + ds.n_cols);
        sm.g.push_back(g[r]);
        sm.h.push_back(h[r]);
    }
    return sm;
}

// Keep the top goss_a fraction by |g|, sample goss_b of the total uniformly
// from the rest, and amplify the sampled rows' statistics by (1-a)/b.
std::vector<size_t> goss_select(std::span<const double> g, double a, double b,
                                Rng& rng, std::vector<double>& g_adj,
                                std::vector<double>& h_adj) {
    size_t n = g.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t i, size_t j) {
        return std::abs(g[i]) > std::abs(g[j]);
    });
    size_t top_n = static_cast<size_t>(std::floor(a * static_cast<double>(n)));
    size_t rest_n = static_cast<size_t>(std::floor(b * static_cast<double>(n)));
    rest_n = std::min(rest_n, n - top_n);

    std::vector<size_t> rest(order.begin() + static_cast<long>(top_n), order.end());
    for (size_t i = rest.size(); i > 1; --i)
        std::swap(rest[i - 1], rest[rng.uniform_int(i)]);

    double amp = (1.0 - a) / b;
    std::vector<size_t> selected(order.begin(), order.begin() + static_cast<long>(top_n));
    for (size_t k = 0; k < rest_n; ++k) {
        size_t r = rest[k];
        selected.push_back(r);
        g_adj[r] *= amp;
        h_adj[r] *= amp;
    }
    std::sort(selected.begin(), selected.end());
    return selected;
}

// Doubling-prefix helper models for ordered gradients: the row at permutation
// position j is scored by a tree fit only on positions [0, 2^floor(log2 j)),
// so its margin never depends on rows at or after its own position.
struct OrderedState {
    std::vector<size_t> perm;
    std::vector<double> prefix_margin;
};

void ordered_update(OrderedState& st, const Dataset& train,
                    std::span<const double> g, std::span<const double> h,
                    const GrowthParams& growth, double eta) {
    size_t n = st.perm.size();
    for (size_t lo = 1, hi = 2; lo < n; lo = hi, hi *= 2) {
        size_t block_end = std::min(hi, n);
        std::vector<size_t> fit_rows(st.perm.begin(), st.perm.begin() + static_cast<long>(lo));
        SubMatrix sm = gather_rows(train, fit_rows, g, h);
        Tree helper = fit_gradient_tree(sm.features, train.n_cols, sm.g, sm.h, growth);
        for (size_t j = lo; j < block_end; ++j) {
            size_t r = st.perm[j];
            st.prefix_margin[r] += eta * helper.predict({train.row(r), train.n_cols});
        }
    }
}

} // namespace

Ensemble train_gradient(const Dataset& train, const BoostParams& p, Family variant) {
    if (variant == Family::adaboost)
        throw std::invalid_argument("use train_adaboost for the adaboost family");
    auto counts = train.class_counts();
    if (counts[0] == 0 || counts[1] == 0)
        throw std::runtime_error("training data must contain both classes");

    bool use_goss = variant == Family::lgbm && p.goss_a < 1.0;
    if (use_goss && p.goss_a + p.goss_b > 1.0)
        throw std::invalid_argument("goss_a + goss_b must be <= 1");
    if (use_goss && p.goss_b <= 0.0)
        throw std::invalid_argument("goss_b must be positive");

    GrowthParams growth = p.growth;
    switch (variant) {
        case Family::xgb: growth.growth = Growth::level_wise; break;
        case Family::lgbm: growth.growth = Growth::leaf_wise; break;
        case Family::catboost_like: growth.growth = Growth::oblivious; break;
        default: break;
    }

    size_t n = train.n_rows;
    double p1 = static_cast<double>(counts[1]) / static_cast<double>(n);
    double base = std::log(p1 / (1.0 - p1));

    Ensemble e;
    e.family = variant;
    e.base_score = base;
    e.eta = p.eta;
    e.n_features = train.n_cols;
    e.feature_names = train.feature_names;

    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = static_cast<double>(train.labels[i]);

    std::vector<double> margin(n, base);
    std::vector<double> prob(n), g(n), h(n), pred(n);

    bool ordered = variant == Family::catboost_like && p.ordered;
    OrderedState ost;
    if (ordered) {
        ost.perm.resize(n);
        std::iota(ost.perm.begin(), ost.perm.end(), 0);
        Rng prng(derive_seed(p.seed, "ordered-permutation"));
        for (size_t i = n; i > 1; --i)
            std::swap(ost.perm[i - 1], ost.perm[prng.uniform_int(i)]);
        ost.prefix_margin.assign(n, base);
    }

    Rng goss_rng(derive_seed(p.seed, "goss"));

    for (int m = 0; m < p.n_stages; ++m) {
        const std::vector<double>& score_src = ordered ? ost.prefix_margin : margin;
        for (size_t i = 0; i < n; ++i) prob[i] = sigmoid(score_src[i]);
        kernels::grad_hess(prob, y, g, h);

        Tree tree;
        if (use_goss) {
            std::vector<double> g_adj = g, h_adj = h;
            auto rows = goss_select(g, p.goss_a, p.goss_b, goss_rng, g_adj, h_adj);
            SubMatrix sm = gather_rows(train, rows, g_adj, h_adj);
            tree = fit_gradient_tree(sm.features, train.n_cols, sm.g, sm.h, growth);
        } else {
            tree = fit_gradient_tree(train.features, train.n_cols, g, h, growth);
        }

        if (ordered) ordered_update(ost, train, g, h, growth, p.eta);

        for (size_t i = 0; i < n; ++i)
            pred[i] = tree.predict({train.row(i), train.n_cols});
        kernels::axpy(p.eta, pred, margin);
        e.stages.push_back({std::move(tree), p.eta});
    }
    return e;
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json tree_to_json(const Tree& t) {
    ordered_json nodes = ordered_json::array();
    for (const auto& nd : t.nodes) {
        ordered_json j;
        if (nd.is_leaf) {
            j["kind"] = "leaf";
            j["value"] = nd.value;
        } else {
            j["kind"] = "internal";
            j["feature"] = nd.feature;
            j["threshold"] = nd.threshold;
            j["left"] = nd.left;
            j["right"] = nd.right;
        }
        j["cover"] = nd.cover;
        nodes.push_back(std::move(j));
    }
    return ordered_json{{"root", t.root}, {"nodes", std::move(nodes)}};
}

Tree tree_from_json(const ordered_json& j) {
    Tree t;
    t.root = j.at("root").get<int>();
    for (const auto& nj : j.at("nodes")) {
        Node nd;
        std::string kind = nj.at("kind").get<std::string>();
        if (kind == "leaf") {
            nd.is_leaf = true;
            nd.value = nj.at("value").get<double>();
        } else if (kind == "internal") {
            nd.is_leaf = false;
            nd.feature = nj.at("feature").get<size_t>();
            nd.threshold = nj.at("threshold").get<double>();
            nd.left = nj.at("left").get<int>();
            nd.right = nj.at("right").get<int>();
        } else {
            throw std::runtime_error("unknown node kind: " + kind);
        }
        nd.cover = nj.value("cover", 0.0);
        t.nodes.push_back(nd);
    }
    if (t.nodes.empty()) throw std::runtime_error("tree has no nodes");
    return t;
}

constexpr int kFormatVersion = 1;

} // namespace

std::string model_to_json(const Ensemble& e) {
    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["family"] = family_name(e.family);
    j["eta"] = e.eta;
    j["base_score"] = e.base_score;
    j["n_features"] = e.n_features;
    j["feature_names"] = e.feature_names;
    ordered_json stages = ordered_json::array();
    for (const auto& s : e.stages)
        stages.push_back(ordered_json{{"coefficient", s.coefficient},
                                      {"tree", tree_to_json(s.tree)}});
    j["stages"] = std::move(stages);
    return j.dump(2);
}

Ensemble model_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
        throw std::runtime_error(std::string("model parse error: ") + ex.what());
    }
    int version = j.at("format_version").get<int>();
    if (version != kFormatVersion)
        throw std::runtime_error("unsupported model format_version " +
                                 std::to_string(version));
    Ensemble e;
    e.family = family_from_name(j.at("family").get<std::string>());
    e.eta = j.at("eta").get<double>();
    e.base_score = j.at("base_score").get<double>();
    e.n_features = j.at("n_features").get<size_t>();
    e.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& sj : j.at("stages"))
        e.stages.push_back({tree_from_json(sj.at("tree")),
                            sj.at("coefficient").get<double>()});
    return e;
}

void save_model(const Ensemble& e, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << model_to_json(e) << "\n";
}

Ensemble load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

} // namespace gbt
