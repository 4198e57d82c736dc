#include "gbt/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gbt {

namespace {

// Shapley subset weight |S|! (M-|S|-1)! / M! computed without factorials:
// 1 / (M * C(M-1, s)).
double subset_weight(size_t s, size_t m) {
    double w = 1.0 / static_cast<double>(m);
    for (size_t k = 1; k <= s; ++k)
        w *= static_cast<double>(k) / static_cast<double>(m - k);
    return w;
}

double tree_expectation(const Tree& t, int idx) {
    const Node& nd = t.nodes[static_cast<size_t>(idx)];
    if (nd.is_leaf) return nd.value;
    double cl = t.nodes[static_cast<size_t>(nd.left)].cover;
    double cr = t.nodes[static_cast<size_t>(nd.right)].cover;
    double c = cl + cr;
    if (c <= 0.0) throw std::runtime_error("tree lacks positive cover metadata");
    return (cl * tree_expectation(t, nd.left) + cr * tree_expectation(t, nd.right)) / c;
}

void check_covers(const Ensemble& model) {
    for (const auto& s : model.stages)
        for (const auto& nd : s.tree.nodes)
            if (!nd.is_leaf) {
                double cl = s.tree.nodes[static_cast<size_t>(nd.left)].cover;
                double cr = s.tree.nodes[static_cast<size_t>(nd.right)].cover;
                if (cl <= 0.0 || cr <= 0.0)
                    throw std::runtime_error(
                        "model lacks cover metadata; refit or use shap_exact");
            }
}

// State of one distinct feature along the current root-to-leaf path.
struct PathEntry {
    size_t feature;
    double zero_fraction;  // product of cover ratios of the branches taken
    double one_fraction;   // 1 while x agrees with every branch, else 0
};

struct TreeShapWalker {
    const Tree& tree;
    std::span<const double> x;
    double coefficient;
    std::vector<double>& phi;

    std::vector<PathEntry> path;

    void recurse(int idx) {
        const Node& nd = tree.nodes[static_cast<size_t>(idx)];
        if (nd.is_leaf) {
            accumulate_leaf(nd.value);
            return;
        }
        double cl = tree.nodes[static_cast<size_t>(nd.left)].cover;
        double cr = tree.nodes[static_cast<size_t>(nd.right)].cover;
        double c = cl + cr;
        bool go_left = x[nd.feature] <= nd.threshold;

        descend(nd.feature, cl / c, go_left ? 1.0 : 0.0, nd.left);
        descend(nd.feature, cr / c, go_left ? 0.0 : 1.0, nd.right);
    }

    void descend(size_t feature, double zero_frac, double one_frac, int child) {
        auto it = std::find_if(path.begin(), path.end(),
                               [&](const PathEntry& e) { return e.feature == feature; });
        if (it == path.end()) {
            path.push_back({feature, zero_frac, one_frac});
            recurse(child);
            path.pop_back();
        } else {
            PathEntry saved = *it;
            it->zero_fraction *= zero_frac;
            it->one_fraction *= one_frac;
            recurse(child);
            *std::find_if(path.begin(), path.end(),
                          [&](const PathEntry& e) { return e.feature == feature; }) = saved;
        }
    }

    // For the leaf's distinct path features U (u = |U|) form the polynomial
    // P(t) = prod_f (z_f + o_f t). For each i, divide out its factor and fold
    // the coefficients with the Shapley weights k! (u-k-1)! / u!:
    //   phi_i += v * (o_i - z_i) * sum_k Q_k * k! (u-k-1)! / u!
    void accumulate_leaf(double value) {
        size_t u = path.size();
        if (u == 0) return;  // single-leaf tree attributes nothing

        std::vector<double> poly(u + 1, 0.0);
        poly[0] = 1.0;
        size_t deg = 0;
        for (const auto& e : path) {
            for (size_t k = deg + 2; k-- > 0;) {
                double hi = k > 0 ? poly[k - 1] : 0.0;
                poly[k] = poly[k] * e.zero_fraction + hi * e.one_fraction;
            }
            ++deg;
        }

        std::vector<double> weights(u);
        for (size_t k = 0; k < u; ++k) weights[k] = subset_weight(k, u);

        std::vector<double> q(u);
        for (const auto& e : path) {
            // Synthetic division by (z + o t). o is exactly 0 or 1, so divide
            // from the top coefficient by o when it is nonzero; dividing by z
            // instead loses precision badly when a branch cover is tiny.
            double z = e.zero_fraction, o = e.one_fraction;
            if (o != 0.0) {
                q[u - 1] = poly[u] / o;
                for (size_t k = u - 1; k > 0; --k)
                    q[k - 1] = (poly[k] - z * q[k]) / o;
            } else {
                for (size_t k = 0; k < u; ++k) q[k] = poly[k] / z;
            }
            double s = 0.0;
            for (size_t k = 0; k < u; ++k) s += q[k] * weights[k];
            phi[e.feature] += coefficient * value * (o - z) * s;
        }
    }
};

} // namespace

double expected_margin(const Ensemble& model) {
    double v = model.base_score;
    for (const auto& s : model.stages)
        v += s.coefficient * tree_expectation(s.tree, s.tree.root);
    return v;
}

Attribution shap_tree(const Ensemble& model, std::span<const double> x) {
    if (x.size() != model.n_features)
        throw std::invalid_argument("feature dimension mismatch");
    check_covers(model);

    Attribution a;
    a.phi.assign(model.n_features, 0.0);
    for (const auto& s : model.stages) {
        TreeShapWalker walker{s.tree, x, s.coefficient, a.phi, {}};
        walker.recurse(s.tree.root);
    }
    a.base_value = expected_margin(model);
    return a;
}

Attribution shap_exact(const Ensemble& model, std::span<const double> x,
                       const Dataset& background) {
    size_t m = model.n_features;
    if (m > 15)
        throw std::invalid_argument(
            "shap_exact is limited to 15 features; use shap_tree");
    if (x.size() != m) throw std::invalid_argument("feature dimension mismatch");
    if (background.n_rows == 0) throw std::invalid_argument("empty background");
    if (background.n_cols != m)
        throw std::invalid_argument("background dimension mismatch");

    size_t n_subsets = size_t{1} << m;
    std::vector<double> value(n_subsets, 0.0);
    std::vector<double> composed(m);
    for (size_t mask = 0; mask < n_subsets; ++mask) {
        double acc = 0.0;
        for (size_t b = 0; b < background.n_rows; ++b) {
            for (size_t f = 0; f < m; ++f)
                composed[f] = (mask >> f) & 1 ? x[f] : background.at(b, f);
            acc += model.predict_margin(composed);
        }
        value[mask] = acc / static_cast<double>(background.n_rows);
    }

    std::vector<double> weight_by_size(m);
    for (size_t s = 0; s < m; ++s) weight_by_size[s] = subset_weight(s, m);

    Attribution a;
    a.phi.assign(m, 0.0);
    for (size_t mask = 0; mask < n_subsets; ++mask) {
        size_t s = static_cast<size_t>(std::popcount(mask));
        for (size_t i = 0; i < m; ++i) {
            if ((mask >> i) & 1) continue;
            a.phi[i] += weight_by_size[s] * (value[mask | (size_t{1} << i)] - value[mask]);
        }
    }
    a.base_value = value[0];
    return a;
}

GlobalImportance global_importance(const Ensemble& model, const Dataset& ds) {
    if (ds.n_rows == 0) throw std::invalid_argument("empty dataset");
    GlobalImportance gi;
    gi.mean_abs_phi.assign(model.n_features, 0.0);
    for (size_t r = 0; r < ds.n_rows; ++r) {
        auto a = shap_tree(model, {ds.row(r), ds.n_cols});
        for (size_t f = 0; f < model.n_features; ++f)
            gi.mean_abs_phi[f] += std::abs(a.phi[f]);
    }
    for (double& v : gi.mean_abs_phi) v /= static_cast<double>(ds.n_rows);

    gi.ranking.resize(model.n_features);
    std::iota(gi.ranking.begin(), gi.ranking.end(), 0);
    std::stable_sort(gi.ranking.begin(), gi.ranking.end(), [&](size_t a_, size_t b_) {
        return gi.mean_abs_phi[a_] > gi.mean_abs_phi[b_];
    });
    return gi;
}

} // namespace gbt
