#include "gbt/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gbt {

double Tree::predict(std::span<const double> x) const {
    int idx = root;
    while (!nodes[static_cast<size_t>(idx)].is_leaf) {
        const Node& nd = nodes[static_cast<size_t>(idx)];
        double v = x[nd.feature];
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
        idx = (v <= nd.threshold) ? nd.left : nd.right;
    }
    return nodes[static_cast<size_t>(idx)].value;
}

size_t Tree::n_leaves() const {
    size_t n = 0;
    for (const auto& nd : nodes) n += nd.is_leaf ? 1 : 0;
    return n;
}

int Tree::depth() const {
    // iterative DFS over (node, depth)
    int best = 0;
    std::vector<std::pair<int, int>> stack{{root, 0}};
    while (!stack.empty()) {
        auto [idx, d] = stack.back();
        stack.pop_back();
        const Node& nd = nodes[static_cast<size_t>(idx)];
        if (nd.is_leaf) {
            best = std::max(best, d);
        } else {
            stack.push_back({nd.left, d + 1});
            stack.push_back({nd.right, d + 1});
        }
    }
    return best;
}

double split_gain(double gl, double hl, double gr, double hr,
                  double lambda, double gamma) {
    auto score = [lambda](double g, double h) {
        double denom = h + lambda;
        return denom > 0.0 ? g * g / denom : 0.0;
    };
    return 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma;
}

double leaf_weight(double g_sum, double h_sum, double lambda) {
    double denom = h_sum + lambda;
    return denom > 0.0 ? -g_sum / denom : 0.0;
}

namespace {

struct SortedColumn {
    std::vector<size_t> rows;  // row ids ordered by feature value
};

// Rows of one node sorted by one feature.
void sort_rows_by_feature(const std::vector<double>& features, size_t n_cols,
                          size_t feature, std::span<const size_t> rows,
                          std::vector<size_t>& out) {
    out.assign(rows.begin(), rows.end());
    std::stable_sort(out.begin(), out.end(), [&](size_t a, size_t b) {
        return features[a * n_cols + feature] < features[b * n_cols + feature];
    });
}

} // namespace

SplitCandidate best_split(const std::vector<double>& features, size_t n_cols,
                          std::span<const double> g, std::span<const double> h,
                          std::span<const size_t> rows, const GrowthParams& params) {
    SplitCandidate best;
    if (rows.size() < 2) return best;
    double g_total = 0.0, h_total = 0.0;
    for (size_t r : rows) {
        g_total += g[r];
        h_total += h[r];
    }
    std::vector<size_t> sorted;
    size_t min_leaf = static_cast<size_t>(params.min_samples_leaf);
    for (size_t f = 0; f < n_cols; ++f) {
        sort_rows_by_feature(features, n_cols, f, rows, sorted);
        double gl = 0.0, hl = 0.0;
        for (size_t i = 0; i + 1 < sorted.size(); ++i) {
            gl += g[sorted[i]];
            hl += h[sorted[i]];
            double v = features[sorted[i] * n_cols + f];
            double vnext = features[sorted[i + 1] * n_cols + f];
            if (v == vnext) continue;
            size_t n_left = i + 1, n_right = sorted.size() - n_left;
            if (n_left < min_leaf || n_right < min_leaf) continue;
            double gain = split_gain(gl, hl, g_total - gl, h_total - hl,
                                     params.lambda, params.gamma);
            if (!best.found || gain > best.gain) {
                best.found = true;
                best.feature = f;
                best.threshold = 0.5 * (v + vnext);
                best.gain = gain;
            }
        }
    }
    return best;
}

namespace {

struct Frontier {
    int node = 0;
    int depth = 0;
    std::vector<size_t> rows;
    double g_sum = 0.0, h_sum = 0.0;
};

Frontier make_frontier(int node, int depth, std::vector<size_t> rows,
                       std::span<const double> g, std::span<const double> h) {
    Frontier fr;
    fr.node = node;
    fr.depth = depth;
    fr.rows = std::move(rows);
    for (size_t r : fr.rows) {
        fr.g_sum += g[r];
        fr.h_sum += h[r];
    }
    return fr;
}

void apply_split(Tree& tree, Frontier& fr, const SplitCandidate& sc,
                 const std::vector<double>& features, size_t n_cols,
                 std::span<const double> g, std::span<const double> h,
                 const GrowthParams& params,
                 Frontier& left_out, Frontier& right_out) {
    std::vector<size_t> left_rows, right_rows;
    for (size_t r : fr.rows) {
        if (features[r * n_cols + sc.feature] <= sc.threshold)
            left_rows.push_back(r);
        else
            right_rows.push_back(r);
    }
    left_out = make_frontier(static_cast<int>(tree.nodes.size()), fr.depth + 1,
                             std::move(left_rows), g, h);
    right_out = make_frontier(static_cast<int>(tree.nodes.size()) + 1, fr.depth + 1,
                              std::move(right_rows), g, h);

    Node& parent = tree.nodes[static_cast<size_t>(fr.node)];
    parent.is_leaf = false;
    parent.feature = sc.feature;
    parent.threshold = sc.threshold;
    parent.left = left_out.node;
    parent.right = right_out.node;

    for (const Frontier* child : {&left_out, &right_out}) {
        Node nd;
        nd.is_leaf = true;
        nd.value = leaf_weight(child->g_sum, child->h_sum, params.lambda);
        nd.cover = child->h_sum;
        tree.nodes.push_back(nd);
    }
}

void grow_level_wise(Tree& tree, std::vector<Frontier>& frontier,
                     const std::vector<double>& features, size_t n_cols,
                     std::span<const double> g, std::span<const double> h,
                     const GrowthParams& params) {
    while (!frontier.empty()) {
        std::vector<Frontier> next;
        for (auto& fr : frontier) {
            if (fr.depth >= params.max_depth) continue;
            auto sc = best_split(features, n_cols, g, h, fr.rows, params);
            if (!sc.found || sc.gain <= 0.0) continue;
            Frontier left, right;
            apply_split(tree, fr, sc, features, n_cols, g, h, params, left, right);
            next.push_back(std::move(left));
            next.push_back(std::move(right));
        }
        frontier = std::move(next);
    }
}

void grow_leaf_wise(Tree& tree, std::vector<Frontier>& frontier,
                    const std::vector<double>& features, size_t n_cols,
                    std::span<const double> g, std::span<const double> h,
                    const GrowthParams& params) {
    struct Entry {
        Frontier fr;
        SplitCandidate sc;
    };
    std::vector<Entry> open;
    for (auto& fr : frontier) {
        Entry e;
        e.sc = (fr.depth < params.max_depth)
                   ? best_split(features, n_cols, g, h, fr.rows, params)
                   : SplitCandidate{};
        e.fr = std::move(fr);
        open.push_back(std::move(e));
    }
    size_t n_leaves = open.size();
    while (n_leaves < static_cast<size_t>(params.max_leaves)) {
        // pick the splittable leaf with the largest gain; ties go to the
        // earliest-created node for determinism
        int pick = -1;
        for (size_t i = 0; i < open.size(); ++i) {
            if (!open[i].sc.found || open[i].sc.gain <= 0.0) continue;
            if (pick < 0 || open[i].sc.gain > open[static_cast<size_t>(pick)].sc.gain)
                pick = static_cast<int>(i);
        }
        if (pick < 0) break;
        Entry e = std::move(open[static_cast<size_t>(pick)]);
        open.erase(open.begin() + pick);
        Frontier left, right;
        apply_split(tree, e.fr, e.sc, features, n_cols, g, h, params, left, right);
        ++n_leaves;
        for (Frontier* child : {&left, &right}) {
            Entry ne;
            ne.sc = (child->depth < params.max_depth)
                        ? best_split(features, n_cols, g, h, child->rows, params)
                        : SplitCandidate{};
            ne.fr = std::move(*child);
            open.push_back(std::move(ne));
        }
    }
}

// One shared (feature, threshold) per level, chosen to maximize the summed
// per-leaf gain. Leaves where the shared split is invalid (an empty or
// under-populated side) or has non-positive gain stay leaves.
void grow_oblivious(Tree& tree, std::vector<Frontier>& frontier,
                    const std::vector<double>& features, size_t n_cols,
                    std::span<const double> g, std::span<const double> h,
                    const GrowthParams& params) {
    size_t min_leaf = static_cast<size_t>(params.min_samples_leaf);
    for (int level = 0; level < params.max_depth && !frontier.empty(); ++level) {
        size_t n_leaves = frontier.size();

        struct RowRef {
            double value;
            size_t leaf;
            double g, h;
        };
        std::vector<RowRef> all;
        size_t total_rows = 0;
        for (const auto& fr : frontier) total_rows += fr.rows.size();
        all.reserve(total_rows);

        bool found = false;
        size_t best_feature = 0;
        double best_threshold = 0.0, best_total = 0.0;

        std::vector<double> gl(n_leaves), hl(n_leaves);
        std::vector<size_t> nl(n_leaves);
        std::vector<double> contrib(n_leaves);

        for (size_t f = 0; f < n_cols; ++f) {
            all.clear();
            for (size_t li = 0; li < n_leaves; ++li)
                for (size_t r : frontier[li].rows)
                    all.push_back({features[r * n_cols + f], li, g[r], h[r]});
            std::sort(all.begin(), all.end(), [](const RowRef& a, const RowRef& b) {
                return a.value < b.value;
            });

            std::fill(gl.begin(), gl.end(), 0.0);
            std::fill(hl.begin(), hl.end(), 0.0);
            std::fill(nl.begin(), nl.end(), 0);
            std::fill(contrib.begin(), contrib.end(), 0.0);
            double total = 0.0;

            size_t i = 0;
            while (i < all.size()) {
                size_t j = i;
                while (j < all.size() && all[j].value == all[i].value) {
                    const RowRef& rr = all[j];
                    size_t li = rr.leaf;
                    total -= contrib[li];
                    gl[li] += rr.g;
                    hl[li] += rr.h;
                    nl[li] += 1;
                    size_t n_right = frontier[li].rows.size() - nl[li];
                    if (nl[li] >= min_leaf && n_right >= min_leaf) {
                        double gain = split_gain(gl[li], hl[li],
                                                 frontier[li].g_sum - gl[li],
                                                 frontier[li].h_sum - hl[li],
                                                 params.lambda, params.gamma);
                        contrib[li] = gain > 0.0 ? gain : 0.0;
                    } else {
                        contrib[li] = 0.0;
                    }
                    total += contrib[li];
                    ++j;
                }
                if (j < all.size() && total > 0.0) {
                    double t = 0.5 * (all[i].value + all[j].value);
                    if (!found || total > best_total) {
                        found = true;
                        best_feature = f;
                        best_threshold = t;
                        best_total = total;
                    }
                }
                i = j;
            }
        }

        if (!found) break;

        std::vector<Frontier> next;
        for (auto& fr : frontier) {
            double glv = 0.0, hlv = 0.0;
            size_t n_left = 0;
            for (size_t r : fr.rows)
                if (features[r * n_cols + best_feature] <= best_threshold) {
                    glv += g[r];
                    hlv += h[r];
                    ++n_left;
                }
            size_t n_right = fr.rows.size() - n_left;
            bool valid = n_left >= min_leaf && n_right >= min_leaf &&
                         split_gain(glv, hlv, fr.g_sum - glv, fr.h_sum - hlv,
                                    params.lambda, params.gamma) > 0.0;
            if (!valid) continue;
            SplitCandidate sc;
            sc.found = true;
            sc.feature = best_feature;
            sc.threshold = best_threshold;
            Frontier left, right;
            apply_split(tree, fr, sc, features, n_cols, g, h, params, left, right);
            next.push_back(std::move(left));
            next.push_back(std::move(right));
        }
        frontier = std::move(next);
    }
}

} // namespace

Tree fit_gradient_tree(const std::vector<double>& features, size_t n_cols,
                       std::span<const double> g, std::span<const double> h,
                       const GrowthParams& params) {
    if (g.size() != h.size()) throw std::invalid_argument("g/h size mismatch");
    for (size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i]) || !std::isfinite(h[i]))
            throw std::invalid_argument("non-finite gradient or hessian");
        if (h[i] < 0.0) throw std::invalid_argument("negative hessian");
    }

    Tree tree;
    std::vector<size_t> rows(g.size());
    std::iota(rows.begin(), rows.end(), 0);
    double g_sum = 0.0, h_sum = 0.0;
    for (size_t r : rows) {
        g_sum += g[r];
        h_sum += h[r];
    }
    Node root;
    root.is_leaf = true;
    root.value = leaf_weight(g_sum, h_sum, params.lambda);
    root.cover = h_sum;
    tree.nodes.push_back(root);

    std::vector<Frontier> frontier;
    frontier.push_back(make_frontier(0, 0, std::move(rows), g, h));

    switch (params.growth) {
        case Growth::level_wise:
            grow_level_wise(tree, frontier, features, n_cols, g, h, params);
            break;
        case Growth::leaf_wise:
            grow_leaf_wise(tree, frontier, features, n_cols, g, h, params);
            break;
        case Growth::oblivious:
            grow_oblivious(tree, frontier, features, n_cols, g, h, params);
            break;
    }
    return tree;
}

namespace {

struct GiniSplit {
    bool found = false;
    size_t feature = 0;
    double threshold = 0.0;
    double impurity_decrease = 0.0;
};

double gini(double w_pos, double w_neg) {
    double w = w_pos + w_neg;
    if (w <= 0.0) return 0.0;
    double p = w_pos / w;
    return 2.0 * p * (1.0 - p);
}

GiniSplit best_gini_split(const std::vector<double>& features, size_t n_cols,
                          std::span<const int> labels,
                          std::span<const double> weights,
                          std::span<const size_t> rows, size_t min_leaf) {
    GiniSplit best;
    double wp_total = 0.0, wn_total = 0.0;
    for (size_t r : rows) (labels[r] > 0 ? wp_total : wn_total) += weights[r];
    double w_total = wp_total + wn_total;
    double parent = w_total * gini(wp_total, wn_total);

    std::vector<size_t> sorted;
    for (size_t f = 0; f < n_cols; ++f) {
        sort_rows_by_feature(features, n_cols, f, rows, sorted);
        double wp = 0.0, wn = 0.0;
        for (size_t i = 0; i + 1 < sorted.size(); ++i) {
            (labels[sorted[i]] > 0 ? wp : wn) += weights[sorted[i]];
            double v = features[sorted[i] * n_cols + f];
            double vnext = features[sorted[i + 1] * n_cols + f];
            if (v == vnext) continue;
            size_t n_left = i + 1, n_right = sorted.size() - n_left;
            if (n_left < min_leaf || n_right < min_leaf) continue;
            double children = (wp + wn) * gini(wp, wn) +
                              (w_total - wp - wn) * gini(wp_total - wp, wn_total - wn);
            double decrease = parent - children;
            if (!best.found || decrease > best.impurity_decrease) {
                best.found = true;
                best.feature = f;
                best.threshold = 0.5 * (v + vnext);
                best.impurity_decrease = decrease;
            }
        }
    }
    return best;
}

void grow_gini(Tree& tree, int node, int depth, std::vector<size_t> rows,
               const std::vector<double>& features, size_t n_cols,
               std::span<const int> labels, std::span<const double> weights,
               const GrowthParams& params) {
    double wp = 0.0, wn = 0.0;
    for (size_t r : rows) (labels[r] > 0 ? wp : wn) += weights[r];
    tree.nodes[static_cast<size_t>(node)].value = (wp >= wn) ? 1.0 : -1.0;
    tree.nodes[static_cast<size_t>(node)].cover = wp + wn;

    if (depth >= params.max_depth || rows.size() < 2) return;
    if (wp == 0.0 || wn == 0.0) return;  // pure in weighted terms

    auto sc = best_gini_split(features, n_cols, labels, weights, rows,
                              static_cast<size_t>(params.min_samples_leaf));
    if (!sc.found || sc.impurity_decrease <= 1e-12) return;

    std::vector<size_t> left_rows, right_rows;
    for (size_t r : rows) {
        if (features[r * n_cols + sc.feature] <= sc.threshold)
            left_rows.push_back(r);
        else
            right_rows.push_back(r);
    }
    int left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    Node& nd = tree.nodes[static_cast<size_t>(node)];
    nd.is_leaf = false;
    nd.feature = sc.feature;
    nd.threshold = sc.threshold;
    nd.left = left;
    nd.right = left + 1;
    grow_gini(tree, left, depth + 1, std::move(left_rows), features, n_cols,
              labels, weights, params);
    grow_gini(tree, left + 1, depth + 1, std::move(right_rows), features, n_cols,
              labels, weights, params);
}

} // namespace

Tree fit_classification_tree(const std::vector<double>& features, size_t n_cols,
                             std::span<const int> labels_pm1,
                             std::span<const double> sample_weights,
                             const GrowthParams& params) {
    if (labels_pm1.size() != sample_weights.size())
        throw std::invalid_argument("labels/weights size mismatch");
    double w_sum = 0.0;
    for (double w : sample_weights) {
        if (w < 0.0 || !std::isfinite(w))
            throw std::invalid_argument("weights must be finite and nonnegative");
        w_sum += w;
    }
    if (w_sum <= 0.0) throw std::invalid_argument("weights sum to zero");

    std::vector<double> weights(sample_weights.begin(), sample_weights.end());
    for (double& w : weights) w /= w_sum;

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<size_t> rows(labels_pm1.size());
    std::iota(rows.begin(), rows.end(), 0);
    grow_gini(tree, 0, 0, std::move(rows), features, n_cols, labels_pm1,
              weights, params);
    return tree;
}

} // namespace gbt
