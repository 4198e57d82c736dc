#include "gbt/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gbt {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

bool metric_defined(double value) { return !std::isnan(value); }

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predicted) {
    if (labels.size() != predicted.size())
        throw std::invalid_argument("labels/predictions length mismatch");
    if (labels.empty()) throw std::invalid_argument("empty label list");
    ConfusionMatrix cm;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1)
            (predicted[i] == 1 ? cm.tp : cm.fn)++;
        else
            (predicted[i] == 1 ? cm.fp : cm.tn)++;
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

double recall(const ConfusionMatrix& cm) {
    size_t d = cm.tp + cm.fn;
    return d == 0 ? kNaN : static_cast<double>(cm.tp) / static_cast<double>(d);
}

double precision(const ConfusionMatrix& cm) {
    size_t d = cm.tp + cm.fp;
    return d == 0 ? kNaN : static_cast<double>(cm.tp) / static_cast<double>(d);
}

double f_beta(const ConfusionMatrix& cm, double beta) {
    if (beta <= 0.0) throw std::invalid_argument("beta must be positive");
    double p = precision(cm), r = recall(cm);
    if (std::isnan(p) || std::isnan(r)) return kNaN;
    double b2 = beta * beta;
    double denom = b2 * p + r;
    if (denom == 0.0) return kNaN;
    return (1.0 + b2) * p * r / denom;
}

double f1(const ConfusionMatrix& cm) { return f_beta(cm, 1.0); }

RocCurve roc_auc(std::span<const int> labels, std::span<const double> scores) {
    if (labels.size() != scores.size())
        throw std::invalid_argument("labels/scores length mismatch");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("non-finite score");

    size_t n_pos = 0, n_neg = 0;
    for (int y : labels) (y == 1 ? n_pos : n_neg)++;

    RocCurve curve;
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (n_pos == 0 || n_neg == 0) {
        curve.auc = kNaN;
        curve.points = {{0.0, 0.0, inf}, {1.0, 1.0, -inf}};
        return curve;
    }

    std::vector<size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    curve.points.push_back({0.0, 0.0, inf});
    size_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        double s = scores[order[i]];
        // one sweep point per distinct score; ties advance together, which
        // turns tied positive/negative groups into a diagonal segment
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] == 1 ? tp : fp)++;
            ++i;
        }
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                                static_cast<double>(tp) / static_cast<double>(n_pos),
                                s});
    }
    if (curve.points.back().fpr != 1.0 || curve.points.back().tpr != 1.0)
        curve.points.push_back({1.0, 1.0, -inf});

    double auc = 0.0;
    for (size_t k = 1; k < curve.points.size(); ++k) {
        const auto& a = curve.points[k - 1];
        const auto& b = curve.points[k];
        auc += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
    }
    curve.auc = auc;
    return curve;
}

EvalReport evaluate(const Ensemble& model, const Dataset& test,
                    double threshold, double beta) {
    if (model.n_features != test.n_cols)
        throw std::invalid_argument("model/dataset feature dimension mismatch");
    auto probas = model.probas(test);
    std::vector<int> pred(test.n_rows);
    for (size_t i = 0; i < test.n_rows; ++i)
        pred[i] = probas[i] >= threshold ? 1 : 0;

    EvalReport r;
    r.cm = confusion(test.labels, pred);
    r.accuracy = accuracy(r.cm);
    r.recall = recall(r.cm);
    r.precision = precision(r.cm);
    r.f1 = f1(r.cm);
    r.f_beta = f_beta(r.cm, beta);
    r.beta = beta;
    r.threshold = threshold;
    r.roc = roc_auc(test.labels, probas);
    return r;
}

std::string eval_report_to_json(const EvalReport& r) {
    auto num = [](double v) {
        return std::isnan(v) ? nlohmann::ordered_json(nullptr)
                             : nlohmann::ordered_json(v);
    };
    nlohmann::ordered_json j;
    j["confusion"] = {{"tp", r.cm.tp}, {"fp", r.cm.fp}, {"fn", r.cm.fn}, {"tn", r.cm.tn}};
    j["auc"] = num(r.roc.auc);
    j["recall"] = num(r.recall);
    j["accuracy"] = num(r.accuracy);
    j["precision"] = num(r.precision);
    j["f1_score"] = num(r.f1);
    j["f_beta"] = num(r.f_beta);
    j["beta"] = r.beta;
    j["threshold"] = r.threshold;
    return j.dump(2);
}

} // namespace gbt
