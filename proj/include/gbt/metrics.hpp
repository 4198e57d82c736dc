#pragma once

#include "gbt/dataset.hpp"
#include "gbt/ensemble.hpp"

#include <span>
#include <vector>

namespace gbt {

struct ConfusionMatrix {
    size_t tp = 0, fp = 0, fn = 0, tn = 0;
    size_t total() const { return tp + fp + fn + tn; }
};

struct RocPoint {
    double fpr = 0.0, tpr = 0.0, threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;  // NaN when undefined (single-class labels)
};

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predicted);

// Undefined ratios (zero denominators) come back as NaN, never 0.
double accuracy(const ConfusionMatrix& cm);
double recall(const ConfusionMatrix& cm);
double precision(const ConfusionMatrix& cm);
double f_beta(const ConfusionMatrix& cm, double beta);
double f1(const ConfusionMatrix& cm);

bool metric_defined(double value);

RocCurve roc_auc(std::span<const int> labels, std::span<const double> scores);

struct EvalReport {
    ConfusionMatrix cm;
    double accuracy = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    double f_beta = 0.0;
    double beta = 1.0;
    double threshold = 0.5;
    RocCurve roc;
};

EvalReport evaluate(const Ensemble& model, const Dataset& test,
                    double threshold = 0.5, double beta = 2.7);

std::string eval_report_to_json(const EvalReport& r);

} // namespace gbt
