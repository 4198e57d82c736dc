#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gbt {

// Immutable after load; row-major features, labels in {0,1} with
// 1 = malignant = positive class.
struct Dataset {
    std::vector<double> features;          // n_rows * n_cols, row-major
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    size_t n_rows = 0;
    size_t n_cols = 0;

    double at(size_t row, size_t col) const { return features[row * n_cols + col]; }
    const double* row(size_t r) const { return features.data() + r * n_cols; }
    std::vector<size_t> class_counts() const;
};

struct SplitSpec {
    double train_fraction = 0.65;
    uint64_t seed = 0;
    bool stratified = true;
};

struct FeatureSummary {
    std::string name;
    double min = 0, max = 0, mean = 0, median = 0;
    // per-class histogram counts over equal-width bins spanning [min, max]
    std::vector<size_t> hist_class0;
    std::vector<size_t> hist_class1;
};

struct RangeExpectation {
    std::string name;
    double min = 0;
    double max = 0;
};

struct RangeCheck {
    std::string name;
    double expected_min = 0, expected_max = 0;
    double observed_min = 0, observed_max = 0;
    bool pass = false;
    std::vector<size_t> offending_rows;
};

Dataset load_csv(const std::string& path, const std::string& target_column);

std::vector<RangeCheck> validate_ranges(const Dataset& ds,
                                        const std::vector<RangeExpectation>& expected);

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, const SplitSpec& spec);

// Spearman rank correlation (average ranks on ties). Constant columns get
// NaN against everything, including themselves.
std::vector<double> spearman_matrix(const Dataset& ds);  // n_cols * n_cols

std::vector<FeatureSummary> summarize(const Dataset& ds, size_t n_bins = 20);

// Midranks for a single column; exposed for the correlation tests.
std::vector<double> average_ranks(const std::vector<double>& values);

} // namespace gbt
