#include "gbt/dataset.hpp"
#include "gbt/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gbt {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::optional<double> parse_double(const std::string& s) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    double v;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return v;
}

} // namespace

std::vector<size_t> Dataset::class_counts() const {
    std::vector<size_t> c(2, 0);
    for (int y : labels) c[static_cast<size_t>(y)]++;
    return c;
}

Dataset load_csv(const std::string& path, const std::string& target_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
    auto header = split_line(line);
    for (auto& h : header) h = trim(h);

    size_t target_idx = header.size();
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == target_column) target_idx = i;
    if (target_idx == header.size())
        throw std::runtime_error("target column not found: " + target_column);

    Dataset ds;
    for (size_t i = 0; i < header.size(); ++i)
        if (i != target_idx) ds.feature_names.push_back(header[i]);
    ds.n_cols = ds.feature_names.size();

    size_t row_number = 0;  // 0-based data row index
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("row " + std::to_string(row_number) + ": expected " +
                                     std::to_string(header.size()) + " cells, got " +
                                     std::to_string(cells.size()));
        for (size_t i = 0; i < cells.size(); ++i) {
            std::string cell = trim(cells[i]);
            if (i == target_idx) {
                int y;
                if (cell == "0" || cell == "B") y = 0;
                else if (cell == "1" || cell == "M") y = 1;
                else
                    throw std::runtime_error("row " + std::to_string(row_number) +
                                             ", column '" + header[i] +
                                             "': bad label '" + cell + "'");
                ds.labels.push_back(y);
            } else {
                auto v = parse_double(cell);
                if (!v || !std::isfinite(*v))
                    throw std::runtime_error("row " + std::to_string(row_number) +
                                             ", column '" + header[i] +
                                             "': unparseable cell '" + cell + "'");
                ds.features.push_back(*v);
            }
        }
        ++row_number;
    }
    ds.n_rows = row_number;
    if (ds.n_rows == 0) throw std::runtime_error("no data rows in " + path);
    return ds;
}

std::vector<RangeCheck> validate_ranges(const Dataset& ds,
                                        const std::vector<RangeExpectation>& expected) {
    constexpr double eps = 1e-9;
    std::vector<RangeCheck> out;
    for (const auto& [name, lo, hi] : expected) {
        auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), name);
        if (it == ds.feature_names.end())
            throw std::runtime_error("unknown feature name: " + name);
        size_t col = static_cast<size_t>(it - ds.feature_names.begin());
        RangeCheck rc;
        rc.name = name;
        rc.expected_min = lo;
        rc.expected_max = hi;
        rc.observed_min = std::numeric_limits<double>::infinity();
        rc.observed_max = -std::numeric_limits<double>::infinity();
        for (size_t r = 0; r < ds.n_rows; ++r) {
            double v = ds.at(r, col);
            rc.observed_min = std::min(rc.observed_min, v);
            rc.observed_max = std::max(rc.observed_max, v);
            if (v < lo - eps || v > hi + eps) rc.offending_rows.push_back(r);
        }
        rc.pass = rc.offending_rows.empty();
        out.push_back(std::move(rc));
    }
    return out;
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<size_t>& rows) {
    Dataset out;
    out.feature_names = ds.feature_names;
    out.n_cols = ds.n_cols;
    out.n_rows = rows.size();
    out.features.reserve(rows.size() * ds.n_cols);
    for (size_t r : rows) {
        out.features.insert(out.features.end(), ds.row(r), ds.row(r) + ds.n_cols);
        out.labels.push_back(ds.labels[r]);
    }
    return out;
}

void shuffle(std::vector<size_t>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[rng.uniform_int(i)]);
}

} // namespace

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, const SplitSpec& spec) {
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0)
        throw std::invalid_argument("train_fraction must be in (0,1)");
    Rng rng(derive_seed(spec.seed, "split"));

    std::vector<size_t> train_rows, test_rows;
    if (spec.stratified) {
        for (int cls : {0, 1}) {
            std::vector<size_t> idx;
            for (size_t r = 0; r < ds.n_rows; ++r)
                if (ds.labels[r] == cls) idx.push_back(r);
            if (idx.size() < 2)
                throw std::runtime_error("class " + std::to_string(cls) +
                                         " has fewer than 2 members");
            shuffle(idx, rng);
            size_t n_train = static_cast<size_t>(
                std::floor(static_cast<double>(idx.size()) * spec.train_fraction));
            train_rows.insert(train_rows.end(), idx.begin(), idx.begin() + n_train);
            test_rows.insert(test_rows.end(), idx.begin() + n_train, idx.end());
        }
    } else {
        std::vector<size_t> idx(ds.n_rows);
        std::iota(idx.begin(), idx.end(), 0);
        shuffle(idx, rng);
        size_t n_train = static_cast<size_t>(
            std::floor(static_cast<double>(ds.n_rows) * spec.train_fraction));
        train_rows.assign(idx.begin(), idx.begin() + n_train);
        test_rows.assign(idx.begin() + n_train, idx.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {take_rows(ds, train_rows), take_rows(ds, test_rows)};
}

std::vector<double> average_ranks(const std::vector<double>& values) {
    size_t n = values.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double mid = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
        i = j + 1;
    }
    return ranks;
}

std::vector<double> spearman_matrix(const Dataset& ds) {
    if (ds.n_rows < 2) throw std::runtime_error("spearman needs at least 2 rows");
    size_t n = ds.n_rows, m = ds.n_cols;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    std::vector<std::vector<double>> ranks(m);
    std::vector<bool> constant(m, false);
    for (size_t c = 0; c < m; ++c) {
        std::vector<double> col(n);
        for (size_t r = 0; r < n; ++r) col[r] = ds.at(r, c);
        constant[c] = std::all_of(col.begin(), col.end(),
                                  [&](double v) { return v == col[0]; });
        ranks[c] = average_ranks(col);
    }

    std::vector<double> centered(m * n);
    std::vector<double> norms(m);
    double mean_rank = (static_cast<double>(n) + 1.0) / 2.0;
    for (size_t c = 0; c < m; ++c) {
        double ss = 0.0;
        for (size_t r = 0; r < n; ++r) {
            double d = ranks[c][r] - mean_rank;
            centered[c * n + r] = d;
            ss += d * d;
        }
        norms[c] = std::sqrt(ss);
    }

    std::vector<double> out(m * m, nan);
    for (size_t a = 0; a < m; ++a) {
        if (constant[a]) continue;
        out[a * m + a] = 1.0;
        for (size_t b = a + 1; b < m; ++b) {
            if (constant[b]) continue;
            double num = 0.0;
            for (size_t r = 0; r < n; ++r)
                num += centered[a * n + r] * centered[b * n + r];
            double rho = num / (norms[a] * norms[b]);
            rho = std::clamp(rho, -1.0, 1.0);
            out[a * m + b] = rho;
            out[b * m + a] = rho;
        }
    }
    return out;
}

std::vector<FeatureSummary> summarize(const Dataset& ds, size_t n_bins) {
    if (ds.n_rows == 0) throw std::runtime_error("empty dataset");
    std::vector<FeatureSummary> out;
    for (size_t c = 0; c < ds.n_cols; ++c) {
        FeatureSummary fs;
        fs.name = ds.feature_names[c];
        std::vector<double> col(ds.n_rows);
        for (size_t r = 0; r < ds.n_rows; ++r) col[r] = ds.at(r, c);
        auto sorted = col;
        std::sort(sorted.begin(), sorted.end());
        fs.min = sorted.front();
        fs.max = sorted.back();
        fs.mean = std::accumulate(col.begin(), col.end(), 0.0) /
                  static_cast<double>(col.size());
        size_t n = sorted.size();
        fs.median = (n % 2 == 1) ? sorted[n / 2]
                                 : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        fs.hist_class0.assign(n_bins, 0);
        fs.hist_class1.assign(n_bins, 0);
        double width = fs.max - fs.min;
        for (size_t r = 0; r < ds.n_rows; ++r) {
            size_t bin = 0;
            if (width > 0) {
                bin = static_cast<size_t>((col[r] - fs.min) / width *
                                          static_cast<double>(n_bins));
                if (bin >= n_bins) bin = n_bins - 1;
            }
            (ds.labels[r] == 0 ? fs.hist_class0 : fs.hist_class1)[bin]++;
        }
        out.push_back(std::move(fs));
    }
    return out;
}

} // namespace gbt
