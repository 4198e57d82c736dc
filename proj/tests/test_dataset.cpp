#include <doctest.h>

#include "gbt/dataset.hpp"
#include "gbt/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

using namespace gbt;

namespace {

const std::string kWdbc = std::string(GBT_DATA_DIR) + "/wdbc.csv";

const Dataset& wdbc() {
    static Dataset ds = load_csv(kWdbc, "target");
    return ds;
}

struct TempCsv {
    std::string path;
    explicit TempCsv(const std::string& content) {
        path = std::string("tmp_test_") + std::to_string(counter++) + ".csv";
        std::ofstream out(path);
        out << content;
    }
    ~TempCsv() { std::remove(path.c_str()); }
    static int counter;
};
int TempCsv::counter = 0;

// Pearson correlation, independent of the ranking code under test.
double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    size_t n = a.size();
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double num = 0, da = 0, db = 0;
    for (size_t i = 0; i < n; ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    return num / std::sqrt(da * db);
}

Dataset two_column(const std::vector<double>& x, const std::vector<double>& y) {
    Dataset ds;
    ds.n_rows = x.size();
    ds.n_cols = 2;
    ds.feature_names = {"x", "y"};
    for (size_t i = 0; i < x.size(); ++i) {
        ds.features.push_back(x[i]);
        ds.features.push_back(y[i]);
        ds.labels.push_back(0);
    }
    return ds;
}

} // namespace

TEST_CASE("load_csv on the WDBC file") {
    const Dataset& ds = wdbc();
    CHECK(ds.n_rows == 569);
    CHECK(ds.n_cols == 30);
    auto counts = ds.class_counts();
    CHECK(counts[0] == 357);
    CHECK(counts[1] == 212);
    CHECK(ds.feature_names[0] == "mean radius");
}

TEST_CASE("load_csv minimal and error cases") {
    SUBCASE("single row") {
        TempCsv f("a,b,target\n1.5,2.5,1\n");
        Dataset ds = load_csv(f.path, "target");
        CHECK(ds.n_rows == 1);
        CHECK(ds.n_cols == 2);
        CHECK(ds.labels[0] == 1);
    }
    SUBCASE("B/M labels map to 0/1") {
        TempCsv f("a,diagnosis\n1,M\n2,B\n");
        Dataset ds = load_csv(f.path, "diagnosis");
        CHECK(ds.labels[0] == 1);
        CHECK(ds.labels[1] == 0);
    }
    SUBCASE("bad cell reports row and column") {
        std::string content = "a,b,target\n";
        for (int i = 0; i < 5; ++i) content += "1,2,0\n";
        content += "1,abc,1\n";
        TempCsv f(content);
        try {
            load_csv(f.path, "target");
            FAIL("expected exception");
        } catch (const std::exception& ex) {
            std::string msg = ex.what();
            CHECK(msg.find("row 5") != std::string::npos);
            CHECK(msg.find("'b'") != std::string::npos);
        }
    }
    SUBCASE("missing target column") {
        TempCsv f("a,b\n1,2\n");
        CHECK_THROWS(load_csv(f.path, "target"));
    }
    SUBCASE("missing file") { CHECK_THROWS(load_csv("does_not_exist.csv", "target")); }
    SUBCASE("empty dataset") {
        TempCsv f("a,target\n");
        CHECK_THROWS(load_csv(f.path, "target"));
    }
    SUBCASE("empty cell is an error") {
        TempCsv f("a,b,target\n1,,0\n");
        CHECK_THROWS(load_csv(f.path, "target"));
    }
}

TEST_CASE("validate_ranges") {
    const Dataset& ds = wdbc();
    auto checks = validate_ranges(ds, {{"mean radius", 6.981, 28.11},
                                       {"worst area", 185.2, 4254.0}});
    CHECK(checks[0].pass);
    CHECK(checks[1].pass);

    auto vacuous = validate_ranges(
        ds, {{"mean radius", -std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity()}});
    CHECK(vacuous[0].pass);

    auto fail = validate_ranges(ds, {{"mean radius", 6.981, 20.0}});
    CHECK_FALSE(fail[0].pass);
    CHECK_FALSE(fail[0].offending_rows.empty());

    CHECK_THROWS(validate_ranges(ds, {{"no such feature", 0.0, 1.0}}));
}

TEST_CASE("stratified_split sizes on WDBC") {
    // floor(357 * 0.65) = 232, floor(212 * 0.65) = 137
    auto [train, test] = stratified_split(wdbc(), {0.65, 42, true});
    CHECK(train.n_rows == 369);
    CHECK(test.n_rows == 200);
    auto tc = train.class_counts();
    CHECK(tc[0] == 232);
    CHECK(tc[1] == 137);
}

TEST_CASE("split determinism and seed sensitivity") {
    Dataset ds;
    ds.n_rows = 20;
    ds.n_cols = 1;
    ds.feature_names = {"x"};
    for (size_t i = 0; i < 20; ++i) {
        ds.features.push_back(static_cast<double>(i));
        ds.labels.push_back(i % 2 == 0 ? 0 : 1);
    }
    auto [a_train, a_test] = stratified_split(ds, {0.65, 1, true});
    auto [b_train, b_test] = stratified_split(ds, {0.65, 1, true});
    CHECK(a_train.features == b_train.features);
    CHECK(a_test.features == b_test.features);

    auto [c_train, c_test] = stratified_split(ds, {0.65, 2, true});
    CHECK(c_train.n_rows == a_train.n_rows);
    auto cc = c_train.class_counts();
    auto ac = a_train.class_counts();
    CHECK(cc[0] == ac[0]);
    CHECK(cc[1] == ac[1]);
    CHECK(a_train.features != c_train.features);
}

TEST_CASE("split partition and stratification properties") {
    Rng rng(5);
    for (int iter = 0; iter < 20; ++iter) {
        size_t n = 10 + rng.uniform_int(60);
        Dataset ds;
        ds.n_rows = n;
        ds.n_cols = 1;
        ds.feature_names = {"x"};
        size_t ones = 0;
        for (size_t i = 0; i < n; ++i) {
            ds.features.push_back(rng.uniform(0, 1));
            int y = (i < 2) ? static_cast<int>(i) : (rng.uniform01() < 0.4 ? 1 : 0);
            ones += static_cast<size_t>(y);
            ds.labels.push_back(y);
        }
        if (ones < 2 || n - ones < 2) continue;

        SplitSpec spec{0.65, rng.next_u64(), true};
        auto [train, test] = stratified_split(ds, spec);
        CHECK(train.n_rows + test.n_rows == n);

        // every original row appears exactly once (rows are unique values here
        // with probability 1; compare multisets of feature values)
        std::multiset<double> orig(ds.features.begin(), ds.features.end());
        std::multiset<double> merged(train.features.begin(), train.features.end());
        merged.insert(test.features.begin(), test.features.end());
        CHECK(orig == merged);

        double overall = static_cast<double>(ones) / static_cast<double>(n);
        auto tc = train.class_counts();
        double train_frac =
            static_cast<double>(tc[1]) / static_cast<double>(train.n_rows);
        CHECK(std::abs(train_frac - overall) <= 1.0 / static_cast<double>(train.n_rows));
    }
}

TEST_CASE("split rejects degenerate classes") {
    Dataset ds;
    ds.n_rows = 3;
    ds.n_cols = 1;
    ds.feature_names = {"x"};
    ds.features = {1, 2, 3};
    ds.labels = {0, 0, 1};
    CHECK_THROWS(stratified_split(ds, {0.65, 0, true}));
}

TEST_CASE("spearman on monotone columns") {
    auto ds = two_column({1, 2, 3}, {2, 4, 6});
    auto m = spearman_matrix(ds);
    CHECK(m[1] == doctest::Approx(1.0));

    auto ds2 = two_column({1, 2, 3}, {9, 5, 1});
    auto m2 = spearman_matrix(ds2);
    CHECK(m2[1] == doctest::Approx(-1.0));
}

TEST_CASE("spearman ties against rank-then-pearson oracle") {
    std::vector<double> x{1, 2, 2, 3};
    std::vector<double> y{1, 3, 2, 4};
    auto ds = two_column(x, y);
    auto m = spearman_matrix(ds);
    double expected = pearson(average_ranks(x), average_ranks(y));
    CHECK(m[1] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("spearman random columns against oracle") {
    Rng rng(11);
    for (int iter = 0; iter < 25; ++iter) {
        size_t n = 3 + rng.uniform_int(40);
        std::vector<double> x(n), y(n);
        for (size_t i = 0; i < n; ++i) {
            // coarse grid forces ties
            x[i] = std::floor(rng.uniform(0, 6));
            y[i] = std::floor(rng.uniform(0, 6));
        }
        bool xconst = std::set<double>(x.begin(), x.end()).size() == 1;
        bool yconst = std::set<double>(y.begin(), y.end()).size() == 1;
        auto m = spearman_matrix(two_column(x, y));
        if (xconst || yconst) {
            CHECK(std::isnan(m[1]));
        } else {
            CHECK(m[1] == doctest::Approx(pearson(average_ranks(x), average_ranks(y)))
                              .epsilon(1e-12));
        }
    }
}

TEST_CASE("spearman invariance under strictly increasing transform") {
    const Dataset& ds = wdbc();
    auto base = spearman_matrix(ds);
    Dataset warped = ds;
    for (size_t r = 0; r < ds.n_rows; ++r) {
        double v = ds.at(r, 0);
        warped.features[r * ds.n_cols] = std::exp(v / 10.0) + 3.0 * v;
    }
    auto m = spearman_matrix(warped);
    for (size_t i = 0; i < base.size(); ++i) CHECK(base[i] == m[i]);  // bitwise
}

TEST_CASE("spearman constant column gets NaN, not zero") {
    auto ds = two_column({1, 1, 1}, {1, 2, 3});
    auto m = spearman_matrix(ds);
    CHECK(std::isnan(m[0]));   // constant vs itself
    CHECK(std::isnan(m[1]));
    CHECK(m[3] == 1.0);        // y vs y
}

TEST_CASE("summarize on WDBC and degenerate input") {
    auto summaries = summarize(wdbc());
    const auto& mr = summaries[0];
    CHECK(mr.name == "mean radius");
    CHECK(mr.min == doctest::Approx(6.981));
    CHECK(mr.max == doctest::Approx(28.11));
    CHECK(mr.min <= mr.median);
    CHECK(mr.median <= mr.max);
    CHECK(mr.min <= mr.mean);
    CHECK(mr.mean <= mr.max);

    // histogram counts per class add up to the class counts
    size_t c0 = 0, c1 = 0;
    for (size_t b = 0; b < mr.hist_class0.size(); ++b) {
        c0 += mr.hist_class0[b];
        c1 += mr.hist_class1[b];
    }
    CHECK(c0 == 357);
    CHECK(c1 == 212);

    Dataset single;
    single.n_rows = 1;
    single.n_cols = 1;
    single.feature_names = {"x"};
    single.features = {3.5};
    single.labels = {0};
    auto s = summarize(single);
    CHECK(s[0].min == 3.5);
    CHECK(s[0].max == 3.5);
    CHECK(s[0].mean == 3.5);
    CHECK(s[0].median == 3.5);
}

TEST_CASE("summarize min/max agree with validate_ranges") {
    const Dataset& ds = wdbc();
    auto summaries = summarize(ds);
    for (const auto& s : summaries) {
        auto rc = validate_ranges(ds, {{s.name, s.min, s.max}});
        CHECK(rc[0].pass);
        CHECK(rc[0].observed_min == s.min);
        CHECK(rc[0].observed_max == s.max);
    }
}
