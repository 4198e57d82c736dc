// Acceptance gate: end-to-end bands on WDBC plus oracle-backed property
// suites. Prints one PASS/FAIL line per criterion; exits nonzero on failure.
#include "gbt/explain.hpp"
#include "gbt/metrics.hpp"
#include "gbt/pipeline.hpp"
#include "gbt/rng.hpp"
#include "gbt/tpe.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace gbt;
namespace fs = std::filesystem;

namespace {

// The dataset split seed every criterion runs against.
constexpr uint64_t kAcceptanceSeed = 3;

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            files[e.path().lexically_relative(dir).string()] = slurp(e.path());
    return files;
}

struct EvalNumbers {
    double auc = 0, recall = 0, fbeta = 0;
    long long fn = 0;
};

EvalNumbers read_eval(const fs::path& p) {
    std::string js = slurp(p);
    auto grab = [&](const std::string& key) {
        size_t at = js.find("\"" + key + "\"");
        at = js.find(':', at);
        return std::stod(js.substr(at + 1));
    };
    EvalNumbers ev;
    ev.auc = grab("auc");
    ev.recall = grab("recall");
    ev.fbeta = grab("f_beta");
    ev.fn = std::llround(grab("fn"));
    return ev;
}

double mann_whitney(std::span<const int> labels, std::span<const double> scores) {
    double num = 0;
    size_t n_pos = 0, n_neg = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) continue;
        ++n_pos;
        for (size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] == 1) continue;
            if (scores[i] > scores[j]) num += 1.0;
            else if (scores[i] == scores[j]) num += 0.5;
        }
    }
    for (int l : labels) n_neg += l != 1;
    return num / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double subset_weight(size_t s, size_t m) {
    double w = 1.0 / static_cast<double>(m);
    for (size_t k = 1; k <= s; ++k)
        w *= static_cast<double>(k) / static_cast<double>(m - k);
    return w;
}

double routed_value(const Tree& t, int idx, std::span<const double> x, size_t mask) {
    const Node& nd = t.nodes[static_cast<size_t>(idx)];
    if (nd.is_leaf) return nd.value;
    if ((mask >> nd.feature) & 1) {
        int child = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
        return routed_value(t, child, x, mask);
    }
    double cl = t.nodes[static_cast<size_t>(nd.left)].cover;
    double cr = t.nodes[static_cast<size_t>(nd.right)].cover;
    return (cl * routed_value(t, nd.left, x, mask) +
            cr * routed_value(t, nd.right, x, mask)) /
           (cl + cr);
}

std::vector<double> enumerate_shap(const Ensemble& e, std::span<const double> x) {
    size_t m = e.n_features;
    size_t n_subsets = size_t{1} << m;
    std::vector<double> value(n_subsets);
    for (size_t mask = 0; mask < n_subsets; ++mask) {
        double v = e.base_score;
        for (const auto& s : e.stages)
            v += s.coefficient * routed_value(s.tree, s.tree.root, x, mask);
        value[mask] = v;
    }
    std::vector<double> phi(m, 0.0);
    for (size_t mask = 0; mask < n_subsets; ++mask) {
        size_t s = static_cast<size_t>(std::popcount(mask));
        for (size_t i = 0; i < m; ++i) {
            if ((mask >> i) & 1) continue;
            phi[i] += subset_weight(s, m) * (value[mask | (size_t{1} << i)] - value[mask]);
        }
    }
    return phi;
}

SplitCandidate brute_force_split(const std::vector<double>& features, size_t n_cols,
                                 const std::vector<double>& g,
                                 const std::vector<double>& h,
                                 const GrowthParams& params, double& second_best) {
    size_t n = g.size();
    SplitCandidate best;
    second_best = -std::numeric_limits<double>::infinity();
    for (size_t f = 0; f < n_cols; ++f) {
        std::set<double> values;
        for (size_t r = 0; r < n; ++r) values.insert(features[r * n_cols + f]);
        std::vector<double> sorted(values.begin(), values.end());
        for (size_t k = 0; k + 1 < sorted.size(); ++k) {
            double t = 0.5 * (sorted[k] + sorted[k + 1]);
            double gl = 0, hl = 0, gr = 0, hr = 0;
            size_t nl = 0, nr = 0;
            for (size_t r = 0; r < n; ++r) {
                if (features[r * n_cols + f] <= t) {
                    gl += g[r];
                    hl += h[r];
                    ++nl;
                } else {
                    gr += g[r];
                    hr += h[r];
                    ++nr;
                }
            }
            if (nl < static_cast<size_t>(params.min_samples_leaf) ||
                nr < static_cast<size_t>(params.min_samples_leaf))
                continue;
            double gain = split_gain(gl, hl, gr, hr, params.lambda, params.gamma);
            if (!best.found || gain > best.gain) {
                if (best.found) second_best = std::max(second_best, best.gain);
                best.found = true;
                best.feature = f;
                best.threshold = t;
                best.gain = gain;
            } else {
                second_best = std::max(second_best, gain);
            }
        }
    }
    return best;
}

const std::vector<Family> kFamilies{Family::adaboost, Family::xgb, Family::lgbm,
                                    Family::catboost_like};

std::string data_path() { return std::string(GBT_DATA_DIR) + "/wdbc.csv"; }

RunConfig base_config(const fs::path& out) {
    RunConfig cfg;
    cfg.data_path = data_path();
    cfg.seed = kAcceptanceSeed;
    cfg.out_dir = out.string();
    return cfg;
}

// ---------------------------------------------------------------- criteria

void criterion_1_baseline(const fs::path& work) {
    auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = base_config(work / "baseline");
    CommandResult res = cmd_baseline(cfg);
    double secs = elapsed_s(t0);

    bool pass = res.ok && secs < 30.0;
    std::string detail = "baseline bands:";
    for (Family f : kFamilies) {
        auto ev = read_eval(fs::path(cfg.out_dir) / ("eval_" + family_name(f) + ".json"));
        bool ok = ev.auc >= 0.95 && ev.recall >= 0.94;
        pass = pass && ok;
        char buf[128];
        std::snprintf(buf, sizeof(buf), " %s auc=%.4f recall=%.4f", family_name(f).c_str(),
                      ev.auc, ev.recall);
        detail += buf;
    }
    char t[48];
    std::snprintf(t, sizeof(t), " (%.1fs)", secs);
    report(1, pass, detail + t);
}

void criteria_2_3_tuning(const fs::path& work) {
    auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = base_config(work / "tune");
    cfg.n_trials = 300;
    CommandResult res = cmd_tune(cfg);
    double secs = elapsed_s(t0);

    bool pass2 = res.ok && secs < 4 * 600.0;
    int improved_or_equal_fn = 0, strictly_reduced_fn = 0;
    std::string d2 = "tuning:";
    for (Family f : kFamilies) {
        std::string fam = family_name(f);
        auto base = read_eval(fs::path(cfg.out_dir) / ("eval_" + fam + "_tuned.json"));
        // baseline numbers come from delta.csv's source evals written by tune
        (void)base;
    }
    // parse delta.csv for the baseline/tuned comparison
    std::string delta = slurp(fs::path(cfg.out_dir) / "delta.csv");
    std::istringstream lines(delta);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) {
        std::istringstream cells(line);
        std::string fam, cell;
        std::getline(cells, fam, ',');
        std::vector<double> v;
        while (std::getline(cells, cell, ',')) v.push_back(std::stod(cell));
        // columns: fn_b, fn_t, fbeta_b, fbeta_t, auc_b, auc_t, recall_b, recall_t
        double fn_b = v[0], fn_t = v[1], fb_b = v[2], fb_t = v[3], auc_t = v[5];
        bool ok = fb_t >= fb_b && auc_t >= 0.98;
        pass2 = pass2 && ok;
        if (fn_t <= fn_b) ++improved_or_equal_fn;
        if (fn_t < fn_b) ++strictly_reduced_fn;
        char buf[160];
        std::snprintf(buf, sizeof(buf), " %s fbeta %.4f->%.4f auc=%.4f fn %g->%g",
                      fam.c_str(), fb_b, fb_t, auc_t, fn_b, fn_t);
        d2 += buf;
    }
    char t[48];
    std::snprintf(t, sizeof(t), " (%.0fs)", secs);
    report(2, pass2, d2 + t);

    bool pass3 = improved_or_equal_fn >= 2 && strictly_reduced_fn >= 1;
    report(3, pass3,
           "false negatives: " + std::to_string(improved_or_equal_fn) +
               "/4 families non-increasing, " + std::to_string(strictly_reduced_fn) +
               " strictly reduced");
}

void criterion_4_metrics() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(20240203);
    bool pass = true;
    for (int iter = 0; iter < 1000 && pass; ++iter) {
        size_t n = 5 + rng.uniform_int(196);
        std::vector<int> y(n);
        std::vector<double> s(n);
        bool has0 = false, has1 = false;
        for (size_t i = 0; i < n; ++i) {
            y[i] = rng.uniform01() < 0.4 ? 1 : 0;
            s[i] = rng.uniform01() < 0.3 ? std::floor(rng.uniform(0, 6)) / 6.0
                                         : rng.uniform01();
            has0 |= y[i] == 0;
            has1 |= y[i] == 1;
        }
        if (!has0) y[0] = 0;
        if (!has1) y[1] = 1;

        double auc = roc_auc(y, s).auc;
        if (std::abs(auc - mann_whitney(y, s)) > 1e-12) pass = false;

        std::vector<int> pred(n);
        for (size_t i = 0; i < n; ++i) pred[i] = s[i] >= 0.5 ? 1 : 0;
        auto cm = confusion(y, pred);
        double fb1 = f_beta(cm, 1.0), f1v = f1(cm);
        if (metric_defined(fb1) != metric_defined(f1v)) pass = false;
        if (metric_defined(fb1) && fb1 != f1v) pass = false;
        if (metric_defined(accuracy(cm))) {
            long long correct = std::llround(accuracy(cm) * static_cast<double>(cm.total()));
            if (correct != static_cast<long long>(cm.tp + cm.tn)) pass = false;
        }
    }
    double secs = elapsed_s(t0);
    pass = pass && secs < 10.0;
    char buf[96];
    std::snprintf(buf, sizeof(buf),
                  "1000 metric instances vs Mann-Whitney/identity oracles (%.1fs)", secs);
    report(4, pass, buf);
}

void criterion_5_shap(const fs::path& work) {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(777);
    bool pass = true;
    double worst_gap = 0.0;

    for (int iter = 0; iter < 200 && pass; ++iter) {
        size_t m = 2 + rng.uniform_int(11);  // up to 12 features
        size_t n = 24 + rng.uniform_int(40);
        Dataset ds;
        ds.n_rows = n;
        ds.n_cols = m;
        for (size_t c = 0; c < m; ++c) ds.feature_names.push_back("f" + std::to_string(c));
        for (size_t i = 0; i < n * m; ++i) ds.features.push_back(rng.uniform(0, 1));
        for (size_t i = 0; i < n; ++i)
            ds.labels.push_back(ds.at(i, rng.uniform_int(m)) > 0.5 ? 1 : 0);
        if (ds.class_counts()[0] == 0) ds.labels[0] = 0;
        if (ds.class_counts()[1] == 0) ds.labels[0] = 1;

        BoostParams p;
        p.n_stages = 1 + static_cast<int>(rng.uniform_int(5));  // up to 5 trees
        p.growth.max_depth = 1 + static_cast<int>(rng.uniform_int(3));
        p.growth.max_leaves = 8;
        p.seed = rng.next_u64();
        Family fam = kFamilies[1 + rng.uniform_int(3)];
        Ensemble e = train_gradient(ds, p, fam);

        std::vector<double> x(m);
        for (double& v : x) v = rng.uniform(-0.2, 1.2);
        auto a = shap_tree(e, x);
        auto oracle = enumerate_shap(e, x);
        for (size_t f = 0; f < m; ++f) {
            worst_gap = std::max(worst_gap, std::abs(a.phi[f] - oracle[f]));
            if (std::abs(a.phi[f] - oracle[f]) > 1e-9) pass = false;
        }
    }

    // local accuracy on every WDBC test instance for every tuned model
    RunConfig cfg = base_config(work / "tune");
    Dataset full = load_csv(cfg.data_path, cfg.target_column);
    SplitSpec spec{cfg.train_fraction, cfg.seed, cfg.stratified};
    auto [train, test] = stratified_split(full, spec);
    (void)train;
    double worst_local = 0.0;
    for (Family f : kFamilies) {
        fs::path mp = fs::path(cfg.out_dir) / ("model_" + family_name(f) + "_tuned.json");
        Ensemble model = load_model(mp.string());
        for (size_t r = 0; r < test.n_rows; ++r) {
            auto a = shap_tree(model, {test.row(r), test.n_cols});
            double sum = a.base_value;
            for (double phi : a.phi) sum += phi;
            double err = std::abs(sum - model.predict_margin({test.row(r), test.n_cols}));
            worst_local = std::max(worst_local, err);
        }
    }
    if (worst_local > 1e-6) pass = false;

    double secs = elapsed_s(t0);
    pass = pass && secs < 60.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "200 ensembles vs enumeration (max gap %.2e), worst local accuracy "
                  "%.2e (%.1fs)",
                  worst_gap, worst_local, secs);
    report(5, pass, buf);
}

void criterion_6_tree_oracle() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(4242);
    bool pass = true;
    for (int iter = 0; iter < 500 && pass; ++iter) {
        size_t n = 2 + rng.uniform_int(15);   // <= 16 rows
        size_t cols = 1 + rng.uniform_int(3); // <= 3 cols
        std::vector<double> X;
        std::vector<double> g, h;
        for (size_t i = 0; i < n; ++i) {
            for (size_t c = 0; c < cols; ++c) X.push_back(std::floor(rng.uniform(0, 5)));
            g.push_back(rng.uniform(-2, 2));
            h.push_back(rng.uniform(0.01, 2));
        }
        GrowthParams gp;
        gp.lambda = rng.uniform(0, 2);
        gp.gamma = rng.uniform(0, 0.5);

        double second = 0;
        auto oracle = brute_force_split(X, cols, g, h, gp, second);
        std::vector<size_t> rows(n);
        for (size_t i = 0; i < n; ++i) rows[i] = i;
        auto impl = best_split(X, cols, g, h, rows, gp);
        if (impl.found != oracle.found) pass = false;
        if (!oracle.found) continue;
        if (std::abs(impl.gain - oracle.gain) >
            1e-9 * std::max(1.0, std::abs(oracle.gain)))
            pass = false;
        if (oracle.gain - second > 1e-7 &&
            (impl.feature != oracle.feature || impl.threshold != oracle.threshold))
            pass = false;
    }
    double secs = elapsed_s(t0);
    pass = pass && secs < 10.0;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "500 root splits vs exhaustive enumeration (%.1fs)",
                  secs);
    report(6, pass, buf);
}

void criterion_7_adaboost_oracle() {
    // fixed 10-row instance; weak learners are taken as fitted, the stage
    // arithmetic (error, vote weight, reweighting) is re-derived by hand
    Dataset ds;
    ds.n_rows = 10;
    ds.n_cols = 2;
    ds.feature_names = {"u", "v"};
    ds.features = {1, 5, 2, 4, 3, 6, 4, 5, 5, 2,
                   6, 7, 7, 1, 8, 6, 9, 3, 10, 8};
    ds.labels = {0, 0, 0, 1, 0, 1, 0, 1, 1, 1};

    BoostParams p;
    p.n_stages = 6;
    p.growth.max_depth = 1;
    std::vector<AdaBoostStageTrace> trace;
    Ensemble e = train_adaboost(ds, p, &trace);

    bool pass = trace.size() == 6;
    size_t n = ds.n_rows;
    std::vector<double> w(n, 0.1);
    std::vector<int> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = ds.labels[i] == 1 ? 1 : -1;

    for (size_t m = 0; m < trace.size() && pass; ++m) {
        const Tree& tree = e.stages[m].tree;
        double err = 0;
        std::vector<double> pred(n);
        for (size_t i = 0; i < n; ++i) {
            pred[i] = tree.predict({ds.row(i), ds.n_cols});
            if ((pred[i] > 0 ? 1 : -1) != y[i]) err += w[i];
        }
        err = std::clamp(err, 1e-10, 1.0 - 1e-10);
        double alpha = 0.5 * std::log((1.0 - err) / err);
        if (std::abs(trace[m].err - err) > 1e-12) pass = false;
        if (std::abs(trace[m].alpha - alpha) > 1e-12) pass = false;

        double w_sum = 0;
        for (size_t i = 0; i < n; ++i) {
            w[i] *= std::exp(-alpha * y[i] * pred[i]);
            w_sum += w[i];
        }
        double traced_sum = 0;
        for (size_t i = 0; i < n; ++i) {
            w[i] /= w_sum;
            if (std::abs(trace[m].weights[i] - w[i]) > 1e-12) pass = false;
            traced_sum += trace[m].weights[i];
        }
        if (std::abs(traced_sum - 1.0) > 1e-12) pass = false;
        w = trace[m].weights;
    }
    report(7, pass, "10-row stagewise (err, alpha, weights) vs hand-stepped recursion");
}

void criterion_8_tpe_benchmark() {
    auto t0 = std::chrono::steady_clock::now();
    tpe::SearchSpace space;
    space.add_uniform("x", -10.0, 10.0);
    auto objective = [](const tpe::Params& p) {
        double x = tpe::as_double(p.at("x"));
        return -(x - 2.0) * (x - 2.0);
    };

    int within = 0;
    std::vector<double> tpe_best, rand_best;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        tpe::Study st = tpe::run_study(space, objective, 100, seed);
        double best_x = tpe::as_double(st.best_trial()->params.at("x"));
        if (std::abs(best_x - 2.0) <= 0.3) ++within;
        tpe_best.push_back(st.best_trial()->objective);

        Rng rng(derive_seed(seed, "acceptance-random-search"));
        double rb = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < 100; ++i) {
            double x = rng.uniform(-10.0, 10.0);
            rb = std::max(rb, -(x - 2.0) * (x - 2.0));
        }
        rand_best.push_back(rb);
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    double med_tpe = median(tpe_best), med_rand = median(rand_best);
    double secs = elapsed_s(t0);
    bool pass = within >= 45 && med_tpe > med_rand && secs < 30.0;
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "|x-2|<=0.3 in %d/50 seeds, median objective %.3e vs random %.3e (%.1fs)",
                  within, med_tpe, med_rand, secs);
    report(8, pass, buf);
}

void criterion_9_replay(const fs::path& work) {
    RunConfig cfg = base_config(work / "baseline");
    fs::path dir(cfg.out_dir);
    auto before = snapshot(dir);
    CommandResult res = replay_manifest((dir / "manifest.json").string());
    bool pass = res.ok && snapshot(dir) == before;

    RunConfig icfg = base_config(work / "inspect");
    cmd_inspect(icfg);
    auto ibefore = snapshot(icfg.out_dir);
    replay_manifest((fs::path(icfg.out_dir) / "manifest.json").string());
    pass = pass && snapshot(icfg.out_dir) == ibefore;

    report(9, pass, "manifest replays reproduce all artifacts byte-identically");
}

} // namespace

int main() {
    fs::path work = fs::temp_directory_path() / "gbt_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    criterion_1_baseline(work);
    criteria_2_3_tuning(work);
    criterion_4_metrics();
    criterion_5_shap(work);
    criterion_6_tree_oracle();
    criterion_7_adaboost_oracle();
    criterion_8_tpe_benchmark();
    criterion_9_replay(work);

    fs::remove_all(work);
    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
