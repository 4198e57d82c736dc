#include "gbt/tpe.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

namespace gbt::tpe {

namespace {

using ordered_json = nlohmann::ordered_json;

void check_unique(const SearchSpace& sp, const std::string& name) {
    for (const auto& p : sp.params) {
        const std::string& existing =
            std::visit([](const auto& x) -> const std::string& { return x.name; }, p);
        if (existing == name)
            throw std::invalid_argument("duplicate parameter name: " + name);
    }
}

} // namespace

void SearchSpace::add_uniform(std::string name, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("uniform requires lo < hi");
    check_unique(*this, name);
    params.push_back(UniformParam{std::move(name), lo, hi});
}

void SearchSpace::add_log_uniform(std::string name, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("log_uniform requires lo < hi");
    if (lo <= 0.0) throw std::invalid_argument("log_uniform requires lo > 0");
    check_unique(*this, name);
    params.push_back(LogUniformParam{std::move(name), lo, hi});
}

void SearchSpace::add_int_uniform(std::string name, long lo, long hi) {
    if (!(lo < hi)) throw std::invalid_argument("int_uniform requires lo < hi");
    check_unique(*this, name);
    params.push_back(IntUniformParam{std::move(name), lo, hi});
}

void SearchSpace::add_categorical(std::string name, std::vector<std::string> choices) {
    if (choices.empty()) throw std::invalid_argument("categorical needs choices");
    check_unique(*this, name);
    params.push_back(CategoricalParam{std::move(name), std::move(choices)});
}

std::string SearchSpace::to_json() const {
    ordered_json arr = ordered_json::array();
    for (const auto& p : params) {
        ordered_json j;
        if (const auto* u = std::get_if<UniformParam>(&p))
            j = {{"type", "uniform"}, {"name", u->name}, {"lo", u->lo}, {"hi", u->hi}};
        else if (const auto* lu = std::get_if<LogUniformParam>(&p))
            j = {{"type", "log_uniform"}, {"name", lu->name}, {"lo", lu->lo}, {"hi", lu->hi}};
        else if (const auto* iu = std::get_if<IntUniformParam>(&p))
            j = {{"type", "int_uniform"}, {"name", iu->name}, {"lo", iu->lo}, {"hi", iu->hi}};
        else if (const auto* c = std::get_if<CategoricalParam>(&p))
            j = {{"type", "categorical"}, {"name", c->name}, {"choices", c->choices}};
        arr.push_back(std::move(j));
    }
    return ordered_json{{"params", std::move(arr)}}.dump(2);
}

SearchSpace SearchSpace::from_json(const std::string& text) {
    auto j = ordered_json::parse(text);
    SearchSpace sp;
    for (const auto& pj : j.at("params")) {
        std::string type = pj.at("type").get<std::string>();
        std::string name = pj.at("name").get<std::string>();
        if (type == "uniform")
            sp.add_uniform(name, pj.at("lo").get<double>(), pj.at("hi").get<double>());
        else if (type == "log_uniform")
            sp.add_log_uniform(name, pj.at("lo").get<double>(), pj.at("hi").get<double>());
        else if (type == "int_uniform")
            sp.add_int_uniform(name, pj.at("lo").get<long>(), pj.at("hi").get<long>());
        else if (type == "categorical")
            sp.add_categorical(name, pj.at("choices").get<std::vector<std::string>>());
        else
            throw std::runtime_error("unknown parameter type: " + type);
    }
    return sp;
}

const Trial* Study::best_trial() const {
    if (best < 0) return nullptr;
    return &trials[static_cast<size_t>(best)];
}

size_t Study::n_complete() const {
    size_t n = 0;
    for (const auto& t : trials) n += t.state == TrialState::complete ? 1 : 0;
    return n;
}

double as_double(const ParamValue& v) {
    if (const double* d = std::get_if<double>(&v)) return *d;
    if (const long* i = std::get_if<long>(&v)) return static_cast<double>(*i);
    throw std::runtime_error("parameter is not numeric");
}

long as_int(const ParamValue& v) {
    if (const long* i = std::get_if<long>(&v)) return *i;
    throw std::runtime_error("parameter is not an integer");
}

const std::string& as_string(const ParamValue& v) {
    if (const std::string* s = std::get_if<std::string>(&v)) return *s;
    throw std::runtime_error("parameter is not categorical");
}

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Mixture of truncated Gaussians around the observed points plus one uniform
// prior component over the whole range. The prior keeps exploration alive:
// without it the candidate argmax self-reinforces on the current cluster and
// the search can stall far from the optimum.
// Mixture of truncated Gaussians around the observed points plus one uniform
// prior component over the whole range. The prior keeps exploration alive:
// without it the candidate argmax self-reinforces on the current cluster and
// the search can stall far from the optimum.
struct Kde {
    std::vector<double> centers;
    std::vector<double> widths;   // per-center bandwidth
    std::vector<double> weights;  // mixture weights, prior included, sum 1
    double lo = 0.0, hi = 1.0;
    double prior_weight = 0.0;

    double density(double x) const {
        double acc = prior_weight / (hi - lo);  // uniform prior component
        for (size_t i = 0; i < centers.size(); ++i) {
            double c = centers[i], b = widths[i];
            double z = norm_cdf((hi - c) / b) - norm_cdf((lo - c) / b);
            if (z <= 0.0) continue;
            double u = (x - c) / b;
            double pdf = std::exp(-0.5 * u * u) /
                         (b * 2.5066282746310005024157652848110);
            acc += weights[i] * pdf / z;
        }
        return acc;
    }

    double sample(Rng& rng) const {
        double u = rng.uniform01();
        size_t i = 0;
        double acc = 0.0;
        for (; i < centers.size(); ++i) {
            acc += weights[i];
            if (u < acc) break;
        }
        if (i == centers.size()) return rng.uniform(lo, hi);  // prior draw
        for (int tries = 0; tries < 100; ++tries) {
            double x = centers[i] + widths[i] * rng.normal();
            if (x >= lo && x <= hi) return x;
        }
        return std::clamp(centers[i], lo, hi);
    }
};

// Parzen mixture over the observed points plus one uniform prior component.
//  - points arrive ranked (best objective first); kernel weights decay
//    geometrically with rank (decay < 1) so the density concentrates on the
//    frontier of the set instead of its center of mass — with uniform
//    weights a dense mediocre cluster outvotes the few best points and the
//    search tracks the cluster mode. decay = 1 gives uniform weights.
//  - bandwidth: with per_point_widths false, one shared Scott's-rule width
//    floored at floor_frac * range, so the density peaks sharply at the
//    best point even when it sits isolated; with per_point_widths true,
//    nearest-neighbor spacing per kernel (bounds act as virtual neighbors,
//    same floor), so the density rises sharply over any dense pile. The
//    good set wants the former (exploit the actual best), the bad set the
//    latter (push candidates out of over-sampled regions — a single Scott
//    width over a scattered bad set smears the pile flat and the search
//    freezes on it).
Kde make_kde(const std::vector<double>& ranked_points, double lo, double hi,
             double floor_frac, double decay, bool per_point_widths) {
    Kde kde;
    kde.lo = lo;
    kde.hi = hi;

    size_t n = ranked_points.size();
    double mean = std::accumulate(ranked_points.begin(), ranked_points.end(), 0.0) /
                  static_cast<double>(n);
    double ss = 0.0;
    for (double p : ranked_points) ss += (p - mean) * (p - mean);
    double scott = std::sqrt(ss / static_cast<double>(n)) *
                   std::pow(static_cast<double>(n), -0.2);
    double floor_bw = floor_frac * (hi - lo);
    double shared_bw = std::max(scott, floor_bw);

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return ranked_points[a] < ranked_points[b];
    });

    std::vector<double> rank_w(n);
    double total = 0.0;
    for (size_t r = 0; r < n; ++r) total += rank_w[r] = std::pow(decay, static_cast<double>(r));
    double prior_share = total / static_cast<double>(n);  // average kernel weight
    total += prior_share;
    kde.prior_weight = prior_share / total;

    kde.centers.resize(n);
    kde.widths.resize(n);
    kde.weights.resize(n);
    for (size_t i = 0; i < n; ++i) {
        size_t src = order[i];  // position-sorted for neighbor distances
        kde.centers[i] = ranked_points[src];
        kde.weights[i] = rank_w[src] / total;
        if (per_point_widths) {
            double left = i == 0 ? lo : kde.centers[i - 1];
            double right = i + 1 == n ? hi : ranked_points[order[i + 1]];
            double b = std::max(kde.centers[i] - left, right - kde.centers[i]);
            kde.widths[i] = std::clamp(b, floor_bw, hi - lo);
        } else {
            kde.widths[i] = std::min(shared_bw, hi - lo);
        }
    }
    return kde;
}

struct GoodBad {
    std::vector<const Trial*> good, bad;
};

GoodBad split_trials(const Study& study) {
    std::vector<const Trial*> complete;
    for (const auto& t : study.trials)
        if (t.state == TrialState::complete) complete.push_back(&t);
    std::stable_sort(complete.begin(), complete.end(),
                     [](const Trial* a, const Trial* b) {
                         return a->objective > b->objective;
                     });
    size_t n = complete.size();
    size_t n_good = static_cast<size_t>(
        std::ceil(study.options.gamma * static_cast<double>(n)));
    n_good = std::clamp<size_t>(n_good, 1, n - 1);
    GoodBad gb;
    gb.good.assign(complete.begin(), complete.begin() + static_cast<long>(n_good));
    gb.bad.assign(complete.begin() + static_cast<long>(n_good), complete.end());
    return gb;
}

double sample_prior_numeric(double lo, double hi, Rng& rng) {
    return rng.uniform(lo, hi);
}

// One numeric parameter in its sampling domain (native or log).
double suggest_numeric(const GoodBad& gb, const std::string& name, double lo,
                       double hi, bool log_domain, const TpeOptions& opt, Rng& rng) {
    auto domain = [&](double v) { return log_domain ? std::log(v) : v; };
    double dlo = domain(lo), dhi = domain(hi);

    std::vector<double> good_pts, bad_pts;
    for (const Trial* t : gb.good)
        if (auto it = t->params.find(name); it != t->params.end())
            good_pts.push_back(domain(as_double(it->second)));
    for (const Trial* t : gb.bad)
        if (auto it = t->params.find(name); it != t->params.end())
            bad_pts.push_back(domain(as_double(it->second)));
    if (good_pts.empty() || bad_pts.empty())
        return sample_prior_numeric(dlo, dhi, rng);

    Kde l = make_kde(good_pts, dlo, dhi, opt.bandwidth_floor_frac, 0.7, false);
    Kde g = make_kde(bad_pts, dlo, dhi, opt.bandwidth_floor_frac, 1.0, true);

    double best_x = 0.0, best_score = -1.0;
    for (int c = 0; c < opt.n_candidates; ++c) {
        double x = l.sample(rng);
        double gd = g.density(x);
        double score = gd > 0.0 ? l.density(x) / gd : l.density(x) / 1e-300;
        if (score > best_score) {
            best_score = score;
            best_x = x;
        }
    }
    return best_x;
}

std::string suggest_categorical(const GoodBad& gb, const std::string& name,
                                const std::vector<std::string>& choices,
                                const TpeOptions& opt, Rng& rng) {
    size_t k = choices.size();
    std::vector<double> good_w(k, 1.0), bad_w(k, 1.0);  // +1 smoothing
    double good_n = static_cast<double>(k), bad_n = static_cast<double>(k);
    auto index_of = [&](const std::string& s) {
        return static_cast<size_t>(std::find(choices.begin(), choices.end(), s) -
                                   choices.begin());
    };
    for (const Trial* t : gb.good)
        if (auto it = t->params.find(name); it != t->params.end()) {
            good_w[index_of(as_string(it->second))] += 1.0;
            good_n += 1.0;
        }
    for (const Trial* t : gb.bad)
        if (auto it = t->params.find(name); it != t->params.end()) {
            bad_w[index_of(as_string(it->second))] += 1.0;
            bad_n += 1.0;
        }

    size_t best_i = 0;
    double best_score = -1.0;
    for (int c = 0; c < opt.n_candidates; ++c) {
        // draw from the good distribution
        double u = rng.uniform01() * good_n;
        size_t i = 0;
        double acc = 0.0;
        for (; i + 1 < k; ++i) {
            acc += good_w[i];
            if (u < acc) break;
        }
        double score = (good_w[i] / good_n) / (bad_w[i] / bad_n);
        if (score > best_score) {
            best_score = score;
            best_i = i;
        }
    }
    return choices[best_i];
}

} // namespace

Params suggest(const Study& study, Rng& rng) {
    Params out;
    size_t n_complete = study.n_complete();
    bool startup = n_complete < static_cast<size_t>(std::max(study.options.n_startup, 2));
    GoodBad gb;
    if (!startup) gb = split_trials(study);

    for (const auto& spec : study.space.params) {
        if (const auto* u = std::get_if<UniformParam>(&spec)) {
            double x = startup ? sample_prior_numeric(u->lo, u->hi, rng)
                               : suggest_numeric(gb, u->name, u->lo, u->hi, false,
                                                 study.options, rng);
            out[u->name] = std::clamp(x, u->lo, u->hi);
        } else if (const auto* lu = std::get_if<LogUniformParam>(&spec)) {
            double x;
            if (startup)
                x = std::exp(sample_prior_numeric(std::log(lu->lo), std::log(lu->hi), rng));
            else
                x = std::exp(suggest_numeric(gb, lu->name, lu->lo, lu->hi, true,
                                             study.options, rng));
            out[lu->name] = std::clamp(x, lu->lo, lu->hi);
        } else if (const auto* iu = std::get_if<IntUniformParam>(&spec)) {
            long v;
            if (startup) {
                v = iu->lo + static_cast<long>(rng.uniform_int(
                                 static_cast<uint64_t>(iu->hi - iu->lo + 1)));
            } else {
                double x = suggest_numeric(gb, iu->name, static_cast<double>(iu->lo),
                                           static_cast<double>(iu->hi), false,
                                           study.options, rng);
                v = std::lround(x);
            }
            out[iu->name] = std::clamp(v, iu->lo, iu->hi);
        } else if (const auto* c = std::get_if<CategoricalParam>(&spec)) {
            std::string v = startup
                                ? c->choices[rng.uniform_int(c->choices.size())]
                                : suggest_categorical(gb, c->name, c->choices,
                                                      study.options, rng);
            out[c->name] = std::move(v);
        }
    }
    return out;
}

Study run_study(const SearchSpace& space, const Objective& objective,
                int n_trials, uint64_t seed, TpeOptions options,
                const std::function<void(const Trial&)>& on_trial) {
    if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
    Study study;
    study.space = space;
    study.seed = seed;
    study.options = options;
    Rng rng(derive_seed(seed, "tpe"));

    for (int id = 0; id < n_trials; ++id) {
        Trial t;
        t.id = id;
        t.params = suggest(study, rng);
        try {
            t.objective = objective(t.params);
            if (!std::isfinite(t.objective)) throw std::runtime_error("non-finite objective");
            t.state = TrialState::complete;
        } catch (const std::exception&) {
            t.state = TrialState::failed;
            t.objective = std::numeric_limits<double>::quiet_NaN();
        }
        if (t.state == TrialState::complete &&
            (study.best < 0 ||
             t.objective > study.trials[static_cast<size_t>(study.best)].objective))
            study.best = id;
        study.trials.push_back(t);
        if (on_trial) on_trial(study.trials.back());
    }
    return study;
}

std::string trial_to_json(const Trial& t) {
    ordered_json pj = ordered_json::object();
    for (const auto& [k, v] : t.params) {
        if (const double* d = std::get_if<double>(&v)) pj[k] = *d;
        else if (const long* i = std::get_if<long>(&v)) pj[k] = *i;
        else pj[k] = std::get<std::string>(v);
    }
    ordered_json j;
    j["id"] = t.id;
    j["params"] = std::move(pj);
    j["objective"] = t.state == TrialState::complete ? ordered_json(t.objective)
                                                     : ordered_json(nullptr);
    j["state"] = t.state == TrialState::complete ? "complete" : "failed";
    // deterministic virtual timestamp so replayed runs are byte-identical
    j["timestamp"] = t.id;
    return j.dump();
}

} // namespace gbt::tpe
