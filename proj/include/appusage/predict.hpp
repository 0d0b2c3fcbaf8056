#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "appusage/errors.hpp"
#include "appusage/featurize.hpp"
#include "appusage/rng.hpp"
#include "appusage/stats.hpp"

namespace appusage {

struct Dataset {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> X;  // row-major
    std::vector<double> y;
    std::vector<std::string> names;
};

inline Dataset to_dataset(const FeatureMatrix& m) {
    Dataset d;
    d.names = m.names;
    for (const auto& row : m.rows) {
        d.ids.push_back(row.student_id);
        d.X.push_back(row.values);
        d.y.push_back(m.outcome.at(row.student_id));
    }
    return d;
}

inline Dataset select_columns(const Dataset& d, const std::vector<std::size_t>& cols) {
    Dataset out;
    out.ids = d.ids;
    out.y = d.y;
    for (std::size_t c : cols) out.names.push_back(d.names[c]);
    for (const auto& row : d.X) {
        std::vector<double> r;
        r.reserve(cols.size());
        for (std::size_t c : cols) r.push_back(row[c]);
        out.X.push_back(std::move(r));
    }
    return out;
}

inline Dataset select_rows(const Dataset& d, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.names = d.names;
    for (std::size_t r : rows) {
        out.ids.push_back(d.ids[r]);
        out.X.push_back(d.X[r]);
        out.y.push_back(d.y[r]);
    }
    return out;
}

struct Scaler {
    std::vector<double> mean;
    std::vector<double> sd;                // 0 marks a constant (pass-through) column
    std::vector<std::size_t> constant_cols;
};

inline Scaler standardize_fit(const Dataset& train) {
    Scaler s;
    const std::size_t dims = train.names.size();
    const double n = static_cast<double>(train.X.size());
    s.mean.assign(dims, 0.0);
    s.sd.assign(dims, 0.0);
    for (const auto& row : train.X)
        for (std::size_t d = 0; d < dims; ++d) s.mean[d] += row[d];
    for (double& m : s.mean) m /= n;
    for (const auto& row : train.X)
        for (std::size_t d = 0; d < dims; ++d)
            s.sd[d] += (row[d] - s.mean[d]) * (row[d] - s.mean[d]);
    for (std::size_t d = 0; d < dims; ++d) {
        s.sd[d] = train.X.size() > 1 ? std::sqrt(s.sd[d] / (n - 1.0)) : 0.0;
        if (s.sd[d] <= 0.0) {
            s.sd[d] = 0.0;
            s.constant_cols.push_back(d);
        }
    }
    return s;
}

inline Dataset standardize_apply(const Scaler& s, const Dataset& d) {
    Dataset out = d;
    for (auto& row : out.X)
        for (std::size_t c = 0; c < row.size(); ++c)
            if (s.sd[c] > 0.0) row[c] = (row[c] - s.mean[c]) / s.sd[c];
    return out;
}

// seeded uniform shuffle; train size = round(train_frac * n)
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_test(
    std::size_t n, double train_frac, std::uint64_t seed) {
    if (n < 10) throw TooFewSamples("train/test split needs n >= 10");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed ^ 0x5C17F00DULL);
    rng.shuffle(idx);
    // floor keeps 121 -> 84/37; the epsilon guards against 0.7*10 = 6.999...
    const std::size_t ntrain =
        static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n) + 1e-9));
    std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(ntrain));
    std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(ntrain), idx.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

enum class Family { Knn, Lasso, ElasticNet, Baseline };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::Knn: return "knn";
        case Family::Lasso: return "lasso";
        case Family::ElasticNet: return "enet";
        default: return "baseline";
    }
}

struct Hypers {
    double lambda = 0.0;
    double l1_ratio = 1.0;
    std::size_t k = 5;
    bool inverse_distance = false;
};

struct EstimatorSpec {
    Family family = Family::Baseline;
    std::vector<Hypers> grid = {Hypers{}};
};

inline std::vector<EstimatorSpec> default_registry() {
    std::vector<EstimatorSpec> reg;
    {
        EstimatorSpec knn;
        knn.family = Family::Knn;
        knn.grid.clear();
        for (std::size_t k : {3u, 5u, 7u, 9u, 11u})
            for (bool inv : {false, true}) knn.grid.push_back({0.0, 1.0, k, inv});
        reg.push_back(knn);
    }
    auto lambda_grid = [] {
        std::vector<double> g;
        for (int i = 0; i < 9; ++i) g.push_back(1e-3 * std::pow(10.0, 4.0 * i / 8.0));
        return g;
    }();
    {
        EstimatorSpec lasso;
        lasso.family = Family::Lasso;
        lasso.grid.clear();
        for (double l : lambda_grid) lasso.grid.push_back({l, 1.0, 0, false});
        reg.push_back(lasso);
    }
    {
        EstimatorSpec enet;
        enet.family = Family::ElasticNet;
        enet.grid.clear();
        for (double l : lambda_grid)
            for (double r : {0.2, 0.5, 0.8}) enet.grid.push_back({l, r, 0, false});
        reg.push_back(enet);
    }
    {
        EstimatorSpec base;
        base.family = Family::Baseline;
        reg.push_back(base);
    }
    return reg;
}

struct LinearModel {
    std::vector<double> coef;
    double intercept = 0.0;
    bool converged = true;

    double predict(const std::vector<double>& row) const {
        double v = intercept;
        for (std::size_t i = 0; i < coef.size(); ++i) v += coef[i] * row[i];
        return v;
    }
};

// cyclic coordinate descent for (1/2n)||y - Xb||^2 + lambda(l1 |b|_1 + (1-l1)/2 |b|_2^2),
// unpenalized intercept
inline LinearModel coordinate_descent(const std::vector<std::vector<double>>& X,
                                      const std::vector<double>& y, double lambda, double l1_ratio,
                                      double tol = 1e-7, std::size_t max_sweeps = 10000) {
    const std::size_t n = X.size();
    const std::size_t p = n ? X.front().size() : 0;
    const double dn = static_cast<double>(n);
    LinearModel m;
    m.coef.assign(p, 0.0);

    const double ymean = std::accumulate(y.begin(), y.end(), 0.0) / dn;
    std::vector<double> xmean(p, 0.0), xsq(p, 0.0);
    for (const auto& row : X)
        for (std::size_t j = 0; j < p; ++j) xmean[j] += row[j];
    for (double& v : xmean) v /= dn;
    // centered columns, contiguous per coordinate
    std::vector<std::vector<double>> xc(p, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) xc[j][i] = X[i][j] - xmean[j];
    for (std::size_t j = 0; j < p; ++j)
        for (double v : xc[j]) xsq[j] += v * v;

    // residuals on centered data
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - ymean;

    const double l1 = lambda * l1_ratio;
    const double l2 = lambda * (1.0 - l1_ratio);
    auto soft = [](double v, double t) {
        if (v > t) return v - t;
        if (v < -t) return v + t;
        return 0.0;
    };
    auto update = [&](std::size_t j) {
        const auto& col = xc[j];
        double rho = 0.0;
        for (std::size_t i = 0; i < n; ++i) rho += col[i] * (resid[i] + col[i] * m.coef[j]);
        rho /= dn;
        const double nb = soft(rho, l1) / (xsq[j] / dn + l2);
        const double delta = nb - m.coef[j];
        if (delta != 0.0) {
            for (std::size_t i = 0; i < n; ++i) resid[i] -= col[i] * delta;
            m.coef[j] = nb;
        }
        return std::fabs(delta);
    };

    m.converged = false;
    std::vector<std::size_t> active;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (std::size_t j = 0; j < p; ++j)
            if (xsq[j] > 0.0) max_delta = std::max(max_delta, update(j));
        if (max_delta < tol) {
            m.converged = true;
            break;
        }
        // iterate the current active set to convergence, then re-check all
        active.clear();
        for (std::size_t j = 0; j < p; ++j)
            if (xsq[j] > 0.0 && m.coef[j] != 0.0) active.push_back(j);
        while (sweep + 1 < max_sweeps) {
            ++sweep;
            double d = 0.0;
            for (std::size_t j : active) d = std::max(d, update(j));
            if (d < tol) break;
        }
    }
    m.intercept = ymean;
    for (std::size_t j = 0; j < p; ++j) m.intercept -= m.coef[j] * xmean[j];
    return m;
}

struct KnnModel {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    std::size_t k = 5;
    bool inverse_distance = false;

    double predict(const std::vector<double>& row) const {
        std::vector<std::pair<double, std::size_t>> d;
        d.reserve(X.size());
        for (std::size_t i = 0; i < X.size(); ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < row.size(); ++c)
                s += (row[c] - X[i][c]) * (row[c] - X[i][c]);
            d.push_back({std::sqrt(s), i});
        }
        // distance ties broken by training-row index (pair comparison)
        std::sort(d.begin(), d.end());
        if (!inverse_distance) {
            double s = 0.0;
            for (std::size_t i = 0; i < k; ++i) s += y[d[i].second];
            return s / static_cast<double>(k);
        }
        double wsum = 0.0, vsum = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (d[i].first == 0.0) return y[d[i].second];  // exact match wins
            const double w = 1.0 / d[i].first;
            wsum += w;
            vsum += w * y[d[i].second];
        }
        return vsum / wsum;
    }
};

struct FittedModel {
    Family family = Family::Baseline;
    Hypers hypers;
    LinearModel linear;
    KnnModel knn;
    double baseline_mean = 0.0;

    double predict(const std::vector<double>& row) const {
        switch (family) {
            case Family::Knn: return knn.predict(row);
            case Family::Lasso:
            case Family::ElasticNet: return linear.predict(row);
            default: return baseline_mean;
        }
    }
};

inline FittedModel fit(Family family, const Hypers& h, const Dataset& train) {
    FittedModel m;
    m.family = family;
    m.hypers = h;
    switch (family) {
        case Family::Knn:
            if (h.k > train.X.size()) throw KTooLarge(h.k, train.X.size());
            m.knn.X = train.X;
            m.knn.y = train.y;
            m.knn.k = h.k;
            m.knn.inverse_distance = h.inverse_distance;
            break;
        case Family::Lasso:
            m.linear = coordinate_descent(train.X, train.y, h.lambda, 1.0);
            break;
        case Family::ElasticNet:
            m.linear = coordinate_descent(train.X, train.y, h.lambda, h.l1_ratio);
            break;
        case Family::Baseline:
            m.baseline_mean = mean(train.y);
            break;
    }
    return m;
}

inline double mae(const std::vector<double>& pred, const std::vector<double>& actual) {
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::fabs(pred[i] - actual[i]);
    return s / static_cast<double>(pred.size());
}

struct FoldScore {
    double train_mae = 0.0;
    double val_mae = 0.0;
};

struct CVResult {
    std::vector<FoldScore> per_fold;
    double mean_train_mae = 0.0;
    double mean_val_mae = 0.0;
    Hypers chosen;
};

// seeded shuffle then contiguous blocks; identical assignment for every combo
inline std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed ^ 0xF01DF01DULL);
    rng.shuffle(idx);
    std::vector<std::size_t> fold_of(n);
    for (std::size_t i = 0; i < n; ++i) fold_of[idx[i]] = i * folds / n;
    return fold_of;
}

namespace detail {

// simplicity order for val-MAE ties: larger lambda, then larger k, then
// uniform before inverse-distance, then smaller l1_ratio
inline bool simpler(const Hypers& a, const Hypers& b) {
    if (a.lambda != b.lambda) return a.lambda > b.lambda;
    if (a.k != b.k) return a.k > b.k;
    if (a.inverse_distance != b.inverse_distance) return !a.inverse_distance;
    return a.l1_ratio < b.l1_ratio;
}

inline FoldScore score_fold(Family family, const Hypers& h, const Dataset& train,
                            const std::vector<std::size_t>& fold_of, std::size_t fold) {
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        (fold_of[i] == fold ? va : tr).push_back(i);
    const Dataset dtr = select_rows(train, tr), dva = select_rows(train, va);
    Hypers eff = h;
    if (family == Family::Knn) eff.k = std::min(eff.k, dtr.X.size());
    const FittedModel m = fit(family, eff, dtr);
    std::vector<double> ptr, pva;
    for (const auto& r : dtr.X) ptr.push_back(m.predict(r));
    for (const auto& r : dva.X) pva.push_back(m.predict(r));
    return {mae(ptr, dtr.y), mae(pva, dva.y)};
}

}  // namespace detail

inline CVResult grid_search_cv(const Dataset& train, const EstimatorSpec& spec, std::size_t folds,
                               std::uint64_t seed) {
    if (folds < 2) throw TooFewSamples("cross-validation needs >= 2 folds");
    if (train.X.size() < folds) throw TooFewSamples("fewer training rows than folds");
    const auto fold_of = fold_assignment(train.X.size(), folds, seed);

    CVResult best;
    bool have = false;
    for (const auto& h : spec.grid) {
        CVResult cur;
        cur.chosen = h;
        for (std::size_t f = 0; f < folds; ++f)
            cur.per_fold.push_back(detail::score_fold(spec.family, h, train, fold_of, f));
        for (const auto& s : cur.per_fold) {
            cur.mean_train_mae += s.train_mae;
            cur.mean_val_mae += s.val_mae;
        }
        cur.mean_train_mae /= static_cast<double>(folds);
        cur.mean_val_mae /= static_cast<double>(folds);
        if (!have || cur.mean_val_mae < best.mean_val_mae ||
            (cur.mean_val_mae == best.mean_val_mae && detail::simpler(cur.chosen, best.chosen))) {
            best = cur;
            have = true;
        }
    }
    return best;
}

struct VotingMember {
    Family family;
    CVResult cv;
    FittedModel model;  // refit on the full training set with chosen hypers
};

struct VotingModel {
    std::vector<VotingMember> members;       // best 3 distinct families by mean val MAE
    std::vector<VotingMember> all_families;  // every registry member, in registry order
    CVResult ensemble_cv;                    // ensemble scored on the same folds

    double predict(const std::vector<double>& row) const {
        double s = 0.0;
        for (const auto& m : members) s += m.model.predict(row);
        return s / static_cast<double>(members.size());
    }
};

inline VotingModel build_voting(const Dataset& train, const std::vector<EstimatorSpec>& registry,
                                std::size_t folds, std::uint64_t seed) {
    if (registry.size() < 3) throw TooFewFamilies(registry.size());
    std::vector<VotingMember> ranked;
    for (const auto& spec : registry) {
        VotingMember m;
        m.family = spec.family;
        m.cv = grid_search_cv(train, spec, folds, seed);
        m.model = fit(spec.family, m.cv.chosen, train);
        ranked.push_back(std::move(m));
    }
    VotingModel v;
    v.all_families = ranked;
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.cv.mean_val_mae < b.cv.mean_val_mae; });
    v.members.assign(ranked.begin(), ranked.begin() + 3);

    const auto fold_of = fold_assignment(train.X.size(), folds, seed);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> tr, va;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            (fold_of[i] == f ? va : tr).push_back(i);
        const Dataset dtr = select_rows(train, tr), dva = select_rows(train, va);
        std::vector<FittedModel> ms;
        for (const auto& mem : v.members) {
            Hypers eff = mem.cv.chosen;
            if (mem.family == Family::Knn) eff.k = std::min(eff.k, dtr.X.size());
            ms.push_back(fit(mem.family, eff, dtr));
        }
        auto avg = [&](const std::vector<double>& row) {
            double s = 0.0;
            for (const auto& m : ms) s += m.predict(row);
            return s / static_cast<double>(ms.size());
        };
        std::vector<double> ptr, pva;
        for (const auto& r : dtr.X) ptr.push_back(avg(r));
        for (const auto& r : dva.X) pva.push_back(avg(r));
        v.ensemble_cv.per_fold.push_back({mae(ptr, dtr.y), mae(pva, dva.y)});
    }
    for (const auto& s : v.ensemble_cv.per_fold) {
        v.ensemble_cv.mean_train_mae += s.train_mae;
        v.ensemble_cv.mean_val_mae += s.val_mae;
    }
    v.ensemble_cv.mean_train_mae /= static_cast<double>(folds);
    v.ensemble_cv.mean_val_mae /= static_cast<double>(folds);
    return v;
}

enum class SelectionStrategy { CorrSignificance, LassoPath, ElasticNetPath };
enum class LeakageMode { Strict, Paper };

struct SelectionSpec {
    SelectionStrategy strategy = SelectionStrategy::CorrSignificance;
    double alpha = 0.05;
    bool core_metrics_only = false;  // restrict to duration / launches / n_apps
    LeakageMode leakage_mode = LeakageMode::Strict;
    std::size_t fallback_k = 10;
};

struct SelectionResult {
    std::vector<std::size_t> cols;
    bool fallback_used = false;
};

namespace detail {

inline bool is_core_metric(const std::string& name) {
    return name.find(".duration.") != std::string::npos ||
           name.find(".launches.") != std::string::npos ||
           name.find(".n_apps.") != std::string::npos;
}

inline bool has_variance(const Dataset& d, std::size_t c) {
    for (const auto& row : d.X)
        if (row[c] != d.X.front()[c]) return true;
    return false;
}

}  // namespace detail

inline SelectionResult select_features(const Dataset& d, const SelectionSpec& spec,
                                       std::size_t folds = 5, std::uint64_t seed = 0) {
    std::vector<std::size_t> candidates;
    for (std::size_t c = 0; c < d.names.size(); ++c) {
        if (spec.core_metrics_only && !detail::is_core_metric(d.names[c])) continue;
        if (!detail::has_variance(d, c)) continue;  // non-constant only
        candidates.push_back(c);
    }

    SelectionResult res;
    if (spec.strategy == SelectionStrategy::CorrSignificance) {
        std::vector<std::pair<double, std::size_t>> pvals;
        for (std::size_t c : candidates) {
            std::vector<double> x;
            for (const auto& row : d.X) x.push_back(row[c]);
            try {
                const CorrResult r = correlate(x, d.y);
                pvals.push_back({r.p, c});
                if (r.p < spec.alpha) res.cols.push_back(c);
            } catch (const DataError&) {
            }
        }
        if (res.cols.empty()) {
            // fall back to the K lowest-p features
            std::stable_sort(pvals.begin(), pvals.end());
            for (std::size_t i = 0; i < std::min(spec.fallback_k, pvals.size()); ++i)
                res.cols.push_back(pvals[i].second);
            std::sort(res.cols.begin(), res.cols.end());
            res.fallback_used = true;
        }
        return res;
    }

    // Lasso / ElasticNet path: nonzero coefficients at the CV-best lambda
    Dataset cand = select_columns(d, candidates);
    const Scaler sc = standardize_fit(cand);
    cand = standardize_apply(sc, cand);
    EstimatorSpec es;
    es.family = spec.strategy == SelectionStrategy::LassoPath ? Family::Lasso : Family::ElasticNet;
    es.grid.clear();
    for (int i = 0; i < 9; ++i) {
        const double l = 1e-3 * std::pow(10.0, 4.0 * i / 8.0);
        if (es.family == Family::Lasso) es.grid.push_back({l, 1.0, 0, false});
        else es.grid.push_back({l, 0.5, 0, false});
    }
    const CVResult cv = grid_search_cv(cand, es, folds, seed);
    const FittedModel m = fit(es.family, cv.chosen, cand);
    for (std::size_t j = 0; j < candidates.size(); ++j)
        if (m.linear.coef[j] != 0.0) res.cols.push_back(candidates[j]);
    if (res.cols.empty()) {
        std::vector<std::pair<double, std::size_t>> pvals;
        for (std::size_t c : candidates) {
            std::vector<double> x;
            for (const auto& row : d.X) x.push_back(row[c]);
            try {
                pvals.push_back({correlate(x, d.y).p, c});
            } catch (const DataError&) {
            }
        }
        std::stable_sort(pvals.begin(), pvals.end());
        for (std::size_t i = 0; i < std::min(spec.fallback_k, pvals.size()); ++i)
            res.cols.push_back(pvals[i].second);
        std::sort(res.cols.begin(), res.cols.end());
        res.fallback_used = true;
    }
    return res;
}

struct FamilyReportRow {
    Family family;
    Hypers chosen;
    double mean_train_mae = 0.0;
    double mean_val_mae = 0.0;
    double test_mae = 0.0;
    bool in_ensemble = false;
};

struct PredictionReport {
    double test_mae = 0.0;
    double overfit_gap = 0.0;  // ensemble mean val MAE - mean train MAE
    CorrResult pred_actual_corr;
    std::vector<std::pair<std::string, std::pair<double, double>>> per_student;  // id -> (actual, pred)
    double baseline_test_mae = 0.0;
    std::vector<FamilyReportRow> per_family;  // Table-9-shaped summary
    std::vector<std::string> selected_features;
    bool selection_fallback = false;
};

struct PipelineConfig {
    SelectionSpec selection;
    double train_frac = 0.7;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    std::vector<EstimatorSpec> registry = default_registry();
};

// intermediates exposed for the leakage audit
struct PipelineArtifacts {
    std::vector<std::size_t> train_rows, test_rows;
    std::vector<std::size_t> selected_cols;
    Scaler scaler;
    std::vector<Hypers> chosen_hypers;  // per registry member, in rank order of the ensemble
};

inline double clamp_cgpa(double v) { return std::clamp(v, 0.0, 4.0); }

inline PredictionReport run_pipeline(const FeatureMatrix& matrix, const PipelineConfig& cfg,
                                     PipelineArtifacts* artifacts = nullptr) {
    const Dataset all = to_dataset(matrix);
    auto [train_rows, test_rows] = split_train_test(all.X.size(), cfg.train_frac, cfg.seed);

    const Dataset train_full = select_rows(all, train_rows);
    const Dataset& selection_view =
        cfg.selection.leakage_mode == LeakageMode::Strict ? train_full : all;
    const SelectionResult sel = select_features(selection_view, cfg.selection, cfg.folds, cfg.seed);

    Dataset train = select_columns(train_full, sel.cols);
    Dataset test = select_columns(select_rows(all, test_rows), sel.cols);
    const Scaler scaler = standardize_fit(train);
    train = standardize_apply(scaler, train);
    test = standardize_apply(scaler, test);

    const VotingModel voting = build_voting(train, cfg.registry, cfg.folds, cfg.seed);

    PredictionReport rep;
    rep.selection_fallback = sel.fallback_used;
    for (std::size_t c : sel.cols) rep.selected_features.push_back(all.names[c]);

    std::vector<double> pred, actual;
    for (std::size_t i = 0; i < test.X.size(); ++i) {
        const double p = clamp_cgpa(voting.predict(test.X[i]));
        pred.push_back(p);
        actual.push_back(test.y[i]);
        rep.per_student.push_back({test.ids[i], {test.y[i], p}});
    }
    rep.test_mae = mae(pred, actual);
    rep.overfit_gap = voting.ensemble_cv.mean_val_mae - voting.ensemble_cv.mean_train_mae;
    try {
        rep.pred_actual_corr = correlate(pred, actual);
    } catch (const DataError&) {
        rep.pred_actual_corr = CorrResult{};
    }

    const FittedModel baseline = fit(Family::Baseline, Hypers{}, train);
    std::vector<double> bpred;
    for (const auto& r : test.X) bpred.push_back(clamp_cgpa(baseline.predict(r)));
    rep.baseline_test_mae = mae(bpred, actual);

    for (const auto& fam : voting.all_families) {
        FamilyReportRow row;
        row.family = fam.family;
        row.chosen = fam.cv.chosen;
        row.mean_train_mae = fam.cv.mean_train_mae;
        row.mean_val_mae = fam.cv.mean_val_mae;
        std::vector<double> fp;
        for (const auto& r : test.X) fp.push_back(clamp_cgpa(fam.model.predict(r)));
        row.test_mae = mae(fp, actual);
        for (const auto& mem : voting.members) row.in_ensemble |= mem.family == fam.family;
        rep.per_family.push_back(row);
    }

    if (artifacts) {
        artifacts->train_rows = train_rows;
        artifacts->test_rows = test_rows;
        artifacts->selected_cols = sel.cols;
        artifacts->scaler = scaler;
        for (const auto& mem : voting.members) artifacts->chosen_hypers.push_back(mem.cv.chosen);
    }
    return rep;
}

}  // namespace appusage
