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
#include "appusage/mathkernels.hpp"

namespace appusage {

inline double mean(const std::vector<double>& x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// sample sd, n-1 denominator
inline double sample_sd(const std::vector<double>& x) {
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

inline double median(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

// fractional (average) ranks, 1-based
inline std::vector<double> rankify(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

enum class CorrMethod { Pearson, Spearman };

struct CorrResult {
    double coef = 0.0;
    double p = 1.0;
    CorrMethod method = CorrMethod::Pearson;
    std::size_t n = 0;
};

namespace detail {

inline void check_corr_input(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw LengthMismatch();
    if (x.size() < 3) throw TooFewSamples("correlation needs n >= 3");
    auto constant = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
    };
    if (constant(x) || constant(y)) throw ConstantInput();
}

inline double corr_p(double r, std::size_t n) {
    if (std::fabs(r) >= 1.0) return 0.0;
    const double dof = static_cast<double>(n - 2);
    const double t = r * std::sqrt(dof / (1.0 - r * r));
    return t_two_sided_p(t, dof);
}

}  // namespace detail

inline CorrResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
    detail::check_corr_input(x, y);
    const std::size_t n = x.size();
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    CorrResult r;
    r.coef = sxy / std::sqrt(sxx * syy);
    r.coef = std::clamp(r.coef, -1.0, 1.0);
    r.method = CorrMethod::Pearson;
    r.n = n;
    r.p = detail::corr_p(r.coef, n);
    return r;
}

inline CorrResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
    detail::check_corr_input(x, y);
    CorrResult r = pearson(rankify(x), rankify(y));
    r.method = CorrMethod::Spearman;
    return r;
}

// indices where |x_i - mean| / sample_sd > threshold
inline std::vector<std::size_t> zscore_outliers(const std::vector<double>& x, double threshold = 3.0) {
    std::vector<std::size_t> out;
    if (x.size() < 2) return out;
    const double m = mean(x), sd = sample_sd(x);
    if (sd <= 0.0) return out;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::fabs(x[i] - m) / sd > threshold) out.push_back(i);
    return out;
}

struct NormalityResult {
    bool is_normal = false;
    double p = 0.0;
    double statistic = 0.0;
};

// Jarque-Bera against chi-square with 2 dof
inline NormalityResult normality(const std::vector<double>& x, double alpha = 0.05) {
    const std::size_t n = x.size();
    if (n < 8) throw TooFewSamples("normality test needs n >= 8");
    const double m = mean(x);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    const double dn = static_cast<double>(n);
    m2 /= dn;
    m3 /= dn;
    m4 /= dn;
    if (m2 <= 0.0) throw ConstantInput();
    const double skew = m3 / std::pow(m2, 1.5);
    const double ex_kurt = m4 / (m2 * m2) - 3.0;
    NormalityResult r;
    r.statistic = dn / 6.0 * (skew * skew + ex_kurt * ex_kurt / 4.0);
    r.p = 1.0 - chi2_cdf(r.statistic, 2.0);
    r.is_normal = r.p > alpha;
    return r;
}

struct ChoiceParams {
    double alpha = 0.05;
    double z_threshold = 3.0;
};

// Pearson only when both vectors are normal and outlier free; otherwise
// Spearman. Samples too small for the normality test go to Spearman.
inline CorrMethod choose_corr(const std::vector<double>& x, const std::vector<double>& y,
                              const ChoiceParams& cp = {}) {
    auto normal_ok = [&](const std::vector<double>& v) {
        if (v.size() < 8) return false;
        return normality(v, cp.alpha).is_normal;
    };
    if (normal_ok(x) && normal_ok(y) && zscore_outliers(x, cp.z_threshold).empty() &&
        zscore_outliers(y, cp.z_threshold).empty())
        return CorrMethod::Pearson;
    return CorrMethod::Spearman;
}

inline CorrResult correlate(const std::vector<double>& x, const std::vector<double>& y,
                            const ChoiceParams& cp = {}) {
    return choose_corr(x, y, cp) == CorrMethod::Pearson ? pearson(x, y) : spearman(x, y);
}

enum class GroupTest { StandardT, WelchT, MannWhitneyU };

struct GroupSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
};

struct TestResult {
    double statistic = 0.0;  // t or U
    double p = 1.0;
    GroupTest test = GroupTest::MannWhitneyU;
    GroupSummary group_a, group_b;
};

namespace detail {

// counts of subsets of size n1 from N ranks by U value (tie-free exact law)
inline std::vector<double> mw_u_counts(std::size_t n1, std::size_t n2) {
    const std::size_t umax = n1 * n2;
    // dp[k][u] over items 1..N: ways to pick k with rank-sum offset u
    std::vector<std::vector<double>> dp(n1 + 1, std::vector<double>(umax + 1, 0.0));
    dp[0][0] = 1.0;
    const std::size_t N = n1 + n2;
    for (std::size_t item = 1; item <= N; ++item) {
        for (std::size_t k = std::min(item, n1); k >= 1; --k) {
            for (std::size_t u = umax + 1; u-- > 0;) {
                // picking item as the k-th smallest contributes (item - k) to U
                if (item >= k && u >= item - k) dp[k][u] += dp[k - 1][u - (item - k)];
            }
        }
    }
    return dp[n1];
}

inline GroupSummary summarize(const std::vector<double>& v) {
    GroupSummary s;
    s.n = v.size();
    s.mean = v.empty() ? 0.0 : mean(v);
    s.sd = v.size() > 1 ? sample_sd(v) : 0.0;
    return s;
}

}  // namespace detail

inline TestResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b,
                               std::size_t exact_max_n = 10) {
    const std::size_t n1 = a.size(), n2 = b.size();
    TestResult r;
    r.test = GroupTest::MannWhitneyU;
    r.group_a = detail::summarize(a);
    r.group_b = detail::summarize(b);

    double u = 0.0;
    bool ties = false;
    for (double av : a)
        for (double bv : b) {
            if (av > bv) u += 1.0;
            else if (av == bv) { u += 0.5; ties = true; }
        }
    r.statistic = u;

    if (!ties && std::max(n1, n2) <= exact_max_n) {
        const auto counts = detail::mw_u_counts(n1, n2);
        double total = 0.0;
        for (double c : counts) total += c;
        const double u_tail = std::min(u, static_cast<double>(n1 * n2) - u);
        double cum = 0.0;
        for (std::size_t v = 0; v <= static_cast<std::size_t>(u_tail); ++v) cum += counts[v];
        r.p = std::min(1.0, 2.0 * cum / total);
        return r;
    }

    // normal approximation with tie correction and continuity correction
    const double n = static_cast<double>(n1 + n2);
    std::vector<double> all(a);
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    double tie_sum = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j + 1 < all.size() && all[j + 1] == all[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    const double mu = static_cast<double>(n1 * n2) / 2.0;
    const double var =
        static_cast<double>(n1 * n2) / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if (var <= 0.0) {
        r.p = 1.0;
        return r;
    }
    const double num = std::max(0.0, std::fabs(u - mu) - 0.5);
    const double z = num / std::sqrt(var);
    r.p = 2.0 * (1.0 - normal_cdf(z));
    r.p = std::clamp(r.p, 0.0, 1.0);
    return r;
}

inline TestResult t_test(const std::vector<double>& a, const std::vector<double>& b, bool welch) {
    if (a.size() < 3 || b.size() < 3) throw TooFewSamples("t test needs n >= 3 per group");
    TestResult r;
    r.group_a = detail::summarize(a);
    r.group_b = detail::summarize(b);
    const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
    const double v1 = r.group_a.sd * r.group_a.sd, v2 = r.group_b.sd * r.group_b.sd;
    double t, dof;
    if (welch) {
        const double se2 = v1 / n1 + v2 / n2;
        t = (r.group_a.mean - r.group_b.mean) / std::sqrt(se2);
        dof = se2 * se2 / (v1 * v1 / (n1 * n1 * (n1 - 1.0)) + v2 * v2 / (n2 * n2 * (n2 - 1.0)));
        r.test = GroupTest::WelchT;
    } else {
        const double sp2 = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0);
        t = (r.group_a.mean - r.group_b.mean) / std::sqrt(sp2 * (1.0 / n1 + 1.0 / n2));
        dof = n1 + n2 - 2.0;
        r.test = GroupTest::StandardT;
    }
    r.statistic = t;
    r.p = t_two_sided_p(t, dof);
    return r;
}

// Brown-Forsythe variant: absolute deviations from group medians
inline double levene_p(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = median(a), mb = median(b);
    std::vector<double> za, zb;
    for (double v : a) za.push_back(std::fabs(v - ma));
    for (double v : b) zb.push_back(std::fabs(v - mb));
    const double n1 = static_cast<double>(za.size()), n2 = static_cast<double>(zb.size());
    const double gza = mean(za), gzb = mean(zb);
    const double grand = (n1 * gza + n2 * gzb) / (n1 + n2);
    const double between = n1 * (gza - grand) * (gza - grand) + n2 * (gzb - grand) * (gzb - grand);
    double within = 0.0;
    for (double v : za) within += (v - gza) * (v - gza);
    for (double v : zb) within += (v - gzb) * (v - gzb);
    if (within <= 0.0) return between > 0.0 ? 0.0 : 1.0;
    const double f = (n1 + n2 - 2.0) * between / within;
    return 1.0 - f_cdf(f, 1.0, n1 + n2 - 2.0);
}

// Standard t when both groups normal with equal variance, Welch when normal
// with unequal variance, Mann-Whitney otherwise.
inline TestResult compare_groups(const std::vector<double>& a, const std::vector<double>& b,
                                 const ChoiceParams& cp = {}) {
    auto normal_ok = [&](const std::vector<double>& v) {
        if (v.size() < 8) return false;
        try {
            return normality(v, cp.alpha).is_normal;
        } catch (const ConstantInput&) {
            return false;
        }
    };
    if (normal_ok(a) && normal_ok(b)) {
        const bool equal_var = levene_p(a, b) > cp.alpha;
        return t_test(a, b, !equal_var);
    }
    return mann_whitney(a, b);
}

// Benjamini-Hochberg step-up; returns adjusted p in the original order
inline std::vector<double> bh_adjust(const std::vector<double>& pvals) {
    for (double p : pvals)
        if (p < 0.0 || p > 1.0 || std::isnan(p)) throw POutOfRange(p);
    const std::size_t m = pvals.size();
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return pvals[a] < pvals[b]; });
    std::vector<double> adj(m);
    double running = 1.0;
    for (std::size_t i = m; i-- > 0;) {
        const double v = pvals[idx[i]] * static_cast<double>(m) / static_cast<double>(i + 1);
        running = std::min(running, v);
        adj[idx[i]] = running;
    }
    return adj;
}

enum class SplitRule { CgpaThreshold, Tertile };

struct GroupSplit {
    std::vector<std::string> high_ids;
    std::vector<std::string> low_ids;
    SplitRule rule = SplitRule::CgpaThreshold;
};

struct CgpaSplitParams {
    double high_min = 3.50;
    double low_max = 3.00;  // exclusive
};

inline GroupSplit split_by_cgpa(const Cohort& cohort, const CgpaSplitParams& p = {}) {
    GroupSplit s;
    s.rule = SplitRule::CgpaThreshold;
    for (const auto& st : cohort.students) {
        if (st.cgpa >= p.high_min) s.high_ids.push_back(st.student_id);
        else if (st.cgpa < p.low_max) s.low_ids.push_back(st.student_id);
    }
    return s;
}

// top / bottom floor(n/3) by value, stable id tie-break
inline GroupSplit split_tertiles(const std::map<std::string, double>& values) {
    const std::size_t n = values.size();
    if (n < 3) throw TooFewSamples("tertile split needs n >= 3");
    std::vector<std::pair<std::string, double>> v(values.begin(), values.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    const std::size_t k = n / 3;
    GroupSplit s;
    s.rule = SplitRule::Tertile;
    for (std::size_t i = 0; i < k; ++i) s.low_ids.push_back(v[i].first);
    for (std::size_t i = n - k; i < n; ++i) s.high_ids.push_back(v[i].first);
    return s;
}

enum class CellStatus { Ok, TooFewN, Constant };

struct AssocCell {
    std::string feature;
    std::size_t n = 0;
    CellStatus status = CellStatus::Ok;
    CorrMethod method = CorrMethod::Spearman;
    double coef = 0.0;
    double p = 1.0;
    double p_adj = 1.0;
};

struct AssocReport {
    // one FDR family per table analog
    std::vector<AssocCell> aggregates;          // phone-level features
    std::vector<AssocCell> categories_whole;    // per category, whole-day
    std::vector<AssocCell> categories_periods;  // per category x diurnal period
};

namespace detail {

inline void fill_family(std::vector<AssocCell>& cells, const FeatureMatrix& m,
                        const std::vector<std::size_t>& cols, const ChoiceParams& cp) {
    for (std::size_t c : cols) {
        AssocCell cell;
        cell.feature = m.names[c];
        const bool phone = m.names[c].rfind("phone.", 0) == 0;
        std::vector<double> x, y;
        for (const auto& row : m.rows) {
            if (!phone && !row.usage_mask[c]) continue;  // per-category N is mask-restricted
            x.push_back(row.values[c]);
            y.push_back(m.outcome.at(row.student_id));
        }
        cell.n = x.size();
        if (cell.n < 3) {
            cell.status = CellStatus::TooFewN;
        } else if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); }) ||
                   std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); })) {
            cell.status = CellStatus::Constant;
        } else {
            const CorrResult r = correlate(x, y, cp);
            cell.method = r.method;
            cell.coef = r.coef;
            cell.p = r.p;
        }
        cells.push_back(std::move(cell));
    }
    std::vector<double> ps;
    std::vector<std::size_t> ok;
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i].status == CellStatus::Ok) {
            ok.push_back(i);
            ps.push_back(cells[i].p);
        }
    if (!ps.empty()) {
        const auto adj = bh_adjust(ps);
        for (std::size_t i = 0; i < ok.size(); ++i) cells[ok[i]].p_adj = adj[i];
    }
}

}  // namespace detail

inline AssocReport assoc_report(const FeatureMatrix& m, const ChoiceParams& cp = {}) {
    AssocReport rep;
    std::vector<std::size_t> agg, whole, periods;
    for (std::size_t c = 0; c < m.names.size(); ++c) {
        const std::string& name = m.names[c];
        if (name.rfind("phone.", 0) == 0) {
            agg.push_back(c);
        } else if (name.size() > 6 && name.compare(name.size() - 6, 6, ".whole") == 0) {
            whole.push_back(c);
        } else {
            periods.push_back(c);
        }
    }
    detail::fill_family(rep.aggregates, m, agg, cp);
    detail::fill_family(rep.categories_whole, m, whole, cp);
    detail::fill_family(rep.categories_periods, m, periods, cp);
    return rep;
}

struct CompareCell {
    std::string feature;
    GroupTest test = GroupTest::MannWhitneyU;
    GroupSummary high, low;
    double statistic = 0.0;
    double p = 1.0;
    double p_adj = 1.0;
    bool valid = false;
};

// group-comparison battery over a feature family (Table 5 analog shape)
inline std::vector<CompareCell> compare_report(const FeatureMatrix& m, const GroupSplit& split,
                                               const std::vector<std::string>& features,
                                               const ChoiceParams& cp = {}) {
    std::vector<CompareCell> cells;
    auto in = [](const std::vector<std::string>& ids, const std::string& id) {
        return std::find(ids.begin(), ids.end(), id) != ids.end();
    };
    for (const auto& f : features) {
        CompareCell cell;
        cell.feature = f;
        const std::size_t c = m.col(f);
        if (c >= m.names.size()) {
            cells.push_back(std::move(cell));
            continue;
        }
        std::vector<double> hi, lo;
        for (const auto& row : m.rows) {
            if (in(split.high_ids, row.student_id)) hi.push_back(row.values[c]);
            else if (in(split.low_ids, row.student_id)) lo.push_back(row.values[c]);
        }
        if (hi.size() >= 1 && lo.size() >= 1) {
            const TestResult r = compare_groups(hi, lo, cp);
            cell.test = r.test;
            cell.high = r.group_a;
            cell.low = r.group_b;
            cell.statistic = r.statistic;
            cell.p = r.p;
            cell.valid = true;
        }
        cells.push_back(std::move(cell));
    }
    std::vector<double> ps;
    std::vector<std::size_t> ok;
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i].valid) {
            ok.push_back(i);
            ps.push_back(cells[i].p);
        }
    if (!ps.empty()) {
        const auto adj = bh_adjust(ps);
        for (std::size_t i = 0; i < ok.size(); ++i) cells[ok[i]].p_adj = adj[i];
    }
    return cells;
}

}  // namespace appusage
