#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "appusage/errors.hpp"
#include "appusage/model.hpp"

namespace appusage {

using Point = std::vector<double>;

// per-dimension z-score (sample sd); constant dimensions pass through
inline std::vector<Point> standardize_points(const std::vector<Point>& pts) {
    if (pts.empty()) return {};
    const std::size_t dims = pts.front().size();
    const double n = static_cast<double>(pts.size());
    std::vector<Point> out(pts.size(), Point(dims, 0.0));
    for (std::size_t d = 0; d < dims; ++d) {
        double m = 0.0;
        for (const auto& p : pts) m += p[d];
        m /= n;
        double ss = 0.0;
        for (const auto& p : pts) ss += (p[d] - m) * (p[d] - m);
        const double sd = pts.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i)
            out[i][d] = sd > 0.0 ? (pts[i][d] - m) / sd : pts[i][d];
    }
    return out;
}

inline double euclidean(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return std::sqrt(s);
}

// distance to the k-th nearest neighbor for each point, returned ascending
inline std::vector<double> kdist_curve(const std::vector<Point>& pts, std::size_t k = 4) {
    if (pts.size() <= k) throw TooFewPoints("k-distance curve needs n > k");
    std::vector<double> out;
    out.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::vector<double> d;
        d.reserve(pts.size() - 1);
        for (std::size_t j = 0; j < pts.size(); ++j)
            if (j != i) d.push_back(euclidean(pts[i], pts[j]));
        std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
        out.push_back(d[k - 1]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct EpsSelection {
    double eps = 0.0;
    bool degenerate = false;  // no knee (flat or linear curve)
};

// knee = index of maximum discrete second difference
inline EpsSelection select_eps(const std::vector<double>& curve) {
    if (curve.size() < 3) throw TooFewPoints("eps selection needs a curve of length >= 3");
    double best = -1.0;
    std::size_t best_i = 0;
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        const double d2 = curve[i + 1] - 2.0 * curve[i] + curve[i - 1];
        if (d2 > best) {
            best = d2;
            best_i = i;
        }
    }
    EpsSelection sel;
    if (best <= 1e-12) {
        sel.degenerate = true;
        sel.eps = curve[curve.size() / 2];
        return sel;
    }
    sel.eps = curve[best_i];
    return sel;
}

struct ClusterAssignment {
    std::vector<int> labels;  // >= 0 cluster id, -1 noise; aligned with input points
    double eps = 0.0;
    std::size_t min_pts = 4;
    std::map<int, std::size_t> cluster_sizes;
};

// Standard DBSCAN; neighborhood counts include the point itself. Deterministic
// given input order: border points go to the first core cluster reaching them.
inline ClusterAssignment dbscan(const std::vector<Point>& pts, double eps, std::size_t min_pts = 4) {
    const std::size_t n = pts.size();
    ClusterAssignment out;
    out.eps = eps;
    out.min_pts = min_pts;
    out.labels.assign(n, -2);  // -2 unvisited

    auto neighbors = [&](std::size_t i) {
        std::vector<std::size_t> nb;
        for (std::size_t j = 0; j < n; ++j)
            if (euclidean(pts[i], pts[j]) <= eps) nb.push_back(j);
        return nb;
    };

    int cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (out.labels[i] != -2) continue;
        auto nb = neighbors(i);
        if (nb.size() < min_pts) {
            out.labels[i] = -1;
            continue;
        }
        const int cid = cluster++;
        out.labels[i] = cid;
        std::vector<std::size_t> queue(nb.begin(), nb.end());
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            const std::size_t j = queue[qi];
            if (out.labels[j] == -1) out.labels[j] = cid;  // noise becomes border
            if (out.labels[j] != -2) continue;
            out.labels[j] = cid;
            auto nb2 = neighbors(j);
            if (nb2.size() >= min_pts) queue.insert(queue.end(), nb2.begin(), nb2.end());
        }
    }
    for (int l : out.labels)
        if (l >= 0) ++out.cluster_sizes[l];
    return out;
}

// ids of the max-size cluster, ties broken by smaller cluster id
inline std::vector<std::string> largest_cluster(const ClusterAssignment& a,
                                                const std::vector<std::string>& ids) {
    int best = -1;
    std::size_t best_size = 0;
    for (const auto& [cid, size] : a.cluster_sizes) {
        if (size > best_size) {
            best = cid;
            best_size = size;
        }
    }
    if (best < 0) throw AllNoise();
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (a.labels[i] == best) out.push_back(ids[i]);
    return out;
}

}  // namespace appusage
