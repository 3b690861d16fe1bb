#include "qroute/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "qroute/error.hpp"
#include "qroute/rng.hpp"

namespace qroute::aggregate {

namespace {

struct RawFeatures {
    Vec values;
    std::vector<std::string> names;
};

RawFeatures raw_features(const BeliefState& b, const ClassicalView& view) {
    RawFeatures raw;
    for (const auto& m : view.links) {
        if (!m.alive || !b.has(m.id)) continue;
        const auto& d = b.dist(m.id);
        const std::string tag = "link" + std::to_string(m.id);
        raw.values.push_back(belief::expected_fidelity(b.grid, d));
        raw.names.push_back(tag + ".ef");
        raw.values.push_back(belief::fidelity_variance(b.grid, d));
        raw.names.push_back(tag + ".var");
        raw.values.push_back(static_cast<double>(m.age) / m.t2_ms);
        raw.names.push_back(tag + ".age");
    }
    for (int v = 0; v < view.n_nodes; ++v) {
        raw.values.push_back(view.capacity[v] > 0
                                 ? static_cast<double>(view.mu_ledger[v]) / view.capacity[v]
                                 : 0.0);
        raw.names.push_back("node" + std::to_string(v) + ".mu");
    }
    return raw;
}

void pool(const Vec& xs, const std::string& tag, bool with_min, Vec& out,
          std::vector<std::string>& names) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -mn;
    double sum = 0.0;
    for (double x : xs) {
        mn = std::min(mn, x);
        mx = std::max(mx, x);
        sum += x;
    }
    const double m = xs.empty() ? 0.0 : sum / xs.size();
    if (xs.empty()) mn = mx = 0.0;
    out.push_back(m);
    names.push_back(tag + ".mean");
    out.push_back(mx);
    names.push_back(tag + ".max");
    if (with_min) {
        out.push_back(mn);
        names.push_back(tag + ".min");
    }
}

}  // namespace

FeatureVector featurize(const BeliefState& b, const ClassicalView& view, int d) {
    if (d < 4) throw Error(ErrorCode::DIMENSION_TOO_SMALL, "feature dimension must be >= 4");
    RawFeatures raw = raw_features(b, view);
    FeatureVector f;
    if (static_cast<int>(raw.values.size()) <= d) {
        f.values = raw.values;
        f.layout = raw.names;
        while (static_cast<int>(f.values.size()) < d) {
            f.values.push_back(0.0);
            f.layout.push_back("pad");
        }
        return f;
    }
    // Pooled layout: five link pools and two node pools, then fit to d.
    Vec ef, var, age, mu;
    for (const auto& m : view.links) {
        if (!m.alive || !b.has(m.id)) continue;
        const auto& dist = b.dist(m.id);
        ef.push_back(belief::expected_fidelity(b.grid, dist));
        var.push_back(belief::fidelity_variance(b.grid, dist));
        age.push_back(static_cast<double>(m.age) / m.t2_ms);
    }
    for (int v = 0; v < view.n_nodes; ++v)
        mu.push_back(view.capacity[v] > 0
                         ? static_cast<double>(view.mu_ledger[v]) / view.capacity[v]
                         : 0.0);
    pool(ef, "ef", /*with_min=*/true, f.values, f.layout);
    pool(var, "var", true, f.values, f.layout);
    pool(age, "age", false, f.values, f.layout);
    pool(mu, "mu", false, f.values, f.layout);
    if (static_cast<int>(f.values.size()) > d) {
        f.values.resize(d);
        f.layout.resize(d);
    }
    while (static_cast<int>(f.values.size()) < d) {
        f.values.push_back(0.0);
        f.layout.push_back("pad");
    }
    return f;
}

std::vector<Vec> node_feature_matrix(const BeliefState& b, const ClassicalView& view) {
    std::vector<Vec> rows(view.n_nodes, Vec(kNodeFeatureDim, 0.0));
    std::vector<int> degree(view.n_nodes, 0);
    std::vector<double> ef_sum(view.n_nodes, 0.0), ef_max(view.n_nodes, 0.0);
    std::vector<double> var_sum(view.n_nodes, 0.0), age_sum(view.n_nodes, 0.0);
    for (const auto& m : view.links) {
        if (!m.alive || !b.has(m.id)) continue;
        const auto& dist = b.dist(m.id);
        const double ef = belief::expected_fidelity(b.grid, dist);
        const double var = belief::fidelity_variance(b.grid, dist);
        const double age = static_cast<double>(m.age) / m.t2_ms;
        for (int v : {m.u, m.v}) {
            degree[v] += 1;
            ef_sum[v] += ef;
            ef_max[v] = std::max(ef_max[v], ef);
            var_sum[v] += var;
            age_sum[v] += age;
        }
    }
    for (int v = 0; v < view.n_nodes; ++v) {
        auto& r = rows[v];
        r[0] = view.capacity[v] > 0 ? static_cast<double>(view.mu_ledger[v]) / view.capacity[v] : 0.0;
        if (degree[v] > 0) {
            r[1] = ef_sum[v] / degree[v];
            r[2] = ef_max[v];
            r[3] = var_sum[v] / degree[v];
            r[4] = age_sum[v] / degree[v];
        }
        r[5] = view.n_nodes > 1 ? static_cast<double>(degree[v]) / (view.n_nodes - 1) : 0.0;
    }
    return rows;
}

double estimate_lipschitz(const std::vector<std::pair<const BeliefState*, const BeliefState*>>& pairs,
                          const ClassicalView& view, int d) {
    if (pairs.size() < 100)
        throw Error(ErrorCode::INSUFFICIENT_POINTS, "need at least 100 belief pairs");
    double best = 0.0;
    for (const auto& [pa, pb] : pairs) {
        double l1 = 0.0;
        const std::size_t n = std::max(pa->link_dist.size(), pb->link_dist.size());
        for (std::size_t l = 0; l < n; ++l) {
            const bool ha = pa->has(static_cast<int>(l));
            const bool hb = pb->has(static_cast<int>(l));
            if (ha && hb) {
                l1 += l1_distance(pa->dist(static_cast<int>(l)), pb->dist(static_cast<int>(l)));
            } else if (ha) {
                l1 += l1_norm(pa->dist(static_cast<int>(l)));
            } else if (hb) {
                l1 += l1_norm(pb->dist(static_cast<int>(l)));
            }
        }
        if (l1 < 1e-12) continue;
        const auto fa = featurize(*pa, view, d);
        const auto fb = featurize(*pb, view, d);
        best = std::max(best, l2_distance(fa.values, fb.values) / l1);
    }
    return best;
}

int assign(const ClusterSet& c, const Vec& f) {
    if (c.centers.empty()) throw Error(ErrorCode::INSUFFICIENT_POINTS, "empty cluster set");
    if (c.centers[0].size() != f.size())
        throw Error(ErrorCode::DIMENSION_MISMATCH, "feature dimension does not match centers");
    int best = 0;
    double best_d = l2_distance(c.centers[0], f);
    for (int i = 1; i < c.k(); ++i) {
        const double d = l2_distance(c.centers[i], f);
        if (d < best_d - 1e-15) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

double covering_radius(const std::vector<Vec>& points, const ClusterSet& c) {
    double r = 0.0;
    for (const auto& p : points) r = std::max(r, l2_distance(c.centers[assign(c, p)], p));
    return r;
}

namespace {

ClusterSet kmeans(const std::vector<Vec>& points, int k, Rng& rng) {
    const int n = static_cast<int>(points.size());
    ClusterSet c;
    // k-means++ seeding
    c.centers.push_back(points[rng.uniform_int(n)]);
    Vec d2(n);
    while (c.k() < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& ctr : c.centers) {
                const double d = l2_distance(ctr, points[i]);
                best = std::min(best, d * d);
            }
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            // all remaining points coincide with existing centers
            c.centers.push_back(points[rng.uniform_int(n)]);
            continue;
        }
        double r = rng.uniform() * total;
        int pick = n - 1;
        for (int i = 0; i < n; ++i) {
            r -= d2[i];
            if (r <= 0.0) {
                pick = i;
                break;
            }
        }
        c.centers.push_back(points[pick]);
    }

    c.assignment.assign(n, 0);
    double prev_inertia = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            c.assignment[i] = assign(c, points[i]);
            const double d = l2_distance(c.centers[c.assignment[i]], points[i]);
            inertia += d * d;
        }
        // recompute centroids
        std::vector<Vec> sums(k, Vec(points[0].size(), 0.0));
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            counts[c.assignment[i]] += 1;
            for (std::size_t j = 0; j < points[i].size(); ++j) sums[c.assignment[i]][j] += points[i][j];
        }
        for (int q = 0; q < k; ++q) {
            if (counts[q] == 0) {
                // re-seed an empty cluster at the farthest point
                int far = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    const double d = l2_distance(c.centers[c.assignment[i]], points[i]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                c.centers[q] = points[far];
            } else {
                for (std::size_t j = 0; j < sums[q].size(); ++j) c.centers[q][j] = sums[q][j] / counts[q];
            }
        }
        if (prev_inertia < std::numeric_limits<double>::infinity()) {
            const double rel = prev_inertia > 0.0 ? (prev_inertia - inertia) / prev_inertia
                                                  : 0.0;
            if (rel >= 0.0 && rel < 1e-6) break;
        }
        prev_inertia = inertia;
    }
    for (int i = 0; i < n; ++i) c.assignment[i] = assign(c, points[i]);
    c.radius = covering_radius(points, c);
    return c;
}

ClusterSet gonzalez(const std::vector<Vec>& points, int k) {
    const int n = static_cast<int>(points.size());
    ClusterSet c;
    c.centers.push_back(points[0]);
    Vec dist(n);
    for (int i = 0; i < n; ++i) dist[i] = l2_distance(points[0], points[i]);
    while (c.k() < k) {
        int far = 0;
        for (int i = 1; i < n; ++i)
            if (dist[i] > dist[far]) far = i;
        if (dist[far] <= 0.0) break;  // fewer distinct points than k
        c.centers.push_back(points[far]);
        for (int i = 0; i < n; ++i)
            dist[i] = std::min(dist[i], l2_distance(points[far], points[i]));
    }
    c.assignment.resize(n);
    for (int i = 0; i < n; ++i) c.assignment[i] = assign(c, points[i]);
    c.radius = covering_radius(points, c);
    return c;
}

}  // namespace

ClusterSet cluster(const std::vector<Vec>& points, int k, std::uint64_t seed, CoverAlgo algo) {
    if (points.empty() || k < 1)
        throw Error(ErrorCode::INSUFFICIENT_POINTS, "clustering needs points and k >= 1");
    std::vector<Vec> distinct = points;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (static_cast<int>(distinct.size()) < k)
        throw Error(ErrorCode::INSUFFICIENT_POINTS, "k exceeds the number of distinct points");
    if (algo == CoverAlgo::Gonzalez) return gonzalez(points, k);
    Rng rng(seed);
    return kmeans(points, k, rng);
}

std::vector<CoveringRow> check_covering_bound(const std::vector<Vec>& points,
                                              const std::vector<double>& eps_values,
                                              double ball_radius, std::uint64_t seed) {
    if (points.empty()) throw Error(ErrorCode::INSUFFICIENT_POINTS, "no points");
    const int dim = static_cast<int>(points[0].size());
    std::vector<Vec> distinct = points;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const int max_k = static_cast<int>(distinct.size());

    std::vector<CoveringRow> rows;
    for (double eps : eps_values) {
        CoveringRow row;
        row.eps = eps;
        row.k_bound = std::pow(2.0 * ball_radius / eps, dim);
        int achieved = -1;
        for (int k = 1; k <= max_k; ++k) {
            double best = std::numeric_limits<double>::infinity();
            for (std::uint64_t s = 0; s < 3; ++s)
                best = std::min(best, cluster(points, k, derive_seed(seed, s, k)).radius);
            best = std::min(best, cluster(points, k, 0, CoverAlgo::Gonzalez).radius);
            if (best <= eps) {
                achieved = k;
                break;
            }
        }
        row.k_achieved = achieved < 0 ? max_k : achieved;
        row.pass = achieved > 0 && static_cast<double>(achieved) <= row.k_bound;
        rows.push_back(row);
    }
    return rows;
}

std::string to_json(const ClusterSet& c) {
    nlohmann::json j;
    j["version"] = 1;
    j["radius"] = c.radius;
    j["centers"] = c.centers;
    return j.dump();
}

ClusterSet cluster_set_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ClusterSet c;
    c.radius = j.at("radius").get<double>();
    c.centers = j.at("centers").get<std::vector<Vec>>();
    return c;
}

}  // namespace qroute::aggregate
