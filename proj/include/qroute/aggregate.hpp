#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qroute/belief.hpp"
#include "qroute/mathutil.hpp"

namespace qroute::aggregate {

using belief::BeliefState;
using belief::ClassicalView;

struct FeatureVector {
    Vec values;
    std::vector<std::string> layout;  // one name per coordinate

    std::size_t dim() const { return values.size(); }
};

// Deterministic embedding of (belief, classical view) into R^d.
//
// Raw layout: per alive link [E[F], Var[F], age/T2], then per node μ/m_max.
// When the raw vector fits in d it is zero-padded; otherwise a fixed pooled
// layout (mean/max/min pools over links, mean/max over nodes) is used and
// truncated or padded to d. d >= 4 required.
FeatureVector featurize(const BeliefState& b, const ClassicalView& view, int d);

// Per-node feature rows used by the graph policy input.
// Layout per node: [mu/m_max, mean incident E[F], max incident E[F],
//                   mean incident Var[F], mean incident age/T2, degree/n]
std::vector<Vec> node_feature_matrix(const BeliefState& b, const ClassicalView& view);
constexpr int kNodeFeatureDim = 6;

// Empirical Lipschitz ratio max ||φ(b)-φ(b')||_2 / ||b-b'||_1 over the pairs;
// pairs with ||b-b'||_1 < 1e-12 are skipped. Needs >= 100 pairs.
double estimate_lipschitz(const std::vector<std::pair<const BeliefState*, const BeliefState*>>& pairs,
                          const ClassicalView& view, int d);

struct ClusterSet {
    std::vector<Vec> centers;
    double radius = 0.0;               // max distance of a training point to its center
    std::vector<int> assignment;       // training-point -> center index

    int k() const { return static_cast<int>(centers.size()); }
};

enum class CoverAlgo { KMeans, Gonzalez };

// k-means++ / Lloyd covering heuristic (or greedy k-center when selected).
// Radius is computed a posteriori over the training points.
ClusterSet cluster(const std::vector<Vec>& points, int k, std::uint64_t seed,
                   CoverAlgo algo = CoverAlgo::KMeans);

// Nearest-center assignment; ties break toward the lowest center index.
int assign(const ClusterSet& c, const Vec& f);

double covering_radius(const std::vector<Vec>& points, const ClusterSet& c);

struct CoveringRow {
    double eps = 0.0;
    int k_achieved = 0;
    double k_bound = 0.0;   // (2R/eps)^d
    bool pass = false;
};

// Empirical check of the covering-number bound K <= (2R/eps)^d: for each eps,
// finds a covering of the points with radius <= eps (incremental k-means with
// a greedy fallback) and compares the achieved K against the bound.
std::vector<CoveringRow> check_covering_bound(const std::vector<Vec>& points,
                                              const std::vector<double>& eps_values,
                                              double ball_radius, std::uint64_t seed = 17);

std::string to_json(const ClusterSet& c);
ClusterSet cluster_set_from_json(const std::string& text);

}  // namespace qroute::aggregate
