#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qroute/mathutil.hpp"
#include "qroute/netmodel.hpp"
#include "qroute/rng.hpp"

namespace qroute::belief {

using netmodel::LinkId;
using netmodel::NodeId;

// Uniform cell-centered grid of fidelity hypotheses over [0.25, 1].
struct BinGrid {
    int bins = 10;
    double lo = netmodel::kFidelityFloor;
    double hi = 1.0;

    double width() const { return (hi - lo) / bins; }
    double center(int i) const { return lo + (i + 0.5) * width(); }

    // Index of the bin containing f (clamped to the grid).
    int bin_of(double f) const {
        const double w = width();
        int i = static_cast<int>((f - lo) / w);
        if (i < 0) i = 0;
        if (i >= bins) i = bins - 1;
        return i;
    }

    bool operator==(const BinGrid& o) const { return bins == o.bins && lo == o.lo && hi == o.hi; }
};

// Row-stochastic B x B matrix: row i is the distribution of the next bin
// given the current hypothesis is bin center i.
struct TransitionKernel {
    int bins = 0;
    Vec rows;  // row-major, bins*bins

    double at(int i, int j) const { return rows[static_cast<std::size_t>(i) * bins + j]; }
    double& at(int i, int j) { return rows[static_cast<std::size_t>(i) * bins + j]; }

    bool row_stochastic(double tol = 1e-9) const;
};

// Classical, agent-visible view of the network. Quantum fidelities are hidden;
// everything here is heralded classical information (plus the possibly
// adversarially biased occupancy report).
struct ClassicalView {
    int n_nodes = 0;
    struct LinkMeta {
        LinkId id = -1;
        NodeId u = -1, v = -1;
        bool alive = false;
        bool is_virtual = false;
        int age = 0;
        int pairs = 0;
        int span = 1;
        double decay_rate = 0.0;
        double pur_gain = 0.0;
        double t2_ms = 1.0;
    };
    std::vector<LinkMeta> links;       // indexed by link id
    std::vector<int> mu_ledger;        // agent bookkeeping (exact)
    std::vector<int> mu_reported;      // reporting channel (corruptible)
    std::vector<int> capacity;
};

ClassicalView make_classical_view(const netmodel::NetworkGraph& g);

enum class PriorKind { Uniform, FidelityRange };

// Per-link factored belief over fidelity bins plus classical side info.
struct BeliefState {
    BinGrid grid;
    std::vector<Vec> link_dist;  // indexed by link id; empty for absent links
    int step = 0;

    bool has(LinkId l) const {
        return l >= 0 && l < static_cast<int>(link_dist.size()) && !link_dist[l].empty();
    }
    Vec& dist(LinkId l) { return link_dist[l]; }
    const Vec& dist(LinkId l) const { return link_dist[l]; }

    std::uint64_t hash() const;
};

// Prior distribution over the grid for one link.
Vec prior_distribution(const BinGrid& grid, PriorKind kind, double range_lo, double range_hi);

BeliefState init_belief(const ClassicalView& view, const BinGrid& grid, PriorKind kind,
                        double range_lo, double range_hi);

// --- kernels -----------------------------------------------------------------

TransitionKernel identity_kernel(const BinGrid& grid);

// Decoherence pushforward. kappa == 0 uses the analytic point-mass rows;
// kappa > 0 estimates rows by Monte Carlo with >= mc_samples draws per row.
TransitionKernel decay_kernel(const BinGrid& grid, double gamma, double dt_ms, double kappa,
                              int mc_samples = 10000, std::uint64_t seed = 0x9e3779b9ULL);

// Successful purification pushforward F -> F + eta (1 - F).
TransitionKernel purify_kernel(const BinGrid& grid, double eta);

// --- filter steps ------------------------------------------------------------

// b' = b^T K. Throws DIMENSION_MISMATCH on grid disagreement.
Vec apply_kernel(const Vec& dist, const TransitionKernel& k);

// Pushforward of two independent link beliefs through the Werner swap rule.
Vec swap_compose(const BinGrid& grid, const Vec& left, const Vec& right);

// Thresholded-symbol likelihood for one bin hypothesis.
inline double observation_likelihood(bool high, double bin_center, double threshold, double g_flip) {
    const bool predicted_high = bin_center >= threshold;
    return predicted_high == high ? 1.0 - g_flip : g_flip;
}

// Posterior ∝ likelihood × predicted, renormalized. If the total likelihood
// mass falls below 1e-12 the posterior resets to the predicted distribution.
Vec bayes_update(const Vec& predicted, const BinGrid& grid, bool high, double threshold,
                 double g_flip);

// --- moments & diagnostics ---------------------------------------------------

double expected_fidelity(const BinGrid& grid, const Vec& dist);
double fidelity_variance(const BinGrid& grid, const Vec& dist);

double expected_fidelity(const BeliefState& b, LinkId l);

// Mean absolute error between belief-mean fidelity and the hidden truth over
// links alive in both.
double belief_error(const BeliefState& b, const netmodel::NetworkGraph& truth);

bool normalized(const Vec& dist, double tol = 1e-9);

std::string to_json(const BeliefState& b);

}  // namespace qroute::belief
