#include "qroute/belief.hpp"

#include <cmath>
#include <sstream>

#include "qroute/error.hpp"

namespace qroute::belief {

bool TransitionKernel::row_stochastic(double tol) const {
    for (int i = 0; i < bins; ++i) {
        double s = 0.0;
        for (int j = 0; j < bins; ++j) {
            const double x = at(i, j);
            if (x < 0.0) return false;
            s += x;
        }
        if (std::fabs(s - 1.0) > tol) return false;
    }
    return true;
}

ClassicalView make_classical_view(const netmodel::NetworkGraph& g) {
    ClassicalView v;
    v.n_nodes = g.node_count();
    v.links.resize(g.link_count());
    for (LinkId i = 0; i < g.link_count(); ++i) {
        const auto& l = g.links[i];
        auto& m = v.links[i];
        m.id = i;
        m.u = l.u;
        m.v = l.v;
        m.alive = l.alive;
        m.is_virtual = l.is_virtual;
        m.age = l.age;
        m.pairs = l.pairs;
        m.span = l.span;
        m.decay_rate = l.decay_rate;
        m.pur_gain = l.pur_gain;
        m.t2_ms = l.t2_ms;
    }
    v.mu_ledger.reserve(g.nodes.size());
    v.mu_reported.reserve(g.nodes.size());
    v.capacity.reserve(g.nodes.size());
    for (const auto& n : g.nodes) {
        v.mu_ledger.push_back(n.occupancy);
        v.mu_reported.push_back(std::min(n.memory_capacity, std::max(0, n.occupancy + n.report_bias)));
        v.capacity.push_back(n.memory_capacity);
    }
    return v;
}

std::uint64_t BeliefState::hash() const {
    std::uint64_t h = fnv1a(&grid.bins, sizeof(grid.bins));
    h = fnv1a(&step, sizeof(step), h);
    for (const auto& d : link_dist)
        if (!d.empty()) h = fnv1a(d.data(), d.size() * sizeof(double), h);
    return h;
}

Vec prior_distribution(const BinGrid& grid, PriorKind kind, double range_lo, double range_hi) {
    Vec d(grid.bins, 0.0);
    if (kind == PriorKind::Uniform) {
        for (double& x : d) x = 1.0 / grid.bins;
        return d;
    }
    int inside = 0;
    for (int i = 0; i < grid.bins; ++i)
        if (grid.center(i) >= range_lo && grid.center(i) <= range_hi) ++inside;
    if (inside == 0) {
        // Degenerate range: fall back to the bin containing its midpoint.
        d[grid.bin_of(0.5 * (range_lo + range_hi))] = 1.0;
        return d;
    }
    for (int i = 0; i < grid.bins; ++i)
        if (grid.center(i) >= range_lo && grid.center(i) <= range_hi) d[i] = 1.0 / inside;
    return d;
}

BeliefState init_belief(const ClassicalView& view, const BinGrid& grid, PriorKind kind,
                        double range_lo, double range_hi) {
    BeliefState b;
    b.grid = grid;
    b.link_dist.resize(view.links.size());
    const Vec prior = prior_distribution(grid, kind, range_lo, range_hi);
    for (const auto& m : view.links)
        if (m.alive) b.link_dist[m.id] = prior;
    return b;
}

TransitionKernel identity_kernel(const BinGrid& grid) {
    TransitionKernel k;
    k.bins = grid.bins;
    k.rows.assign(static_cast<std::size_t>(grid.bins) * grid.bins, 0.0);
    for (int i = 0; i < grid.bins; ++i) k.at(i, i) = 1.0;
    return k;
}

TransitionKernel decay_kernel(const BinGrid& grid, double gamma, double dt_ms, double kappa,
                              int mc_samples, std::uint64_t seed) {
    TransitionKernel k;
    k.bins = grid.bins;
    k.rows.assign(static_cast<std::size_t>(grid.bins) * grid.bins, 0.0);
    const double drift = std::exp(-gamma * dt_ms);
    if (kappa <= 0.0) {
        for (int i = 0; i < grid.bins; ++i) {
            const double f = clamp(grid.center(i) * drift, grid.lo, grid.hi);
            k.at(i, grid.bin_of(f)) = 1.0;
        }
        return k;
    }
    // Seed mixes the kernel parameters so repeated builds are reproducible.
    std::uint64_t s = seed;
    s = fnv1a(&gamma, sizeof(gamma), s);
    s = fnv1a(&dt_ms, sizeof(dt_ms), s);
    s = fnv1a(&kappa, sizeof(kappa), s);
    Rng rng(s);
    const double inv = 1.0 / mc_samples;
    for (int i = 0; i < grid.bins; ++i) {
        const double c = grid.center(i);
        const double band = std::max(0.0, c * (1.0 - c));
        const double sigma = std::sqrt(kappa * band * dt_ms);
        for (int n = 0; n < mc_samples; ++n) {
            const double f = clamp(c * drift + sigma * rng.normal(), grid.lo, grid.hi);
            k.at(i, grid.bin_of(f)) += inv;
        }
    }
    return k;
}

TransitionKernel purify_kernel(const BinGrid& grid, double eta) {
    TransitionKernel k;
    k.bins = grid.bins;
    k.rows.assign(static_cast<std::size_t>(grid.bins) * grid.bins, 0.0);
    for (int i = 0; i < grid.bins; ++i) {
        const double f = clamp(netmodel::purification_fidelity(grid.center(i), eta), grid.lo, grid.hi);
        k.at(i, grid.bin_of(f)) = 1.0;
    }
    return k;
}

Vec apply_kernel(const Vec& dist, const TransitionKernel& k) {
    if (static_cast<int>(dist.size()) != k.bins)
        throw Error(ErrorCode::DIMENSION_MISMATCH, "kernel does not match the bin grid");
    Vec out(dist.size(), 0.0);
    for (int i = 0; i < k.bins; ++i) {
        const double w = dist[i];
        if (w == 0.0) continue;
        for (int j = 0; j < k.bins; ++j) out[j] += w * k.at(i, j);
    }
    return out;
}

Vec swap_compose(const BinGrid& grid, const Vec& left, const Vec& right) {
    if (left.size() != right.size() || static_cast<int>(left.size()) != grid.bins)
        throw Error(ErrorCode::DIMENSION_MISMATCH, "swap_compose needs matching grids");
    Vec out(grid.bins, 0.0);
    for (int i = 0; i < grid.bins; ++i) {
        if (left[i] == 0.0) continue;
        for (int j = 0; j < grid.bins; ++j) {
            if (right[j] == 0.0) continue;
            const double f = clamp(netmodel::swap_fidelity(grid.center(i), grid.center(j)),
                                   grid.lo, grid.hi);
            out[grid.bin_of(f)] += left[i] * right[j];
        }
    }
    return out;
}

Vec bayes_update(const Vec& predicted, const BinGrid& grid, bool high, double threshold,
                 double g_flip) {
    Vec post(predicted.size());
    double z = 0.0;
    for (int i = 0; i < grid.bins; ++i) {
        post[i] = predicted[i] * observation_likelihood(high, grid.center(i), threshold, g_flip);
        z += post[i];
    }
    if (z < 1e-12) return predicted;  // degenerate evidence: keep the prediction
    for (double& x : post) x /= z;
    return post;
}

double expected_fidelity(const BinGrid& grid, const Vec& dist) {
    double s = 0.0;
    for (int i = 0; i < grid.bins; ++i) s += grid.center(i) * dist[i];
    return s;
}

double fidelity_variance(const BinGrid& grid, const Vec& dist) {
    const double m = expected_fidelity(grid, dist);
    double s = 0.0;
    for (int i = 0; i < grid.bins; ++i) {
        const double d = grid.center(i) - m;
        s += d * d * dist[i];
    }
    return s;
}

double expected_fidelity(const BeliefState& b, LinkId l) {
    if (!b.has(l)) throw Error(ErrorCode::INVALID_PARAM, "no belief for link");
    return expected_fidelity(b.grid, b.dist(l));
}

double belief_error(const BeliefState& b, const netmodel::NetworkGraph& truth) {
    double err = 0.0;
    int count = 0;
    for (LinkId l = 0; l < truth.link_count(); ++l) {
        if (!truth.links[l].alive || !b.has(l)) continue;
        err += std::fabs(expected_fidelity(b, l) - truth.links[l].fidelity);
        ++count;
    }
    return count > 0 ? err / count : 0.0;
}

bool normalized(const Vec& dist, double tol) {
    double s = 0.0;
    for (double x : dist) {
        if (x < 0.0) return false;
        s += x;
    }
    return std::fabs(s - 1.0) <= tol;
}

std::string to_json(const BeliefState& b) {
    std::ostringstream os;
    os.precision(17);
    os << "{\"bins\":" << b.grid.bins << ",\"lo\":" << b.grid.lo << ",\"hi\":" << b.grid.hi
       << ",\"step\":" << b.step << ",\"links\":{";
    bool first = true;
    for (std::size_t l = 0; l < b.link_dist.size(); ++l) {
        if (b.link_dist[l].empty()) continue;
        if (!first) os << ",";
        first = false;
        os << "\"" << l << "\":[";
        for (std::size_t i = 0; i < b.link_dist[l].size(); ++i) {
            if (i) os << ",";
            os << b.link_dist[l][i];
        }
        os << "]";
    }
    os << "}}";
    return os.str();
}

}  // namespace qroute::belief
