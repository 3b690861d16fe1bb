#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "qroute/error.hpp"
#include "qroute/mathutil.hpp"
#include "qroute/rng.hpp"

// Minimal dense-layer toolkit shared by the graph policy, the critic and the
// flat DQN baseline. Everything is double precision with explicit reverse-mode
// helpers; no implicit global state.
namespace qroute::nn {

struct Mat {
    int rows = 0, cols = 0;
    Vec w;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), w(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return w[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return w[static_cast<std::size_t>(r) * cols + c]; }
};

// y = W x
inline void matvec(const Mat& m, const Vec& x, Vec& y) {
    y.assign(m.rows, 0.0);
    for (int r = 0; r < m.rows; ++r) {
        double s = 0.0;
        const double* row = m.w.data() + static_cast<std::size_t>(r) * m.cols;
        for (int c = 0; c < m.cols; ++c) s += row[c] * x[c];
        y[r] = s;
    }
}

// Reverse of matvec: accumulates dW += dy x^T and dx += W^T dy.
inline void matvec_backward(const Mat& m, const Vec& x, const Vec& dy, Mat& dm, Vec& dx) {
    for (int r = 0; r < m.rows; ++r) {
        const double g = dy[r];
        if (g == 0.0) continue;
        double* drow = dm.w.data() + static_cast<std::size_t>(r) * m.cols;
        const double* row = m.w.data() + static_cast<std::size_t>(r) * m.cols;
        for (int c = 0; c < m.cols; ++c) {
            drow[c] += g * x[c];
            dx[c] += row[c] * g;
        }
    }
}

struct Affine {
    Mat W;
    Vec b;

    Affine() = default;
    Affine(int out, int in) : W(out, in), b(out, 0.0) {}

    void forward(const Vec& x, Vec& y) const {
        matvec(W, x, y);
        for (int r = 0; r < W.rows; ++r) y[r] += b[r];
    }
    void backward(const Vec& x, const Vec& dy, Affine& grad, Vec& dx) const {
        matvec_backward(W, x, dy, grad.W, dx);
        for (int r = 0; r < W.rows; ++r) grad.b[r] += dy[r];
    }

    void init(Rng& rng) {
        const double scale = 1.0 / std::sqrt(std::max(1, W.cols));
        for (double& x : W.w) x = rng.uniform(-scale, scale);
        for (double& x : b) x = 0.0;
    }
    void zero() {
        for (double& x : W.w) x = 0.0;
        for (double& x : b) x = 0.0;
    }
};

inline void tanh_inplace(Vec& v) {
    for (double& x : v) x = std::tanh(x);
}
// dz given activation output a = tanh(z): dz = dy (1 - a^2)
inline void tanh_backward(const Vec& activated, Vec& dy) {
    for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= 1.0 - activated[i] * activated[i];
}

// Two-hidden-layer tanh MLP (three affine maps).
struct Mlp {
    Affine l1, l2, l3;

    Mlp() = default;
    Mlp(int in, int hidden, int out) : l1(hidden, in), l2(hidden, hidden), l3(out, hidden) {}

    struct Trace {
        Vec x, a1, a2, y;
    };

    void forward(const Vec& x, Trace& t) const {
        t.x = x;
        l1.forward(x, t.a1);
        tanh_inplace(t.a1);
        l2.forward(t.a1, t.a2);
        tanh_inplace(t.a2);
        l3.forward(t.a2, t.y);
    }
    // Accumulates parameter grads into `grad`, returns dx.
    void backward(const Trace& t, const Vec& dy, Mlp& grad, Vec& dx) const {
        Vec d2(t.a2.size(), 0.0);
        l3.backward(t.a2, dy, grad.l3, d2);
        tanh_backward(t.a2, d2);
        Vec d1(t.a1.size(), 0.0);
        l2.backward(t.a1, d2, grad.l2, d1);
        tanh_backward(t.a1, d1);
        dx.assign(t.x.size(), 0.0);
        l1.backward(t.x, d1, grad.l1, dx);
    }

    void init(Rng& rng) {
        l1.init(rng);
        l2.init(rng);
        l3.init(rng);
    }
    void zero() {
        l1.zero();
        l2.zero();
        l3.zero();
    }
};

// Applies fn to every (parameter, companion) pair; the companion structure
// must have identical shapes (gradients, target copies, ...).
template <typename Fn>
void for_each(Affine& a, Affine& b, Fn&& fn) {
    for (std::size_t i = 0; i < a.W.w.size(); ++i) fn(a.W.w[i], b.W.w[i]);
    for (std::size_t i = 0; i < a.b.size(); ++i) fn(a.b[i], b.b[i]);
}
template <typename Fn>
void for_each(Mlp& a, Mlp& b, Fn&& fn) {
    for_each(a.l1, b.l1, fn);
    for_each(a.l2, b.l2, fn);
    for_each(a.l3, b.l3, fn);
}

// Polyak soft update: target <- tau * source + (1 - tau) * target.
// Shared by every learner that keeps a target network.
template <typename Net>
void soft_update(Net& target, Net& source, double tau) {
    for_each(target, source, [tau](double& t, double& s) { t = tau * s + (1.0 - tau) * t; });
}

inline nlohmann::json affine_to_json(const Affine& a) {
    return {{"rows", a.W.rows}, {"cols", a.W.cols}, {"w", a.W.w}, {"b", a.b}};
}
inline Affine affine_from_json(const nlohmann::json& j) {
    Affine a(j.at("rows").get<int>(), j.at("cols").get<int>());
    a.W.w = j.at("w").get<Vec>();
    a.b = j.at("b").get<Vec>();
    if (a.W.w.size() != static_cast<std::size_t>(a.W.rows) * a.W.cols)
        throw Error(ErrorCode::SHAPE_MISMATCH, "affine weights do not match the declared shape");
    return a;
}
inline nlohmann::json mlp_to_json(const Mlp& m) {
    return {{"l1", affine_to_json(m.l1)}, {"l2", affine_to_json(m.l2)}, {"l3", affine_to_json(m.l3)}};
}
inline Mlp mlp_from_json(const nlohmann::json& j) {
    Mlp m;
    m.l1 = affine_from_json(j.at("l1"));
    m.l2 = affine_from_json(j.at("l2"));
    m.l3 = affine_from_json(j.at("l3"));
    return m;
}

}  // namespace qroute::nn
