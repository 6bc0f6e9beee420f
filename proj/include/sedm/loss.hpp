#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sedm/distmat.hpp"
#include "sedm/error.hpp"
#include "sedm/nn.hpp"

namespace sedm {

/// Multipliers of the total training loss:
/// total = rec + beta*kl + gamma*diag + delta*nonneg + epsilon*sym.
struct LossWeights {
    double beta = 1e-10;
    double gamma = 1e-5;
    double delta = 1e-5;
    double epsilon = 1e-5;
};

struct LossBreakdown {
    double rec = 0.0, kl = 0.0, diag = 0.0, nonneg = 0.0, sym = 0.0, total = 0.0;
    Reindexing argmin_reindexing;
};

namespace loss {

/// Index map of reindexing r at size n: position i reads original index
/// (i*o + k) mod n.
inline std::size_t remap(std::size_t i, const Reindexing& r, std::size_t n) {
    return detail::wrap_index(static_cast<long long>(i) * r.o + static_cast<long long>(r.k), n);
}

/// Indexation-invariant reconstruction loss: the minimum over all 2N
/// reindexings of the mean squared error between d_hat and the re-indexed
/// target. Ties resolve to the earliest candidate in the fixed (o, k)
/// enumeration, whose first element is the identity.
template <typename T>
std::pair<T, Reindexing> rec_loss(const T* d_hat, const T* d, std::size_t n) {
    T best = T(0);
    Reindexing best_r{0, +1};
    bool first = true;
    std::vector<std::size_t> map(n);
    for (const auto& r : all_reindexings(n)) {
        for (std::size_t i = 0; i < n; ++i) map[i] = remap(i, r, n);
        T acc = T(0);
        for (std::size_t i = 0; i < n; ++i) {
            const T* hrow = d_hat + i * n;
            const T* drow = d + map[i] * n;
            for (std::size_t j = 0; j < n; ++j) {
                const T diff = hrow[j] - drow[map[j]];
                acc += diff * diff;
            }
        }
        acc /= static_cast<T>(n * n);
        if (first || acc < best) {
            best = acc;
            best_r = r;
            first = false;
        }
    }
    return {best, best_r};
}

/// Gradient of rec_loss w.r.t. d_hat through the selected branch:
/// 2/N^2 * (d_hat - d^{k,o}).
template <typename T>
void rec_loss_backward(const T* d_hat, const T* d, std::size_t n, const Reindexing& r, T scale, T* grad_out) {
    std::vector<std::size_t> map(n);
    for (std::size_t i = 0; i < n; ++i) map[i] = remap(i, r, n);
    const T c = scale * T(2) / static_cast<T>(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            grad_out[i * n + j] += c * (d_hat[i * n + j] - d[map[i] * n + map[j]]);
}

/// -1/2 sum_j (1 + logvar_j - mu_j^2 - exp(logvar_j)), summed over latent
/// dimensions.
template <typename T>
T kl_loss(const std::vector<T>& mu, const std::vector<T>& logvar) {
    T acc = T(0);
    for (std::size_t j = 0; j < mu.size(); ++j)
        acc += T(1) + logvar[j] - mu[j] * mu[j] - std::exp(logvar[j]);
    return -acc / T(2);
}

template <typename T>
void kl_loss_backward(const std::vector<T>& mu, const std::vector<T>& logvar, T scale, std::vector<T>& dmu,
                      std::vector<T>& dlogvar) {
    for (std::size_t j = 0; j < mu.size(); ++j) {
        dmu[j] += scale * mu[j];
        dlogvar[j] += scale * (std::exp(logvar[j]) - T(1)) / T(2);
    }
}

/// Mean squared diagonal entry.
template <typename T>
T diag_loss(const T* d_hat, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += d_hat[i * n + i] * d_hat[i * n + i];
    return acc / static_cast<T>(n);
}

template <typename T>
void diag_loss_backward(const T* d_hat, std::size_t n, T scale, T* grad_out) {
    const T c = scale * T(2) / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) grad_out[i * n + i] += c * d_hat[i * n + i];
}

/// Mean hinge on negative entries: -1/N^2 sum min(d_hat, 0). Zero iff all
/// entries are non-negative.
template <typename T>
T nonneg_loss(const T* d_hat, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n * n; ++i)
        if (d_hat[i] < T(0)) acc += d_hat[i];
    return -acc / static_cast<T>(n * n);
}

template <typename T>
void nonneg_loss_backward(const T* d_hat, std::size_t n, T scale, T* grad_out) {
    const T c = -scale / static_cast<T>(n * n);
    for (std::size_t i = 0; i < n * n; ++i)
        if (d_hat[i] < T(0)) grad_out[i] += c;
}

/// Mean squared difference between the matrix and its transpose.
template <typename T>
T sym_loss(const T* d_hat, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const T diff = d_hat[i * n + j] - d_hat[j * n + i];
            acc += diff * diff;
        }
    return acc / static_cast<T>(n * n);
}

template <typename T>
void sym_loss_backward(const T* d_hat, std::size_t n, T scale, T* grad_out) {
    const T c = scale * T(4) / static_cast<T>(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            grad_out[i * n + j] += c * (d_hat[i * n + j] - d_hat[j * n + i]);
    return;
}

/// Plain MSE against the un-permuted target; the ablation counterpart of
/// rec_loss.
template <typename T>
T mse_loss(const T* d_hat, const T* d, std::size_t count) {
    T acc = T(0);
    for (std::size_t i = 0; i < count; ++i) {
        const T diff = d_hat[i] - d[i];
        acc += diff * diff;
    }
    return acc / static_cast<T>(count);
}

template <typename T>
void mse_loss_backward(const T* d_hat, const T* d, std::size_t count, T scale, T* grad_out) {
    const T c = scale * T(2) / static_cast<T>(count);
    for (std::size_t i = 0; i < count; ++i) grad_out[i] += c * (d_hat[i] - d[i]);
}

} // namespace loss

/// Loss of one sample. `indexation_invariant` selects between the min-over-
/// reindexings reconstruction term and plain MSE (the ablation variant).
template <typename T>
LossBreakdown total_loss(const Tensor<T>& d_hat, const std::vector<T>& d_target, const std::vector<T>& mu,
                         const std::vector<T>& logvar, const LossWeights& w, bool indexation_invariant = true) {
    const std::size_t n = d_hat.h;
    if (d_hat.c != 1 || d_hat.w != n || d_target.size() != n * n)
        throw ShapeError("total_loss expects a 1 x N x N reconstruction and an N*N target");
    LossBreakdown b;
    if (indexation_invariant) {
        const auto [rec, r] = loss::rec_loss(d_hat.data.data(), d_target.data(), n);
        b.rec = static_cast<double>(rec);
        b.argmin_reindexing = r;
    } else {
        b.rec = static_cast<double>(loss::mse_loss(d_hat.data.data(), d_target.data(), n * n));
        b.argmin_reindexing = {0, +1};
    }
    b.kl = static_cast<double>(loss::kl_loss(mu, logvar));
    b.diag = static_cast<double>(loss::diag_loss(d_hat.data.data(), n));
    b.nonneg = static_cast<double>(loss::nonneg_loss(d_hat.data.data(), n));
    b.sym = static_cast<double>(loss::sym_loss(d_hat.data.data(), n));
    b.total = b.rec + w.beta * b.kl + w.gamma * b.diag + w.delta * b.nonneg + w.epsilon * b.sym;
    return b;
}

/// RawMatrix/DistanceMatrix front-ends used by the deterministic (f64)
/// pipeline and the unit tests.
inline std::pair<double, Reindexing> rec_loss(const RawMatrix& d_hat, const DistanceMatrix& d) {
    if (d_hat.n != d.n) throw ShapeError("rec_loss size mismatch");
    return loss::rec_loss(d_hat.entries.data(), d.entries.data(), d.n);
}

inline double kl_loss(const std::vector<double>& mu, const std::vector<double>& logvar) {
    return loss::kl_loss(mu, logvar);
}

inline double diag_loss(const RawMatrix& m) { return loss::diag_loss(m.entries.data(), m.n); }
inline double nonneg_loss(const RawMatrix& m) { return loss::nonneg_loss(m.entries.data(), m.n); }
inline double sym_loss(const RawMatrix& m) { return loss::sym_loss(m.entries.data(), m.n); }

inline LossBreakdown total_loss(const RawMatrix& d_hat, const DistanceMatrix& d, const std::vector<double>& mu,
                                const std::vector<double>& logvar, const LossWeights& w) {
    if (d_hat.n != d.n) throw ShapeError("total_loss size mismatch");
    Tensor<double> t(1, d_hat.n, d_hat.n);
    t.data = d_hat.entries;
    return total_loss(t, d.entries, mu, logvar, w);
}

} // namespace sedm
