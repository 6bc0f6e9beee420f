#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sedm/error.hpp"
#include "sedm/loss.hpp"
#include "sedm/vae.hpp"

namespace sedm {

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    LossWeights weights;
    bool deterministic = true; // single worker, fixed reduction order
    bool indexation_invariant = true;
    std::string log_path;        // training-log CSV, appended per epoch
    std::string checkpoint_path; // saved at the end and every checkpoint_every epochs
    std::size_t checkpoint_every = 0;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    }
};

struct TrainHistory {
    std::vector<LossBreakdown> epochs;
    std::vector<double> seconds_per_epoch;
};

/// One Adam update on a single tensor, with bias correction.
template <typename T>
void adam_update(std::vector<T>& p, const std::vector<T>& g, std::vector<T>& m, std::vector<T>& v,
                 std::uint64_t step, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (p.size() != g.size()) throw ShapeError("adam parameter/gradient size mismatch");
    if (m.size() != p.size()) m.assign(p.size(), T(0));
    if (v.size() != p.size()) v.assign(p.size(), T(0));
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        if (!std::isfinite(gi)) throw TrainingDiverged("non-finite gradient encountered");
        m[i] = static_cast<T>(beta1 * m[i] + (1.0 - beta1) * gi);
        v[i] = static_cast<T>(beta2 * v[i] + (1.0 - beta2) * gi * gi);
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] = static_cast<T>(p[i] - lr * mhat / (std::sqrt(vhat) + eps));
    }
}

/// Applies Adam across all model tensors. The state tensors are kept in
/// model enumeration order.
inline void adam_step(VaeModel<float>& model, AdamState& state, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
    std::vector<std::vector<float>*> params;
    model.for_each_tensor([&](const std::string&, const std::vector<std::size_t>&, std::vector<float>& t) {
        params.push_back(&t);
    });
    std::vector<std::vector<float>*> grads;
    model.for_each_grad([&](std::vector<float>& g) { grads.push_back(&g); });
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), {});
        state.v.assign(params.size(), {});
    }
    ++state.step;
    for (std::size_t i = 0; i < params.size(); ++i)
        adam_update(*params[i], *grads[i], state.m[i], state.v[i], state.step, lr, beta1, beta2, eps);
}

namespace detail {

inline std::uint64_t epoch_seed(std::uint64_t seed, std::uint64_t epoch) {
    // splitmix64 of (seed, epoch) so a resumed run regenerates the identical
    // shuffle and noise stream for each absolute epoch index
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (epoch + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Forward + loss of one sample; used by both training and gradient checks.
template <typename T>
struct SampleForward {
    EncodeCtx<T> enc_ctx;
    DecodeCtx<T> dec_ctx;
    std::vector<T> mu, logvar, z;
    Tensor<T> d_hat;
    LossBreakdown breakdown;
};

template <typename T>
SampleForward<T> forward_sample(const VaeModel<T>& model, const std::vector<T>& input, const std::vector<T>& eps,
                                const LossWeights& weights, bool indexation_invariant) {
    const std::size_t n = model.config.matrix_size;
    Tensor<T> x(1, n, n);
    x.data = input;
    SampleForward<T> s;
    auto [mu, lv] = encode(model, x, s.enc_ctx);
    s.mu = std::move(mu);
    s.logvar = std::move(lv);
    s.z = reparameterize(s.mu, s.logvar, eps);
    s.d_hat = decode(model, s.z, s.dec_ctx);
    s.breakdown = total_loss(s.d_hat, input, s.mu, s.logvar, weights, indexation_invariant);
    return s;
}

/// Backward pass of one sample with the given weight `scale` (1/batch for
/// batch means). Accumulates parameter gradients inside the model.
template <typename T>
void backward_sample(VaeModel<T>& model, const std::vector<T>& input, const std::vector<T>& eps,
                     const LossWeights& weights, bool indexation_invariant, SampleForward<T>& s, T scale) {
    const std::size_t n = model.config.matrix_size;
    Tensor<T> dd(1, n, n);
    if (indexation_invariant) {
        loss::rec_loss_backward(s.d_hat.data.data(), input.data(), n, s.breakdown.argmin_reindexing, scale,
                                dd.data.data());
    } else {
        loss::mse_loss_backward(s.d_hat.data.data(), input.data(), n * n, scale, dd.data.data());
    }
    loss::diag_loss_backward(s.d_hat.data.data(), n, static_cast<T>(scale * weights.gamma), dd.data.data());
    loss::nonneg_loss_backward(s.d_hat.data.data(), n, static_cast<T>(scale * weights.delta), dd.data.data());
    loss::sym_loss_backward(s.d_hat.data.data(), n, static_cast<T>(scale * weights.epsilon), dd.data.data());

    const std::vector<T> dz = decode_backward(model, dd, s.dec_ctx);
    std::vector<T> dmu(s.mu.size(), T(0)), dlv(s.mu.size(), T(0));
    loss::kl_loss_backward(s.mu, s.logvar, static_cast<T>(scale * weights.beta), dmu, dlv);
    for (std::size_t i = 0; i < dz.size(); ++i) {
        dmu[i] += dz[i];
        dlv[i] += dz[i] * std::exp(s.logvar[i] / T(2)) * eps[i] / T(2);
    }
    encode_backward(model, dmu, dlv, s.enc_ctx);
}

/// Mini-batch gradient training with Adam. Shuffling and reparameterization
/// noise are re-derived per absolute epoch index, so training resumed from a
/// checkpoint reproduces the uninterrupted run bitwise.
inline TrainHistory train(VaeModel<float>& model, const std::vector<std::vector<float>>& data,
                          const TrainConfig& cfg, AdamState* resume_state = nullptr,
                          std::uint64_t start_epoch = 0) {
    cfg.validate();
    const std::size_t n = model.config.matrix_size;
    if (data.empty()) throw NoData("empty training set");
    for (const auto& d : data)
        if (d.size() != n * n) throw ShapeError("training sample does not match model matrix_size");

    AdamState local_state;
    AdamState& state = resume_state ? *resume_state : local_state;

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        const bool fresh = start_epoch == 0;
        log.open(cfg.log_path, fresh ? std::ios::trunc : std::ios::app);
        if (!log) throw IoError("cannot open training log: " + cfg.log_path);
        if (fresh) log << "epoch,rec,kl,diag,nonneg,sym,total\n";
    }

    TrainHistory history;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::uint64_t epoch = start_epoch; epoch < start_epoch + cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::mt19937_64 rng(detail::epoch_seed(cfg.seed, epoch));
        std::shuffle(order.begin(), order.end(), rng);

        LossBreakdown epoch_sum;
        for (std::size_t batch_start = 0; batch_start < data.size(); batch_start += cfg.batch_size) {
            const std::size_t batch_end = std::min(batch_start + cfg.batch_size, data.size());
            const float scale = 1.0f / static_cast<float>(batch_end - batch_start);
            model.zero_grad();
            for (std::size_t bi = batch_start; bi < batch_end; ++bi) {
                const auto& input = data[order[bi]];
                const std::vector<float> eps = standard_normal_vector<float>(model.config.latent_dim, rng);
                SampleForward<float> s =
                    forward_sample(model, input, eps, cfg.weights, cfg.indexation_invariant);
                epoch_sum.rec += s.breakdown.rec;
                epoch_sum.kl += s.breakdown.kl;
                epoch_sum.diag += s.breakdown.diag;
                epoch_sum.nonneg += s.breakdown.nonneg;
                epoch_sum.sym += s.breakdown.sym;
                epoch_sum.total += s.breakdown.total;
                backward_sample(model, input, eps, cfg.weights, cfg.indexation_invariant, s, scale);
            }
            adam_step(model, state, cfg.learning_rate);
        }

        const double inv = 1.0 / static_cast<double>(data.size());
        LossBreakdown row;
        row.rec = epoch_sum.rec * inv;
        row.kl = epoch_sum.kl * inv;
        row.diag = epoch_sum.diag * inv;
        row.nonneg = epoch_sum.nonneg * inv;
        row.sym = epoch_sum.sym * inv;
        row.total = epoch_sum.total * inv;
        history.epochs.push_back(row);
        history.seconds_per_epoch.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

        if (log)
            log << (epoch + 1) << ',' << row.rec << ',' << row.kl << ',' << row.diag << ',' << row.nonneg << ','
                << row.sym << ',' << row.total << '\n';
        if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0)
            save_checkpoint(model, cfg.checkpoint_path, &state, epoch + 1);
    }
    if (!cfg.checkpoint_path.empty())
        save_checkpoint(model, cfg.checkpoint_path, &state, start_epoch + cfg.epochs);
    return history;
}

/// Compares analytic gradients of the batch-mean total loss against central
/// finite differences on a random subsample of parameter coordinates.
/// Coordinates where both gradients are below 1e-10 in magnitude are skipped.
inline double grad_check(VaeModel<double>& model, const std::vector<std::vector<double>>& batch,
                         const LossWeights& weights, double step = 1e-4, std::size_t coords = 200,
                         std::uint64_t seed = 0, bool indexation_invariant = true) {
    if (batch.empty()) throw NoData("gradient check needs at least one sample");
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> eps;
    eps.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
        eps.push_back(standard_normal_vector<double>(model.config.latent_dim, rng));

    const double scale = 1.0 / static_cast<double>(batch.size());
    auto batch_loss = [&]() {
        double acc = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i)
            acc += forward_sample(model, batch[i], eps[i], weights, indexation_invariant).breakdown.total;
        return acc * scale;
    };

    model.zero_grad();
    for (std::size_t i = 0; i < batch.size(); ++i) {
        SampleForward<double> s = forward_sample(model, batch[i], eps[i], weights, indexation_invariant);
        backward_sample(model, batch[i], eps[i], weights, indexation_invariant, s, scale);
    }

    std::vector<std::vector<double>*> params;
    model.for_each_tensor([&](const std::string&, const std::vector<std::size_t>&, std::vector<double>& t) {
        params.push_back(&t);
    });
    std::vector<std::vector<double>*> grads;
    model.for_each_grad([&](std::vector<double>& g) { grads.push_back(&g); });

    std::size_t total_coords = 0;
    for (auto* p : params) total_coords += p->size();
    std::uniform_int_distribution<std::size_t> pick(0, total_coords - 1);

    double max_rel = 0.0;
    for (std::size_t k = 0; k < coords; ++k) {
        std::size_t flat = pick(rng);
        std::size_t ti = 0;
        while (flat >= params[ti]->size()) {
            flat -= params[ti]->size();
            ++ti;
        }
        double& coord = (*params[ti])[flat];
        const double analytic = (*grads[ti])[flat];
        const double saved = coord;
        coord = saved + step;
        const double lp = batch_loss();
        coord = saved - step;
        const double lm = batch_loss();
        coord = saved;
        const double fd = (lp - lm) / (2.0 * step);
        if (std::abs(analytic) < 1e-10 && std::abs(fd) < 1e-10) continue;
        const double rel = std::abs(analytic - fd) / std::max(std::abs(analytic), std::abs(fd));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

} // namespace sedm
