// rfdiff - RF heatmap generation toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "rfdiff/augment.hpp"
#include "rfdiff/losses.hpp"
#include "rfdiff/metrics.hpp"
#include "rfdiff/optimizer.hpp"

namespace rfdiff {

struct StepLosses {
    double total = 0.0;
    double diffusion = 0.0;
    double pixel = 0.0;
    double premeasure = 0.0;
};

namespace detail {

// Forward and (optionally) backward of one sample on the given model.
inline StepLosses train_item(DiffusionModel &model, const LoadedSample &s, int t, int aug_k,
                             Rng &noise_rng, const LossWeights &weights, bool with_grad) {
    ConditionInputs cond = s.cond;
    Tensor gt_px = s.gt_pixels;
    PreMeasureTarget pre = s.pre_target;
    if (aug_k != 0) {
        cond.overview = d4_transform_nchw(cond.overview, aug_k);
        cond.premeasured = d4_transform_nchw(cond.premeasured, aug_k);
        cond.volume = d4_transform_ncdhw(cond.volume, aug_k);
        cond.descriptor = d4_transform_descriptor(cond.descriptor, aug_k);
        gt_px = d4_transform_nchw(gt_px, aug_k);
        pre.values = d4_transform_nchw(pre.values, aug_k);
        pre.mask = d4_transform_nchw(pre.mask, aug_k);
    }

    const Tensor z0 = model.codec.encode(gt_px);
    const Tensor eps = randn(z0.shape(), noise_rng);
    const Tensor z_t = q_sample(z0, t, eps, model.schedule);
    // Step target from the analytic posterior; constant w.r.t. theta.
    const Tensor target = posterior_stats(z_t.detach(), z0.detach(), t, model.schedule).first;

    const Tensor features = model.condition_features(cond);
    const Tensor z0_hat = model.predict_z0(z_t, t, features);
    const Tensor mu = denoise_step_mean(z_t, z0_hat, t, model.schedule);
    const Tensor pred_px = model.codec.decode(z0_hat);

    const Tensor l_d = loss_d(target, mu);
    const Tensor l_t = loss_t(gt_px, pred_px);
    const Tensor l_pre = loss_pre(pre, pred_px);
    const Tensor total = total_loss(l_d, l_t, l_pre, weights);

    if (with_grad)
        backward(total);

    StepLosses out;
    out.total = total.item();
    out.diffusion = l_d.item();
    out.pixel = l_t.item();
    out.premeasure = l_pre.item();
    return out;
}

} // namespace detail

// Training driver. Every random draw is keyed on (seed, step, item) so a
// resumed run replays the exact step sequence, and batch items can be
// processed on worker models in parallel. Gradients are summed in fixed item
// order; single-threaded runs are bit-reproducible per seed.
class Trainer {
public:
    Trainer(DiffusionModel &model, std::vector<LoadedSample> train_set, const TrainConfig &cfg,
            const LossWeights &weights)
        : model_(model), samples_(std::move(train_set)), cfg_(cfg), weights_(weights),
          adam_(model.params) {
        cfg_.validate();
        weights_.validate();
        if (samples_.empty())
            throw DataError("Trainer: empty training set");
    }

    int64_t steps_per_epoch() const {
        return (int64_t(samples_.size()) + cfg_.batch - 1) / cfg_.batch;
    }
    int64_t total_steps() const { return steps_per_epoch() * cfg_.epochs; }

    Adam &optimizer() { return adam_; }
    const std::vector<StepLosses> &curve() const { return curve_; }

    StepLosses item_losses(const LoadedSample &s, int t, int aug_k, Rng &noise_rng,
                           bool with_grad) {
        return detail::train_item(model_, s, t, aug_k, noise_rng, weights_, with_grad);
    }

    // One optimizer step; returns the batch-averaged losses.
    StepLosses run_step(int64_t step) {
        const int64_t spe = steps_per_epoch();
        const int64_t epoch = step / spe;
        const int64_t step_in_epoch = step % spe;

        // Epoch-shuffled batch assembly, deterministic per (seed, epoch).
        std::vector<int> perm(samples_.size());
        for (size_t i = 0; i < perm.size(); ++i)
            perm[i] = int(i);
        Rng shuffle_rng(split_seed(cfg_.seed, "epoch-shuffle", uint64_t(epoch)));
        for (int i = int(perm.size()) - 1; i > 0; --i)
            std::swap(perm[size_t(i)], perm[size_t(shuffle_rng.uniform_index(uint64_t(i + 1)))]);

        const int64_t lo = step_in_epoch * cfg_.batch;
        const int64_t hi = std::min<int64_t>(lo + cfg_.batch, int64_t(perm.size()));
        const int batch_n = int(hi - lo);

        model_.params.zero_grads();
        StepLosses losses = run_batch(step, perm, lo, batch_n);

        losses.total /= batch_n;
        losses.diffusion /= batch_n;
        losses.pixel /= batch_n;
        losses.premeasure /= batch_n;

        if (!std::isfinite(losses.total))
            throw NumericError("train: non-finite loss at step " + std::to_string(step) +
                               " (L_D=" + std::to_string(losses.diffusion) +
                               ", L_T=" + std::to_string(losses.pixel) +
                               ", L_Pre=" + std::to_string(losses.premeasure) + ")");

        adam_.step(lr_at(step, total_steps(), spe, cfg_), 1.0 / batch_n);
        curve_.push_back(losses);
        return losses;
    }

    void run(const std::function<void(int64_t, int64_t, const StepLosses &)> &progress = nullptr) {
        const int64_t total = total_steps();
        for (int64_t step = 0; step < total; ++step) {
            const StepLosses l = run_step(step);
            if (progress)
                progress(step + 1, total, l);
        }
    }

private:
    struct ItemDraw {
        int t;
        int aug;
        uint64_t noise_seed;
    };

    ItemDraw draw_for(int64_t step, int item) const {
        Rng rng(split_seed(cfg_.seed, "train-item", uint64_t(step) * 64 + uint64_t(item)));
        ItemDraw d;
        d.t = rng.uniform_int(1, model_.schedule.steps);
        d.aug = cfg_.augment ? int(rng.uniform_index(8)) : 0;
        d.noise_seed = rng.next_u64();
        return d;
    }

    StepLosses run_batch(int64_t step, const std::vector<int> &perm, int64_t lo, int batch_n) {
        const int nt = std::min(thread_count(), batch_n);
        StepLosses sum;
        if (nt <= 1) {
            for (int b = 0; b < batch_n; ++b) {
                const ItemDraw d = draw_for(step, b);
                Rng noise(d.noise_seed);
                const StepLosses l = detail::train_item(
                    model_, samples_[size_t(perm[size_t(lo + b)])], d.t, d.aug, noise, weights_,
                    true);
                sum.total += l.total;
                sum.diffusion += l.diffusion;
                sum.pixel += l.pixel;
                sum.premeasure += l.premeasure;
            }
            return sum;
        }

        // Parallel path: each worker owns a model clone; gradients are
        // summed in fixed worker order afterwards.
        if (int(workers_.size()) < nt) {
            while (int(workers_.size()) < nt)
                workers_.push_back(std::make_unique<DiffusionModel>(model_.cfg, 0));
        }
        std::vector<StepLosses> worker_losses(size_t(nt), StepLosses{});
        const int chunk = (batch_n + nt - 1) / nt;
        std::vector<std::thread> pool;
        for (int w = 0; w < nt; ++w) {
            const int b0 = w * chunk;
            const int b1 = std::min(batch_n, b0 + chunk);
            if (b0 >= b1)
                break;
            DiffusionModel &clone = *workers_[size_t(w)];
            // refresh the clone's parameters from the master
            for (size_t i = 0; i < model_.params.items().size(); ++i) {
                clone.params.items()[i].second.value() = model_.params.items()[i].second.value();
                clone.params.items()[i].second.zero_grad();
            }
            pool.emplace_back([this, &clone, &worker_losses, &perm, step, lo, b0, b1, w] {
                in_parallel_worker() = true;
                for (int b = b0; b < b1; ++b) {
                    const ItemDraw d = draw_for(step, b);
                    Rng noise(d.noise_seed);
                    const StepLosses l = detail::train_item(
                        clone, samples_[size_t(perm[size_t(lo + b)])], d.t, d.aug, noise,
                        weights_, true);
                    worker_losses[size_t(w)].total += l.total;
                    worker_losses[size_t(w)].diffusion += l.diffusion;
                    worker_losses[size_t(w)].pixel += l.pixel;
                    worker_losses[size_t(w)].premeasure += l.premeasure;
                }
                in_parallel_worker() = false;
            });
        }
        for (auto &th : pool)
            th.join();
        for (int w = 0; w < nt; ++w) {
            sum.total += worker_losses[size_t(w)].total;
            sum.diffusion += worker_losses[size_t(w)].diffusion;
            sum.pixel += worker_losses[size_t(w)].pixel;
            sum.premeasure += worker_losses[size_t(w)].premeasure;
            DiffusionModel &clone = *workers_[size_t(w)];
            for (size_t i = 0; i < model_.params.items().size(); ++i) {
                auto &dst = model_.params.items()[i].second.grad();
                const auto &src = clone.params.items()[i].second.grad();
                for (size_t j = 0; j < dst.size(); ++j)
                    dst[j] += src[j];
            }
        }
        return sum;
    }

    DiffusionModel &model_;
    std::vector<LoadedSample> samples_;
    TrainConfig cfg_;
    LossWeights weights_;
    Adam adam_;
    std::vector<StepLosses> curve_;
    std::vector<std::unique_ptr<DiffusionModel>> workers_;
};

} // namespace rfdiff
