#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mdnkit/dataset.hpp"
#include "mdnkit/model.hpp"
#include "mdnkit/nn.hpp"

namespace mdnkit {

// Linear warmup from 0 to peak_lr over warmup_steps, then exponential decay
// by decay_rate every decay_every steps (continuous by default, stepped with
// `staircase`), clamped from below at floor_lr when set.
struct LrSchedule {
    int warmup_steps = 0;
    double peak_lr = 1e-3;
    double decay_rate = 0.9;
    int decay_every = 1000;
    std::optional<double> floor_lr;
    bool staircase = false;
};

double lr_at(const LrSchedule& schedule, std::int64_t step);

enum class NonFinitePolicy { Abort, SkipStep };

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    NonFinitePolicy on_non_finite = NonFinitePolicy::Abort;
};

// Bias-corrected Adam with decoupled weight decay:
//   w <- w - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * w)
class AdamW {
public:
    explicit AdamW(const ParamStore& params, AdamWConfig config = {});

    // Returns false when the step was skipped because of non-finite gradients
    // (SkipStep policy); Abort throws NumericError instead.
    bool step(ParamStore& params, double lr, double weight_decay);

    std::int64_t steps_taken() const { return t_; }

private:
    AdamWConfig config_;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// Adaptive gradient clipping, whole-tensor granularity: a gradient whose L2
// norm exceeds rate * max(||w||, weight_floor) is rescaled onto that bound.
void agc_clip(ParamStore& params, double rate, double weight_floor = 1e-3);

struct TrainConfig {
    std::int64_t iterations = 0;
    int batch_size = 128;
    std::uint64_t seed = 0;
    LrSchedule schedule;
    double weight_decay = 0.0;
    std::optional<double> agc_rate;
    NonFinitePolicy on_non_finite = NonFinitePolicy::Abort;
};

struct StepRecord {
    std::int64_t step;
    double loss;
    double lr;
};

struct LossHistory {
    std::vector<StepRecord> records;
    std::int64_t skipped_steps = 0;
};

// Generic minibatch loop: every iteration samples batch_size rows with
// replacement from a seeded stream, asks loss_fn for the recorded scalar
// loss on those rows, and applies AGC + AdamW. Non-finite loss aborts with a
// step/lr/grad-norm diagnostic.
LossHistory train(ParamStore& params,
                  const std::function<Tensor(const std::vector<std::int64_t>&)>& loss_fn,
                  std::int64_t dataset_size, const TrainConfig& config);

// Convenience wrappers pairing a model with a dataset.
LossHistory train_model(Model& model, const Dataset& data, const TrainConfig& config);

// Truncated BPTT over sub-trajectory windows. A trajectory row in `data` holds
// T states of `state_dim` values; every iteration samples batch_size windows
// of `window` transitions (window+1 states) uniformly over trajectories and
// start offsets, and minimizes the mean per-step NLL of the state increments.
LossHistory train_rnn_mdn(Model& model, const Dataset& trajectories, int window,
                          const TrainConfig& config);

// Runs fn(member_index, member_seed) for each member on a pool of `workers`
// threads. Member seeds derive from base_seed; failures are collected, not
// propagated mid-run.
struct EnsembleRun {
    struct Failure {
        int member;
        std::string error;
    };
    std::vector<Failure> failures;
};

EnsembleRun run_ensemble(int n_members, std::uint64_t base_seed, int workers,
                         const std::function<void(int, std::uint64_t)>& fn);

std::uint64_t member_seed(std::uint64_t base_seed, int member_index);

}  // namespace mdnkit
