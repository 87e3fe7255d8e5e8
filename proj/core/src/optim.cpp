#include "mdnkit/optim.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

namespace mdnkit {

double lr_at(const LrSchedule& schedule, std::int64_t step) {
    if (step < 0) throw ConfigError("lr_at: negative step");
    if (schedule.warmup_steps > 0 && step < schedule.warmup_steps) {
        return schedule.peak_lr * static_cast<double>(step) / schedule.warmup_steps;
    }
    double progress = static_cast<double>(step - schedule.warmup_steps) / schedule.decay_every;
    if (schedule.staircase) progress = std::floor(progress);
    double lr = schedule.peak_lr * std::pow(schedule.decay_rate, progress);
    // The floor belongs to the decay phase; warmup still ramps from zero.
    if (schedule.floor_lr) lr = std::max(lr, *schedule.floor_lr);
    return lr;
}

AdamW::AdamW(const ParamStore& params, AdamWConfig config) : config_(config) {
    for (const auto& [name, t] : params) {
        m_.emplace_back(t.size(), 0.0);
        v_.emplace_back(t.size(), 0.0);
    }
}

bool AdamW::step(ParamStore& params, double lr, double weight_decay) {
    if (params.size() != m_.size()) throw ShapeError("AdamW state does not match parameter store");
    for (size_t i = 0; i < params.size(); ++i) {
        const Tensor& t = params[i].second;
        if (!t.has_grad()) continue;
        for (double g : t.grad()) {
            if (!std::isfinite(g)) {
                if (config_.on_non_finite == NonFinitePolicy::Abort) {
                    throw NumericError("AdamW: non-finite gradient in " + params[i].first);
                }
                return false;
            }
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& t = params[i].second;
        if (!t.has_grad()) continue;
        const std::vector<double>& g = t.grad();
        std::vector<double>& m = m_[i];
        std::vector<double>& v = v_[i];
        double* w = t.data();
        for (size_t j = 0; j < g.size(); ++j) {
            m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
            v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            w[j] -= lr * (m_hat / (std::sqrt(v_hat) + config_.eps) + weight_decay * w[j]);
        }
    }
    return true;
}

namespace {

double l2_norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double l2_norm(const Tensor& t) {
    double acc = 0.0;
    for (double x : t.values()) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace

void agc_clip(ParamStore& params, double rate, double weight_floor) {
    if (rate <= 0.0) throw ConfigError("agc_clip: rate must be positive");
    for (auto& [name, t] : params) {
        if (!t.has_grad()) continue;
        const double bound = rate * std::max(l2_norm(t), weight_floor);
        const double gnorm = l2_norm(t.grad());
        if (gnorm > bound && gnorm > 0.0) {
            const double scale = bound / gnorm;
            for (double& g : t.grad()) g *= scale;
        }
    }
}

LossHistory train(ParamStore& params,
                  const std::function<Tensor(const std::vector<std::int64_t>&)>& loss_fn,
                  std::int64_t dataset_size, const TrainConfig& config) {
    if (dataset_size <= 0) throw ConfigError("train: empty dataset");
    if (config.batch_size <= 0) throw ConfigError("train: batch_size must be positive");
    LossHistory history;
    history.records.reserve(static_cast<size_t>(config.iterations));
    AdamW optimizer(params, AdamWConfig{0.9, 0.999, 1e-8, config.on_non_finite});
    RandomStream batch_stream(RandomStream::derive(config.seed, 0x6261746368ULL));  // "batch"
    std::vector<std::int64_t> rows(static_cast<size_t>(config.batch_size));

    for (std::int64_t step = 0; step < config.iterations; ++step) {
        for (auto& r : rows) {
            r = static_cast<std::int64_t>(batch_stream.uniform_int(static_cast<std::uint64_t>(dataset_size)));
        }
        const double lr = lr_at(config.schedule, step);
        double loss_value;
        {
            Tape tape;
            Tensor loss = loss_fn(rows);
            loss_value = loss.item();
            if (!std::isfinite(loss_value)) {
                std::ostringstream msg;
                msg << "training diverged: loss=" << loss_value << " at step " << step
                    << " (lr=" << lr << ")";
                for (auto& [name, t] : params) {
                    if (t.has_grad()) msg << "; |g:" << name << "|=" << l2_norm(t.grad());
                }
                throw NumericError(msg.str());
            }
            params.zero_grads();
            tape.backward(loss);
        }
        if (config.agc_rate) agc_clip(params, *config.agc_rate);
        if (!optimizer.step(params, lr, config.weight_decay)) ++history.skipped_steps;
        history.records.push_back({step, loss_value, lr});
    }
    return history;
}

LossHistory train_model(Model& model, const Dataset& data, const TrainConfig& config) {
    const Tensor& x = data.x;
    const Tensor& y = data.y;
    auto loss_fn = [&](const std::vector<std::int64_t>& rows) {
        Tensor xb = gather_rows(x, rows);
        Tensor yb = gather_rows(y, rows);
        return model.spec.kind == ModelKind::MseMlp ? mse_loss(model, xb, yb)
                                                    : mdn_loss(model, xb, yb);
    };
    return train(model.params, loss_fn, data.n(), config);
}

LossHistory train_rnn_mdn(Model& model, const Dataset& trajectories, int window,
                          const TrainConfig& config) {
    if (model.spec.kind != ModelKind::RnnMdn) throw ConfigError("train_rnn_mdn needs an rnn_mdn model");
    const int sd = model.spec.input_dim;
    const std::int64_t row_len = trajectories.y.dim(1);
    if (row_len % sd != 0) throw ShapeError("trajectory row length not divisible by state dim");
    const std::int64_t T = row_len / sd;
    if (window < 1) throw ConfigError("train_rnn_mdn: window must be >= 1");
    if (T < window + 1) {
        throw ConfigError("train_rnn_mdn: trajectories of " + std::to_string(T) +
                          " states are shorter than window " + std::to_string(window) + "+1");
    }
    const std::int64_t n_traj = trajectories.n();
    const int b = config.batch_size;
    RandomStream window_stream(RandomStream::derive(config.seed, 0x77696e646f77ULL));  // "window"

    auto loss_fn = [&](const std::vector<std::int64_t>& traj_rows) {
        std::vector<std::int64_t> starts(traj_rows.size());
        for (auto& s : starts) {
            s = static_cast<std::int64_t>(window_stream.uniform_int(static_cast<std::uint64_t>(T - window)));
        }
        const double* traj = trajectories.y.data();
        // Per-step input states and increment targets for the whole window.
        Tensor hidden = model.initial_hidden(b);
        Tensor total;
        for (int t = 0; t < window; ++t) {
            Tensor xt(Shape{b, sd});
            Tensor dt(Shape{b, sd});
            for (int i = 0; i < b; ++i) {
                const double* base = traj + traj_rows[static_cast<size_t>(i)] * row_len +
                                     (starts[static_cast<size_t>(i)] + t) * sd;
                for (int j = 0; j < sd; ++j) {
                    xt.at(i, j) = base[j];
                    dt.at(i, j) = base[sd + j] - base[j];
                }
            }
            MixtureParams params_t = model.forward_rnn_step(xt, hidden);
            Tensor step_nll = mean(per_sample_nll(params_t, dt));
            total = total.defined() ? add(total, step_nll) : step_nll;
        }
        return mul_scalar(total, 1.0 / window);
    };

    // `train` samples trajectory indices; window starts come from the stream above.
    return train(model.params, loss_fn, n_traj, config);
}

std::uint64_t member_seed(std::uint64_t base_seed, int member_index) {
    return RandomStream::derive(base_seed, 0x6d656d62657200ULL + static_cast<std::uint64_t>(member_index));
}

EnsembleRun run_ensemble(int n_members, std::uint64_t base_seed, int workers,
                         const std::function<void(int, std::uint64_t)>& fn) {
    if (n_members < 1) throw ConfigError("run_ensemble: n_members must be >= 1");
    workers = std::max(1, std::min(workers, n_members));
    EnsembleRun run;
    std::mutex mu;
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n_members) return;
            try {
                fn(i, member_seed(base_seed, i));
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                run.failures.push_back({i, e.what()});
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return run;
}

}  // namespace mdnkit
