#include "mdnkit/experiment.hpp"

#include <algorithm>
#include <cmath>

#include "mdnkit/mixture.hpp"

namespace mdnkit {

std::uint64_t test_data_seed(std::uint64_t data_seed) {
    return RandomStream::derive(data_seed, 0x74657374ULL);  // "test"
}

std::uint64_t ground_truth_seed(std::uint64_t data_seed) {
    return RandomStream::derive(data_seed, 0x6d6d64ULL);  // "mmd"
}

Dataset make_train_dataset(const RunConfig& config) {
    return regenerate_dataset(config.experiment, config.n, config.data_seed);
}

Dataset make_test_dataset(const RunConfig& config) {
    return regenerate_dataset(config.experiment, config.n_test, test_data_seed(config.data_seed));
}

TrainOutcome train_run(const RunConfig& config, const Dataset& train_data, int workers) {
    config.validate();
    const ModelSpec spec = model_spec_for(config);
    const bool lorenz_ff =
        config.experiment == "lorenz" && config.model != ModelKind::RnnMdn;
    const Dataset pairs = lorenz_ff ? lorenz_increment_pairs(train_data) : Dataset{};

    std::vector<TrainedMember> slots(static_cast<size_t>(config.ensemble));
    std::vector<char> ok(static_cast<size_t>(config.ensemble), 0);
    EnsembleRun run = run_ensemble(
        config.ensemble, config.train_seed, workers, [&](int index, std::uint64_t seed) {
            TrainedMember member;
            member.index = index;
            member.seed = seed;
            member.model = Model::build(spec, seed);
            const TrainConfig tc = train_config_for(config, seed);
            if (config.model == ModelKind::RnnMdn) {
                member.history = train_rnn_mdn(member.model, train_data, config.window, tc);
            } else if (lorenz_ff) {
                member.history = train_model(member.model, pairs, tc);
            } else {
                member.history = train_model(member.model, train_data, tc);
            }
            slots[static_cast<size_t>(index)] = std::move(member);
            ok[static_cast<size_t>(index)] = 1;
        });

    TrainOutcome outcome;
    outcome.failures = run.failures;
    for (int i = 0; i < config.ensemble; ++i) {
        if (ok[static_cast<size_t>(i)]) outcome.members.push_back(std::move(slots[static_cast<size_t>(i)]));
    }
    return outcome;
}

std::vector<double> member_test_nlls(const TrainOutcome& outcome, const Dataset& test_data) {
    std::vector<double> out;
    out.reserve(outcome.members.size());
    for (const auto& member : outcome.members) out.push_back(test_nll(member.model, test_data));
    return out;
}

RolloutMode rollout_mode_for(ModelKind kind) {
    switch (kind) {
        case ModelKind::MdnMlp: return RolloutMode::MdnSample;
        case ModelKind::MseMlp: return RolloutMode::MsePoint;
        case ModelKind::RnnMdn: return RolloutMode::RnnMdnSample;
    }
    throw ConfigError("unknown model kind");
}

namespace {

// Lorenz initial condition, same distribution the generator uses.
std::vector<double> lorenz_x0(RandomStream& rng) {
    return {rng.normal(0.0, 1.0), rng.normal(0.0, 1.0), 24.5 + rng.normal(0.0, 1.0)};
}

Tensor pool_rows(const std::vector<Tensor>& blocks, int d) {
    std::int64_t total = 0;
    for (const auto& b : blocks) total += b.dim(0);
    Tensor out(Shape{static_cast<int>(total), d});
    double* po = out.data();
    for (const auto& b : blocks) {
        std::copy(b.data(), b.data() + b.size(), po);
        po += b.size();
    }
    return out;
}

}  // namespace

CloudResult rollout_cloud(const Model& model, const RunConfig& config, std::uint64_t seed) {
    const RolloutMode mode = rollout_mode_for(model.spec.kind);
    CloudResult result;
    std::vector<Tensor> kept;
    for (int i = 0; i < config.rollout_count; ++i) {
        RandomStream rng(RandomStream::derive(seed, 0x726f6c6cULL + static_cast<std::uint64_t>(i)));
        const std::vector<double> x0 = lorenz_x0(rng);
        RolloutResult rollout_result =
            rollout(model, x0, config.rollout_steps, rng, mode, config.prune_threshold);
        if (rollout_result.diverged) ++result.diverged_rollouts;
        const int rows = static_cast<int>(rollout_result.steps_taken) + 1;
        if (rows > config.mmd_burn_in) {
            std::vector<std::int64_t> keep;
            for (int r = config.mmd_burn_in; r < rows; ++r) keep.push_back(r);
            kept.push_back(gather_rows(rollout_result.states, keep));
        }
    }
    if (kept.empty()) throw NumericError("rollout_cloud: every rollout diverged before burn-in");
    result.points = subsample_rows(pool_rows(kept, 3), config.mmd_cloud,
                                   RandomStream::derive(seed, 0x636c6f7564ULL));
    return result;
}

Tensor ground_truth_cloud(const RunConfig& config) {
    const std::uint64_t seed = ground_truth_seed(config.data_seed);
    Dataset fresh = gen_lorenz(config.rollout_count, seed);
    const std::int64_t row_len = fresh.y.dim(1);
    const std::int64_t T = row_len / 3;
    std::vector<Tensor> kept;
    for (std::int64_t i = 0; i < fresh.n(); ++i) {
        const std::int64_t rows = T - config.mmd_burn_in;
        Tensor block(Shape{static_cast<int>(rows), 3});
        for (std::int64_t r = 0; r < rows; ++r) {
            for (int j = 0; j < 3; ++j) {
                block.at(static_cast<int>(r), j) =
                    fresh.y(static_cast<int>(i), static_cast<int>((config.mmd_burn_in + r) * 3 + j));
            }
        }
        kept.push_back(std::move(block));
    }
    return subsample_rows(pool_rows(kept, 3), config.mmd_cloud,
                          RandomStream::derive(seed, 0x636c6f7564ULL));
}

WeightFieldGrid weight_field_grid(const Model& model, double radius, int n_per_axis) {
    if (model.spec.kind != ModelKind::MdnMlp || model.spec.input_dim != 2) {
        throw ConfigError("weight_field_grid needs a 2-D-input mdn model");
    }
    WeightFieldGrid grid;
    grid.k = model.spec.k;
    grid.xs = linspace(-radius, radius, n_per_axis);
    grid.ys = linspace(-radius, radius, n_per_axis);
    const int n2 = n_per_axis * n_per_axis;
    Tensor inputs(Shape{n2, 2});
    grid.inside.resize(static_cast<size_t>(n2));
    for (int yi = 0; yi < n_per_axis; ++yi) {
        for (int xi = 0; xi < n_per_axis; ++xi) {
            const int cell = yi * n_per_axis + xi;
            const double x = grid.xs[static_cast<size_t>(xi)];
            const double y = grid.ys[static_cast<size_t>(yi)];
            inputs.at(cell, 0) = x;
            inputs.at(cell, 1) = y;
            grid.inside[static_cast<size_t>(cell)] = x * x + y * y <= radius * radius ? 1 : 0;
        }
    }
    MixtureParams params = model.forward_mixture(inputs);
    grid.alphas = mixture_weights(params);
    grid.entropy.resize(static_cast<size_t>(n2));
    grid.argmax.resize(static_cast<size_t>(n2));
    for (int cell = 0; cell < n2; ++cell) {
        const auto* a = grid.alphas.data() + static_cast<size_t>(cell) * grid.k;
        grid.entropy[static_cast<size_t>(cell)] =
            mixture_entropy(std::vector<double>(a, a + grid.k));
        grid.argmax[static_cast<size_t>(cell)] =
            static_cast<int>(std::max_element(a, a + grid.k) - a);
    }
    return grid;
}

std::vector<int> top_components(const WeightFieldGrid& grid, int count) {
    std::vector<double> marginal(static_cast<size_t>(grid.k), 0.0);
    int cells = 0;
    const int n2 = grid.n() * grid.n();
    for (int cell = 0; cell < n2; ++cell) {
        if (!grid.inside[static_cast<size_t>(cell)]) continue;
        ++cells;
        for (int c = 0; c < grid.k; ++c) {
            marginal[static_cast<size_t>(c)] += grid.alphas[static_cast<size_t>(cell) * grid.k + c];
        }
    }
    std::vector<int> order(static_cast<size_t>(grid.k));
    for (int c = 0; c < grid.k; ++c) order[static_cast<size_t>(c)] = c;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return marginal[static_cast<size_t>(a)] > marginal[static_cast<size_t>(b)];
    });
    order.resize(static_cast<size_t>(std::min(count, grid.k)));
    (void)cells;
    return order;
}

double component_spread(const WeightFieldGrid& grid, int component) {
    double lo = 1.0, hi = 0.0;
    const int n2 = grid.n() * grid.n();
    for (int cell = 0; cell < n2; ++cell) {
        if (!grid.inside[static_cast<size_t>(cell)]) continue;
        const double a = grid.alphas[static_cast<size_t>(cell) * grid.k + component];
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    return hi - lo;
}

PartitionSummary argmax_partition(const WeightFieldGrid& grid) {
    const int n = grid.n();
    const int n2 = n * n;
    PartitionSummary summary;
    std::vector<char> label_seen(static_cast<size_t>(grid.k), 0);
    std::vector<int> visited(static_cast<size_t>(n2), 0);
    for (int cell = 0; cell < n2; ++cell) {
        if (grid.inside[static_cast<size_t>(cell)] && !label_seen[static_cast<size_t>(grid.argmax[static_cast<size_t>(cell)])]) {
            label_seen[static_cast<size_t>(grid.argmax[static_cast<size_t>(cell)])] = 1;
            ++summary.distinct_labels;
        }
    }
    // Flood fill over same-label 4-neighbors.
    for (int start = 0; start < n2; ++start) {
        if (!grid.inside[static_cast<size_t>(start)] || visited[static_cast<size_t>(start)]) continue;
        ++summary.connected_regions;
        const int label = grid.argmax[static_cast<size_t>(start)];
        std::vector<int> stack{start};
        visited[static_cast<size_t>(start)] = 1;
        while (!stack.empty()) {
            const int cell = stack.back();
            stack.pop_back();
            const int xi = cell % n, yi = cell / n;
            const int neighbors[4] = {cell - 1, cell + 1, cell - n, cell + n};
            const bool valid[4] = {xi > 0, xi + 1 < n, yi > 0, yi + 1 < n};
            for (int d = 0; d < 4; ++d) {
                if (!valid[d]) continue;
                const int next = neighbors[d];
                if (grid.inside[static_cast<size_t>(next)] && !visited[static_cast<size_t>(next)] &&
                    grid.argmax[static_cast<size_t>(next)] == label) {
                    visited[static_cast<size_t>(next)] = 1;
                    stack.push_back(next);
                }
            }
        }
    }
    return summary;
}

}  // namespace mdnkit
