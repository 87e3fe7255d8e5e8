#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdnkit/config.hpp"
#include "mdnkit/dataset.hpp"
#include "mdnkit/dynamics.hpp"
#include "mdnkit/metrics.hpp"
#include "mdnkit/model.hpp"
#include "mdnkit/optim.hpp"

namespace mdnkit {

// Seed tags for the independent streams an experiment needs.
std::uint64_t test_data_seed(std::uint64_t data_seed);
std::uint64_t ground_truth_seed(std::uint64_t data_seed);

Dataset make_train_dataset(const RunConfig& config);
Dataset make_test_dataset(const RunConfig& config);

struct TrainedMember {
    int index = 0;
    std::uint64_t seed = 0;
    Model model;
    LossHistory history;
};

struct TrainOutcome {
    std::vector<TrainedMember> members;  // successful members, in index order
    std::vector<EnsembleRun::Failure> failures;
};

// Trains the configured ensemble. Feedforward Lorenz models train on pooled
// increment pairs derived from the trajectory dataset; rnn_mdn trains with
// truncated BPTT windows.
TrainOutcome train_run(const RunConfig& config, const Dataset& train_data, int workers = 1);

// Per-member test NLL for the NLL-metric experiments.
std::vector<double> member_test_nlls(const TrainOutcome& outcome, const Dataset& test_data);

// ---- Lorenz rollout / MMD protocol -------------------------------------------
// Point clouds are pooled post-burn-in states of `rollout.count` trajectories
// of `rollout.steps` transitions each, subsampled to `rollout.mmd_cloud`
// points with a fixed seed; ground truth uses fresh generator trajectories
// built the same way.

struct CloudResult {
    Tensor points;  // [m x 3]
    int diverged_rollouts = 0;
};

CloudResult rollout_cloud(const Model& model, const RunConfig& config, std::uint64_t seed);
Tensor ground_truth_cloud(const RunConfig& config);

RolloutMode rollout_mode_for(ModelKind kind);

// ---- interpretability grids ----------------------------------------------------

// Mixture weight fields over a square grid covering the gravity input disk.
struct WeightFieldGrid {
    std::vector<double> xs, ys;   // axes, each n points
    std::vector<int> inside;      // 1 where the cell center lies in the disk
    std::vector<double> alphas;   // [n*n x K] mixture weights
    std::vector<double> entropy;  // [n*n]
    std::vector<int> argmax;      // [n*n]
    int k = 0;

    int n() const { return static_cast<int>(xs.size()); }
};

WeightFieldGrid weight_field_grid(const Model& model, double radius, int n_per_axis);

// Components ranked by mean weight inside the disk.
std::vector<int> top_components(const WeightFieldGrid& grid, int count);

// max - min of alpha_k over in-disk cells.
double component_spread(const WeightFieldGrid& grid, int component);

struct PartitionSummary {
    int distinct_labels = 0;     // argmax components appearing in the disk
    int connected_regions = 0;   // 4-adjacency regions of the argmax labeling
};

PartitionSummary argmax_partition(const WeightFieldGrid& grid);

}  // namespace mdnkit
