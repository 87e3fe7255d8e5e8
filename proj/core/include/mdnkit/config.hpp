#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdnkit/model.hpp"
#include "mdnkit/optim.hpp"

namespace mdnkit {

// Full experiment description: the reproducibility unit. Serializes to the
// canonical key/value text (see docs/formats.md); parsing rejects unknown
// keys so typos cannot silently change a recipe.
struct RunConfig {
    // [run]
    std::string experiment = "inverse_sine";  // inverse_sine, gravity_case1..3,
                                              // saddle_node, lorenz
    ModelKind model = ModelKind::MdnMlp;
    std::string out_dir = "runs/out";

    // [data]
    std::int64_t n = 1000;
    std::uint64_t data_seed = 7;
    std::int64_t n_test = 1000;

    // [model]
    int k = 8;
    std::vector<int> hidden = {128, 128, 128, 128, 128};
    double scale_floor = 1e-6;
    ScaleTransform scale_transform = ScaleTransform::Softplus;

    // [train]
    std::int64_t iterations = 30000;
    int batch_size = 128;
    std::uint64_t train_seed = 3;
    double weight_decay = 0.0;
    std::optional<double> agc_rate;
    LrSchedule schedule;
    int ensemble = 1;
    int window = 100;  // rnn_mdn BPTT window (transitions)

    // [rollout]
    std::int64_t rollout_steps = 500;
    int rollout_count = 24;
    double prune_threshold = 0.0;
    int mmd_burn_in = 50;
    std::int64_t mmd_cloud = 10000;

    void validate() const;
};

// Paper recipes per experiment/model pair.
RunConfig preset(const std::string& experiment, ModelKind model);

// Desk-scale variant: iterations / 5, ensemble 4. Documented looser bands.
void apply_desk_scale(RunConfig& config);

// Strict parser: unknown sections/keys and malformed values throw ConfigError
// with the offending line. `parse_config_text(config_to_text(c))` == c.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
std::string config_to_text(const RunConfig& config);

// Environment overrides, applied after file parsing: MDNKIT_<SECTION>_<KEY>,
// e.g. MDNKIT_TRAIN_ITERATIONS=100. Returns the keys that were applied.
std::vector<std::string> apply_env_overrides(RunConfig& config);

// TrainConfig for one ensemble member (per-member seed).
TrainConfig train_config_for(const RunConfig& config, std::uint64_t seed);

ModelSpec model_spec_for(const RunConfig& config);

}  // namespace mdnkit
