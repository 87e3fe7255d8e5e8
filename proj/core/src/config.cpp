#include "mdnkit/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace mdnkit {

namespace {

std::string fmt_double(double v) {
    // Shortest representation that parses back to the same double.
    char buf[32];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : "none"; }

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

std::int64_t parse_i64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const std::int64_t x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const std::uint64_t x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::optional<double> parse_opt(const std::string& key, const std::string& v) {
    if (v == "none") return std::nullopt;
    return parse_double(key, v);
}

std::string fmt_ints(const std::vector<int>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

std::vector<int> parse_ints(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::istringstream is(v);
    std::string item;
    while (std::getline(is, item, ',')) {
        out.push_back(static_cast<int>(parse_i64(key, item)));
    }
    if (out.empty()) throw ConfigError(key + ": expected a comma-separated int list");
    return out;
}

struct Key {
    const char* name;  // "section.key"
    std::function<std::string(const RunConfig&)> emit;
    std::function<void(RunConfig&, const std::string&)> set;
};

std::string st_name(ScaleTransform t) {
    return t == ScaleTransform::Softplus ? "softplus" : "elu1";
}

const std::vector<Key>& schema() {
    static const std::vector<Key> keys = {
        {"run.experiment", [](const RunConfig& c) { return c.experiment; },
         [](RunConfig& c, const std::string& v) { c.experiment = v; }},
        {"run.model", [](const RunConfig& c) { return model_kind_name(c.model); },
         [](RunConfig& c, const std::string& v) { c.model = model_kind_from_name(v); }},
        {"run.out", [](const RunConfig& c) { return c.out_dir; },
         [](RunConfig& c, const std::string& v) { c.out_dir = v; }},

        {"data.n", [](const RunConfig& c) { return std::to_string(c.n); },
         [](RunConfig& c, const std::string& v) { c.n = parse_i64("data.n", v); }},
        {"data.seed", [](const RunConfig& c) { return std::to_string(c.data_seed); },
         [](RunConfig& c, const std::string& v) { c.data_seed = parse_u64("data.seed", v); }},
        {"data.n_test", [](const RunConfig& c) { return std::to_string(c.n_test); },
         [](RunConfig& c, const std::string& v) { c.n_test = parse_i64("data.n_test", v); }},

        {"model.k", [](const RunConfig& c) { return std::to_string(c.k); },
         [](RunConfig& c, const std::string& v) { c.k = static_cast<int>(parse_i64("model.k", v)); }},
        {"model.hidden", [](const RunConfig& c) { return fmt_ints(c.hidden); },
         [](RunConfig& c, const std::string& v) { c.hidden = parse_ints("model.hidden", v); }},
        {"model.scale_floor", [](const RunConfig& c) { return fmt_double(c.scale_floor); },
         [](RunConfig& c, const std::string& v) {
             c.scale_floor = parse_double("model.scale_floor", v);
         }},
        {"model.scale_transform", [](const RunConfig& c) { return st_name(c.scale_transform); },
         [](RunConfig& c, const std::string& v) {
             if (v == "softplus") {
                 c.scale_transform = ScaleTransform::Softplus;
             } else if (v == "elu1") {
                 c.scale_transform = ScaleTransform::Elu1;
             } else {
                 throw ConfigError("model.scale_transform: expected softplus or elu1, got '" + v +
                                   "'");
             }
         }},

        {"train.iterations", [](const RunConfig& c) { return std::to_string(c.iterations); },
         [](RunConfig& c, const std::string& v) { c.iterations = parse_i64("train.iterations", v); }},
        {"train.batch_size", [](const RunConfig& c) { return std::to_string(c.batch_size); },
         [](RunConfig& c, const std::string& v) {
             c.batch_size = static_cast<int>(parse_i64("train.batch_size", v));
         }},
        {"train.seed", [](const RunConfig& c) { return std::to_string(c.train_seed); },
         [](RunConfig& c, const std::string& v) { c.train_seed = parse_u64("train.seed", v); }},
        {"train.weight_decay", [](const RunConfig& c) { return fmt_double(c.weight_decay); },
         [](RunConfig& c, const std::string& v) {
             c.weight_decay = parse_double("train.weight_decay", v);
         }},
        {"train.agc_rate", [](const RunConfig& c) { return fmt_opt(c.agc_rate); },
         [](RunConfig& c, const std::string& v) { c.agc_rate = parse_opt("train.agc_rate", v); }},
        {"train.warmup_steps",
         [](const RunConfig& c) { return std::to_string(c.schedule.warmup_steps); },
         [](RunConfig& c, const std::string& v) {
             c.schedule.warmup_steps = static_cast<int>(parse_i64("train.warmup_steps", v));
         }},
        {"train.peak_lr", [](const RunConfig& c) { return fmt_double(c.schedule.peak_lr); },
         [](RunConfig& c, const std::string& v) {
             c.schedule.peak_lr = parse_double("train.peak_lr", v);
         }},
        {"train.decay_rate", [](const RunConfig& c) { return fmt_double(c.schedule.decay_rate); },
         [](RunConfig& c, const std::string& v) {
             c.schedule.decay_rate = parse_double("train.decay_rate", v);
         }},
        {"train.decay_every",
         [](const RunConfig& c) { return std::to_string(c.schedule.decay_every); },
         [](RunConfig& c, const std::string& v) {
             c.schedule.decay_every = static_cast<int>(parse_i64("train.decay_every", v));
         }},
        {"train.floor_lr", [](const RunConfig& c) { return fmt_opt(c.schedule.floor_lr); },
         [](RunConfig& c, const std::string& v) {
             c.schedule.floor_lr = parse_opt("train.floor_lr", v);
         }},
        {"train.staircase",
         [](const RunConfig& c) { return c.schedule.staircase ? "true" : "false"; },
         [](RunConfig& c, const std::string& v) {
             c.schedule.staircase = parse_bool("train.staircase", v);
         }},
        {"train.ensemble", [](const RunConfig& c) { return std::to_string(c.ensemble); },
         [](RunConfig& c, const std::string& v) {
             c.ensemble = static_cast<int>(parse_i64("train.ensemble", v));
         }},
        {"train.window", [](const RunConfig& c) { return std::to_string(c.window); },
         [](RunConfig& c, const std::string& v) {
             c.window = static_cast<int>(parse_i64("train.window", v));
         }},

        {"rollout.steps", [](const RunConfig& c) { return std::to_string(c.rollout_steps); },
         [](RunConfig& c, const std::string& v) { c.rollout_steps = parse_i64("rollout.steps", v); }},
        {"rollout.count", [](const RunConfig& c) { return std::to_string(c.rollout_count); },
         [](RunConfig& c, const std::string& v) {
             c.rollout_count = static_cast<int>(parse_i64("rollout.count", v));
         }},
        {"rollout.prune_threshold",
         [](const RunConfig& c) { return fmt_double(c.prune_threshold); },
         [](RunConfig& c, const std::string& v) {
             c.prune_threshold = parse_double("rollout.prune_threshold", v);
         }},
        {"rollout.mmd_burn_in", [](const RunConfig& c) { return std::to_string(c.mmd_burn_in); },
         [](RunConfig& c, const std::string& v) {
             c.mmd_burn_in = static_cast<int>(parse_i64("rollout.mmd_burn_in", v));
         }},
        {"rollout.mmd_cloud", [](const RunConfig& c) { return std::to_string(c.mmd_cloud); },
         [](RunConfig& c, const std::string& v) {
             c.mmd_cloud = parse_i64("rollout.mmd_cloud", v);
         }},
    };
    return keys;
}

const Key* find_key(const std::string& name) {
    for (const auto& k : schema()) {
        if (name == k.name) return &k;
    }
    return nullptr;
}

bool is_known_experiment(const std::string& e) {
    return e == "inverse_sine" || e == "gravity_case1" || e == "gravity_case2" ||
           e == "gravity_case3" || e == "saddle_node" || e == "lorenz";
}

}  // namespace

void RunConfig::validate() const {
    if (!is_known_experiment(experiment)) throw ConfigError("unknown experiment: " + experiment);
    if (model == ModelKind::RnnMdn && experiment != "lorenz") {
        throw ConfigError("rnn_mdn is only defined for the lorenz experiment");
    }
    if (n < 1) throw ConfigError("data.n must be >= 1");
    if (n_test < 1) throw ConfigError("data.n_test must be >= 1");
    if (k < 1) throw ConfigError("model.k must be >= 1");
    if (hidden.empty()) throw ConfigError("model.hidden must not be empty");
    for (int h : hidden) {
        if (h < 1) throw ConfigError("model.hidden entries must be >= 1");
    }
    if (scale_floor <= 0.0) throw ConfigError("model.scale_floor must be positive");
    if (iterations < 0) throw ConfigError("train.iterations must be >= 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (schedule.peak_lr <= 0.0) throw ConfigError("train.peak_lr must be positive");
    if (schedule.decay_every < 1) throw ConfigError("train.decay_every must be >= 1");
    if (schedule.warmup_steps < 0) throw ConfigError("train.warmup_steps must be >= 0");
    if (agc_rate && *agc_rate <= 0.0) throw ConfigError("train.agc_rate must be positive");
    if (ensemble < 1) throw ConfigError("train.ensemble must be >= 1");
    if (window < 1) throw ConfigError("train.window must be >= 1");
    if (rollout_steps < 0) throw ConfigError("rollout.steps must be >= 0");
    if (rollout_count < 1) throw ConfigError("rollout.count must be >= 1");
    if (prune_threshold < 0.0 || prune_threshold >= 1.0) {
        throw ConfigError("rollout.prune_threshold must be in [0, 1)");
    }
    if (mmd_burn_in < 0) throw ConfigError("rollout.mmd_burn_in must be >= 0");
    if (mmd_cloud < 2) throw ConfigError("rollout.mmd_cloud must be >= 2");
}

RunConfig preset(const std::string& experiment, ModelKind model) {
    RunConfig c;
    c.experiment = experiment;
    c.model = model;
    if (experiment == "inverse_sine") {
        c.n = 1000;
        c.n_test = 1000;
        c.k = 8;
        c.hidden = {128, 128, 128, 128, 128};
        c.iterations = 30000;
        c.batch_size = 128;
        c.weight_decay = 1e-4;
        c.schedule = {100, 5e-3, 0.9, 1000, std::nullopt, false};
        c.ensemble = 12;
    } else if (experiment.rfind("gravity_case", 0) == 0) {
        c.n = 10000;
        c.n_test = 2000;
        c.k = 10;
        c.hidden = {128, 128, 128, 128};
        c.iterations = 30000;
        c.batch_size = 64;
        c.weight_decay = 0.01;
        c.agc_rate = 0.01;
        // Decay "plateauing at 5e-4" with a 5e-4 peak: the floor equals the
        // peak, so the rate is constant after warmup.
        c.schedule = {500, 5e-4, 0.9, 1000, 5e-4, false};
        c.ensemble = 12;
    } else if (experiment == "saddle_node") {
        c.n = 10000;
        c.n_test = 2000;
        c.k = 15;
        c.hidden = {256, 256, 256, 256, 256};
        c.iterations = 50000;
        c.batch_size = 128;
        c.weight_decay = 1e-5;
        c.agc_rate = 0.1;
        c.schedule = {2000, 5e-4, 0.9, 2000, std::nullopt, false};
        c.ensemble = 12;
    } else if (experiment == "lorenz") {
        c.n = 100;  // trajectories
        c.n_test = 24;
        c.k = model == ModelKind::RnnMdn ? 8 : 9;
        c.hidden = model == ModelKind::RnnMdn ? std::vector<int>{128}
                                              : std::vector<int>{128, 128, 128, 128, 128};
        c.iterations = 30000;
        c.batch_size = model == ModelKind::RnnMdn ? 5 : 256;
        c.weight_decay = 0.1;
        c.schedule = {1000, 1e-3, 0.9, 1000, std::nullopt, false};
        c.ensemble = 1;
        c.window = 100;
        c.rollout_steps = 500;
        c.rollout_count = 24;
    } else {
        throw ConfigError("unknown experiment: " + experiment);
    }
    c.validate();
    return c;
}

void apply_desk_scale(RunConfig& config) {
    config.iterations = std::max<std::int64_t>(1, config.iterations / 5);
    config.ensemble = std::min(config.ensemble, 4);
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    std::vector<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        // Trim.
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        std::string body = line.substr(b, e - b + 1);
        if (body.empty() || body[0] == '#') continue;
        if (body.front() == '[' && body.back() == ']') {
            section = body.substr(1, body.size() - 2);
            if (section != "run" && section != "data" && section != "model" &&
                section != "train" && section != "rollout") {
                throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" +
                                  section + "]");
            }
            continue;
        }
        const size_t eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        std::string key = body.substr(0, eq);
        std::string value = body.substr(eq + 1);
        const auto kb = key.find_last_not_of(" \t");
        key = key.substr(0, kb == std::string::npos ? 0 : kb + 1);
        const auto vb = value.find_first_not_of(" \t");
        value = vb == std::string::npos ? "" : value.substr(vb);
        if (section.empty()) {
            throw ConfigError("line " + std::to_string(line_no) + ": key outside any section");
        }
        const std::string full = section + "." + key;
        const Key* k = find_key(full);
        if (!k) throw ConfigError("line " + std::to_string(line_no) + ": unknown key " + full);
        for (const auto& s : seen) {
            if (s == full) {
                throw ConfigError("line " + std::to_string(line_no) + ": duplicate key " + full);
            }
        }
        seen.push_back(full);
        k->set(config, value);
    }
    config.validate();
    return config;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

std::string config_to_text(const RunConfig& config) {
    std::ostringstream out;
    std::string section;
    for (const auto& k : schema()) {
        const std::string name(k.name);
        const std::string sec = name.substr(0, name.find('.'));
        if (sec != section) {
            if (!section.empty()) out << '\n';
            out << '[' << sec << "]\n";
            section = sec;
        }
        out << name.substr(name.find('.') + 1) << " = " << k.emit(config) << '\n';
    }
    return out.str();
}

std::vector<std::string> apply_env_overrides(RunConfig& config) {
    std::vector<std::string> applied;
    for (const auto& k : schema()) {
        std::string env = "MDNKIT_";
        for (char c : std::string(k.name)) {
            env += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        }
        if (const char* v = std::getenv(env.c_str())) {
            k.set(config, v);
            applied.push_back(env);
        }
    }
    if (!applied.empty()) config.validate();
    return applied;
}

TrainConfig train_config_for(const RunConfig& config, std::uint64_t seed) {
    TrainConfig t;
    t.iterations = config.iterations;
    t.batch_size = config.batch_size;
    t.seed = seed;
    t.schedule = config.schedule;
    t.weight_decay = config.weight_decay;
    t.agc_rate = config.agc_rate;
    return t;
}

ModelSpec model_spec_for(const RunConfig& config) {
    ModelSpec spec;
    spec.kind = config.model;
    spec.k = config.k;
    spec.hidden = config.hidden;
    spec.scale_floor = config.scale_floor;
    spec.scale_transform = config.scale_transform;
    if (config.experiment == "inverse_sine") {
        spec.input_dim = 1;
        spec.target_dim = 1;
    } else if (config.experiment.rfind("gravity_case", 0) == 0) {
        spec.input_dim = 2;
        spec.target_dim = 22;
    } else if (config.experiment == "saddle_node") {
        spec.input_dim = 1;
        spec.target_dim = 20;
    } else if (config.experiment == "lorenz") {
        spec.input_dim = 3;
        spec.target_dim = 3;  // autoregressive increments
    } else {
        throw ConfigError("unknown experiment: " + config.experiment);
    }
    return spec;
}

}  // namespace mdnkit
