// mdnkit: config-driven harness for the mixture-density benchmark suite.
// Subcommands: generate, train, evaluate, rollout, ablate-k, interpret, report.
// Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 I/O failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mdnkit/config.hpp"
#include "mdnkit/experiment.hpp"
#include "mdnkit/metrics.hpp"
#include "mdnkit/mixture.hpp"
#include "mdnkit/serialize.hpp"
#include "mdnkit/version.hpp"

namespace fs = std::filesystem;
using namespace mdnkit;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string scale = "paper";
    std::optional<std::uint64_t> seed;
    int workers = std::max(1u, std::thread::hardware_concurrency());
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run config file")->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides run.out)");
    cmd->add_option("--scale", args.scale, "paper or desk recipe scale")
        ->check(CLI::IsMember({"paper", "desk"}));
    cmd->add_option("--seed", args.seed, "override train.seed");
    cmd->add_option("--workers", args.workers, "ensemble worker threads");
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig config = load_config_file(args.config_path);
    const auto applied = apply_env_overrides(config);
    for (const auto& key : applied) std::fprintf(stderr, "env override: %s\n", key.c_str());
    if (args.seed) config.train_seed = *args.seed;
    if (!args.out_dir.empty()) config.out_dir = args.out_dir;
    if (args.scale == "desk") apply_desk_scale(config);
    config.validate();
    return config;
}

void write_manifest(const RunConfig& config, const std::string& command) {
    fs::create_directories(config.out_dir);
    std::ofstream out(fs::path(config.out_dir) / "manifest.cfg");
    if (!out) throw IoError("cannot write manifest under " + config.out_dir);
    out << "# mdnkit manifest (replayable run config)\n";
    out << "# command: " << command << '\n';
    out << "# mdnkit version: " << kVersionString << '\n';
    out << "# formats: checkpoint v" << kCheckpointFormatVersion << ", dataset v"
        << kDatasetFormatVersion << '\n';
    out << config_to_text(config);
}

std::string dataset_path(const RunConfig& config, const char* which) {
    return (fs::path(config.out_dir) / (std::string(which) + ".ds")).string();
}

std::string member_path(const RunConfig& config, int index) {
    char name[64];
    std::snprintf(name, sizeof(name), "member_%03d.ckpt", index);
    return (fs::path(config.out_dir) / name).string();
}

Dataset load_or_generate(const RunConfig& config, const char* which) {
    const std::string path = dataset_path(config, which);
    const bool is_train = std::string(which) == "train";
    if (fs::exists(path)) {
        Dataset ds = load_dataset(path);
        const std::uint64_t want_seed =
            is_train ? config.data_seed : test_data_seed(config.data_seed);
        const std::int64_t want_n = is_train ? config.n : config.n_test;
        if (ds.generator == config.experiment && ds.seed == want_seed && ds.n() == want_n) {
            return ds;
        }
        std::fprintf(stderr, "%s does not match the config; regenerating\n", path.c_str());
    }
    Dataset ds = is_train ? make_train_dataset(config) : make_test_dataset(config);
    save_dataset(path, ds);
    return ds;
}

void write_loss_csv(const RunConfig& config, int index, const LossHistory& history) {
    char name[64];
    std::snprintf(name, sizeof(name), "member_%03d_loss.csv", index);
    std::ofstream out(fs::path(config.out_dir) / name);
    out << "step,loss,lr\n";
    for (const auto& r : history.records) {
        char line[96];
        std::snprintf(line, sizeof(line), "%lld,%.17g,%.17g\n", static_cast<long long>(r.step),
                      r.loss, r.lr);
        out << line;
    }
}

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "method,n,seed_count,metric,mean,std\n";
    for (const auto& r : rows) {
        char line[192];
        std::snprintf(line, sizeof(line), "%s,%lld,%d,%s,%.10g,%.10g\n", r.method.c_str(),
                      static_cast<long long>(r.n), r.seed_count, r.metric.c_str(), r.mean,
                      r.std_dev);
        out << line;
    }
}

std::vector<LoadedCheckpoint> load_members(const RunConfig& config) {
    std::vector<LoadedCheckpoint> members;
    for (int i = 0; i < config.ensemble; ++i) {
        const std::string path = member_path(config, i);
        if (fs::exists(path)) members.push_back(load_checkpoint(path));
    }
    if (members.empty()) {
        throw IoError("no member checkpoints under " + config.out_dir + "; run train first");
    }
    return members;
}

// ---- subcommands ------------------------------------------------------------

int cmd_generate(const CommonArgs& args) {
    RunConfig config = resolve_config(args);
    write_manifest(config, "generate");
    for (const char* which : {"train", "test"}) {
        const bool is_train = std::string(which) == "train";
        Dataset ds = is_train ? make_train_dataset(config) : make_test_dataset(config);
        save_dataset(dataset_path(config, which), ds);
        std::printf("%s: generator=%s n=%lld d_in=%d d_out=%d checksum=%016llx\n", which,
                    ds.generator.c_str(), static_cast<long long>(ds.n()), ds.d_in(), ds.d_out(),
                    static_cast<unsigned long long>(dataset_payload_checksum(ds)));
    }
    return 0;
}

int cmd_train(const CommonArgs& args) {
    RunConfig config = resolve_config(args);
    write_manifest(config, "train");
    Dataset train_data = load_or_generate(config, "train");
    const auto start = std::chrono::steady_clock::now();
    TrainOutcome outcome = train_run(config, train_data, args.workers);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& member : outcome.members) {
        save_checkpoint(member_path(config, member.index), member.model, member.seed,
                        config.iterations);
        write_loss_csv(config, member.index, member.history);
    }
    std::ofstream summary(fs::path(config.out_dir) / "run_summary.txt");
    summary << "members_requested " << config.ensemble << '\n';
    summary << "members_trained " << outcome.members.size() << '\n';
    summary << "wall_seconds " << secs << '\n';
    for (const auto& failure : outcome.failures) {
        summary << "member_failed " << failure.member << ' ' << failure.error << '\n';
        std::fprintf(stderr, "member %d failed: %s\n", failure.member, failure.error.c_str());
    }
    std::printf("trained %zu/%d members in %.1f s\n", outcome.members.size(), config.ensemble,
                secs);
    if (!outcome.failures.empty() && outcome.members.empty()) {
        throw NumericError("every ensemble member failed");
    }
    return 0;
}

int cmd_evaluate(const CommonArgs& args, bool export_surface) {
    RunConfig config = resolve_config(args);
    if (config.experiment == "lorenz") {
        throw ConfigError("lorenz is scored by rollout MMD; use `mdnkit rollout`");
    }
    write_manifest(config, "evaluate");
    Dataset test_data = load_or_generate(config, "test");
    std::vector<LoadedCheckpoint> members = load_members(config);
    if (static_cast<int>(members.size()) < config.ensemble) {
        std::fprintf(stderr, "warning: only %zu of %d members present; partial report\n",
                     members.size(), config.ensemble);
    }
    std::vector<double> nlls;
    std::ofstream per_member(fs::path(config.out_dir) / "members.csv");
    per_member << "member,metric,value\n";
    for (size_t i = 0; i < members.size(); ++i) {
        const double nll = test_nll(members[i].model, test_data);
        nlls.push_back(nll);
        per_member << i << ",nll," << nll << '\n';
    }
    ReportRow row = summarize(model_kind_name(config.model), config.n, "nll", nlls);
    write_report_csv((fs::path(config.out_dir) / "report.csv").string(), {row});
    std::printf("%s %s n=%lld: nll %.4f +/- %.4f over %d member(s)\n", config.experiment.c_str(),
                row.method.c_str(), static_cast<long long>(config.n), row.mean, row.std_dev,
                row.seed_count);

    if (export_surface && config.experiment == "inverse_sine") {
        const std::vector<double> xs = linspace(-1.5, 1.5, 151);
        const std::vector<double> ys = linspace(-1.2, 1.2, 121);
        NllSurface truth = truth_nll_surface(xs, ys);
        std::vector<double> mean_density(xs.size() * ys.size(), 0.0);
        for (const auto& member : members) {
            NllSurface surface = model_nll_surface(member.model, xs, ys);
            for (size_t i = 0; i < surface.values.size(); ++i) {
                mean_density[i] += std::exp(-surface.values[i]) / members.size();
            }
        }
        std::ofstream out(fs::path(config.out_dir) / "nll_surface.csv");
        out << "y,x,nll_truth,nll_model\n";
        for (size_t yi = 0; yi < ys.size(); ++yi) {
            for (size_t xi = 0; xi < xs.size(); ++xi) {
                char line[128];
                std::snprintf(line, sizeof(line), "%.6f,%.6f,%.8g,%.8g\n", ys[yi], xs[xi],
                              truth.at(static_cast<int>(yi), static_cast<int>(xi)),
                              -std::log(mean_density[yi * xs.size() + xi]));
                out << line;
            }
        }
        // The -log p(x | y=0.5) slice reported alongside the surfaces.
        std::ofstream slice(fs::path(config.out_dir) / "nll_slice_y0.5.csv");
        slice << "x,nll_truth,nll_model\n";
        TrueInverseDensity truth_slice(0.5);
        for (size_t xi = 0; xi < xs.size(); ++xi) {
            double density = 0.0;
            for (const auto& member : members) {
                Tensor input(Shape{1, 1}, {0.5});
                Tensor target(Shape{1, 1}, {xs[xi]});
                Tensor nll = per_sample_nll(member.model.forward_mixture(input), target);
                density += std::exp(-nll(0)) / members.size();
            }
            char line[128];
            std::snprintf(line, sizeof(line), "%.6f,%.8g,%.8g\n", xs[xi],
                          -std::log(truth_slice(xs[xi])), -std::log(density));
            slice << line;
        }
    }
    return 0;
}

int cmd_rollout(const CommonArgs& args) {
    RunConfig config = resolve_config(args);
    if (config.experiment != "lorenz") throw ConfigError("rollout needs the lorenz experiment");
    write_manifest(config, "rollout");
    std::vector<LoadedCheckpoint> members = load_members(config);
    const Model& model = members.front().model;

    const auto t0 = std::chrono::steady_clock::now();
    CloudResult cloud = rollout_cloud(model, config, RandomStream::derive(config.train_seed, 1));
    Tensor truth_cloud = ground_truth_cloud(config);
    MmdCurve curve = mmd_sweep(cloud.points, truth_cloud);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ofstream curve_csv(fs::path(config.out_dir) / "mmd_curve.csv");
    curve_csv << "scale,mmd_sq\n";
    for (size_t i = 0; i < curve.scales.size(); ++i) {
        char line[96];
        std::snprintf(line, sizeof(line), "%.10g,%.10g\n", curve.scales[i], curve.values[i]);
        curve_csv << line;
    }
    std::ofstream report(fs::path(config.out_dir) / "mmd_report.csv");
    report << "method,max_mmd_sq,max_scale,diverged_rollouts\n";
    report << model_kind_name(config.model) << ',' << curve.max_value << ',' << curve.max_scale
           << ',' << cloud.diverged_rollouts << '\n';

    // One exported trajectory for plotting.
    RandomStream rng(RandomStream::derive(config.train_seed, 2));
    RolloutResult example = rollout(model, {0.0, 1.0, 24.0}, config.rollout_steps, rng,
                                    rollout_mode_for(config.model), config.prune_threshold);
    std::ofstream traj(fs::path(config.out_dir) / "rollout_example.csv");
    traj << "step,x,y,z\n";
    for (int i = 0; i < example.states.dim(0); ++i) {
        char line[128];
        std::snprintf(line, sizeof(line), "%d,%.8g,%.8g,%.8g\n", i, example.states(i, 0),
                      example.states(i, 1), example.states(i, 2));
        traj << line;
    }
    std::printf("%s rollout MMD: max mmd_sq %.6g at scale %.3g (%d diverged) in %.1f s\n",
                model_kind_name(config.model).c_str(), curve.max_value, curve.max_scale,
                cloud.diverged_rollouts, secs);
    return 0;
}

int cmd_ablate_k(const CommonArgs& args, const std::vector<int>& k_list) {
    RunConfig base = resolve_config(args);
    write_manifest(base, "ablate-k");
    Dataset train_data = load_or_generate(base, "train");
    Dataset test_data = load_or_generate(base, "test");
    std::vector<ReportRow> rows;
    for (int k : k_list) {
        RunConfig config = base;
        config.k = k;
        config.validate();
        TrainOutcome outcome = train_run(config, train_data, args.workers);
        ReportRow row = summarize("mdn_k" + std::to_string(k), config.n, "nll",
                                  member_test_nlls(outcome, test_data));
        rows.push_back(row);
        std::printf("K=%d: nll %.4f +/- %.4f over %d member(s)\n", k, row.mean, row.std_dev,
                    row.seed_count);

        // Component diagnostics from the first member over the test inputs.
        const Model& model = outcome.members.front().model;
        MixtureParams params = model.forward_mixture(test_data.x);
        ComponentReport report =
            component_report(mixture_weights(params), params.batch(), params.components());
        char name[64];
        std::snprintf(name, sizeof(name), "components_k%02d.csv", k);
        std::ofstream comp(fs::path(base.out_dir) / name);
        comp << "rank,component,marginal,alpha_min,alpha_max\n";
        for (size_t r = 0; r < report.rows.size(); ++r) {
            comp << r << ',' << report.rows[r].component << ',' << report.rows[r].marginal << ','
                 << report.rows[r].alpha_min << ',' << report.rows[r].alpha_max << '\n';
        }
    }
    write_report_csv((fs::path(base.out_dir) / "ablate_k.csv").string(), rows);
    return 0;
}

int cmd_interpret(const CommonArgs& args, int grid_n) {
    RunConfig config = resolve_config(args);
    if (config.experiment.rfind("gravity_case", 0) != 0) {
        throw ConfigError("interpret is defined for the gravity experiments");
    }
    write_manifest(config, "interpret");
    std::vector<LoadedCheckpoint> members = load_members(config);
    WeightFieldGrid grid = weight_field_grid(members.front().model, 0.2, grid_n);
    const std::vector<int> top = top_components(grid, 3);

    std::ofstream out(fs::path(config.out_dir) / "weight_field.csv");
    out << "x,y,inside";
    for (int c : top) out << ",alpha_" << c;
    out << ",entropy,argmax\n";
    for (int yi = 0; yi < grid.n(); ++yi) {
        for (int xi = 0; xi < grid.n(); ++xi) {
            const int cell = yi * grid.n() + xi;
            out << grid.xs[static_cast<size_t>(xi)] << ',' << grid.ys[static_cast<size_t>(yi)]
                << ',' << grid.inside[static_cast<size_t>(cell)];
            for (int c : top) out << ',' << grid.alphas[static_cast<size_t>(cell) * grid.k + c];
            out << ',' << grid.entropy[static_cast<size_t>(cell)] << ','
                << grid.argmax[static_cast<size_t>(cell)] << '\n';
        }
    }

    PartitionSummary partition = argmax_partition(grid);
    std::ofstream stats(fs::path(config.out_dir) / "interpret_stats.csv");
    stats << "stat,value\n";
    for (int c : top) {
        stats << "spread_component_" << c << ',' << component_spread(grid, c) << '\n';
        std::printf("component %d: weight spread over the disk %.4f\n", c,
                    component_spread(grid, c));
    }
    stats << "distinct_labels," << partition.distinct_labels << '\n';
    stats << "connected_regions," << partition.connected_regions << '\n';
    std::printf("argmax partition: %d labels in %d connected regions\n", partition.distinct_labels,
                partition.connected_regions);
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "combined_report.csv");
    out << "method,n,seed_count,metric,mean,std\n";
    int rows = 0;
    for (const auto& dir : run_dirs) {
        for (const char* name : {"report.csv", "ablate_k.csv"}) {
            const fs::path path = fs::path(dir) / name;
            if (!fs::exists(path)) continue;
            std::ifstream in(path);
            std::string line;
            std::getline(in, line);  // header
            while (std::getline(in, line)) {
                if (!line.empty()) {
                    out << line << '\n';
                    ++rows;
                }
            }
        }
    }
    if (rows == 0) throw IoError("no report rows found under the given run directories");
    std::printf("combined %d rows into %s/combined_report.csv\n", rows, out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixture density network benchmark harness"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, eval_args, roll_args, ablate_args, interp_args;
    bool export_surface = false;
    std::vector<int> k_list = {1, 2, 4, 8, 16};
    int grid_n = 41;
    std::vector<std::string> report_dirs;
    std::string report_out = "runs/report";

    add_common(app.add_subcommand("generate", "write train/test dataset files"), gen_args);
    add_common(app.add_subcommand("train", "train the configured ensemble"), train_args);
    auto* eval_cmd = app.add_subcommand("evaluate", "test-NLL report for trained members");
    add_common(eval_cmd, eval_args);
    eval_cmd->add_flag("--surface", export_surface, "export NLL surface and y=0.5 slice");
    add_common(app.add_subcommand("rollout", "autoregressive rollouts plus MMD sweep"), roll_args);
    auto* ablate_cmd = app.add_subcommand("ablate-k", "NLL versus mixture count");
    add_common(ablate_cmd, ablate_args);
    ablate_cmd->add_option("--k", k_list, "mixture counts to sweep");
    auto* interp_cmd = app.add_subcommand("interpret", "weight-field and entropy grids");
    add_common(interp_cmd, interp_args);
    interp_cmd->add_option("--grid", grid_n, "grid resolution per axis");
    auto* report_cmd = app.add_subcommand("report", "combine run reports into one CSV");
    report_cmd->add_option("dirs", report_dirs, "run directories to combine");
    report_cmd->add_option("--out", report_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("generate")) return cmd_generate(gen_args);
        if (app.got_subcommand("train")) return cmd_train(train_args);
        if (app.got_subcommand("evaluate")) return cmd_evaluate(eval_args, export_surface);
        if (app.got_subcommand("rollout")) return cmd_rollout(roll_args);
        if (app.got_subcommand("ablate-k")) return cmd_ablate_k(ablate_args, k_list);
        if (app.got_subcommand("interpret")) return cmd_interpret(interp_args, grid_n);
        if (app.got_subcommand("report")) return cmd_report(report_dirs, report_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
