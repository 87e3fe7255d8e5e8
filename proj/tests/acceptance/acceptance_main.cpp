// Acceptance suite: one pass/fail line per criterion. Criteria 4 and 6-9
// train at the paper recipes and take minutes to hours on one core; select
// individual criteria with --only.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mdnkit/config.hpp"
#include "mdnkit/experiment.hpp"
#include "mdnkit/metrics.hpp"
#include "mdnkit/mixture.hpp"
#include "mdnkit/serialize.hpp"

using namespace mdnkit;

namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

struct Check {
    bool ok = true;
    std::ostringstream log;

    void expect(bool condition, const std::string& what) {
        log << (condition ? "    ok: " : "    FAILED: ") << what << '\n';
        ok = ok && condition;
    }

    void note(const std::string& what) { log << "    " << what << '\n'; }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---- criterion 1: gradient correctness --------------------------------------

void fd_check_all_params(Check& check, ParamStore& params, const std::function<double()>& eval,
                         const std::function<double()>& ad_loss, const char* label) {
    {
        Tape tape;
        // ad_loss() rebuilds the graph under this tape and returns the loss
        // value; gradients land on the parameters.
        params.zero_grads();
        (void)ad_loss();
    }
    double worst = 0.0;
    const double h = 1e-5;
    for (auto& [name, param] : params) {
        for (std::int64_t i = 0; i < param.size(); ++i) {
            const double saved = param.data()[i];
            param.data()[i] = saved + h;
            const double up = eval();
            param.data()[i] = saved - h;
            const double down = eval();
            param.data()[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            worst = std::max(worst, rel_err(param.grad()[static_cast<size_t>(i)], fd));
        }
    }
    check.expect(worst < 1e-4, std::string(label) + ": max rel err " + fmt(worst) + " < 1e-4");
}

bool criterion_1(Check& check) {
    const auto start = std::chrono::steady_clock::now();
    {
        // MLP-MDN, 3 hidden layers of width 16, K=3, d=2.
        ModelSpec spec;
        spec.kind = ModelKind::MdnMlp;
        spec.input_dim = 2;
        spec.target_dim = 2;
        spec.hidden = {16, 16, 16};
        spec.k = 3;
        Model model = Model::build(spec, 11);
        RandomStream rng(3);
        Tensor x(Shape{4, 2});
        Tensor y(Shape{4, 2});
        for (auto& v : x.values()) v = rng.normal();
        for (auto& v : y.values()) v = rng.normal();
        auto eval = [&] { return mdn_loss(model, x, y).item(); };
        auto ad = [&] {
            Tensor loss = mdn_loss(model, x, y);
            backward(loss);
            return loss.item();
        };
        fd_check_all_params(check, model.params, eval, ad, "mlp-mdn 3x16 K=3 d=2");
    }
    {
        // Scalar GRU-MDN unrolled over 6 steps.
        ModelSpec spec;
        spec.kind = ModelKind::RnnMdn;
        spec.input_dim = 1;
        spec.target_dim = 1;
        spec.hidden = {1};
        spec.k = 3;
        Model model = Model::build(spec, 13);
        RandomStream rng(5);
        std::vector<double> xs(6), ys(6);
        for (size_t t = 0; t < 6; ++t) {
            xs[t] = rng.normal();
            ys[t] = rng.normal() * 0.3;
        }
        auto eval_impl = [&]() -> Tensor {
            Tensor h = model.initial_hidden(1);
            Tensor total;
            for (size_t t = 0; t < 6; ++t) {
                Tensor xt(Shape{1, 1}, {xs[t]});
                Tensor yt(Shape{1, 1}, {ys[t]});
                MixtureParams params = model.forward_rnn_step(xt, h);
                Tensor nll = mean(per_sample_nll(params, yt));
                total = total.defined() ? add(total, nll) : nll;
            }
            return mul_scalar(total, 1.0 / 6.0);
        };
        auto eval = [&] { return eval_impl().item(); };
        auto ad = [&] {
            Tensor loss = eval_impl();
            backward(loss);
            return loss.item();
        };
        fd_check_all_params(check, model.params, eval, ad, "scalar gru-mdn over 6 steps");
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    check.expect(secs < 10.0, "runtime " + fmt(secs) + " s < 10 s");
    return check.ok;
}

// ---- criterion 2: stable-loss property suite ---------------------------------

bool criterion_2(Check& check) {
    const auto start = std::chrono::steady_clock::now();

    // Stress envelope: finite value and gradient everywhere.
    const int k = 3, d = 2;
    bool all_finite_ok = true;
    for (double za : {-500.0, -1.0, 0.0, 1.0, 500.0}) {
        for (double zs : {-40.0, -10.0, 0.0, 10.0, 40.0}) {
            for (double mu : {-1000.0, 0.0, 1000.0}) {
                Tensor raw(Shape{1, k * (1 + 2 * d)}, 0.0, true);
                for (int c = 0; c < k; ++c) {
                    raw.at(0, c) = (c == 0) ? za : -za / 2.0;
                    for (int j = 0; j < d; ++j) {
                        raw.at(0, k + c * d + j) = (c % 2 == 0) ? mu : -mu;
                        raw.at(0, k + k * d + c * d + j) = zs;
                    }
                }
                Tensor y(Shape{1, d}, 0.0);
                Tape tape;
                Tensor loss = mdn_nll(transform_head(raw, k, d), y);
                raw.zero_grad();
                tape.backward(loss);
                all_finite_ok = all_finite_ok && std::isfinite(loss.item());
                for (double g : raw.grad()) all_finite_ok = all_finite_ok && std::isfinite(g);
            }
        }
    }
    check.expect(all_finite_ok,
                 "finite NLL and gradients across z_sigma in [-40,40], z_alpha in [-500,500], "
                 "|y-mu| up to 1e3");

    // LogSumExp overflow cases are exact.
    Tensor big(Shape{1, 2}, {1000.0, 1001.0});
    const double lse = logsumexp(big, 1)(0);
    check.expect(std::abs(lse - (1001.0 + std::log1p(std::exp(-1.0)))) < 1e-12,
                 "logsumexp(1000,1001) = 1001 + log1p(e^-1) within 1e-12");
    Tensor single(Shape{1, 1}, {-3.75});
    check.expect(logsumexp(single, 1)(0) == -3.75, "single-element logsumexp is exact");
    const double ninf = -std::numeric_limits<double>::infinity();
    Tensor all_ninf(Shape{1, 3}, {ninf, ninf, ninf});
    const double lse_ninf = logsumexp(all_ninf, 1)(0);
    check.expect(std::isinf(lse_ninf) && lse_ninf < 0.0, "all -inf inputs give -inf, not NaN");

    // K=1 analytic Gaussian NLL to 1e-12.
    MixtureParams p;
    p.logits = Tensor(Shape{1, 1}, {0.7});  // any logit: softmax of one value is 1
    p.means = Tensor(Shape{1, 1, 1}, {0.0});
    p.scales = Tensor(Shape{1, 1, 1}, {1.0});
    Tensor y0(Shape{1, 1}, {0.0});
    check.expect(std::abs(mdn_nll(p, y0).item() - 0.5 * std::log(2.0 * M_PI)) < 1e-12,
                 "K=1 standard normal at the mode gives 0.5 ln(2 pi) within 1e-12");

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    check.expect(secs < 5.0, "runtime " + fmt(secs) + " s < 5 s");
    return check.ok;
}

// ---- criterion 3: parameter-count pins ----------------------------------------

bool criterion_3(Check& check) {
    ModelSpec mse;
    mse.kind = ModelKind::MseMlp;
    mse.input_dim = 3;
    mse.target_dim = 3;
    mse.hidden = {128, 128, 128, 128, 128};
    check.expect(Model::build(mse, 0).num_params() == 66947, "lorenz MSE backbone = 66947");

    ModelSpec mdn = mse;
    mdn.kind = ModelKind::MdnMlp;
    mdn.k = 9;
    check.expect(Model::build(mdn, 0).num_params() == 74687, "lorenz MDN = 74687");

    ModelSpec rnn;
    rnn.kind = ModelKind::RnnMdn;
    rnn.input_dim = 3;
    rnn.target_dim = 3;
    rnn.hidden = {128};
    rnn.k = 8;
    check.expect(Model::build(rnn, 0).num_params() == 58040, "RNN-MDN = 58040");
    return check.ok;
}

// ---- criterion 4: inverse-sine reproduction ------------------------------------

double ensemble_mean_nll(const RunConfig& config, Check& check, const char* label) {
    Dataset train_data = make_train_dataset(config);
    Dataset test_data = make_test_dataset(config);
    TrainOutcome outcome = train_run(config, train_data);
    for (const auto& failure : outcome.failures) {
        check.note(std::string(label) + ": member " + std::to_string(failure.member) +
                   " failed: " + failure.error);
    }
    ReportRow row = summarize("mdn", config.n, "nll", member_test_nlls(outcome, test_data));
    check.note(std::string(label) + ": nll " + fmt(row.mean) + " +/- " + fmt(row.std_dev) +
               " over " + std::to_string(row.seed_count) + " members");
    return row.mean;
}

// Table 3's +/- is ensemble-seed noise on one fixed test draw; a fresh
// 1000-point draw moves any mean NLL by sigma ~ 0.027, three times the
// tightest gate. The quadrature oracle removes that nuisance exactly:
// corrected = raw - (oracle NLL on this draw - oracle population NLL).
double inverse_sine_draw_offset(const Dataset& test_data, Check& check) {
    double on_draw = 0.0;
    for (int i = 0; i < test_data.n(); ++i) {
        TrueInverseDensity density(test_data.x(i, 0));
        on_draw += -std::log(density(test_data.y(i, 0)));
    }
    on_draw /= static_cast<double>(test_data.n());

    RandomStream rng(412131);
    double population = 0.0;
    const int n = 300000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.uniform(-1.5, 1.5);
        const double y = inverse_sine_forward(x) + rng.normal(0.0, 0.2);
        TrueInverseDensity density(y, QuadratureGrid{-1.5, 1.5, 501});
        population += -std::log(density(x));
    }
    population /= n;
    check.note("oracle NLL: population " + fmt(population) + ", this test draw " + fmt(on_draw) +
               " (offset " + fmt(on_draw - population) + ")");
    return on_draw - population;
}

bool criterion_4(Check& check) {
    struct Band {
        std::int64_t n;
        double mean, std;
    };
    // Reported mean +/- std per training size; the gate is 3 reported std on
    // the draw-corrected value.
    const Band bands[] = {{50, 2.727, 1.753}, {1000, 0.059, 0.068}, {10000, -0.040, 0.003}};
    RunConfig base = preset("inverse_sine", ModelKind::MdnMlp);
    const double offset = inverse_sine_draw_offset(make_test_dataset(base), check);
    for (const Band& band : bands) {
        RunConfig config = preset("inverse_sine", ModelKind::MdnMlp);
        config.n = band.n;
        const double raw =
            ensemble_mean_nll(config, check, ("paper N=" + std::to_string(band.n)).c_str());
        const double corrected = raw - offset;
        check.note("N=" + std::to_string(band.n) + ": draw-corrected nll " + fmt(corrected));
        check.expect(std::abs(corrected - band.mean) <= 3.0 * band.std,
                     "N=" + std::to_string(band.n) + ": |" + fmt(corrected) + " - " +
                         fmt(band.mean) + "| <= " + fmt(3.0 * band.std));
    }

    // Desk preset: 4 members, 6000 iterations, within 5x the paper band, < 5 min.
    const auto start = std::chrono::steady_clock::now();
    RunConfig desk = preset("inverse_sine", ModelKind::MdnMlp);
    desk.n = 1000;
    apply_desk_scale(desk);
    const double desk_mean = ensemble_mean_nll(desk, check, "desk N=1000") - offset;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    check.expect(std::abs(desk_mean - 0.059) <= 5.0 * 3.0 * 0.068,
                 "desk: |" + fmt(desk_mean) + " - 0.059| <= " + fmt(5.0 * 3.0 * 0.068));
    check.expect(secs < 300.0, "desk runtime " + fmt(secs) + " s < 300 s");
    return check.ok;
}

// ---- criterion 5: ground-truth oracle ------------------------------------------

bool criterion_5(Check& check) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<double> y_grid = linspace(-1.2, 1.2, 41);
    double worst_norm = 0.0, worst_refine = 0.0;
    for (double y : y_grid) {
        TrueInverseDensity coarse(y, QuadratureGrid{-1.5, 1.5, 2001});
        // Normalization on the construction grid.
        const int n = 2001;
        const double h = 3.0 / (n - 1);
        double integral = 0.0;
        for (int i = 0; i < n; ++i) {
            const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
            integral += w * coarse(-1.5 + h * i);
        }
        integral *= h;
        worst_norm = std::max(worst_norm, std::abs(integral - 1.0));

        TrueInverseDensity fine(y, QuadratureGrid{-1.5, 1.5, 200001});
        worst_refine = std::max(worst_refine, rel_err(coarse(0.0), fine(0.0)));
    }
    check.expect(worst_norm < 1e-6, "normalization error " + fmt(worst_norm) + " < 1e-6");
    check.expect(worst_refine < 1e-4,
                 "2001 vs 200001 grid agreement " + fmt(worst_refine) + " < 1e-4 rel");
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    check.expect(secs < 5.0, "runtime " + fmt(secs) + " s < 5 s");
    return check.ok;
}

// ---- criterion 6: saddle-node low-data claim ------------------------------------

bool criterion_6(Check& check) {
    // Ensemble size is not pinned by the criterion; 4 members keep the
    // single-core runtime sane while the wide bands absorb seed noise.
    for (auto [n, lo, hi] : {std::tuple<std::int64_t, double, double>{50, 70.0, 110.0},
                             std::tuple<std::int64_t, double, double>{10000, -15.0, -12.0}}) {
        RunConfig config = preset("saddle_node", ModelKind::MdnMlp);
        config.n = n;
        config.ensemble = 4;
        const double mean = ensemble_mean_nll(config, check, ("N=" + std::to_string(n)).c_str());
        check.expect(mean >= lo && mean <= hi, "N=" + std::to_string(n) + ": nll " + fmt(mean) +
                                                   " in [" + fmt(lo) + ", " + fmt(hi) + "]");
    }

    // MSE mean collapse: at bimodal inputs the point prediction lands strictly
    // between the convergent and divergent target clusters.
    RunConfig mse_config = preset("saddle_node", ModelKind::MseMlp);
    mse_config.n = 10000;
    mse_config.ensemble = 1;
    Dataset train_data = make_train_dataset(mse_config);
    TrainOutcome outcome = train_run(mse_config, train_data);
    check.expect(!outcome.members.empty(), "MSE baseline trained");
    if (outcome.members.empty()) return false;
    const Model& mse_model = outcome.members.front().model;

    for (double x0 : {0.0, -0.5}) {
        // Pre-noise final values per bifurcation branch.
        double convergent_max = -1e9, divergent_min = 1e9;
        for (double r : kSaddleNodeRValues) {
            const auto traj = euler_integrate(saddle_node_system(r), {x0}, 0.001, 5000, 10.0);
            const double final_value = traj.back();
            if (final_value > 9.0) {
                divergent_min = std::min(divergent_min, final_value);
            } else {
                convergent_max = std::max(convergent_max, final_value);
            }
        }
        Tensor input(Shape{1, 1}, {x0});
        Tensor pred = mse_model.forward_point(input);
        const double predicted_final = pred(0, 19);
        check.expect(predicted_final > convergent_max && predicted_final < divergent_min,
                     "x0=" + fmt(x0) + ": MSE final " + fmt(predicted_final) + " strictly inside (" +
                         fmt(convergent_max) + ", " + fmt(divergent_min) + ")");
    }
    return check.ok;
}

// ---- criterion 7: gravitational attractor ----------------------------------------

bool criterion_7(Check& check) {
    const struct {
        const char* name;
        double mean;
    } cases[] = {{"gravity_case1", -32.596}, {"gravity_case2", -28.445}, {"gravity_case3", -32.840}};

    Model case1_model, case3_model;
    bool have1 = false, have3 = false;
    for (const auto& c : cases) {
        RunConfig config = preset(c.name, ModelKind::MdnMlp);
        Dataset train_data = make_train_dataset(config);
        Dataset test_data = make_test_dataset(config);
        TrainOutcome outcome = train_run(config, train_data);
        ReportRow row = summarize("mdn", config.n, "nll", member_test_nlls(outcome, test_data));
        check.note(std::string(c.name) + ": nll " + fmt(row.mean) + " +/- " + fmt(row.std_dev) +
                   " over " + std::to_string(row.seed_count) + " members");
        check.expect(std::abs(row.mean - c.mean) <= 1.5,
                     std::string(c.name) + ": |" + fmt(row.mean) + " - " + fmt(c.mean) +
                         "| <= 1.5");
        if (std::string(c.name) == "gravity_case1" && !outcome.members.empty()) {
            case1_model = outcome.members.front().model;
            have1 = true;
        }
        if (std::string(c.name) == "gravity_case3" && !outcome.members.empty()) {
            case3_model = outcome.members.front().model;
            have3 = true;
        }
    }

    if (have1) {
        WeightFieldGrid grid = weight_field_grid(case1_model, 0.2, 41);
        double worst_spread = 0.0;
        for (int c : top_components(grid, 3)) {
            worst_spread = std::max(worst_spread, component_spread(grid, c));
        }
        check.expect(worst_spread < 0.15,
                     "case 1 top-3 weight spread " + fmt(worst_spread) + " < 0.15");
    } else {
        check.expect(false, "case 1 member available for interpretability");
    }

    if (have3) {
        WeightFieldGrid grid = weight_field_grid(case3_model, 0.2, 41);
        PartitionSummary partition = argmax_partition(grid);
        check.note("case 3 partition: " + std::to_string(partition.distinct_labels) +
                   " labels, " + std::to_string(partition.connected_regions) + " regions");
        check.expect(partition.distinct_labels == 3 && partition.connected_regions == 3,
                     "case 3 argmax partition is 3 contiguous regions");
    } else {
        check.expect(false, "case 3 member available for interpretability");
    }
    return check.ok;
}

// ---- criterion 8: Lorenz MMD ordering ----------------------------------------------

bool criterion_8(Check& check) {
    RunConfig base = preset("lorenz", ModelKind::MdnMlp);
    Dataset trajectories = make_train_dataset(base);

    auto train_kind = [&](ModelKind kind) {
        RunConfig config = preset("lorenz", kind);
        TrainOutcome outcome = train_run(config, trajectories);
        if (outcome.members.empty()) {
            throw NumericError(model_kind_name(kind) + " training failed: " +
                               (outcome.failures.empty() ? "?" : outcome.failures[0].error));
        }
        return std::move(outcome.members.front().model);
    };

    Model mse_model = train_kind(ModelKind::MseMlp);
    Model mdn_model = train_kind(ModelKind::MdnMlp);
    Model rnn_model = train_kind(ModelKind::RnnMdn);
    check.note("all three models trained");

    Tensor truth = ground_truth_cloud(base);
    auto sweep_max = [&](const Model& model) {
        CloudResult cloud = rollout_cloud(model, base, RandomStream::derive(base.train_seed, 1));
        MmdCurve curve = mmd_sweep(cloud.points, truth);
        return curve.max_value;
    };
    const double mmd_mse = sweep_max(mse_model);
    const double mmd_mdn = sweep_max(mdn_model);
    const double mmd_rnn = sweep_max(rnn_model);
    check.note("max MMD^2: mse " + fmt(mmd_mse) + ", mdn " + fmt(mmd_mdn) + ", rnn_mdn " +
               fmt(mmd_rnn));
    check.expect(mmd_rnn < mmd_mdn && mmd_mdn < mmd_mse, "ordering rnn_mdn < mdn < mse");
    check.expect(mmd_rnn < 2e-3, "rnn_mdn max MMD^2 " + fmt(mmd_rnn) + " < 2e-3");
    check.expect(mmd_mse > 5e-3, "mse max MMD^2 " + fmt(mmd_mse) + " > 5e-3");

    RandomStream rng(RandomStream::derive(base.train_seed, 99));
    RolloutResult longrun =
        rollout(rnn_model, {0.0, 1.0, 24.0}, 5000, rng, RolloutMode::RnnMdnSample);
    double max_abs = 0.0;
    for (double v : longrun.states.values()) max_abs = std::max(max_abs, std::abs(v));
    check.expect(!longrun.diverged && max_abs < 100.0,
                 "rnn_mdn 5000-step rollout bounded: max |state| " + fmt(max_abs) + " < 100");
    return check.ok;
}

// ---- criterion 9: K ablation ----------------------------------------------------

bool criterion_9(Check& check) {
    RunConfig base = preset("inverse_sine", ModelKind::MdnMlp);
    base.n = 1000;
    base.ensemble = 4;  // enough members for a 1-sigma band on one core
    Dataset train_data = make_train_dataset(base);
    Dataset test_data = make_test_dataset(base);

    struct Row {
        int k;
        double mean, std;
    };
    std::vector<Row> rows;
    for (int k : {1, 8, 16}) {
        RunConfig config = base;
        config.k = k;
        TrainOutcome outcome = train_run(config, train_data);
        ReportRow row = summarize("mdn", config.n, "nll", member_test_nlls(outcome, test_data));
        rows.push_back({k, row.mean, row.std_dev});
        check.note("K=" + std::to_string(k) + ": nll " + fmt(row.mean) + " +/- " +
                   fmt(row.std_dev));
    }
    check.expect(rows[1].mean < rows[0].mean - 0.5,
                 "NLL(K=8) " + fmt(rows[1].mean) + " < NLL(K=1) - 0.5 = " + fmt(rows[0].mean - 0.5));
    check.expect(std::abs(rows[1].mean - rows[2].mean) <= rows[1].std + rows[2].std,
                 "|NLL(K=8) - NLL(K=16)| = " + fmt(std::abs(rows[1].mean - rows[2].mean)) +
                     " within 1-sigma bands (" + fmt(rows[1].std + rows[2].std) + ")");
    return check.ok;
}

// ---- criterion 10: MMD unit suite --------------------------------------------------

bool criterion_10(Check& check) {
    const auto start = std::chrono::steady_clock::now();

    Tensor x(Shape{2, 1}, {0.0, 2.0});
    Tensor y(Shape{2, 1}, {0.0, 2.0});
    check.expect(std::abs(mmd_squared(x, y, 1.0) - (std::exp(-2.0) - 1.0)) < 1e-12,
                 "two-point hand example equals e^-2 - 1 within 1e-12");

    RandomStream rng(7);
    const int n = 500;
    bool concentrated = true;
    for (int trial = 0; trial < 50; ++trial) {
        Tensor a(Shape{n, 1});
        Tensor b(Shape{n, 1});
        for (auto& v : a.values()) v = rng.normal();
        for (auto& v : b.values()) v = rng.normal();
        concentrated = concentrated && std::abs(mmd_squared(a, b, 1.0)) < 10.0 / n;
    }
    check.expect(concentrated, "|MMD^2| < 10/n over 50 same-distribution resamples");

    Tensor c(Shape{64, 2});
    Tensor d(Shape{48, 2});
    for (auto& v : c.values()) v = rng.normal();
    for (auto& v : d.values()) v = rng.normal(0.4, 1.2);
    check.expect(std::abs(mmd_squared(c, d, 0.8) - mmd_squared(d, c, 0.8)) < 1e-14,
                 "mmd^2(X,Y) == mmd^2(Y,X)");

    MmdCurve curve = mmd_sweep(c, d);
    bool dominated = true;
    for (double v : curve.values) dominated = dominated && curve.max_value >= v;
    check.expect(dominated, "sweep max dominates all 64 sampled scales");

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    check.expect(secs < 10.0, "runtime " + fmt(secs) + " s < 10 s");
    return check.ok;
}

// ---- criterion 11: persistence --------------------------------------------------

bool criterion_11(Check& check) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "mdnkit_acceptance_persist";
    fs::create_directories(dir);

    ModelSpec spec;
    spec.kind = ModelKind::MdnMlp;
    spec.input_dim = 2;
    spec.target_dim = 3;
    spec.hidden = {8, 8};
    spec.k = 4;
    Model model = Model::build(spec, 123);
    const std::string ckpt = (dir / "model.ckpt").string();
    save_checkpoint(ckpt, model, 123, 42);
    LoadedCheckpoint loaded = load_checkpoint(ckpt);
    bool exact = loaded.model.params.size() == model.params.size();
    for (size_t i = 0; exact && i < model.params.size(); ++i) {
        exact = 0 == std::memcmp(model.params[i].second.data(), loaded.model.params[i].second.data(),
                                 sizeof(double) * static_cast<size_t>(model.params[i].second.size()));
    }
    check.expect(exact, "checkpoint round trip is bit-exact");

    const std::string resaved = (dir / "model2.ckpt").string();
    save_checkpoint(resaved, loaded.model, loaded.seed, loaded.step);
    std::ifstream a(ckpt, std::ios::binary), b(resaved, std::ios::binary);
    std::string bytes_a((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string bytes_b((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    check.expect(bytes_a == bytes_b, "save -> load -> save is byte-identical");

    // Golden file produced on a little-endian host.
    LoadedCheckpoint golden =
        load_checkpoint(std::string(MDNKIT_TEST_DATA_DIR) + "/golden_checkpoint_v1.ckpt");
    bool golden_ok = golden.seed == 2024 && golden.step == 77;
    const Tensor& w0 = golden.model.params[0].second;
    for (int i = 0; i < 6 && golden_ok; ++i) golden_ok = w0(i / 3, i % 3) == (i - 2.5) * 0.75;
    check.expect(golden_ok, "golden cross-host checkpoint loads with exact payload values");

    bool regen_ok = true;
    for (const char* gen : {"inverse_sine", "gravity_case1", "gravity_case2", "gravity_case3",
                            "saddle_node", "lorenz"}) {
        Dataset original = regenerate_dataset(gen, 4, 2718);
        const std::string path = (dir / (std::string(gen) + ".ds")).string();
        save_dataset(path, original);
        Dataset restored = load_dataset(path);
        Dataset regen = regenerate_dataset(restored.generator, restored.n(), restored.seed);
        regen_ok = regen_ok &&
                   0 == std::memcmp(regen.x.data(), restored.x.data(),
                                    sizeof(double) * static_cast<size_t>(restored.x.size())) &&
                   0 == std::memcmp(regen.y.data(), restored.y.data(),
                                    sizeof(double) * static_cast<size_t>(restored.y.size()));
    }
    check.expect(regen_ok, "regenerate-from-header equals stored payloads for every generator");
    return check.ok;
}

struct Criterion {
    int id;
    const char* name;
    std::function<bool(Check&)> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all = {
        {1, "gradient correctness vs central finite differences", criterion_1},
        {2, "stable-loss property suite", criterion_2},
        {3, "parameter-count pins", criterion_3},
        {4, "inverse-sine reproduction (paper + desk scale)", criterion_4},
        {5, "ground-truth quadrature oracle", criterion_5},
        {6, "saddle-node low-data claim + MSE mean collapse", criterion_6},
        {7, "gravitational attractor NLL + interpretability", criterion_7},
        {8, "Lorenz MMD ordering and bounded rollout", criterion_8},
        {9, "K ablation on inverse sine", criterion_9},
        {10, "MMD unit suite", criterion_10},
        {11, "persistence round trips and golden file", criterion_11},
    };
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--only" && i + 1 < argc) {
            std::istringstream list(argv[++i]);
            std::string item;
            while (std::getline(list, item, ',')) only.push_back(std::stoi(item));
        }
    }
    int failures = 0;
    for (const auto& criterion : criteria()) {
        if (!only.empty() &&
            std::find(only.begin(), only.end(), criterion.id) == only.end()) {
            continue;
        }
        Check check;
        bool ok = false;
        const auto start = std::chrono::steady_clock::now();
        try {
            ok = criterion.run(check);
        } catch (const std::exception& e) {
            check.note(std::string("exception: ") + e.what());
            ok = false;
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %d: %s (%.1f s)\n", ok ? "PASS" : "FAIL", criterion.id,
                    criterion.name, secs);
        std::fputs(check.log.str().c_str(), stdout);
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
