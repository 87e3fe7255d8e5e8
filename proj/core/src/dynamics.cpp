#include "mdnkit/dynamics.hpp"

#include <cmath>
#include <cstring>

namespace mdnkit {

OdeSystem saddle_node_system(double r) {
    OdeSystem sys;
    sys.dim = 1;
    sys.rhs = [r](double, const double* x, double* d) { d[0] = r + x[0] * x[0]; };
    return sys;
}

OdeSystem lorenz_system(double sigma, double beta, double rho) {
    OdeSystem sys;
    sys.dim = 3;
    sys.rhs = [sigma, beta, rho](double, const double* s, double* d) {
        d[0] = sigma * (s[1] - s[0]);
        d[1] = s[0] * (rho - s[2]) - s[1];
        d[2] = s[0] * s[1] - beta * s[2];
    };
    return sys;
}

OdeSystem gravity_system(const std::vector<std::array<double, 2>>& bodies, double g, double mass,
                         double drag, double softening) {
    OdeSystem sys;
    sys.dim = 4;
    sys.rhs = [bodies, g, mass, drag, softening](double, const double* s, double* d) {
        const double x = s[0], y = s[1], vx = s[2], vy = s[3];
        double ax = 0.0, ay = 0.0;
        for (const auto& c : bodies) {
            const double rx = x - c[0], ry = y - c[1];
            const double r2 = std::max(rx * rx + ry * ry, softening);
            const double f = g * mass / r2;
            ax -= f * rx;
            ay -= f * ry;
        }
        const double speed = std::sqrt(vx * vx + vy * vy);
        ax -= drag * speed * vx;
        ay -= drag * speed * vy;
        d[0] = vx;
        d[1] = vy;
        d[2] = ax;
        d[3] = ay;
    };
    return sys;
}

std::vector<double> euler_integrate(const OdeSystem& system, const std::vector<double>& x0,
                                    double dt, std::int64_t steps,
                                    std::optional<double> clip_bound) {
    if (dt <= 0.0) throw ConfigError("euler_integrate: dt must be positive");
    const int dim = system.dim;
    if (static_cast<int>(x0.size()) != dim) throw ShapeError("euler_integrate: x0 dim mismatch");
    std::vector<double> traj(static_cast<size_t>((steps + 1) * dim));
    std::memcpy(traj.data(), x0.data(), static_cast<size_t>(dim) * sizeof(double));
    std::vector<double> state(x0), deriv(static_cast<size_t>(dim));
    for (std::int64_t i = 0; i < steps; ++i) {
        system.rhs(static_cast<double>(i) * dt, state.data(), deriv.data());
        for (int j = 0; j < dim; ++j) {
            state[static_cast<size_t>(j)] += dt * deriv[static_cast<size_t>(j)];
            if (clip_bound) {
                state[static_cast<size_t>(j)] =
                    std::clamp(state[static_cast<size_t>(j)], -*clip_bound, *clip_bound);
            } else if (!std::isfinite(state[static_cast<size_t>(j)])) {
                throw NumericError("euler_integrate: non-finite state at step " + std::to_string(i));
            }
        }
        std::memcpy(traj.data() + (i + 1) * dim, state.data(),
                    static_cast<size_t>(dim) * sizeof(double));
    }
    return traj;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0, kA53 = 64448.0 / 6561.0,
                 kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0, kA63 = 46732.0 / 5247.0,
                 kA64 = 49.0 / 176.0, kA65 = -5103.0 / 18656.0;
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0,
                 kB5 = -2187.0 / 6784.0, kB6 = 11.0 / 84.0;
// 4th-order weights of the embedded solution.
constexpr double kE1 = 5179.0 / 57600.0, kE3 = 7571.0 / 16695.0, kE4 = 393.0 / 640.0,
                 kE5 = -92097.0 / 339200.0, kE6 = 187.0 / 2100.0, kE7 = 1.0 / 40.0;
constexpr double kC2 = 1.0 / 5.0, kC3 = 3.0 / 10.0, kC4 = 4.0 / 5.0, kC5 = 8.0 / 9.0;

}  // namespace

Dopri5Result dopri5_integrate(const OdeSystem& system, const std::vector<double>& x0, double dt,
                              double t_end) {
    if (dt <= 0.0) throw ConfigError("dopri5_integrate: dt must be positive");
    const int dim = system.dim;
    if (static_cast<int>(x0.size()) != dim) throw ShapeError("dopri5_integrate: x0 dim mismatch");
    const auto steps = static_cast<std::int64_t>(std::llround(t_end / dt));
    Dopri5Result result;
    result.trajectory.resize(static_cast<size_t>((steps + 1) * dim));
    std::memcpy(result.trajectory.data(), x0.data(), static_cast<size_t>(dim) * sizeof(double));

    std::vector<double> y(x0), tmp(static_cast<size_t>(dim));
    std::vector<std::vector<double>> k(7, std::vector<double>(static_cast<size_t>(dim)));
    for (std::int64_t i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        system.rhs(t, y.data(), k[0].data());
        for (int j = 0; j < dim; ++j) tmp[j] = y[j] + dt * kA21 * k[0][j];
        system.rhs(t + kC2 * dt, tmp.data(), k[1].data());
        for (int j = 0; j < dim; ++j) tmp[j] = y[j] + dt * (kA31 * k[0][j] + kA32 * k[1][j]);
        system.rhs(t + kC3 * dt, tmp.data(), k[2].data());
        for (int j = 0; j < dim; ++j) {
            tmp[j] = y[j] + dt * (kA41 * k[0][j] + kA42 * k[1][j] + kA43 * k[2][j]);
        }
        system.rhs(t + kC4 * dt, tmp.data(), k[3].data());
        for (int j = 0; j < dim; ++j) {
            tmp[j] = y[j] + dt * (kA51 * k[0][j] + kA52 * k[1][j] + kA53 * k[2][j] + kA54 * k[3][j]);
        }
        system.rhs(t + kC5 * dt, tmp.data(), k[4].data());
        for (int j = 0; j < dim; ++j) {
            tmp[j] = y[j] + dt * (kA61 * k[0][j] + kA62 * k[1][j] + kA63 * k[2][j] +
                                  kA64 * k[3][j] + kA65 * k[4][j]);
        }
        system.rhs(t + dt, tmp.data(), k[5].data());
        // 5th-order solution; k7 is the FSAL derivative at the new point.
        for (int j = 0; j < dim; ++j) {
            tmp[j] = y[j] + dt * (kB1 * k[0][j] + kB3 * k[2][j] + kB4 * k[3][j] + kB5 * k[4][j] +
                                  kB6 * k[5][j]);
        }
        system.rhs(t + dt, tmp.data(), k[6].data());
        double err = 0.0;
        for (int j = 0; j < dim; ++j) {
            const double y4 = y[j] + dt * (kE1 * k[0][j] + kE3 * k[2][j] + kE4 * k[3][j] +
                                           kE5 * k[4][j] + kE6 * k[5][j] + kE7 * k[6][j]);
            err = std::max(err, std::abs(tmp[j] - y4));
            y[j] = tmp[j];
            if (!std::isfinite(y[j])) {
                throw NumericError("dopri5_integrate: non-finite state at step " + std::to_string(i));
            }
        }
        result.max_error_estimate = std::max(result.max_error_estimate, err);
        std::memcpy(result.trajectory.data() + (i + 1) * dim, y.data(),
                    static_cast<size_t>(dim) * sizeof(double));
    }
    return result;
}

// ---- generators --------------------------------------------------------------

double inverse_sine_forward(double x) { return 0.5 * x + 0.7 * std::sin(5.0 * x); }

Dataset gen_inverse_sine(std::int64_t n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("gen_inverse_sine: n must be >= 1");
    Dataset ds;
    ds.generator = "inverse_sine";
    ds.seed = seed;
    ds.meta = {{"noise_std", "0.2"}, {"x_low", "-1.5"}, {"x_high", "1.5"}};
    ds.x = Tensor(Shape{static_cast<int>(n), 1});
    ds.y = Tensor(Shape{static_cast<int>(n), 1});
    for (std::int64_t i = 0; i < n; ++i) {
        RandomStream rng(RandomStream::derive(seed, static_cast<std::uint64_t>(i)));
        const double x = rng.uniform(-1.5, 1.5);
        const double y = inverse_sine_forward(x) + rng.normal(0.0, 0.2);
        ds.x.at(static_cast<int>(i), 0) = y;  // observation is the model input
        ds.y.at(static_cast<int>(i), 0) = x;
    }
    return ds;
}

std::vector<std::array<double, 2>> gravity_attractors() {
    // Evenly spaced on the unit circle, apex up: 90, 210, 330 degrees.
    const double s3 = std::sqrt(3.0) / 2.0;
    return {{0.0, 1.0}, {-s3, -0.5}, {s3, -0.5}};
}

namespace {

constexpr double kGravityDt = 0.0005;
constexpr std::int64_t kGravitySteps = 2000;  // t_end = 1.0
constexpr std::int64_t kGravityStride = 200;  // 11 states at t = 0.0, 0.1, ..., 1.0
constexpr int kGravitySubsampled = 11;
constexpr double kGravityNoise = 0.05;
constexpr double kGravityDiskRadius = 0.2;

}  // namespace

Dataset gen_gravity(std::int64_t n, int case_id, std::uint64_t seed) {
    if (n < 1) throw ConfigError("gen_gravity: n must be >= 1");
    if (case_id < 1 || case_id > 3) throw ConfigError("gen_gravity: case must be 1, 2 or 3");
    const auto bodies = gravity_attractors();
    Dataset ds;
    ds.generator = "gravity_case" + std::to_string(case_id);
    ds.seed = seed;
    ds.meta = {{"dt", "0.0005"},      {"t_end", "1"},       {"subsample", "11"},
               {"noise_std", "0.05"}, {"g", "100"},         {"mass", "1"},
               {"drag", "10"},        {"disk_radius", "0.2"}, {"softening", "1e-06"}};
    ds.x = Tensor(Shape{static_cast<int>(n), 2});
    ds.y = Tensor(Shape{static_cast<int>(n), 2 * kGravitySubsampled});
    for (std::int64_t i = 0; i < n; ++i) {
        RandomStream rng(RandomStream::derive(seed, static_cast<std::uint64_t>(i)));
        const double radius = kGravityDiskRadius * std::sqrt(rng.uniform());
        const double angle = 2.0 * M_PI * rng.uniform();
        const double px = radius * std::cos(angle);
        const double py = radius * std::sin(angle);
        std::vector<std::array<double, 2>> active = bodies;
        if (case_id == 1) {
            active = {bodies[rng.uniform_int(bodies.size())]};
        }
        const OdeSystem sys = gravity_system(active);
        const std::vector<double> traj =
            euler_integrate(sys, {px, py, 0.0, 0.0}, kGravityDt, kGravitySteps);
        for (int t = 0; t < kGravitySubsampled; ++t) {
            const std::int64_t idx = static_cast<std::int64_t>(t) * kGravityStride;
            ds.y.at(static_cast<int>(i), 2 * t) =
                traj[static_cast<size_t>(idx * 4)] + rng.normal(0.0, kGravityNoise);
            ds.y.at(static_cast<int>(i), 2 * t + 1) =
                traj[static_cast<size_t>(idx * 4 + 1)] + rng.normal(0.0, kGravityNoise);
        }
        double in_x = px, in_y = py;
        if (case_id == 2) {
            in_x += rng.normal(0.0, kGravityNoise);
            in_y += rng.normal(0.0, kGravityNoise);
        }
        ds.x.at(static_cast<int>(i), 0) = in_x;
        ds.x.at(static_cast<int>(i), 1) = in_y;
    }
    return ds;
}

const std::array<double, 5> kSaddleNodeRValues = {-1.50, -0.75, 0.00, 0.75, 1.50};

namespace {

constexpr double kSaddleDt = 0.001;
constexpr std::int64_t kSaddleSteps = 5000;  // T = 5.0
constexpr std::int64_t kSaddleStride = 250;  // 20 states at t = 0.25, ..., 5.0
constexpr int kSaddleSubsampled = 20;
constexpr double kSaddleNoise = 0.1;
constexpr double kSaddleClip = 10.0;

}  // namespace

Dataset gen_saddle_node(std::int64_t n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("gen_saddle_node: n must be >= 1");
    Dataset ds;
    ds.generator = "saddle_node";
    ds.seed = seed;
    ds.meta = {{"dt", "0.001"},      {"t_end", "5"},  {"subsample", "20"},
               {"noise_std", "0.1"}, {"clip", "10"},  {"r_values", "-1.5,-0.75,0,0.75,1.5"},
               {"x0_low", "-2"},     {"x0_high", "2"}};
    ds.x = Tensor(Shape{static_cast<int>(n), 1});
    ds.y = Tensor(Shape{static_cast<int>(n), kSaddleSubsampled});
    for (std::int64_t i = 0; i < n; ++i) {
        RandomStream rng(RandomStream::derive(seed, static_cast<std::uint64_t>(i)));
        const double x0 = rng.uniform(-2.0, 2.0);
        const double r = kSaddleNodeRValues[rng.uniform_int(kSaddleNodeRValues.size())];
        const std::vector<double> traj =
            euler_integrate(saddle_node_system(r), {x0}, kSaddleDt, kSaddleSteps, kSaddleClip);
        for (int t = 0; t < kSaddleSubsampled; ++t) {
            const double v =
                traj[static_cast<size_t>((static_cast<std::int64_t>(t) + 1) * kSaddleStride)] +
                rng.normal(0.0, kSaddleNoise);
            ds.y.at(static_cast<int>(i), t) = std::clamp(v, -kSaddleClip, kSaddleClip);
        }
        ds.x.at(static_cast<int>(i), 0) = x0;
    }
    return ds;
}

namespace {

constexpr double kLorenzDt = 0.001;
constexpr double kLorenzTEnd = 10.0;
constexpr std::int64_t kLorenzStride = 20;  // 500 states at spacing 0.02
constexpr int kLorenzSubsampled = 500;
constexpr double kLorenzNoise = 0.2;

}  // namespace

Dataset gen_lorenz(std::int64_t n_traj, std::uint64_t seed) {
    if (n_traj < 1) throw ConfigError("gen_lorenz: n_traj must be >= 1");
    Dataset ds;
    ds.generator = "lorenz";
    ds.seed = seed;
    ds.meta = {{"dt", "0.001"},  {"t_end", "10"},    {"subsample", "500"}, {"noise_std", "0.2"},
               {"sigma", "10"},  {"beta", "2.6666666666666665"}, {"rho", "28"},
               {"x0_mean", "0,0,24.5"}};
    ds.x = Tensor(Shape{static_cast<int>(n_traj), 3});
    ds.y = Tensor(Shape{static_cast<int>(n_traj), 3 * kLorenzSubsampled});
    const OdeSystem sys = lorenz_system();
    for (std::int64_t i = 0; i < n_traj; ++i) {
        RandomStream rng(RandomStream::derive(seed, static_cast<std::uint64_t>(i)));
        const std::vector<double> x0 = {rng.normal(0.0, 1.0), rng.normal(0.0, 1.0),
                                        24.5 + rng.normal(0.0, 1.0)};
        const Dopri5Result run = dopri5_integrate(sys, x0, kLorenzDt, kLorenzTEnd);
        for (int t = 0; t < kLorenzSubsampled; ++t) {
            const std::int64_t idx = (static_cast<std::int64_t>(t) + 1) * kLorenzStride;
            for (int j = 0; j < 3; ++j) {
                ds.y.at(static_cast<int>(i), 3 * t + j) =
                    run.trajectory[static_cast<size_t>(idx * 3 + j)] + rng.normal(0.0, kLorenzNoise);
            }
        }
        for (int j = 0; j < 3; ++j) ds.x.at(static_cast<int>(i), j) = x0[static_cast<size_t>(j)];
    }
    return ds;
}

Dataset regenerate_dataset(const std::string& generator, std::int64_t n, std::uint64_t seed) {
    if (generator == "inverse_sine") return gen_inverse_sine(n, seed);
    if (generator == "gravity_case1") return gen_gravity(n, 1, seed);
    if (generator == "gravity_case2") return gen_gravity(n, 2, seed);
    if (generator == "gravity_case3") return gen_gravity(n, 3, seed);
    if (generator == "saddle_node") return gen_saddle_node(n, seed);
    if (generator == "lorenz") return gen_lorenz(n, seed);
    throw ConfigError("unknown generator: " + generator);
}

Dataset lorenz_increment_pairs(const Dataset& trajectories, int state_dim) {
    const std::int64_t row_len = trajectories.y.dim(1);
    if (row_len % state_dim != 0) throw ShapeError("trajectory row not divisible by state dim");
    const std::int64_t T = row_len / state_dim;
    const std::int64_t n_traj = trajectories.n();
    const std::int64_t pairs = n_traj * (T - 1);
    Dataset out;
    out.generator = trajectories.generator + "_pairs";
    out.seed = trajectories.seed;
    out.x = Tensor(Shape{static_cast<int>(pairs), state_dim});
    out.y = Tensor(Shape{static_cast<int>(pairs), state_dim});
    const double* traj = trajectories.y.data();
    std::int64_t row = 0;
    for (std::int64_t i = 0; i < n_traj; ++i) {
        for (std::int64_t t = 0; t + 1 < T; ++t, ++row) {
            const double* s = traj + i * row_len + t * state_dim;
            for (int j = 0; j < state_dim; ++j) {
                out.x.at(static_cast<int>(row), j) = s[j];
                out.y.at(static_cast<int>(row), j) = s[state_dim + j] - s[j];
            }
        }
    }
    return out;
}

RolloutResult rollout(const Model& model, const std::vector<double>& x0, std::int64_t steps,
                      RandomStream& rng, RolloutMode mode, double prune_threshold) {
    const int d = model.spec.input_dim;
    if (static_cast<int>(x0.size()) != d) throw ShapeError("rollout: x0 dim mismatch");
    const bool want_rnn = mode == RolloutMode::RnnMdnSample;
    const bool want_mse = mode == RolloutMode::MsePoint;
    if (want_rnn != (model.spec.kind == ModelKind::RnnMdn) ||
        want_mse != (model.spec.kind == ModelKind::MseMlp)) {
        throw ConfigError("rollout mode does not match model kind");
    }
    RolloutResult result;
    std::vector<double> states;
    states.insert(states.end(), x0.begin(), x0.end());
    std::vector<double> state(x0), delta(static_cast<size_t>(d));
    Tensor hidden = want_rnn ? model.initial_hidden(1) : Tensor();
    for (std::int64_t i = 0; i < steps; ++i) {
        Tensor xt(Shape{1, d}, state);
        if (mode == RolloutMode::MsePoint) {
            Tensor pred = model.forward_point(xt);
            for (int j = 0; j < d; ++j) delta[static_cast<size_t>(j)] = pred(0, j);
        } else if (mode == RolloutMode::MdnSample) {
            mdn_sample_one(model.forward_mixture(xt), 0, rng, delta.data(), prune_threshold);
        } else {
            mdn_sample_one(model.forward_rnn_step(xt, hidden), 0, rng, delta.data(),
                           prune_threshold);
        }
        double max_abs = 0.0;
        for (int j = 0; j < d; ++j) {
            state[static_cast<size_t>(j)] += delta[static_cast<size_t>(j)];
            max_abs = std::max(max_abs, std::abs(state[static_cast<size_t>(j)]));
        }
        states.insert(states.end(), state.begin(), state.end());
        result.steps_taken = i + 1;
        if (!(max_abs <= 1e6)) {
            result.diverged = true;
            break;
        }
    }
    result.states = Tensor(Shape{static_cast<int>(result.steps_taken + 1), d}, std::move(states));
    return result;
}

}  // namespace mdnkit
