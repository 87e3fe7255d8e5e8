#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mdnkit/dataset.hpp"
#include "mdnkit/model.hpp"
#include "mdnkit/random.hpp"

namespace mdnkit {

struct OdeSystem {
    int dim = 0;
    std::function<void(double t, const double* state, double* deriv)> rhs;
};

OdeSystem saddle_node_system(double r);                       // dx/dt = r + x^2
OdeSystem lorenz_system(double sigma = 10.0, double beta = 8.0 / 3.0, double rho = 28.0);

// Planar particle under softened 1/r attraction toward each body plus
// quadratic drag -drag * |v| * v. State is [x, y, vx, vy].
OdeSystem gravity_system(const std::vector<std::array<double, 2>>& bodies, double g = 100.0,
                         double mass = 1.0, double drag = 10.0, double softening = 1e-6);

// Forward Euler; returns steps+1 states (x0 first), flattened row-major.
// With clip_bound the state is clamped componentwise to [-clip, clip] after
// every step; without it a non-finite state throws.
std::vector<double> euler_integrate(const OdeSystem& system, const std::vector<double>& x0,
                                    double dt, std::int64_t steps,
                                    std::optional<double> clip_bound = std::nullopt);

// Fixed-step Dormand-Prince 5(4). The embedded 4th-order error estimate is
// accumulated (max norm over steps) but never used for step control, so the
// grid is exactly t0 + i*dt.
struct Dopri5Result {
    std::vector<double> trajectory;  // (steps+1) x dim, x0 first
    double max_error_estimate = 0.0;
};

Dopri5Result dopri5_integrate(const OdeSystem& system, const std::vector<double>& x0, double dt,
                              double t_end);

// ---- benchmark generators ---------------------------------------------------
// All are pure functions of (n, seed); trajectory randomness uses one derived
// stream per trajectory (RandomStream::derive(seed, i)).

double inverse_sine_forward(double x);  // f(x) = x/2 + 0.7 sin(5x)

// x ~ U[-1.5, 1.5], y = f(x) + N(0, 0.2^2); stored as input=y, target=x.
Dataset gen_inverse_sine(std::int64_t n, std::uint64_t seed);

// Up to three bodies on the unit circle; targets are flattened noisy 11-step
// 2-D trajectories over t in {0.0, 0.1, ..., 1.0}. Case 1: one random body
// active per trajectory. Case 2: all bodies, noisy input position. Case 3:
// all bodies, clean input.
Dataset gen_gravity(std::int64_t n, int case_id, std::uint64_t seed);

std::vector<std::array<double, 2>> gravity_attractors();

// x0 ~ U[-2, 2], r hidden from a 5-value grid; targets are 20 noisy states
// over t in {0.25, ..., 5.0}, clipped to |x| <= 10 (noise first, then clip).
Dataset gen_saddle_node(std::int64_t n, std::uint64_t seed);

extern const std::array<double, 5> kSaddleNodeRValues;

// x0 ~ N((0,0,24.5), I3); DOPRI5 at dt=1e-3 over [0,10], subsampled to 500
// states at spacing 0.02 (grid t in {0.02, ..., 10.0}); noise std 0.2.
// X rows hold x0, Y rows the flattened 500x3 noisy trajectory.
Dataset gen_lorenz(std::int64_t n_traj, std::uint64_t seed);

// Rebuilds any generator output from its header fields; used to verify stored
// payloads. `generator` is one of inverse_sine, gravity_case1..3, saddle_node,
// lorenz.
Dataset regenerate_dataset(const std::string& generator, std::int64_t n, std::uint64_t seed);

// Pools (state, next-state increment) pairs from every trajectory row of a
// Lorenz dataset for feedforward training.
Dataset lorenz_increment_pairs(const Dataset& trajectories, int state_dim = 3);

// ---- rollouts ----------------------------------------------------------------

enum class RolloutMode { MdnSample, RnnMdnSample, MsePoint };

struct RolloutResult {
    Tensor states;  // [(steps_taken+1) x d], x0 first
    bool diverged = false;
    std::int64_t steps_taken = 0;
};

// Autoregressive rollout x <- x + dx with dx sampled from the model (or the
// point prediction for MSE). Truncates with `diverged` once |x|_inf > 1e6.
RolloutResult rollout(const Model& model, const std::vector<double>& x0, std::int64_t steps,
                      RandomStream& rng, RolloutMode mode, double prune_threshold = 0.0);

}  // namespace mdnkit
