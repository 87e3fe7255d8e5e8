#pragma once

#include <string>
#include <vector>

#include "mdnkit/dataset.hpp"
#include "mdnkit/model.hpp"

namespace mdnkit {

// Mean per-sample NLL of a trained explicit-density model on a dataset.
// Trajectory tasks score the full flattened target under the per-input
// mixture; the value is per sample, not per dimension.
double test_nll(const Model& model, const Dataset& data);

// Per-sample NLL values (used by surfaces and diagnostics).
std::vector<double> test_nll_per_sample(const Model& model, const Dataset& data);

// ---- inverse-sine ground truth ------------------------------------------------

struct QuadratureGrid {
    double lower = -1.5;
    double upper = 1.5;
    int n_points = 2001;  // trapezoid rule
};

// Bayes posterior p(x|y) = N(y; f(x), 0.2^2) / integral of the numerator over
// the uniform prior's support. The denominator is precomputed per y.
class TrueInverseDensity {
public:
    explicit TrueInverseDensity(double y, QuadratureGrid grid = {}, double noise_std = 0.2);

    double operator()(double x) const;
    bool underflowed() const { return underflowed_; }
    double denominator() const { return denominator_; }

private:
    double y_;
    double noise_std_;
    QuadratureGrid grid_;
    double denominator_ = 0.0;
    bool underflowed_ = false;
};

double true_inverse_density(double x, double y, QuadratureGrid grid = {});

// Dense -log p(x|y) surface for export; values row-major [y_grid x x_grid].
struct NllSurface {
    std::vector<double> x_grid;
    std::vector<double> y_grid;
    std::vector<double> values;

    double at(int yi, int xi) const {
        return values[static_cast<size_t>(yi) * x_grid.size() + static_cast<size_t>(xi)];
    }
};

NllSurface truth_nll_surface(const std::vector<double>& x_grid, const std::vector<double>& y_grid,
                             QuadratureGrid grid = {});

// The model's input is the observation y; the surface is -log p_theta(x|y).
NllSurface model_nll_surface(const Model& model, const std::vector<double>& x_grid,
                             const std::vector<double>& y_grid);

std::vector<double> linspace(double lo, double hi, int n);

// ---- maximum mean discrepancy ---------------------------------------------------

struct KernelSweep {
    double scale_min = 0.1;
    double scale_max = 50.0;
    int n_scales = 64;  // log-spaced

    std::vector<double> scales() const;
};

// Unbiased MMD^2 with RBF kernel k(a,b) = exp(-|a-b|^2 / (2 s^2)):
//   T_XX - 2 T_XY + T_YY, within-cloud terms 1/(n(n-1)) over i != j.
// `paper_formula` drops the factor 2 on the cross term for comparison runs.
double mmd_squared(const Tensor& x, const Tensor& y, double scale, bool paper_formula = false);

struct MmdCurve {
    std::vector<double> scales;
    std::vector<double> values;
    double max_value = 0.0;
    double max_scale = 0.0;
};

MmdCurve mmd_sweep(const Tensor& x, const Tensor& y, const KernelSweep& sweep = {},
                   bool paper_formula = false);

// Uniform subsample without replacement down to at most `max_points` rows.
Tensor subsample_rows(const Tensor& cloud, std::int64_t max_points, std::uint64_t seed);

// ---- ensemble reporting -----------------------------------------------------------

struct ReportRow {
    std::string method;
    std::int64_t n = 0;
    int seed_count = 0;
    std::string metric;
    double mean = 0.0;
    double std_dev = 0.0;  // population std; 0 for a single member
};

ReportRow summarize(const std::string& method, std::int64_t n, const std::string& metric,
                    const std::vector<double>& member_values);

}  // namespace mdnkit
