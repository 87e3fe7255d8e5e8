#include "mdnkit/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mdnkit/dynamics.hpp"
#include "mdnkit/mixture.hpp"
#include "mdnkit/random.hpp"

namespace mdnkit {

namespace {
constexpr int kEvalBatch = 512;
}

std::vector<double> test_nll_per_sample(const Model& model, const Dataset& data) {
    if (model.spec.kind != ModelKind::MdnMlp) {
        throw ConfigError("test_nll needs an explicit-density (mdn) model");
    }
    const std::int64_t n = data.n();
    std::vector<double> out;
    out.reserve(static_cast<size_t>(n));
    for (std::int64_t start = 0; start < n; start += kEvalBatch) {
        const std::int64_t stop = std::min<std::int64_t>(start + kEvalBatch, n);
        std::vector<std::int64_t> rows(static_cast<size_t>(stop - start));
        for (std::int64_t i = start; i < stop; ++i) rows[static_cast<size_t>(i - start)] = i;
        Tensor xb = gather_rows(data.x, rows);
        Tensor yb = gather_rows(data.y, rows);
        Tensor nll = per_sample_nll(model.forward_mixture(xb), yb);
        out.insert(out.end(), nll.values().begin(), nll.values().end());
    }
    return out;
}

double test_nll(const Model& model, const Dataset& data) {
    const std::vector<double> per = test_nll_per_sample(model, data);
    double acc = 0.0;
    for (double v : per) acc += v;
    return acc / static_cast<double>(per.size());
}

// ---- inverse-sine ground truth ---------------------------------------------

namespace {

double gaussian_pdf(double x, double mean, double std) {
    const double z = (x - mean) / std;
    return std::exp(-0.5 * z * z) / (std * std::sqrt(2.0 * M_PI));
}

}  // namespace

TrueInverseDensity::TrueInverseDensity(double y, QuadratureGrid grid, double noise_std)
    : y_(y), noise_std_(noise_std), grid_(grid) {
    if (grid_.n_points < 3) throw ConfigError("QuadratureGrid needs at least 3 points");
    const double h = (grid_.upper - grid_.lower) / (grid_.n_points - 1);
    double acc = 0.0;
    for (int i = 0; i < grid_.n_points; ++i) {
        const double x = grid_.lower + h * i;
        const double w = (i == 0 || i == grid_.n_points - 1) ? 0.5 : 1.0;
        acc += w * gaussian_pdf(y_, inverse_sine_forward(x), noise_std_);
    }
    denominator_ = acc * h;
    underflowed_ = !(denominator_ > 0.0);
}

double TrueInverseDensity::operator()(double x) const {
    if (underflowed_) return 0.0;
    return gaussian_pdf(y_, inverse_sine_forward(x), noise_std_) / denominator_;
}

double true_inverse_density(double x, double y, QuadratureGrid grid) {
    return TrueInverseDensity(y, grid)(x);
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out(static_cast<size_t>(n));
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double h = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = lo + h * i;
    return out;
}

NllSurface truth_nll_surface(const std::vector<double>& x_grid, const std::vector<double>& y_grid,
                             QuadratureGrid grid) {
    NllSurface surface{x_grid, y_grid, {}};
    surface.values.reserve(x_grid.size() * y_grid.size());
    for (double y : y_grid) {
        TrueInverseDensity density(y, grid);
        for (double x : x_grid) surface.values.push_back(-std::log(density(x)));
    }
    return surface;
}

NllSurface model_nll_surface(const Model& model, const std::vector<double>& x_grid,
                             const std::vector<double>& y_grid) {
    NllSurface surface{x_grid, y_grid, {}};
    surface.values.reserve(x_grid.size() * y_grid.size());
    const int nx = static_cast<int>(x_grid.size());
    for (double y : y_grid) {
        // One mixture per y, scored against the whole x grid as a batch of
        // identical inputs.
        Tensor inputs(Shape{nx, 1});
        Tensor targets(Shape{nx, 1});
        for (int i = 0; i < nx; ++i) {
            inputs.at(i, 0) = y;
            targets.at(i, 0) = x_grid[static_cast<size_t>(i)];
        }
        Tensor nll = per_sample_nll(model.forward_mixture(inputs), targets);
        surface.values.insert(surface.values.end(), nll.values().begin(), nll.values().end());
    }
    return surface;
}

// ---- MMD ---------------------------------------------------------------------

std::vector<double> KernelSweep::scales() const {
    if (n_scales < 1 || scale_min <= 0.0 || scale_max < scale_min) {
        throw ConfigError("invalid KernelSweep");
    }
    std::vector<double> out(static_cast<size_t>(n_scales));
    if (n_scales == 1) {
        out[0] = scale_min;
        return out;
    }
    const double log_lo = std::log(scale_min), log_hi = std::log(scale_max);
    for (int i = 0; i < n_scales; ++i) {
        out[static_cast<size_t>(i)] = std::exp(log_lo + (log_hi - log_lo) * i / (n_scales - 1));
    }
    return out;
}

namespace {

// sums[s] += sum over all (i, j) pairs of exp(-|x_i - y_j|^2 * coeff_s).
// Tiled so the squared-distance buffer stays cache-resident while every scale
// reuses it.
void accumulate_kernel_sums(const double* xs, std::int64_t nx, const double* ys, std::int64_t ny,
                            int d, const std::vector<double>& coeffs, std::vector<double>& sums) {
    constexpr std::int64_t kTileRows = 128;
    Eigen::ArrayXd dist2(kTileRows * ny);
    for (std::int64_t i0 = 0; i0 < nx; i0 += kTileRows) {
        const std::int64_t rows = std::min(kTileRows, nx - i0);
        const std::int64_t count = rows * ny;
        double* buf = dist2.data();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* xi = xs + (i0 + r) * d;
            double* row = buf + r * ny;
            for (std::int64_t j = 0; j < ny; ++j) {
                const double* yj = ys + j * d;
                double acc = 0.0;
                for (int c = 0; c < d; ++c) {
                    const double diff = xi[c] - yj[c];
                    acc += diff * diff;
                }
                row[j] = acc;
            }
        }
        auto block = dist2.head(count);
        for (size_t s = 0; s < coeffs.size(); ++s) {
            sums[s] += (block * (-coeffs[s])).exp().sum();
        }
    }
}

struct MmdTerms {
    std::vector<double> t_xx, t_yy, t_xy;  // per scale
};

MmdTerms mmd_terms(const Tensor& x, const Tensor& y, const std::vector<double>& scales) {
    if (x.rank() != 2 || y.rank() != 2 || x.dim(1) != y.dim(1)) {
        throw ShapeError("mmd: clouds must be [n x d] with equal d");
    }
    const std::int64_t nx = x.dim(0), ny = y.dim(0);
    if (nx < 2 || ny < 2) throw ConfigError("mmd: clouds need at least 2 points");
    const int d = x.dim(1);
    std::vector<double> coeffs(scales.size());
    for (size_t s = 0; s < scales.size(); ++s) coeffs[s] = 1.0 / (2.0 * scales[s] * scales[s]);

    MmdTerms terms;
    terms.t_xx.assign(scales.size(), 0.0);
    terms.t_yy.assign(scales.size(), 0.0);
    terms.t_xy.assign(scales.size(), 0.0);
    accumulate_kernel_sums(x.data(), nx, x.data(), nx, d, coeffs, terms.t_xx);
    accumulate_kernel_sums(y.data(), ny, y.data(), ny, d, coeffs, terms.t_yy);
    accumulate_kernel_sums(x.data(), nx, y.data(), ny, d, coeffs, terms.t_xy);
    for (size_t s = 0; s < scales.size(); ++s) {
        // Within-cloud sums include the diagonal (k = 1); drop it for the
        // unbiased estimator.
        terms.t_xx[s] = (terms.t_xx[s] - static_cast<double>(nx)) /
                        (static_cast<double>(nx) * (static_cast<double>(nx) - 1.0));
        terms.t_yy[s] = (terms.t_yy[s] - static_cast<double>(ny)) /
                        (static_cast<double>(ny) * (static_cast<double>(ny) - 1.0));
        terms.t_xy[s] /= static_cast<double>(nx) * static_cast<double>(ny);
    }
    return terms;
}

}  // namespace

double mmd_squared(const Tensor& x, const Tensor& y, double scale, bool paper_formula) {
    const MmdTerms terms = mmd_terms(x, y, {scale});
    const double cross = paper_formula ? 1.0 : 2.0;
    return terms.t_xx[0] - cross * terms.t_xy[0] + terms.t_yy[0];
}

MmdCurve mmd_sweep(const Tensor& x, const Tensor& y, const KernelSweep& sweep,
                   bool paper_formula) {
    MmdCurve curve;
    curve.scales = sweep.scales();
    const MmdTerms terms = mmd_terms(x, y, curve.scales);
    const double cross = paper_formula ? 1.0 : 2.0;
    curve.values.resize(curve.scales.size());
    curve.max_value = -std::numeric_limits<double>::infinity();
    for (size_t s = 0; s < curve.scales.size(); ++s) {
        curve.values[s] = terms.t_xx[s] - cross * terms.t_xy[s] + terms.t_yy[s];
        if (curve.values[s] > curve.max_value) {
            curve.max_value = curve.values[s];
            curve.max_scale = curve.scales[s];
        }
    }
    return curve;
}

Tensor subsample_rows(const Tensor& cloud, std::int64_t max_points, std::uint64_t seed) {
    const std::int64_t n = cloud.dim(0);
    if (n <= max_points) return cloud;
    // Partial Fisher-Yates over row indices.
    std::vector<std::int64_t> idx(static_cast<size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    RandomStream rng(RandomStream::derive(seed, 0x737562ULL));  // "sub"
    for (std::int64_t i = 0; i < max_points; ++i) {
        const std::int64_t j =
            i + static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(max_points));
    return gather_rows(cloud, idx);
}

ReportRow summarize(const std::string& method, std::int64_t n, const std::string& metric,
                    const std::vector<double>& member_values) {
    if (member_values.empty()) throw ConfigError("summarize: no member values");
    ReportRow row{method, n, static_cast<int>(member_values.size()), metric, 0.0, 0.0};
    for (double v : member_values) row.mean += v;
    row.mean /= static_cast<double>(member_values.size());
    double var = 0.0;
    for (double v : member_values) var += (v - row.mean) * (v - row.mean);
    row.std_dev = std::sqrt(var / static_cast<double>(member_values.size()));
    return row;
}

}  // namespace mdnkit
