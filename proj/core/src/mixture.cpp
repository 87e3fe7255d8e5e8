#include "mdnkit/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mdnkit {

namespace {
constexpr double kLn2Pi = 1.8378770664093453;
}

MixtureParams transform_head(const Tensor& raw, int k, int d, double scale_floor,
                             ScaleTransform transform) {
    if (raw.rank() != 2 || raw.dim(1) != k * (1 + 2 * d)) {
        throw ShapeError("transform_head: raw shape " + shape_str(raw.shape()) +
                         " does not match K(1+2d) with K=" + std::to_string(k) +
                         ", d=" + std::to_string(d));
    }
    const int b = raw.dim(0);
    MixtureParams out;
    out.logits = slice_last(raw, 0, k);
    out.means = reshape(slice_last(raw, k, k + k * d), Shape{b, k, d});
    Tensor raw_scales = reshape(slice_last(raw, k + k * d, k * (1 + 2 * d)), Shape{b, k, d});
    if (transform == ScaleTransform::Softplus) {
        out.scales = add_scalar(softplus(raw_scales), scale_floor);
    } else {
        out.scales = add_scalar(elu(raw_scales), 1.0 + scale_floor);
    }
    return out;
}

Tensor per_sample_nll(const MixtureParams& params, const Tensor& y) {
    const int k = params.components();
    const int d = params.target_dim();
    if (y.rank() != 2 || y.dim(0) != params.batch() || y.dim(1) != d) {
        throw ShapeError("per_sample_nll: target shape " + shape_str(y.shape()) +
                         " does not match mixture batch/dim");
    }
    Tensor log_w = sub(params.logits, expand_last(logsumexp(params.logits, 1), k));  // [b x K]
    Tensor diff = sub(expand_axis1(y, k), params.means);                             // [b x K x d]
    Tensor quad = div(square(diff), square(params.scales));
    Tensor per_dim = add(quad, mul_scalar(log(params.scales), 2.0));
    Tensor log_n = mul_scalar(add_scalar(sum(per_dim, 2), d * kLn2Pi), -0.5);        // [b x K]
    return neg(logsumexp(add(log_w, log_n), 1));                                     // [b]
}

Tensor mdn_nll(const MixtureParams& params, const Tensor& y) {
    return mean(per_sample_nll(params, y));
}

std::vector<double> mdn_density(const MixtureParams& params, const Tensor& y) {
    const int b = params.batch(), k = params.components(), d = params.target_dim();
    std::vector<double> alphas = mixture_weights(params);
    std::vector<double> out(static_cast<size_t>(b), 0.0);
    const double* mu = params.means.data();
    const double* sg = params.scales.data();
    const double* py = y.data();
    for (int i = 0; i < b; ++i) {
        double p = 0.0;
        for (int c = 0; c < k; ++c) {
            double component = 1.0;
            for (int j = 0; j < d; ++j) {
                const double m = mu[(static_cast<std::int64_t>(i) * k + c) * d + j];
                const double s = sg[(static_cast<std::int64_t>(i) * k + c) * d + j];
                const double z = (py[static_cast<std::int64_t>(i) * d + j] - m) / s;
                component *= std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * M_PI));
            }
            p += alphas[static_cast<size_t>(i) * k + c] * component;
        }
        out[static_cast<size_t>(i)] = p;
    }
    return out;
}

std::vector<double> mixture_weights(const MixtureParams& params) {
    const int b = params.batch(), k = params.components();
    std::vector<double> out(static_cast<size_t>(b) * k);
    const double* z = params.logits.data();
    for (int i = 0; i < b; ++i) {
        const double* zi = z + static_cast<std::int64_t>(i) * k;
        double m = zi[0];
        for (int c = 1; c < k; ++c) m = std::max(m, zi[c]);
        double s = 0.0;
        for (int c = 0; c < k; ++c) s += std::exp(zi[c] - m);
        for (int c = 0; c < k; ++c) out[static_cast<size_t>(i) * k + c] = std::exp(zi[c] - m) / s;
    }
    return out;
}

std::vector<double> prune_weights(const std::vector<double>& alpha, double threshold) {
    const double max_alpha = *std::max_element(alpha.begin(), alpha.end());
    if (threshold >= max_alpha) {
        throw NumericError("prune_weights: threshold " + std::to_string(threshold) +
                           " would discard every component (max weight " +
                           std::to_string(max_alpha) + ")");
    }
    std::vector<double> out(alpha.size(), 0.0);
    double total = 0.0;
    for (size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] >= threshold) total += alpha[i];
    }
    for (size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] >= threshold) out[i] = alpha[i] / total;
    }
    return out;
}

double mixture_entropy(const std::vector<double>& alpha) {
    double h = 0.0;
    for (double a : alpha) {
        if (a > 0.0) h -= a * std::log(a);
    }
    return h;
}

namespace {

int sample_component(const std::vector<double>& alpha, RandomStream& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (size_t c = 0; c < alpha.size(); ++c) {
        cum += alpha[c];
        if (u < cum) return static_cast<int>(c);
    }
    return static_cast<int>(alpha.size()) - 1;  // u landed in roundoff tail
}

std::vector<double> row_weights(const MixtureParams& params, int row, double prune_threshold) {
    const int k = params.components();
    std::vector<double> all = mixture_weights(params);
    std::vector<double> alpha(all.begin() + static_cast<std::int64_t>(row) * k,
                              all.begin() + static_cast<std::int64_t>(row + 1) * k);
    if (prune_threshold > 0.0) alpha = prune_weights(alpha, prune_threshold);
    return alpha;
}

}  // namespace

void mdn_sample_one(const MixtureParams& params, int row, RandomStream& rng, double* out,
                    double prune_threshold) {
    const int k = params.components(), d = params.target_dim();
    const std::vector<double> alpha = row_weights(params, row, prune_threshold);
    const int c = sample_component(alpha, rng);
    const double* mu = params.means.data() + (static_cast<std::int64_t>(row) * k + c) * d;
    const double* sg = params.scales.data() + (static_cast<std::int64_t>(row) * k + c) * d;
    for (int j = 0; j < d; ++j) out[j] = rng.normal(mu[j], sg[j]);
}

Tensor mdn_sample(const MixtureParams& params, int row, RandomStream& rng, int n,
                  double prune_threshold) {
    const int k = params.components(), d = params.target_dim();
    const std::vector<double> alpha = row_weights(params, row, prune_threshold);
    Tensor out(Shape{n, d});
    double* po = out.data();
    for (int s = 0; s < n; ++s) {
        const int c = sample_component(alpha, rng);
        const double* mu = params.means.data() + (static_cast<std::int64_t>(row) * k + c) * d;
        const double* sg = params.scales.data() + (static_cast<std::int64_t>(row) * k + c) * d;
        for (int j = 0; j < d; ++j) po[static_cast<std::int64_t>(s) * d + j] = rng.normal(mu[j], sg[j]);
    }
    return out;
}

ComponentReport component_report(const std::vector<double>& alphas, int n, int k) {
    ComponentReport report;
    for (int c = 0; c < k; ++c) {
        ComponentReport::Row row{c, 0.0, 1.0, 0.0};
        for (int i = 0; i < n; ++i) {
            const double a = alphas[static_cast<size_t>(i) * k + c];
            row.marginal += a;
            row.alpha_min = std::min(row.alpha_min, a);
            row.alpha_max = std::max(row.alpha_max, a);
        }
        row.marginal /= std::max(n, 1);
        report.rows.push_back(row);
    }
    std::sort(report.rows.begin(), report.rows.end(),
              [](const auto& a, const auto& b) { return a.marginal > b.marginal; });
    return report;
}

}  // namespace mdnkit
