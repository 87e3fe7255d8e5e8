#pragma once

#include <vector>

#include "mdnkit/random.hpp"
#include "mdnkit/tensor.hpp"

namespace mdnkit {

// How the raw scale head becomes a positive standard deviation.
enum class ScaleTransform {
    Softplus,  // log(1 + exp(z)) + eps
    Elu1,      // 1 + elu(z) + eps
};

// Per-input diagonal-Gaussian mixture parameters. Weights are kept as raw
// logits; losses never materialize the simplex.
struct MixtureParams {
    Tensor logits;  // [batch x K]
    Tensor means;   // [batch x K x d]
    Tensor scales;  // [batch x K x d], strictly positive

    int batch() const { return logits.dim(0); }
    int components() const { return logits.dim(1); }
    int target_dim() const { return means.dim(2); }
};

// Splits a raw head output [batch x K(1+2d)] into logits / means / scales and
// applies the positivity transform to the scales (softplus or 1+ELU, plus the
// floor epsilon). Layout: [logits (K) | means (K*d) | raw scales (K*d)].
MixtureParams transform_head(const Tensor& raw, int k, int d, double scale_floor = 1e-6,
                             ScaleTransform transform = ScaleTransform::Softplus);

// Differentiable per-sample negative log-likelihood, entirely in log space:
// nll_i = -LogSumExp_k [ logsoftmax(z_alpha)_k + log N(y_i | mu_k, sigma_k^2) ].
Tensor per_sample_nll(const MixtureParams& params, const Tensor& y);

// Mean of per_sample_nll over the batch (the training loss).
Tensor mdn_nll(const MixtureParams& params, const Tensor& y);

// Naive direct-sum density p(y|x) = sum_k alpha_k N(y | mu_k, sigma_k^2),
// evaluated with materialized weights. This is the independent second route
// against the log-space NLL; keep it naive.
std::vector<double> mdn_density(const MixtureParams& params, const Tensor& y);

// Materialized mixture weights [batch x K] (softmax of logits; value only).
std::vector<double> mixture_weights(const MixtureParams& params);

// Zeroes weights below `threshold` and renormalizes the survivors.
// Throws if threshold >= max weight (nothing would survive).
std::vector<double> prune_weights(const std::vector<double>& alpha, double threshold);

// Shannon entropy -sum alpha ln alpha with 0 ln 0 := 0.
double mixture_entropy(const std::vector<double>& alpha);

// n draws from the mixture of batch row `row`: component ~ Categorical(alpha
// after optional pruning), then a diagonal Gaussian draw. Returns [n x d].
Tensor mdn_sample(const MixtureParams& params, int row, RandomStream& rng, int n,
                  double prune_threshold = 0.0);

// Single draw convenience used by rollouts; writes d values into `out`.
void mdn_sample_one(const MixtureParams& params, int row, RandomStream& rng, double* out,
                    double prune_threshold = 0.0);

// Components of a trained head ranked by marginal probability over a set of
// inputs, with the weight-field spread each component shows over those inputs.
struct ComponentReport {
    struct Row {
        int component;
        double marginal;   // mean alpha_k over inputs
        double alpha_min;  // extremes of alpha_k over inputs
        double alpha_max;
    };
    std::vector<Row> rows;  // sorted by marginal, descending
};

// `alphas` holds materialized weights for a batch of inputs, [n x K].
ComponentReport component_report(const std::vector<double>& alphas, int n, int k);

}  // namespace mdnkit
