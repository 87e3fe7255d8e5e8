#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdnkit/mixture.hpp"
#include "mdnkit/nn.hpp"
#include "mdnkit/tensor.hpp"

namespace mdnkit {

enum class ModelKind { MdnMlp, MseMlp, RnnMdn };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

// Serializable architecture descriptor; enough to rebuild the network and
// validate a checkpoint payload against it.
struct ModelSpec {
    ModelKind kind = ModelKind::MdnMlp;
    int input_dim = 1;
    int target_dim = 1;            // d
    std::vector<int> hidden;       // MLP hidden widths, or {hidden_dim} for RnnMdn
    int k = 1;                     // mixture components (ignored by MseMlp)
    double scale_floor = 1e-6;
    ScaleTransform scale_transform = ScaleTransform::Softplus;

    int head_width() const;
};

struct Model {
    ModelSpec spec;
    ParamStore params;
    MlpBackbone mlp;       // MdnMlp / MseMlp
    GruCell gru;           // RnnMdn
    DenseLayer rnn_head;   // RnnMdn

    static Model build(const ModelSpec& spec, std::uint64_t init_seed);

    // x: [batch x input_dim].
    MixtureParams forward_mixture(const Tensor& x) const;                 // MdnMlp
    Tensor forward_point(const Tensor& x) const;                          // MseMlp
    MixtureParams forward_rnn_step(const Tensor& x_t, Tensor& hidden) const;  // RnnMdn
    Tensor initial_hidden(int batch) const;

    std::int64_t num_params() const { return params.num_params(); }
};

// Training losses. X rows pair with Y rows.
Tensor mdn_loss(const Model& model, const Tensor& x, const Tensor& y);
Tensor mse_loss(const Model& model, const Tensor& x, const Tensor& y);

}  // namespace mdnkit
