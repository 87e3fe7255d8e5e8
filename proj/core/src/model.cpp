#include "mdnkit/model.hpp"

namespace mdnkit {

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::MdnMlp: return "mdn";
        case ModelKind::MseMlp: return "mse";
        case ModelKind::RnnMdn: return "rnn_mdn";
    }
    throw ConfigError("unknown model kind");
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "mdn") return ModelKind::MdnMlp;
    if (name == "mse") return ModelKind::MseMlp;
    if (name == "rnn_mdn") return ModelKind::RnnMdn;
    throw ConfigError("unknown model kind: " + name);
}

int ModelSpec::head_width() const {
    return kind == ModelKind::MseMlp ? target_dim : k * (1 + 2 * target_dim);
}

Model Model::build(const ModelSpec& spec, std::uint64_t init_seed) {
    Model m;
    m.spec = spec;
    InitSpec init{InitSpec::Scheme::LeCunNormal, init_seed};
    if (spec.kind == ModelKind::RnnMdn) {
        if (spec.hidden.size() != 1) {
            throw ConfigError("rnn_mdn needs exactly one hidden width (the GRU hidden dim)");
        }
        m.gru = make_gru(spec.input_dim, spec.hidden[0], init, m.params);
        m.rnn_head.weight = Tensor(Shape{spec.hidden[0], spec.head_width()});
        m.rnn_head.bias = Tensor(Shape{spec.head_width()});
        init_dense(m.rnn_head.weight, m.rnn_head.bias, init, 200);
        m.params.add("head.weight", m.rnn_head.weight);
        m.params.add("head.bias", m.rnn_head.bias);
    } else {
        m.mlp = make_mlp(spec.input_dim, spec.hidden, spec.head_width(), init, m.params);
    }
    return m;
}

MixtureParams Model::forward_mixture(const Tensor& x) const {
    if (spec.kind != ModelKind::MdnMlp) throw ShapeError("forward_mixture needs an mdn model");
    return transform_head(mlp.forward(x), spec.k, spec.target_dim, spec.scale_floor,
                          spec.scale_transform);
}

Tensor Model::forward_point(const Tensor& x) const {
    if (spec.kind != ModelKind::MseMlp) throw ShapeError("forward_point needs an mse model");
    return mlp.forward(x);
}

MixtureParams Model::forward_rnn_step(const Tensor& x_t, Tensor& hidden) const {
    if (spec.kind != ModelKind::RnnMdn) throw ShapeError("forward_rnn_step needs an rnn_mdn model");
    hidden = gru.step(x_t, hidden);
    return transform_head(dense_forward(rnn_head, hidden), spec.k, spec.target_dim,
                          spec.scale_floor, spec.scale_transform);
}

Tensor Model::initial_hidden(int batch) const {
    return Tensor(Shape{batch, spec.hidden[0]});
}

Tensor mdn_loss(const Model& model, const Tensor& x, const Tensor& y) {
    return mdn_nll(model.forward_mixture(x), y);
}

Tensor mse_loss(const Model& model, const Tensor& x, const Tensor& y) {
    return mean(square(sub(model.forward_point(x), y)));
}

}  // namespace mdnkit
