#include "mdnkit/nn.hpp"

#include <cmath>

namespace mdnkit {

Tensor& ParamStore::add(const std::string& name, Tensor t) {
    if (contains(name)) throw ShapeError("duplicate parameter name: " + name);
    t.set_requires_grad(true);
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
}

Tensor& ParamStore::get(const std::string& name) {
    for (auto& [n, t] : items_) {
        if (n == name) return t;
    }
    throw ShapeError("unknown parameter: " + name);
}

const Tensor& ParamStore::get(const std::string& name) const {
    for (const auto& [n, t] : items_) {
        if (n == name) return t;
    }
    throw ShapeError("unknown parameter: " + name);
}

bool ParamStore::contains(const std::string& name) const {
    for (const auto& [n, t] : items_) {
        if (n == name) return true;
    }
    return false;
}

std::int64_t ParamStore::num_params() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : items_) n += t.size();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& [name, t] : items_) t.zero_grad();
}

void init_dense(Tensor& weight, Tensor& bias, const InitSpec& spec, std::uint64_t tensor_index) {
    RandomStream rng(RandomStream::derive(spec.seed, tensor_index));
    const double std = 1.0 / std::sqrt(static_cast<double>(weight.dim(0)));
    for (auto& w : weight.values()) w = rng.normal(0.0, std);
    if (bias.defined()) {
        for (auto& b : bias.values()) b = 0.0;
    }
}

Tensor gelu(const Tensor& x) {
    constexpr double inv_sqrt2 = 0.7071067811865476;
    return mul_scalar(mul(x, add_scalar(erf(mul_scalar(x, inv_sqrt2)), 1.0)), 0.5);
}

Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
    return add(matmul(x, layer.weight), layer.bias);
}

Tensor MlpBackbone::forward(const Tensor& x) const {
    if (layers.empty()) throw ShapeError("empty MlpBackbone");
    Tensor h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
        h = dense_forward(layers[i], h);
        if (i + 1 < layers.size()) h = gelu(h);
    }
    return h;
}

MlpBackbone make_mlp(int input_dim, const std::vector<int>& hidden_widths, int output_dim,
                     const InitSpec& spec, ParamStore& store, const std::string& prefix) {
    MlpBackbone net;
    std::vector<int> widths;
    widths.push_back(input_dim);
    widths.insert(widths.end(), hidden_widths.begin(), hidden_widths.end());
    widths.push_back(output_dim);
    std::uint64_t tensor_index = 0;
    for (size_t i = 0; i + 1 < widths.size(); ++i) {
        DenseLayer layer;
        layer.weight = Tensor(Shape{widths[i], widths[i + 1]});
        layer.bias = Tensor(Shape{widths[i + 1]});
        init_dense(layer.weight, layer.bias, spec, tensor_index++);
        const std::string stem = prefix + ".layers." + std::to_string(i);
        store.add(stem + ".weight", layer.weight);
        store.add(stem + ".bias", layer.bias);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Tensor GruCell::step(const Tensor& x_t, const Tensor& h) const {
    if (x_t.rank() != 2 || x_t.dim(1) != input_dim) {
        throw ShapeError("gru step: input shape " + shape_str(x_t.shape()) + " does not match input_dim " +
                         std::to_string(input_dim));
    }
    if (h.rank() != 2 || h.dim(1) != hidden_dim || h.dim(0) != x_t.dim(0)) {
        throw ShapeError("gru step: hidden shape " + shape_str(h.shape()) + " does not match");
    }
    Tensor r = sigmoid(add(add(matmul(x_t, w_ir), b_ir), matmul(h, w_hr)));
    Tensor z = sigmoid(add(add(matmul(x_t, w_iz), b_iz), matmul(h, w_hz)));
    Tensor n = tanh(add(add(matmul(x_t, w_in), b_in), mul(r, add(matmul(h, w_hn), b_hn))));
    return add(mul(1.0 - z, h), mul(z, n));
}

GruCell make_gru(int input_dim, int hidden_dim, const InitSpec& spec, ParamStore& store,
                 const std::string& prefix) {
    GruCell cell;
    cell.input_dim = input_dim;
    cell.hidden_dim = hidden_dim;
    std::uint64_t tensor_index = 100;  // distinct stream block from any MLP in the same store
    auto dense = [&](Tensor& w, Tensor& b, int in, bool with_bias, const std::string& name) {
        w = Tensor(Shape{in, hidden_dim});
        Tensor bias;
        if (with_bias) bias = Tensor(Shape{hidden_dim});
        init_dense(w, bias, spec, tensor_index++);
        store.add(prefix + "." + name + ".weight", w);
        if (with_bias) {
            b = bias;
            store.add(prefix + "." + name + ".bias", b);
        }
    };
    dense(cell.w_ir, cell.b_ir, input_dim, true, "ir");
    dense(cell.w_iz, cell.b_iz, input_dim, true, "iz");
    dense(cell.w_in, cell.b_in, input_dim, true, "in");
    Tensor unused;
    dense(cell.w_hr, unused, hidden_dim, false, "hr");
    dense(cell.w_hz, unused, hidden_dim, false, "hz");
    dense(cell.w_hn, cell.b_hn, hidden_dim, true, "hn");
    return cell;
}

}  // namespace mdnkit
