#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mdnkit/random.hpp"
#include "mdnkit/tensor.hpp"

namespace mdnkit {

// Ordered, named collection of trainable tensors. Insertion order is the
// canonical order for optimizer state, checkpoints, and gradient checks.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::size_t size() const { return items_.size(); }
    std::pair<std::string, Tensor>& operator[](std::size_t i) { return items_[i]; }
    const std::pair<std::string, Tensor>& operator[](std::size_t i) const { return items_[i]; }

    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    std::int64_t num_params() const;
    void zero_grads();

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

struct InitSpec {
    enum class Scheme { LeCunNormal };
    Scheme scheme = Scheme::LeCunNormal;
    std::uint64_t seed = 0;
};

// weight ~ N(0, 1/fan_in), bias = 0; independent stream per tensor.
void init_dense(Tensor& weight, Tensor& bias, const InitSpec& spec, std::uint64_t tensor_index);

// Exact GeLU: 0.5 * x * (1 + erf(x / sqrt(2))).
Tensor gelu(const Tensor& x);

struct DenseLayer {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out]
};

Tensor dense_forward(const DenseLayer& layer, const Tensor& x);

// Stack of dense layers with GeLU between layers and identity after the last.
struct MlpBackbone {
    std::vector<DenseLayer> layers;

    Tensor forward(const Tensor& x) const;
    int input_dim() const { return layers.front().weight.dim(0); }
    int output_dim() const { return layers.back().weight.dim(1); }
};

// Builds [in -> hidden... -> out] and registers parameters into `store`
// under `prefix`. Widths chain: hidden layers all get GeLU, the final layer
// is a plain affine map.
MlpBackbone make_mlp(int input_dim, const std::vector<int>& hidden_widths, int output_dim,
                     const InitSpec& spec, ParamStore& store, const std::string& prefix = "mlp");

// Gated recurrent unit with separate input/hidden projections. The three
// input projections carry biases; of the hidden projections only the
// candidate does. Update rule:
//   r  = sigmoid(x W_ir + b_ir + h W_hr)
//   z  = sigmoid(x W_iz + b_iz + h W_hz)
//   n  = tanh(x W_in + b_in + r * (h W_hn + b_hn))
//   h' = (1 - z) * h + z * n
struct GruCell {
    int input_dim = 0;
    int hidden_dim = 0;
    Tensor w_ir, b_ir, w_iz, b_iz, w_in, b_in;  // [in x H], [H]
    Tensor w_hr, w_hz;                          // [H x H]
    Tensor w_hn, b_hn;                          // [H x H], [H]

    Tensor step(const Tensor& x_t, const Tensor& h) const;
};

GruCell make_gru(int input_dim, int hidden_dim, const InitSpec& spec, ParamStore& store,
                 const std::string& prefix = "gru");

}  // namespace mdnkit
