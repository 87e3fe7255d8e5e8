#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "mdnkit/errors.hpp"

namespace mdnkit {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;    // lazily allocated, same length as value
    bool requires_grad = false;  // user-marked leaf
    bool tracked = false;        // produced by a recorded op on the active tape

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

// Dense row-major tensor of doubles with optional gradient tracking.
// Copying a Tensor copies the handle; both handles see the same storage.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor zeros_like(const Tensor& t);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::int64_t size() const { return static_cast<std::int64_t>(node_->value.size()); }
    int dim(int axis) const { return node_->shape[static_cast<size_t>(axis)]; }

    double* data() { return node_->value.data(); }
    const double* data() const { return node_->value.data(); }
    std::vector<double>& values() { return node_->value; }
    const std::vector<double>& values() const { return node_->value; }

    double item() const;  // scalar tensors only
    double operator()(int i) const { return node_->value[static_cast<size_t>(i)]; }
    double operator()(int i, int j) const;
    double operator()(int i, int j, int k) const;
    double& at(int i) { return node_->value[static_cast<size_t>(i)]; }
    double& at(int i, int j);
    double& at(int i, int j, int k);

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }
    bool tracked() const { return node_->tracked; }

    bool has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void zero_grad();

    Tensor clone() const;  // deep copy of values (fresh leaf, no grad)

    std::shared_ptr<detail::Node> node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

// Dynamic per-pass op record. Constructing a Tape makes it the active tape for
// the current thread; ops executed while it is active record their backward
// rules onto it. One tape per training thread; tapes never nest.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    void record(std::function<void()> backward_step, const Tensor& output);
    std::size_t num_ops() const { return steps_.size(); }

    // Reverse accumulation from a scalar loss. Intermediate grads are reset on
    // every call; leaf grads accumulate across calls.
    void backward(const Tensor& loss);

private:
    std::vector<std::function<void()>> steps_;
    std::vector<std::shared_ptr<detail::Node>> outputs_;
};

// Convenience wrapper over Tape::active()->backward(loss).
void backward(const Tensor& loss);

// Debug mode: assert finiteness after every primitive (throws NumericError).
void set_debug_nan_checks(bool enabled);
bool debug_nan_checks();

// ---- primitives -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);  // [m x k] * [k x n]

// Binary elementwise ops accept equal shapes, or a pair where one operand's
// shape is a trailing suffix of the other's (covers scalar-with-tensor and
// bias broadcasting over batch dimensions).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor erf(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);  // log(1+exp(x)), overflow-safe
Tensor elu(const Tensor& a);       // x > 0 ? x : exp(x) - 1

enum class Reduce { Sum, Max, Mean };

Tensor reduce(Reduce op, const Tensor& t);            // all elements -> scalar
Tensor reduce(Reduce op, const Tensor& t, int axis);  // removes `axis`

Tensor sum(const Tensor& t);
Tensor sum(const Tensor& t, int axis);
Tensor mean(const Tensor& t);
Tensor mean(const Tensor& t, int axis);
Tensor max(const Tensor& t, int axis);  // ties: subgradient to first maximum

// Overflow-safe log-sum-exp along `axis`; all -inf inputs give -inf, not NaN.
Tensor logsumexp(const Tensor& t, int axis);

// Structural ops.
Tensor reshape(const Tensor& t, Shape new_shape);
Tensor expand_last(const Tensor& t, int k);           // [s...] -> [s..., k]
Tensor expand_axis1(const Tensor& t, int k);          // [b, s...] -> [b, k, s...]
Tensor slice_last(const Tensor& t, int j0, int j1);   // half-open along last axis

// Operators for readability in model code.
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double c) { return add_scalar(a, c); }
inline Tensor operator+(double c, const Tensor& a) { return add_scalar(a, c); }
inline Tensor operator-(const Tensor& a, double c) { return add_scalar(a, -c); }
inline Tensor operator-(double c, const Tensor& a) { return add_scalar(neg(a), c); }
inline Tensor operator*(const Tensor& a, double c) { return mul_scalar(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul_scalar(a, c); }
inline Tensor operator/(const Tensor& a, double c) { return mul_scalar(a, 1.0 / c); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// Row gather for minibatching; inputs must not be under gradient tracking.
Tensor gather_rows(const Tensor& t, const std::vector<std::int64_t>& rows);

bool all_finite(const Tensor& t);

}  // namespace mdnkit
