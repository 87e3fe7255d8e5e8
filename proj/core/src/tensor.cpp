#include "mdnkit/tensor.hpp"

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace mdnkit {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

thread_local Tape* t_active_tape = nullptr;

std::atomic<bool> g_debug_checks{false};

bool live(const Tensor& t) { return t.requires_grad() || t.tracked(); }

void check_finite(const char* op, const Tensor& t) {
    for (double v : t.values()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": non-finite value produced");
        }
    }
}

void finalize(const char* op, Tensor& out) {
    if (debug_nan_checks()) check_finite(op, out);
}

// Suffix-broadcast layout: `inner` elements of the smaller operand repeat over
// `outer` leading blocks of the larger one.
struct Broadcast {
    enum Kind { Same, RhsSmall, LhsSmall } kind;
    std::int64_t outer = 1;
    std::int64_t inner = 1;
};

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    size_t off = big.size() - small.size();
    for (size_t i = 0; i < small.size(); ++i) {
        if (small[i] != big[i + off]) return false;
    }
    return true;
}

Broadcast broadcast_of(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return {Broadcast::Same, 1, a.size()};
    if (b.size() == 1 || is_suffix(b.shape(), a.shape())) {
        return {Broadcast::RhsSmall, a.size() / std::max<std::int64_t>(b.size(), 1), b.size()};
    }
    if (a.size() == 1 || is_suffix(a.shape(), b.shape())) {
        return {Broadcast::LhsSmall, b.size() / std::max<std::int64_t>(a.size(), 1), a.size()};
    }
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
}

}  // namespace

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
    node_ = std::make_shared<detail::Node>();
    node_->shape = std::move(shape);
    node_->value.assign(static_cast<size_t>(numel(node_->shape)), fill);
    node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    if (numel(shape) != static_cast<std::int64_t>(values.size())) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    node_ = std::make_shared<detail::Node>();
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor(Shape{}, std::vector<double>{v}, requires_grad);
}

Tensor Tensor::zeros_like(const Tensor& t) { return Tensor(t.shape()); }

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

double Tensor::operator()(int i, int j) const {
    return node_->value[static_cast<size_t>(i) * node_->shape[1] + j];
}

double Tensor::operator()(int i, int j, int k) const {
    const auto& s = node_->shape;
    return node_->value[(static_cast<size_t>(i) * s[1] + j) * s[2] + k];
}

double& Tensor::at(int i, int j) {
    return node_->value[static_cast<size_t>(i) * node_->shape[1] + j];
}

double& Tensor::at(int i, int j, int k) {
    const auto& s = node_->shape;
    return node_->value[(static_cast<size_t>(i) * s[1] + j) * s[2] + k];
}

std::vector<double>& Tensor::grad() {
    node_->ensure_grad();
    return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw NumericError("grad accessed before backward()");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_->grad.size() == node_->value.size()) {
        std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    }
}

Tensor Tensor::clone() const {
    return Tensor(node_->shape, node_->value, false);
}

Tape::Tape() {
    if (t_active_tape) throw NumericError("nested Tape on the same thread");
    t_active_tape = this;
}

Tape::~Tape() { t_active_tape = nullptr; }

Tape* Tape::active() { return t_active_tape; }

void Tape::record(std::function<void()> backward_step, const Tensor& output) {
    steps_.push_back(std::move(backward_step));
    outputs_.push_back(output.node());
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) {
        throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
    }
    // Intermediates start from zero on every call; leaves keep accumulating.
    for (auto& node : outputs_) {
        node->ensure_grad();
        std::fill(node->grad.begin(), node->grad.end(), 0.0);
    }
    auto seed = loss.node();
    seed->ensure_grad();
    seed->grad[0] += 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

void backward(const Tensor& loss) {
    Tape* tape = Tape::active();
    if (!tape) throw NumericError("backward() without an active Tape");
    tape->backward(loss);
}

void set_debug_nan_checks(bool enabled) { g_debug_checks.store(enabled); }
bool debug_nan_checks() { return g_debug_checks.load(std::memory_order_relaxed); }

bool all_finite(const Tensor& t) {
    for (double v : t.values()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

// ---- matmul ----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul needs rank-2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw ShapeError("matmul inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    Tensor out(Shape{m, n});
    {
        MapCM A(a.data(), m, k), B(b.data(), k, n);
        MapM C(out.data(), m, n);
        C.noalias() = A * B;
    }
    if (Tape* tape = Tape::active(); tape && (live(a) || live(b))) {
        auto an = a.node(), bn = b.node(), on = out.node();
        bool need_a = live(a), need_b = live(b);
        tape->record(
            [an, bn, on, m, k, n, need_a, need_b] {
                MapCM A(an->value.data(), m, k), B(bn->value.data(), k, n);
                MapCM G(on->grad.data(), m, n);
                if (need_a) {
                    an->ensure_grad();
                    MapM GA(an->grad.data(), m, k);
                    GA.noalias() += G * B.transpose();
                }
                if (need_b) {
                    bn->ensure_grad();
                    MapM GB(bn->grad.data(), k, n);
                    GB.noalias() += A.transpose() * G;
                }
            },
            out);
        out.node()->tracked = true;
    }
    finalize("matmul", out);
    return out;
}

// ---- binary elementwise -----------------------------------------------------

namespace {

// fwd(x, y) -> value; dfa/dfb give local gradients as functions of the inputs.
template <typename F, typename Da, typename Db>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F fwd, Da dfa, Db dfb) {
    Broadcast bc = broadcast_of(name, a, b);
    const double* pa = a.data();
    const double* pb = b.data();
    Tensor out(bc.kind == Broadcast::LhsSmall ? b.shape() : a.shape());
    double* po = out.data();
    const std::int64_t total = out.size(), inner = bc.inner;
    switch (bc.kind) {
        case Broadcast::Same:
            for (std::int64_t i = 0; i < total; ++i) po[i] = fwd(pa[i], pb[i]);
            break;
        case Broadcast::RhsSmall:
            for (std::int64_t i = 0; i < total; ++i) po[i] = fwd(pa[i], pb[i % inner]);
            break;
        case Broadcast::LhsSmall:
            for (std::int64_t i = 0; i < total; ++i) po[i] = fwd(pa[i % inner], pb[i]);
            break;
    }
    if (Tape* tape = Tape::active(); tape && (live(a) || live(b))) {
        auto an = a.node(), bn = b.node(), on = out.node();
        bool need_a = live(a), need_b = live(b);
        tape->record(
            [an, bn, on, bc, total, inner, need_a, need_b, dfa, dfb] {
                const double* g = on->grad.data();
                const double* va = an->value.data();
                const double* vb = bn->value.data();
                if (need_a) an->ensure_grad();
                if (need_b) bn->ensure_grad();
                double* ga = need_a ? an->grad.data() : nullptr;
                double* gb = need_b ? bn->grad.data() : nullptr;
                for (std::int64_t i = 0; i < total; ++i) {
                    std::int64_t ia = (bc.kind == Broadcast::LhsSmall) ? i % inner : i;
                    std::int64_t ib = (bc.kind == Broadcast::RhsSmall) ? i % inner : i;
                    if (ga) ga[ia] += g[i] * dfa(va[ia], vb[ib]);
                    if (gb) gb[ib] += g[i] * dfb(va[ia], vb[ib]);
                }
            },
            out);
        out.node()->tracked = true;
    }
    finalize(name, out);
    return out;
}

template <typename F, typename D>
Tensor unary_op(const char* name, const Tensor& a, F fwd, D dfdx) {
    Tensor out(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    const std::int64_t n = a.size();
    for (std::int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i]);
    if (Tape* tape = Tape::active(); tape && live(a)) {
        auto an = a.node(), on = out.node();
        tape->record(
            [an, on, n, dfdx] {
                an->ensure_grad();
                const double* g = on->grad.data();
                const double* x = an->value.data();
                const double* y = on->value.data();
                double* ga = an->grad.data();
                for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
            },
            out);
        out.node()->tracked = true;
    }
    finalize(name, out);
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& a, double c) {
    return unary_op(
        "add_scalar", a, [c](double x) { return x + c; },
        [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
    return unary_op(
        "mul_scalar", a, [c](double x) { return x * c; },
        [c](double, double) { return c; });
}

Tensor neg(const Tensor& a) {
    return unary_op(
        "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor square(const Tensor& a) {
    return unary_op(
        "square", a, [](double x) { return x * x; },
        [](double x, double) { return 2.0 * x; });
}

Tensor exp(const Tensor& a) {
    return unary_op(
        "exp", a, [](double x) { return std::exp(x); },
        [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary_op(
        "log", a, [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
    return unary_op(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor erf(const Tensor& a) {
    constexpr double two_over_sqrt_pi = 1.1283791670955126;
    return unary_op(
        "erf", a, [](double x) { return std::erf(x); },
        [two_over_sqrt_pi](double x, double) { return two_over_sqrt_pi * std::exp(-x * x); });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        "sigmoid", a,
        [](double x) {
            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
    return unary_op(
        "softplus", a,
        [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
        [](double x, double) {
            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        });
}

Tensor elu(const Tensor& a) {
    return unary_op(
        "elu", a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : std::exp(x); });
}

// ---- reductions --------------------------------------------------------------

namespace {

struct AxisSplit {
    std::int64_t outer, mid, inner;
    Shape out_shape;
};

AxisSplit split_axis(const char* op, const Tensor& t, int axis) {
    if (axis < 0 || axis >= t.rank()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_str(t.shape()));
    }
    AxisSplit s{1, t.shape()[static_cast<size_t>(axis)], 1, {}};
    for (int i = 0; i < axis; ++i) s.outer *= t.shape()[static_cast<size_t>(i)];
    for (int i = axis + 1; i < t.rank(); ++i) s.inner *= t.shape()[static_cast<size_t>(i)];
    for (int i = 0; i < t.rank(); ++i) {
        if (i != axis) s.out_shape.push_back(t.shape()[static_cast<size_t>(i)]);
    }
    if (s.mid == 0) throw ShapeError(std::string(op) + ": reduction over empty axis");
    return s;
}

Tensor reduce_impl(Reduce op, const Tensor& t, const AxisSplit& s) {
    const char* name = op == Reduce::Sum ? "sum" : (op == Reduce::Max ? "max" : "mean");
    Tensor out(s.out_shape);
    std::vector<std::int64_t> argmax;
    const double* p = t.data();
    double* po = out.data();
    const double scale = op == Reduce::Mean ? 1.0 / static_cast<double>(s.mid) : 1.0;
    if (op == Reduce::Max) argmax.assign(static_cast<size_t>(s.outer * s.inner), 0);
    for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t i = 0; i < s.inner; ++i) {
            const std::int64_t base = o * s.mid * s.inner + i;
            if (op == Reduce::Max) {
                double best = p[base];
                std::int64_t best_m = 0;
                for (std::int64_t m = 1; m < s.mid; ++m) {
                    double v = p[base + m * s.inner];
                    if (v > best) {
                        best = v;
                        best_m = m;
                    }
                }
                po[o * s.inner + i] = best;
                argmax[static_cast<size_t>(o * s.inner + i)] = best_m;
            } else {
                double acc = 0.0;
                for (std::int64_t m = 0; m < s.mid; ++m) acc += p[base + m * s.inner];
                po[o * s.inner + i] = acc * scale;
            }
        }
    }
    if (Tape* tape = Tape::active(); tape && live(t)) {
        auto tn = t.node(), on = out.node();
        tape->record(
            [tn, on, s, op, scale, argmax = std::move(argmax)] {
                tn->ensure_grad();
                const double* g = on->grad.data();
                double* gt = tn->grad.data();
                for (std::int64_t o = 0; o < s.outer; ++o) {
                    for (std::int64_t i = 0; i < s.inner; ++i) {
                        const std::int64_t base = o * s.mid * s.inner + i;
                        const double gv = g[o * s.inner + i];
                        if (op == Reduce::Max) {
                            gt[base + argmax[static_cast<size_t>(o * s.inner + i)] * s.inner] += gv;
                        } else {
                            for (std::int64_t m = 0; m < s.mid; ++m) {
                                gt[base + m * s.inner] += gv * scale;
                            }
                        }
                    }
                }
            },
            out);
        out.node()->tracked = true;
    }
    finalize(name, out);
    return out;
}

}  // namespace

Tensor reduce(Reduce op, const Tensor& t, int axis) {
    const char* name = op == Reduce::Sum ? "sum" : (op == Reduce::Max ? "max" : "mean");
    return reduce_impl(op, t, split_axis(name, t, axis));
}

Tensor reduce(Reduce op, const Tensor& t) {
    if (t.size() == 0) throw ShapeError("reduction over empty tensor");
    AxisSplit s{1, t.size(), 1, {}};
    return reduce_impl(op, t, s);
}

Tensor sum(const Tensor& t) { return reduce(Reduce::Sum, t); }
Tensor sum(const Tensor& t, int axis) { return reduce(Reduce::Sum, t, axis); }
Tensor mean(const Tensor& t) { return reduce(Reduce::Mean, t); }
Tensor mean(const Tensor& t, int axis) { return reduce(Reduce::Mean, t, axis); }
Tensor max(const Tensor& t, int axis) { return reduce(Reduce::Max, t, axis); }

Tensor logsumexp(const Tensor& t, int axis) {
    AxisSplit s = split_axis("logsumexp", t, axis);
    Tensor out(s.out_shape);
    const double* p = t.data();
    double* po = out.data();
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t i = 0; i < s.inner; ++i) {
            const std::int64_t base = o * s.mid * s.inner + i;
            double m = p[base];
            for (std::int64_t k = 1; k < s.mid; ++k) m = std::max(m, p[base + k * s.inner]);
            if (m == neg_inf) {
                po[o * s.inner + i] = neg_inf;
                continue;
            }
            double acc = 0.0;
            for (std::int64_t k = 0; k < s.mid; ++k) acc += std::exp(p[base + k * s.inner] - m);
            po[o * s.inner + i] = m + std::log(acc);
        }
    }
    if (Tape* tape = Tape::active(); tape && live(t)) {
        auto tn = t.node(), on = out.node();
        tape->record(
            [tn, on, s] {
                tn->ensure_grad();
                const double* g = on->grad.data();
                const double* y = on->value.data();
                const double* p = tn->value.data();
                double* gt = tn->grad.data();
                for (std::int64_t o = 0; o < s.outer; ++o) {
                    for (std::int64_t i = 0; i < s.inner; ++i) {
                        const double yo = y[o * s.inner + i];
                        if (!std::isfinite(yo)) continue;  // all -inf: zero gradient
                        const double gv = g[o * s.inner + i];
                        const std::int64_t base = o * s.mid * s.inner + i;
                        for (std::int64_t k = 0; k < s.mid; ++k) {
                            gt[base + k * s.inner] += gv * std::exp(p[base + k * s.inner] - yo);
                        }
                    }
                }
            },
            out);
        out.node()->tracked = true;
    }
    // NaN checks would reject legitimate -inf outputs here, so only NaN is fatal.
    if (debug_nan_checks()) {
        for (double v : out.values()) {
            if (std::isnan(v)) throw NumericError("logsumexp: NaN produced");
        }
    }
    return out;
}

// ---- structural ---------------------------------------------------------------

Tensor reshape(const Tensor& t, Shape new_shape) {
    if (numel(new_shape) != t.size()) {
        throw ShapeError("reshape " + shape_str(t.shape()) + " -> " + shape_str(new_shape));
    }
    Tensor out(std::move(new_shape), t.values());
    if (Tape* tape = Tape::active(); tape && live(t)) {
        auto tn = t.node(), on = out.node();
        tape->record(
            [tn, on] {
                tn->ensure_grad();
                for (size_t i = 0; i < tn->grad.size(); ++i) tn->grad[i] += on->grad[i];
            },
            out);
        out.node()->tracked = true;
    }
    return out;
}

Tensor expand_last(const Tensor& t, int k) {
    if (k <= 0) throw ShapeError("expand_last needs k > 0");
    Shape out_shape = t.shape();
    out_shape.push_back(k);
    Tensor out(out_shape);
    const double* p = t.data();
    double* po = out.data();
    const std::int64_t n = t.size();
    for (std::int64_t i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) po[i * k + j] = p[i];
    }
    if (Tape* tape = Tape::active(); tape && live(t)) {
        auto tn = t.node(), on = out.node();
        tape->record(
            [tn, on, n, k] {
                tn->ensure_grad();
                const double* g = on->grad.data();
                for (std::int64_t i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < k; ++j) acc += g[i * k + j];
                    tn->grad[static_cast<size_t>(i)] += acc;
                }
            },
            out);
        out.node()->tracked = true;
    }
    return out;
}

Tensor expand_axis1(const Tensor& t, int k) {
    if (t.rank() < 1) throw ShapeError("expand_axis1 needs rank >= 1");
    if (k <= 0) throw ShapeError("expand_axis1 needs k > 0");
    const std::int64_t b = t.dim(0);
    const std::int64_t inner = t.size() / std::max<std::int64_t>(b, 1);
    Shape out_shape;
    out_shape.push_back(static_cast<int>(b));
    out_shape.push_back(k);
    for (size_t i = 1; i < t.shape().size(); ++i) out_shape.push_back(t.shape()[i]);
    Tensor out(out_shape);
    const double* p = t.data();
    double* po = out.data();
    for (std::int64_t r = 0; r < b; ++r) {
        for (int j = 0; j < k; ++j) {
            std::memcpy(po + (r * k + j) * inner, p + r * inner,
                        static_cast<size_t>(inner) * sizeof(double));
        }
    }
    if (Tape* tape = Tape::active(); tape && live(t)) {
        auto tn = t.node(), on = out.node();
        tape->record(
            [tn, on, b, k, inner] {
                tn->ensure_grad();
                const double* g = on->grad.data();
                double* gt = tn->grad.data();
                for (std::int64_t r = 0; r < b; ++r) {
                    for (int j = 0; j < k; ++j) {
                        const double* gsrc = g + (r * k + j) * inner;
                        double* gdst = gt + r * inner;
                        for (std::int64_t i = 0; i < inner; ++i) gdst[i] += gsrc[i];
                    }
                }
            },
            out);
        out.node()->tracked = true;
    }
    return out;
}

Tensor slice_last(const Tensor& t, int j0, int j1) {
    if (t.rank() < 1) throw ShapeError("slice_last needs rank >= 1");
    const int last = t.shape().back();
    if (j0 < 0 || j1 > last || j0 >= j1) {
        throw ShapeError("slice_last [" + std::to_string(j0) + "," + std::to_string(j1) +
                         ") out of range for " + shape_str(t.shape()));
    }
    const std::int64_t width = j1 - j0;
    const std::int64_t outer = t.size() / last;
    Shape out_shape = t.shape();
    out_shape.back() = static_cast<int>(width);
    Tensor out(out_shape);
    const double* p = t.data();
    double* po = out.data();
    for (std::int64_t o = 0; o < outer; ++o) {
        std::memcpy(po + o * width, p + o * last + j0, static_cast<size_t>(width) * sizeof(double));
    }
    if (Tape* tape = Tape::active(); tape && live(t)) {
        auto tn = t.node(), on = out.node();
        tape->record(
            [tn, on, outer, width, last, j0] {
                tn->ensure_grad();
                const double* g = on->grad.data();
                double* gt = tn->grad.data();
                for (std::int64_t o = 0; o < outer; ++o) {
                    for (std::int64_t j = 0; j < width; ++j) gt[o * last + j0 + j] += g[o * width + j];
                }
            },
            out);
        out.node()->tracked = true;
    }
    return out;
}

Tensor gather_rows(const Tensor& t, const std::vector<std::int64_t>& rows) {
    if (t.rank() < 1) throw ShapeError("gather_rows needs rank >= 1");
    if (live(t)) throw ShapeError("gather_rows is not differentiable; use it on data tensors");
    const std::int64_t n = t.dim(0);
    const std::int64_t inner = t.size() / std::max<std::int64_t>(n, 1);
    Shape out_shape = t.shape();
    out_shape[0] = static_cast<int>(rows.size());
    Tensor out(out_shape);
    const double* p = t.data();
    double* po = out.data();
    for (size_t r = 0; r < rows.size(); ++r) {
        const std::int64_t src = rows[r];
        if (src < 0 || src >= n) throw ShapeError("gather_rows: row index out of range");
        std::memcpy(po + static_cast<std::int64_t>(r) * inner, p + src * inner,
                    static_cast<size_t>(inner) * sizeof(double));
    }
    return out;
}

}  // namespace mdnkit
