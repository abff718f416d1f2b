#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/rng.hpp"

// Dense double-precision tensors with reverse-mode automatic differentiation.
//
// Operations executed while a Tape is active (see TapeScope) record adjoint
// closures; backward(loss, tape) replays them in exact reverse execution
// order. Gradients accumulate into leaf buffers until explicitly zeroed, so
// parameters shared between several forward paths receive the sum of all
// path contributions.
//
// Reductions run in fixed row-major order, so forward results are bitwise
// reproducible for identical inputs. A tape and the tensors recorded on it
// belong to one logical thread; distinct tapes may run concurrently.

namespace sgm {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int e : s) n *= static_cast<std::size_t>(e);
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad; // sized like data iff requires_grad
    bool requires_grad = false;
};

} // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return make(std::move(shape), 0.0, requires_grad);
    }

    static Tensor full(Shape shape, double value, bool requires_grad = false) {
        return make(std::move(shape), value, requires_grad);
    }

    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false) {
        if (shape_numel(shape) != data.size())
            throw ShapeError("from_data: shape " + shape_str(shape) + " does not hold " +
                             std::to_string(data.size()) + " values");
        Tensor t;
        t.node_ = std::make_shared<detail::TensorNode>();
        t.node_->shape = std::move(shape);
        t.node_->data = std::move(data);
        t.set_requires_grad(requires_grad);
        return t;
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return from_data({1}, {value}, requires_grad);
    }

    static Tensor identity(int n, bool requires_grad = false) {
        Tensor t = zeros({n, n}, requires_grad);
        for (int i = 0; i < n; ++i) t.node_->data[static_cast<std::size_t>(i) * n + i] = 1.0;
        return t;
    }

    // Entries drawn uniformly from [lo, hi) in row-major order.
    static Tensor uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (double& v : t.node_->data) v = rng.uniform(lo, hi);
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim() const { return static_cast<int>(node_->shape.size()); }
    int extent(int axis) const { return node_->shape[static_cast<std::size_t>(axis)]; }
    std::size_t numel() const { return node_->data.size(); }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }

    bool requires_grad() const { return node_->requires_grad; }

    void set_requires_grad(bool on) {
        node_->requires_grad = on;
        if (on)
            node_->grad.assign(node_->data.size(), 0.0);
        else
            node_->grad.clear();
    }

    std::vector<double>& grad() {
        if (!node_->requires_grad) throw ContractError("grad(): tensor does not require gradients");
        return node_->grad;
    }
    const std::vector<double>& grad() const {
        if (!node_->requires_grad) throw ContractError("grad(): tensor does not require gradients");
        return node_->grad;
    }

    void zero_grad() {
        if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    }

    // Scalar convenience accessor.
    double value() const {
        if (numel() != 1) throw ContractError("value(): tensor " + shape_str(shape()) + " is not scalar");
        return node_->data[0];
    }

    double at(int i) const { return node_->data[static_cast<std::size_t>(i)]; }
    double at(int i, int j) const {
        return node_->data[static_cast<std::size_t>(i) * extent(1) + j];
    }
    double at(int i, int j, int k) const {
        return node_->data[(static_cast<std::size_t>(i) * extent(1) + j) * extent(2) + k];
    }

    detail::TensorNode* node() const { return node_.get(); }

private:
    static Tensor make(Shape shape, double fill, bool requires_grad) {
        Tensor t;
        t.node_ = std::make_shared<detail::TensorNode>();
        t.node_->data.assign(shape_numel(shape), fill);
        t.node_->shape = std::move(shape);
        t.set_requires_grad(requires_grad);
        return t;
    }

    std::shared_ptr<detail::TensorNode> node_;
};

// --------------------------------------------------------------------------
// Tape
// --------------------------------------------------------------------------

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::function<void()> adjoint) { ops_.push_back(std::move(adjoint)); }

    std::size_t num_ops() const { return ops_.size(); }
    bool consumed() const { return consumed_; }

    friend void backward(const Tensor& loss, Tape& tape);

private:
    std::vector<std::function<void()>> ops_;
    bool consumed_ = false;
};

namespace detail {
inline thread_local Tape* g_active_tape = nullptr;
}

inline Tape* active_tape() { return detail::g_active_tape; }

// Makes a tape the recording target for the enclosing scope.
class TapeScope {
public:
    explicit TapeScope(Tape& tape) : prev_(detail::g_active_tape) { detail::g_active_tape = &tape; }
    ~TapeScope() { detail::g_active_tape = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

namespace detail {

// True when the op must record an adjoint: a tape is active and at least one
// input participates in differentiation.
inline bool recording(std::initializer_list<const Tensor*> inputs) {
    if (!g_active_tape) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

} // namespace detail

inline void backward(const Tensor& loss, Tape& tape) {
    if (loss.numel() != 1)
        throw ContractError("backward: loss has shape " + shape_str(loss.shape()) + ", expected a scalar");
    if (tape.consumed_) throw ContractError("backward: tape already consumed by a previous backward pass");
    tape.consumed_ = true;
    if (loss.requires_grad()) loss.node()->grad[0] += 1.0;
    for (auto it = tape.ops_.rbegin(); it != tape.ops_.rend(); ++it) (*it)();
}

// --------------------------------------------------------------------------
// Elementwise operations
// --------------------------------------------------------------------------

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (detail::recording({&a, &b})) {
        out.set_requires_grad(true);
        active_tape()->record([a, b, out] {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.node()->grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.node()->grad;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

inline Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
    check_same_shape("elementwise_mul", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (detail::recording({&a, &b})) {
        out.set_requires_grad(true);
        active_tape()->record([a, b, out] {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.node()->grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.data()[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.node()->grad;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.data()[i];
            }
        });
    }
    return out;
}

inline Tensor scalar_mul(const Tensor& x, double c) {
    Tensor out = Tensor::zeros(x.shape());
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = c * x.data()[i];
    if (detail::recording({&x})) {
        out.set_requires_grad(true);
        active_tape()->record([x, out, c] {
            const auto& g = out.grad();
            auto& gx = x.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += c * g[i];
        });
    }
    return out;
}

// Subgradient at 0 is 0, so masked/inactive units pass exactly-zero adjoints.
inline Tensor relu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    if (detail::recording({&x})) {
        out.set_requires_grad(true);
        active_tape()->record([x, out] {
            const auto& g = out.grad();
            auto& gx = x.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x.data()[i] > 0.0) gx[i] += g[i];
        });
    }
    return out;
}

inline Tensor leaky_relu(const Tensor& x, double slope) {
    Tensor out = Tensor::zeros(x.shape());
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i)
        out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : slope * x.data()[i];
    if (detail::recording({&x})) {
        out.set_requires_grad(true);
        active_tape()->record([x, out, slope] {
            const auto& g = out.grad();
            auto& gx = x.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += (x.data()[i] > 0.0 ? 1.0 : slope) * g[i];
        });
    }
    return out;
}

// Elementwise gate by a boolean buffer. Gated-off positions are exact 0.0 in
// the output and are skipped in the adjoint, so their input gradient entries
// stay exactly zero.
inline Tensor apply_mask(const Tensor& x, const std::vector<std::uint8_t>& mask) {
    if (mask.size() != x.numel())
        throw ShapeError("apply_mask: mask holds " + std::to_string(mask.size()) +
                         " cells, tensor is " + shape_str(x.shape()));
    Tensor out = Tensor::zeros(x.shape());
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = mask[i] ? x.data()[i] : 0.0;
    if (detail::recording({&x})) {
        out.set_requires_grad(true);
        active_tape()->record([x, out, mask] {
            const auto& g = out.grad();
            auto& gx = x.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (mask[i]) gx[i] += g[i];
        });
    }
    return out;
}

// --------------------------------------------------------------------------
// Linear algebra
// --------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.dim() != 2 || b.dim() != 2 || a.extent(1) != b.extent(0))
        throw ShapeError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
    const int m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int q = 0; q < k; ++q)
                s += a.data()[static_cast<std::size_t>(i) * k + q] *
                     b.data()[static_cast<std::size_t>(q) * n + j];
            out.data()[static_cast<std::size_t>(i) * n + j] = s;
        }
    if (detail::recording({&a, &b})) {
        out.set_requires_grad(true);
        active_tape()->record([a, b, out, m, k, n] {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.node()->grad;
                for (int i = 0; i < m; ++i)
                    for (int q = 0; q < k; ++q) {
                        double s = 0.0;
                        for (int j = 0; j < n; ++j)
                            s += g[static_cast<std::size_t>(i) * n + j] *
                                 b.data()[static_cast<std::size_t>(q) * n + j];
                        ga[static_cast<std::size_t>(i) * k + q] += s;
                    }
            }
            if (b.requires_grad()) {
                auto& gb = b.node()->grad;
                for (int q = 0; q < k; ++q)
                    for (int j = 0; j < n; ++j) {
                        double s = 0.0;
                        for (int i = 0; i < m; ++i)
                            s += a.data()[static_cast<std::size_t>(i) * k + q] *
                                 g[static_cast<std::size_t>(i) * n + j];
                        gb[static_cast<std::size_t>(q) * n + j] += s;
                    }
            }
        });
    }
    return out;
}

inline Tensor matvec(const Tensor& a, const Tensor& v) {
    if (a.dim() != 2 || v.dim() != 1 || a.extent(1) != v.extent(0))
        throw ShapeError("matvec: cannot apply " + shape_str(a.shape()) + " to " +
                         shape_str(v.shape()));
    const int m = a.extent(0), k = a.extent(1);
    Tensor out = Tensor::zeros({m});
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int q = 0; q < k; ++q) s += a.data()[static_cast<std::size_t>(i) * k + q] * v.data()[q];
        out.data()[i] = s;
    }
    if (detail::recording({&a, &v})) {
        out.set_requires_grad(true);
        active_tape()->record([a, v, out, m, k] {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.node()->grad;
                for (int i = 0; i < m; ++i)
                    for (int q = 0; q < k; ++q)
                        ga[static_cast<std::size_t>(i) * k + q] += g[i] * v.data()[q];
            }
            if (v.requires_grad()) {
                auto& gv = v.node()->grad;
                for (int q = 0; q < k; ++q) {
                    double s = 0.0;
                    for (int i = 0; i < m; ++i) s += a.data()[static_cast<std::size_t>(i) * k + q] * g[i];
                    gv[q] += s;
                }
            }
        });
    }
    return out;
}

inline Tensor vecmat(const Tensor& v, const Tensor& w) {
    if (v.dim() != 1 || w.dim() != 2 || v.extent(0) != w.extent(0))
        throw ShapeError("vecmat: cannot apply " + shape_str(v.shape()) + " to " +
                         shape_str(w.shape()));
    const int k = w.extent(0), n = w.extent(1);
    Tensor out = Tensor::zeros({n});
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int q = 0; q < k; ++q) s += v.data()[q] * w.data()[static_cast<std::size_t>(q) * n + j];
        out.data()[j] = s;
    }
    if (detail::recording({&v, &w})) {
        out.set_requires_grad(true);
        active_tape()->record([v, w, out, k, n] {
            const auto& g = out.grad();
            if (v.requires_grad()) {
                auto& gv = v.node()->grad;
                for (int q = 0; q < k; ++q) {
                    double s = 0.0;
                    for (int j = 0; j < n; ++j) s += w.data()[static_cast<std::size_t>(q) * n + j] * g[j];
                    gv[q] += s;
                }
            }
            if (w.requires_grad()) {
                auto& gw = w.node()->grad;
                for (int q = 0; q < k; ++q)
                    for (int j = 0; j < n; ++j)
                        gw[static_cast<std::size_t>(q) * n + j] += v.data()[q] * g[j];
            }
        });
    }
    return out;
}

// x[T x Cin] * W[Cin x Cout] + b broadcast over rows.
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.dim() != 2 || w.dim() != 2 || b.dim() != 1 || x.extent(1) != w.extent(0) ||
        b.extent(0) != w.extent(1))
        throw ShapeError("linear: incompatible shapes " + shape_str(x.shape()) + ", " +
                         shape_str(w.shape()) + ", " + shape_str(b.shape()));
    const int t = x.extent(0), ci = x.extent(1), co = w.extent(1);
    Tensor out = Tensor::zeros({t, co});
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < co; ++j) {
            double s = b.data()[j];
            for (int q = 0; q < ci; ++q)
                s += x.data()[static_cast<std::size_t>(i) * ci + q] *
                     w.data()[static_cast<std::size_t>(q) * co + j];
            out.data()[static_cast<std::size_t>(i) * co + j] = s;
        }
    if (detail::recording({&x, &w, &b})) {
        out.set_requires_grad(true);
        active_tape()->record([x, w, b, out, t, ci, co] {
            const auto& g = out.grad();
            if (x.requires_grad()) {
                auto& gx = x.node()->grad;
                for (int i = 0; i < t; ++i)
                    for (int q = 0; q < ci; ++q) {
                        double s = 0.0;
                        for (int j = 0; j < co; ++j)
                            s += g[static_cast<std::size_t>(i) * co + j] *
                                 w.data()[static_cast<std::size_t>(q) * co + j];
                        gx[static_cast<std::size_t>(i) * ci + q] += s;
                    }
            }
            if (w.requires_grad()) {
                auto& gw = w.node()->grad;
                for (int q = 0; q < ci; ++q)
                    for (int j = 0; j < co; ++j) {
                        double s = 0.0;
                        for (int i = 0; i < t; ++i)
                            s += x.data()[static_cast<std::size_t>(i) * ci + q] *
                                 g[static_cast<std::size_t>(i) * co + j];
                        gw[static_cast<std::size_t>(q) * co + j] += s;
                    }
            }
            if (b.requires_grad()) {
                auto& gb = b.node()->grad;
                for (int j = 0; j < co; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < t; ++i) s += g[static_cast<std::size_t>(i) * co + j];
                    gb[j] += s;
                }
            }
        });
    }
    return out;
}

// out[i][j] = s[i] + d[j]; used to assemble additive attention scores.
inline Tensor outer_sum(const Tensor& s, const Tensor& d) {
    if (s.dim() != 1 || d.dim() != 1)
        throw ShapeError("outer_sum: expected vectors, got " + shape_str(s.shape()) + " and " +
                         shape_str(d.shape()));
    const int m = s.extent(0), n = d.extent(0);
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out.data()[static_cast<std::size_t>(i) * n + j] = s.data()[i] + d.data()[j];
    if (detail::recording({&s, &d})) {
        out.set_requires_grad(true);
        active_tape()->record([s, d, out, m, n] {
            const auto& g = out.grad();
            if (s.requires_grad()) {
                auto& gs = s.node()->grad;
                for (int i = 0; i < m; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += g[static_cast<std::size_t>(i) * n + j];
                    gs[i] += acc;
                }
            }
            if (d.requires_grad()) {
                auto& gd = d.node()->grad;
                for (int j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < m; ++i) acc += g[static_cast<std::size_t>(i) * n + j];
                    gd[j] += acc;
                }
            }
        });
    }
    return out;
}

// --------------------------------------------------------------------------
// Reductions, reshaping, slicing
// --------------------------------------------------------------------------

inline Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor out = Tensor::scalar(s);
    if (detail::recording({&x})) {
        out.set_requires_grad(true);
        active_tape()->record([x, out] {
            const double g = out.grad()[0];
            auto& gx = x.node()->grad;
            for (double& v : gx) v += g;
        });
    }
    return out;
}

inline Tensor mean_over_axis(const Tensor& x, int axis) {
    if (x.dim() != 2 || (axis != 0 && axis != 1))
        throw ShapeError("mean_over_axis: expected a 2-d tensor and axis 0 or 1, got " +
                         shape_str(x.shape()) + " axis " + std::to_string(axis));
    const int rows = x.extent(0), cols = x.extent(1);
    const int keep = axis == 0 ? cols : rows;
    const int reduced = axis == 0 ? rows : cols;
    Tensor out = Tensor::zeros({keep});
    const double inv = 1.0 / reduced;
    for (int o = 0; o < keep; ++o) {
        double s = 0.0;
        for (int r = 0; r < reduced; ++r) {
            const int i = axis == 0 ? r : o;
            const int j = axis == 0 ? o : r;
            s += x.data()[static_cast<std::size_t>(i) * cols + j];
        }
        out.data()[o] = s * inv;
    }
    if (detail::recording({&x})) {
        out.set_requires_grad(true);
        active_tape()->record([x, out, axis, rows, cols, inv] {
            const auto& g = out.grad();
            auto& gx = x.node()->grad;
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j)
                    gx[static_cast<std::size_t>(i) * cols + j] += g[axis == 0 ? j : i] * inv;
        });
    }
    return out;
}

inline Tensor concat_last_dim(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ParamError("concat_last_dim: no tensors given");
    const int rows = parts[0].extent(0);
    int total = 0;
    for (const Tensor& p : parts) {
        if (p.dim() != 2 || p.extent(0) != rows)
            throw ShapeError("concat_last_dim: part " + shape_str(p.shape()) +
                             " does not match leading extent " + std::to_string(rows));
        total += p.extent(1);
    }
    Tensor out = Tensor::zeros({rows, total});
    int offset = 0;
    for (const Tensor& p : parts) {
        const int c = p.extent(1);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < c; ++j)
                out.data()[static_cast<std::size_t>(i) * total + offset + j] =
                    p.data()[static_cast<std::size_t>(i) * c + j];
        offset += c;
    }
    bool any_grad = false;
    for (const Tensor& p : parts) any_grad |= p.requires_grad();
    if (active_tape() && any_grad) {
        out.set_requires_grad(true);
        active_tape()->record([parts, out, rows, total] {
            const auto& g = out.grad();
            int off = 0;
            for (const Tensor& p : parts) {
                const int c = p.extent(1);
                if (p.requires_grad()) {
                    auto& gp = p.node()->grad;
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < c; ++j)
                            gp[static_cast<std::size_t>(i) * c + j] +=
                                g[static_cast<std::size_t>(i) * total + off + j];
                }
                off += c;
            }
        });
    }
    return out;
}

inline Tensor slice_vec(const Tensor& x, int start, int len) {
    if (x.dim() != 1) throw ShapeError("slice_vec: expected a vector, got " + shape_str(x.shape()));
    if (start < 0 || len < 0 || start + len > x.extent(0))
        throw IndexError("slice_vec: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") outside " + shape_str(x.shape()));
    Tensor out = Tensor::zeros({len});
    for (int i = 0; i < len; ++i) out.data()[i] = x.data()[start + i];
    if (detail::recording({&x})) {
        out.set_requires_grad(true);
        active_tape()->record([x, out, start, len] {
            const auto& g = out.grad();
            auto& gx = x.node()->grad;
            for (int i = 0; i < len; ++i) gx[start + i] += g[i];
        });
    }
    return out;
}

// Drops the leading axis: [B, rest...] -> [rest...] at index b.
inline Tensor slice_first(const Tensor& x, int index) {
    if (x.dim() < 2) throw ShapeError("slice_first: tensor " + shape_str(x.shape()) + " has no batch axis");
    if (index < 0 || index >= x.extent(0))
        throw IndexError("slice_first: index " + std::to_string(index) + " outside " +
                         shape_str(x.shape()));
    Shape rest(x.shape().begin() + 1, x.shape().end());
    const std::size_t block = shape_numel(rest);
    Tensor out = Tensor::zeros(rest);
    const std::size_t base = static_cast<std::size_t>(index) * block;
    for (std::size_t i = 0; i < block; ++i) out.data()[i] = x.data()[base + i];
    if (detail::recording({&x})) {
        out.set_requires_grad(true);
        active_tape()->record([x, out, base, block] {
            const auto& g = out.grad();
            auto& gx = x.node()->grad;
            for (std::size_t i = 0; i < block; ++i) gx[base + i] += g[i];
        });
    }
    return out;
}

// Stacks equally-shaped tensors along a new leading axis.
inline Tensor stack_first(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ParamError("stack_first: no tensors given");
    const Shape& inner = parts[0].shape();
    for (const Tensor& p : parts)
        if (p.shape() != inner)
            throw ShapeError("stack_first: mixed shapes " + shape_str(inner) + " and " +
                             shape_str(p.shape()));
    Shape shape;
    shape.push_back(static_cast<int>(parts.size()));
    shape.insert(shape.end(), inner.begin(), inner.end());
    const std::size_t block = shape_numel(inner);
    Tensor out = Tensor::zeros(shape);
    for (std::size_t b = 0; b < parts.size(); ++b)
        for (std::size_t i = 0; i < block; ++i) out.data()[b * block + i] = parts[b].data()[i];
    bool any_grad = false;
    for (const Tensor& p : parts) any_grad |= p.requires_grad();
    if (active_tape() && any_grad) {
        out.set_requires_grad(true);
        active_tape()->record([parts, out, block] {
            const auto& g = out.grad();
            for (std::size_t b = 0; b < parts.size(); ++b) {
                if (!parts[b].requires_grad()) continue;
                auto& gp = parts[b].node()->grad;
                for (std::size_t i = 0; i < block; ++i) gp[i] += g[b * block + i];
            }
        });
    }
    return out;
}

// --------------------------------------------------------------------------
// Softmax and loss
// --------------------------------------------------------------------------

// Row-wise softmax restricted to masked-in entries. Masked-out entries are
// exact 0.0 in the output and receive exactly-zero adjoints; rows with no
// masked-in entry come out all-zero.
inline Tensor masked_softmax_rows(const Tensor& scores, const std::vector<std::uint8_t>& mask) {
    if (scores.dim() != 2 || scores.extent(0) != scores.extent(1))
        throw ShapeError("masked_softmax_rows: expected a square matrix, got " +
                         shape_str(scores.shape()));
    if (mask.size() != scores.numel())
        throw ShapeError("masked_softmax_rows: mask holds " + std::to_string(mask.size()) +
                         " cells, scores are " + shape_str(scores.shape()));
    const int t = scores.extent(0);
    Tensor out = Tensor::zeros({t, t});
    for (int i = 0; i < t; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * t;
        double max = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (int j = 0; j < t; ++j)
            if (mask[row + j]) {
                any = true;
                max = std::max(max, scores.data()[row + j]);
            }
        if (!any) continue;
        double z = 0.0;
        for (int j = 0; j < t; ++j)
            if (mask[row + j]) {
                const double e = std::exp(scores.data()[row + j] - max);
                out.data()[row + j] = e;
                z += e;
            }
        const double inv = 1.0 / z;
        for (int j = 0; j < t; ++j)
            if (mask[row + j]) out.data()[row + j] *= inv;
    }
    if (detail::recording({&scores})) {
        out.set_requires_grad(true);
        active_tape()->record([scores, out, mask, t] {
            const auto& g = out.grad();
            auto& gs = scores.node()->grad;
            for (int i = 0; i < t; ++i) {
                const std::size_t row = static_cast<std::size_t>(i) * t;
                double dot = 0.0;
                for (int j = 0; j < t; ++j)
                    if (mask[row + j]) dot += out.data()[row + j] * g[row + j];
                for (int j = 0; j < t; ++j)
                    if (mask[row + j]) gs[row + j] += out.data()[row + j] * (g[row + j] - dot);
            }
        });
    }
    return out;
}

// Mean negative log-softmax of the true class, stabilized per row.
inline Tensor cross_entropy_logits(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.dim() != 2)
        throw ShapeError("cross_entropy_logits: expected [N x K] logits, got " +
                         shape_str(logits.shape()));
    const int n = logits.extent(0), k = logits.extent(1);
    if (static_cast<int>(labels.size()) != n)
        throw ShapeError("cross_entropy_logits: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
    for (int i = 0; i < n; ++i)
        if (labels[i] < 0 || labels[i] >= k)
            throw IndexError("cross_entropy_logits: label " + std::to_string(labels[i]) +
                             " outside [0, " + std::to_string(k) + ") at row " + std::to_string(i));
    std::vector<double> probs(static_cast<std::size_t>(n) * k);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * k;
        double max = logits.data()[row];
        for (int j = 1; j < k; ++j) max = std::max(max, logits.data()[row + j]);
        double z = 0.0;
        for (int j = 0; j < k; ++j) {
            const double e = std::exp(logits.data()[row + j] - max);
            probs[row + j] = e;
            z += e;
        }
        const double inv = 1.0 / z;
        for (int j = 0; j < k; ++j) probs[row + j] *= inv;
        loss += std::log(z) - (logits.data()[row + labels[i]] - max);
    }
    Tensor out = Tensor::scalar(loss / n);
    if (detail::recording({&logits})) {
        out.set_requires_grad(true);
        active_tape()->record([logits, out, labels, probs, n, k] {
            const double g = out.grad()[0] / n;
            auto& gl = logits.node()->grad;
            for (int i = 0; i < n; ++i) {
                const std::size_t row = static_cast<std::size_t>(i) * k;
                for (int j = 0; j < k; ++j)
                    gl[row + j] += g * (probs[row + j] - (j == labels[i] ? 1.0 : 0.0));
            }
        });
    }
    return out;
}

} // namespace sgm
