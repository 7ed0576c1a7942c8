#pragma once

// Dense double-precision tensors with reverse-mode automatic differentiation.
//
// A Tensor is a shared handle onto a flat row-major value buffer. While a
// Tape is active on the current thread, every operation whose inputs require
// gradients records a pull closure; Tape::backward replays the closures in
// reverse once and accumulates gradients into every participating tensor.
// Without an active tape the same operations are plain value arithmetic, so
// evaluation passes cost nothing extra. A tape is single use: rerunning a
// forward pass records a fresh tape.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace gig {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += " x ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

class Tape;

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;        // empty until backward touches it
    bool requires_grad = false;
    const Tape* tape = nullptr;      // tape that recorded the producing op

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

} // namespace detail

class Tensor {
public:
    Tensor() : impl_(std::make_shared<detail::TensorImpl>()) {}

    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false)
        : impl_(std::make_shared<detail::TensorImpl>()) {
        impl_->shape = std::move(shape);
        impl_->value.assign(shape_numel(impl_->shape), fill);
        impl_->requires_grad = requires_grad;
    }

    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
        : impl_(std::make_shared<detail::TensorImpl>()) {
        if (shape_numel(shape) != data.size())
            throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not hold " +
                                        std::to_string(data.size()) + " values");
        impl_->shape = std::move(shape);
        impl_->value = std::move(data);
        impl_->requires_grad = requires_grad;
    }

    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

    static Tensor vector(std::vector<double> v, bool requires_grad = false) {
        Shape s{v.size()};
        return Tensor(std::move(s), std::move(v), requires_grad);
    }

    static Tensor matrix(const std::vector<std::vector<double>>& rows, bool requires_grad = false) {
        std::size_t r = rows.size();
        std::size_t c = r ? rows[0].size() : 0;
        std::vector<double> flat;
        flat.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c)
                throw std::invalid_argument("tensor: ragged matrix rows");
            flat.insert(flat.end(), row.begin(), row.end());
        }
        return Tensor({r, c}, std::move(flat), requires_grad);
    }

    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t size() const { return impl_->value.size(); }

    std::size_t rows() const { return rank() == 2 ? impl_->shape[0] : (rank() == 1 ? 1 : 0); }
    std::size_t cols() const { return rank() == 2 ? impl_->shape[1] : (rank() == 1 ? impl_->shape[0] : 0); }

    const std::vector<double>& values() const { return impl_->value; }

    // Direct mutation of the value buffer. Only meaningful for tensors that
    // are not part of a live (unconsumed) tape: optimiser steps and finite
    // difference probes.
    std::vector<double>& raw_values() { return impl_->value; }

    double item() const {
        if (size() != 1)
            throw std::invalid_argument("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
        return impl_->value[0];
    }

    double at(std::size_t i) const { return impl_->value.at(i); }
    double at(std::size_t r, std::size_t c) const {
        if (rank() != 2) throw std::invalid_argument("at(r,c): tensor is not rank 2");
        return impl_->value.at(r * impl_->shape[1] + c);
    }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool b) { impl_->requires_grad = b; }

    bool has_grad() const { return !impl_->grad.empty(); }
    const std::vector<double>& grad() const { return impl_->grad; }
    void zero_grad() { impl_->grad.assign(impl_->value.size(), 0.0); }

    std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

// Reverse-mode tape. Constructing one makes it the active tape for the
// current thread; operations record onto it while any of their inputs
// require gradients. backward() walks the recorded closures once, in
// reverse, then marks the tape consumed.
class Tape {
public:
    Tape() {
        if (active_)
            throw std::logic_error("tape: another tape is already active on this thread");
        active_ = this;
    }
    ~Tape() {
        if (active_ == this) active_ = nullptr;
    }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() { return active_; }

    std::size_t node_count() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    // Registers a tensor whose gradient must exist after backward even if
    // no gradient flows into it.
    void touch(const std::shared_ptr<detail::TensorImpl>& t) {
        if (t->requires_grad) touched_.push_back(t);
    }

    void record(const std::shared_ptr<detail::TensorImpl>& out,
                std::initializer_list<std::shared_ptr<detail::TensorImpl>> inputs,
                std::function<void()> pull) {
        out->requires_grad = true;
        out->tape = this;
        touched_.push_back(out);
        for (const auto& in : inputs) touch(in);
        nodes_.push_back(std::move(pull));
    }

    void backward(const Tensor& loss) {
        if (consumed_)
            throw std::logic_error("backward: tape already consumed; rerun the forward pass");
        if (loss.size() != 1)
            throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                        shape_str(loss.shape()));
        if (loss.impl()->tape != this)
            throw std::invalid_argument("backward: loss was not recorded on the active tape");
        for (auto& t : touched_) t->ensure_grad();
        loss.impl()->grad[0] += 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
        consumed_ = true;
    }

private:
    inline static thread_local Tape* active_ = nullptr;
    std::vector<std::function<void()>> nodes_;
    std::vector<std::shared_ptr<detail::TensorImpl>> touched_;
    bool consumed_ = false;
};

inline void backward(const Tensor& loss) {
    Tape* t = Tape::active();
    if (!t) throw std::logic_error("backward: no active tape on this thread");
    t->backward(loss);
}

namespace detail {

inline Tape* recording(std::initializer_list<const Tensor*> inputs) {
    Tape* t = Tape::active();
    if (!t) return nullptr;
    for (const Tensor* in : inputs)
        if (in->requires_grad()) return t;
    return nullptr;
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shapes differ: " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

inline void check_rank2(const char* op, const Tensor& a) {
    if (a.rank() != 2)
        throw std::invalid_argument(std::string(op) + ": expected a rank-2 tensor, got " +
                                    shape_str(a.shape()));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise operations
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("add", a, b);
    Tensor out(a.shape());
    auto& o = out.raw_values();
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + bv[i];
    if (Tape* tape = detail::recording({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(oi, {ai, bi}, [ai, bi, oi] {
            const auto& g = oi->grad;
            if (ai->requires_grad) {
                ai->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i];
            }
        });
    }
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("sub", a, b);
    Tensor out(a.shape());
    auto& o = out.raw_values();
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] - bv[i];
    if (Tape* tape = detail::recording({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(oi, {ai, bi}, [ai, bi, oi] {
            const auto& g = oi->grad;
            if (ai->requires_grad) {
                ai->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] -= g[i];
            }
        });
    }
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("mul", a, b);
    Tensor out(a.shape());
    auto& o = out.raw_values();
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
    if (Tape* tape = detail::recording({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(oi, {ai, bi}, [ai, bi, oi] {
            const auto& g = oi->grad;
            if (ai->requires_grad) {
                ai->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * bi->value[i];
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i] * ai->value[i];
            }
        });
    }
    return out;
}

inline Tensor divide(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("divide", a, b);
    Tensor out(a.shape());
    auto& o = out.raw_values();
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] / bv[i];
    if (Tape* tape = detail::recording({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(oi, {ai, bi}, [ai, bi, oi] {
            const auto& g = oi->grad;
            if (ai->requires_grad) {
                ai->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] / bi->value[i];
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i)
                    bi->grad[i] -= g[i] * ai->value[i] / (bi->value[i] * bi->value[i]);
            }
        });
    }
    return out;
}

inline Tensor scale(const Tensor& a, double c) {
    Tensor out(a.shape());
    auto& o = out.raw_values();
    const auto& av = a.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * c;
    if (Tape* tape = detail::recording({&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(oi, {ai}, [ai, oi, c] {
            ai->ensure_grad();
            for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i] * c;
        });
    }
    return out;
}

inline Tensor add_scalar(const Tensor& a, double c) {
    Tensor out(a.shape());
    auto& o = out.raw_values();
    const auto& av = a.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + c;
    if (Tape* tape = detail::recording({&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(oi, {ai}, [ai, oi] {
            ai->ensure_grad();
            for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
        });
    }
    return out;
}

inline Tensor sigmoid(const Tensor& a) {
    Tensor out(a.shape());
    auto& o = out.raw_values();
    const auto& av = a.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = 1.0 / (1.0 + std::exp(-av[i]));
    if (Tape* tape = detail::recording({&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(oi, {ai}, [ai, oi] {
            ai->ensure_grad();
            for (std::size_t i = 0; i < oi->grad.size(); ++i) {
                double s = oi->value[i];
                ai->grad[i] += oi->grad[i] * s * (1.0 - s);
            }
        });
    }
    return out;
}

// Subgradient at 0 is 0.
inline Tensor relu(const Tensor& a) {
    Tensor out(a.shape());
    auto& o = out.raw_values();
    const auto& av = a.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] > 0.0 ? av[i] : 0.0;
    if (Tape* tape = detail::recording({&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(oi, {ai}, [ai, oi] {
            ai->ensure_grad();
            for (std::size_t i = 0; i < oi->grad.size(); ++i)
                if (ai->value[i] > 0.0) ai->grad[i] += oi->grad[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matrix product
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::check_rank2("matmul", a);
    detail::check_rank2("matmul", b);
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    const std::size_t k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        throw std::invalid_argument("matmul: inner dimensions do not match: " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out({m, n});
    {
        auto& o = out.raw_values();
        const auto& av = a.values();
        const auto& bv = b.values();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = av[i * k + p];
                if (aip == 0.0) continue;
                const double* brow = bv.data() + p * n;
                double* orow = o.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
            }
    }
    if (Tape* tape = detail::recording({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(oi, {ai, bi}, [ai, bi, oi, m, k, n] {
            const auto& g = oi->grad;
            if (ai->requires_grad) {
                ai->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        const double* grow = g.data() + i * n;
                        const double* brow = bi->value.data() + p * n;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        ai->grad[i * k + p] += acc;
                    }
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = ai->value[i * k + p];
                        if (aip == 0.0) continue;
                        const double* grow = g.data() + i * n;
                        double* brow = bi->grad.data() + p * n;
                        for (std::size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
                    }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    Tensor out = Tensor::scalar(acc);
    if (Tape* tape = detail::recording({&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(oi, {ai}, [ai, oi] {
            ai->ensure_grad();
            const double g = oi->grad[0];
            for (auto& gi : ai->grad) gi += g;
        });
    }
    return out;
}

inline Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
    const double inv = 1.0 / static_cast<double>(a.size());
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    Tensor out = Tensor::scalar(acc * inv);
    if (Tape* tape = detail::recording({&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(oi, {ai}, [ai, oi, inv] {
            ai->ensure_grad();
            const double g = oi->grad[0] * inv;
            for (auto& gi : ai->grad) gi += g;
        });
    }
    return out;
}

namespace detail {

inline Tensor reduce_axis(const Tensor& a, int axis, bool take_mean, const char* op) {
    check_rank2(op, a);
    if (axis != 0 && axis != 1)
        throw std::out_of_range(std::string(op) + ": axis " + std::to_string(axis) +
                                " out of range for rank-2 tensor");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    const std::size_t count = axis == 0 ? m : n;
    if (count == 0) throw std::invalid_argument(std::string(op) + ": reduced axis is empty");
    const double inv = take_mean ? 1.0 / static_cast<double>(count) : 1.0;
    Tensor out(Shape{axis == 0 ? n : m});
    auto& o = out.raw_values();
    const auto& av = a.values();
    if (axis == 0) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) o[j] += av[i * n + j];
    } else {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) o[i] += av[i * n + j];
    }
    for (auto& v : o) v *= inv;
    if (Tape* tape = recording({&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(oi, {ai}, [ai, oi, m, n, axis, inv] {
            ai->ensure_grad();
            const auto& g = oi->grad;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    ai->grad[i * n + j] += inv * (axis == 0 ? g[j] : g[i]);
        });
    }
    return out;
}

} // namespace detail

inline Tensor sum_axis(const Tensor& a, int axis) { return detail::reduce_axis(a, axis, false, "sum_axis"); }
inline Tensor mean_axis(const Tensor& a, int axis) { return detail::reduce_axis(a, axis, true, "mean_axis"); }

// ---------------------------------------------------------------------------
// Shape adapters: explicit gathers, scatters, broadcasts and concatenations.
// There is no implicit broadcasting anywhere else.
// ---------------------------------------------------------------------------

inline Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.size())
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                    shape_str(shape));
    Tensor out(std::move(shape), a.values());
    if (Tape* tape = detail::recording({&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(oi, {ai}, [ai, oi] {
            ai->ensure_grad();
            for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
        });
    }
    return out;
}

inline Tensor gather_rows(const Tensor& a, std::vector<std::size_t> idx) {
    detail::check_rank2("gather_rows", a);
    const std::size_t n = a.shape()[0], d = a.shape()[1];
    for (std::size_t r : idx)
        if (r >= n)
            throw std::out_of_range("gather_rows: row " + std::to_string(r) + " out of range for " +
                                    shape_str(a.shape()));
    Tensor out({idx.size(), d});
    auto& o = out.raw_values();
    const auto& av = a.values();
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy_n(av.data() + idx[r] * d, d, o.data() + r * d);
    if (Tape* tape = detail::recording({&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(oi, {ai}, [ai, oi, idx = std::move(idx), d] {
            ai->ensure_grad();
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (std::size_t j = 0; j < d; ++j)
                    ai->grad[idx[r] * d + j] += oi->grad[r * d + j];
        });
    }
    return out;
}

// Sums row r of the input into output row idx[r].
inline Tensor scatter_sum_rows(const Tensor& a, std::vector<std::size_t> idx, std::size_t out_rows) {
    detail::check_rank2("scatter_sum_rows", a);
    const std::size_t m = a.shape()[0], d = a.shape()[1];
    if (idx.size() != m)
        throw std::invalid_argument("scatter_sum_rows: index count " + std::to_string(idx.size()) +
                                    " does not match rows of " + shape_str(a.shape()));
    for (std::size_t r : idx)
        if (r >= out_rows)
            throw std::out_of_range("scatter_sum_rows: target row " + std::to_string(r) +
                                    " out of range for " + std::to_string(out_rows) + " rows");
    Tensor out({out_rows, d});
    auto& o = out.raw_values();
    const auto& av = a.values();
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < d; ++j) o[idx[r] * d + j] += av[r * d + j];
    if (Tape* tape = detail::recording({&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(oi, {ai}, [ai, oi, idx = std::move(idx), d] {
            ai->ensure_grad();
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (std::size_t j = 0; j < d; ++j)
                    ai->grad[r * d + j] += oi->grad[idx[r] * d + j];
        });
    }
    return out;
}

// Repeats a length-d vector (or 1 x d row) n times.
inline Tensor broadcast_rows(const Tensor& a, std::size_t n) {
    std::size_t d;
    if (a.rank() == 1) d = a.shape()[0];
    else if (a.rank() == 2 && a.shape()[0] == 1) d = a.shape()[1];
    else throw std::invalid_argument("broadcast_rows: expected a vector or single row, got " +
                                     shape_str(a.shape()));
    Tensor out({n, d});
    auto& o = out.raw_values();
    const auto& av = a.values();
    for (std::size_t r = 0; r < n; ++r) std::copy_n(av.data(), d, o.data() + r * d);
    if (Tape* tape = detail::recording({&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(oi, {ai}, [ai, oi, n, d] {
            ai->ensure_grad();
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t j = 0; j < d; ++j) ai->grad[j] += oi->grad[r * d + j];
        });
    }
    return out;
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no tensors given");
    const std::size_t d = parts[0].cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        detail::check_rank2("concat_rows", p);
        if (p.shape()[1] != d)
            throw std::invalid_argument("concat_rows: column mismatch: " + shape_str(p.shape()));
        total += p.shape()[0];
    }
    Tensor out({total, d});
    auto& o = out.raw_values();
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.values().begin(), p.values().end(), o.begin() + off);
        off += p.size();
    }
    bool rec = false;
    for (const auto& p : parts)
        if (p.requires_grad()) rec = true;
    if (Tape* tape = Tape::active(); tape && rec) {
        std::vector<std::shared_ptr<detail::TensorImpl>> impls;
        impls.reserve(parts.size());
        for (const auto& p : parts) impls.push_back(p.impl());
        auto oi = out.impl();
        for (const auto& pi : impls) tape->touch(pi);
        tape->record(oi, {}, [impls, oi] {
            std::size_t off = 0;
            for (const auto& pi : impls) {
                if (pi->requires_grad) {
                    pi->ensure_grad();
                    for (std::size_t i = 0; i < pi->value.size(); ++i)
                        pi->grad[i] += oi->grad[off + i];
                }
                off += pi->value.size();
            }
        });
    }
    return out;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no tensors given");
    const std::size_t m = parts[0].rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        detail::check_rank2("concat_cols", p);
        if (p.shape()[0] != m)
            throw std::invalid_argument("concat_cols: row mismatch: " + shape_str(p.shape()));
        total += p.shape()[1];
    }
    Tensor out({m, total});
    auto& o = out.raw_values();
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t d = p.shape()[1];
        for (std::size_t r = 0; r < m; ++r)
            std::copy_n(p.values().data() + r * d, d, o.data() + r * total + off);
        off += d;
    }
    bool rec = false;
    for (const auto& p : parts)
        if (p.requires_grad()) rec = true;
    if (Tape* tape = Tape::active(); tape && rec) {
        std::vector<std::shared_ptr<detail::TensorImpl>> impls;
        for (const auto& p : parts) impls.push_back(p.impl());
        auto oi = out.impl();
        for (const auto& pi : impls) tape->touch(pi);
        tape->record(oi, {}, [impls, oi, m, total] {
            std::size_t off = 0;
            for (const auto& pi : impls) {
                const std::size_t d = pi->shape[1];
                if (pi->requires_grad) {
                    pi->ensure_grad();
                    for (std::size_t r = 0; r < m; ++r)
                        for (std::size_t j = 0; j < d; ++j)
                            pi->grad[r * d + j] += oi->grad[r * total + off + j];
                }
                off += d;
            }
        });
    }
    return out;
}

// Copies base, then overwrites row idx[r] with rows r. Indices must be
// distinct: each output row has exactly one source.
inline Tensor row_replace(const Tensor& base, std::vector<std::size_t> idx, const Tensor& rows) {
    detail::check_rank2("row_replace", base);
    detail::check_rank2("row_replace", rows);
    const std::size_t n = base.shape()[0], d = base.shape()[1];
    if (rows.shape()[1] != d || rows.shape()[0] != idx.size())
        throw std::invalid_argument("row_replace: replacement shape " + shape_str(rows.shape()) +
                                    " does not match " + std::to_string(idx.size()) + " rows of width " +
                                    std::to_string(d));
    std::vector<bool> replaced(n, false);
    for (std::size_t r : idx) {
        if (r >= n) throw std::out_of_range("row_replace: row " + std::to_string(r) + " out of range");
        if (replaced[r]) throw std::invalid_argument("row_replace: duplicate row index " + std::to_string(r));
        replaced[r] = true;
    }
    Tensor out({n, d}, base.values());
    auto& o = out.raw_values();
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy_n(rows.values().data() + r * d, d, o.data() + idx[r] * d);
    if (Tape* tape = detail::recording({&base, &rows})) {
        auto bi = base.impl(), ri = rows.impl(), oi = out.impl();
        tape->record(oi, {bi, ri}, [bi, ri, oi, idx = std::move(idx), replaced = std::move(replaced), n, d] {
            if (bi->requires_grad) {
                bi->ensure_grad();
                for (std::size_t r = 0; r < n; ++r)
                    if (!replaced[r])
                        for (std::size_t j = 0; j < d; ++j)
                            bi->grad[r * d + j] += oi->grad[r * d + j];
            }
            if (ri->requires_grad) {
                ri->ensure_grad();
                for (std::size_t r = 0; r < idx.size(); ++r)
                    for (std::size_t j = 0; j < d; ++j)
                        ri->grad[r * d + j] += oi->grad[idx[r] * d + j];
            }
        });
    }
    return out;
}

// Scales row r by the constant weights[r]; weights carry no gradient.
inline Tensor scale_rows(const Tensor& a, std::vector<double> weights) {
    detail::check_rank2("scale_rows", a);
    const std::size_t m = a.shape()[0], d = a.shape()[1];
    if (weights.size() != m)
        throw std::invalid_argument("scale_rows: " + std::to_string(weights.size()) +
                                    " weights for " + std::to_string(m) + " rows");
    Tensor out({m, d});
    auto& o = out.raw_values();
    const auto& av = a.values();
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < d; ++j) o[r * d + j] = av[r * d + j] * weights[r];
    if (Tape* tape = detail::recording({&a})) {
        auto ai = a.impl(), oi = out.impl();
        tape->record(oi, {ai}, [ai, oi, weights = std::move(weights), d] {
            ai->ensure_grad();
            for (std::size_t r = 0; r < weights.size(); ++r)
                for (std::size_t j = 0; j < d; ++j)
                    ai->grad[r * d + j] += oi->grad[r * d + j] * weights[r];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Row-wise layer normalisation: y = gain * (x - mean) / sqrt(var + eps) + bias
// ---------------------------------------------------------------------------

inline Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                              double eps = 1e-5) {
    detail::check_rank2("layer_norm_rows", a);
    const std::size_t m = a.shape()[0], d = a.shape()[1];
    if (gain.shape() != Shape{d} || bias.shape() != Shape{d})
        throw std::invalid_argument("layer_norm_rows: gain/bias must be length-" + std::to_string(d) +
                                    " vectors");
    Tensor out({m, d});
    std::vector<double> xhat(m * d), inv_sd(m);
    {
        auto& o = out.raw_values();
        const auto& av = a.values();
        const auto& gv = gain.values();
        const auto& bv = bias.values();
        for (std::size_t r = 0; r < m; ++r) {
            double mu = 0.0;
            for (std::size_t j = 0; j < d; ++j) mu += av[r * d + j];
            mu /= static_cast<double>(d);
            double var = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                double c = av[r * d + j] - mu;
                var += c * c;
            }
            var /= static_cast<double>(d);
            const double inv = 1.0 / std::sqrt(var + eps);
            inv_sd[r] = inv;
            for (std::size_t j = 0; j < d; ++j) {
                const double xh = (av[r * d + j] - mu) * inv;
                xhat[r * d + j] = xh;
                o[r * d + j] = gv[j] * xh + bv[j];
            }
        }
    }
    if (Tape* tape = detail::recording({&a, &gain, &bias})) {
        auto ai = a.impl(), gi = gain.impl(), bi = bias.impl(), oi = out.impl();
        tape->record(oi, {ai, gi, bi},
                     [ai, gi, bi, oi, xhat = std::move(xhat), inv_sd = std::move(inv_sd), m, d] {
            const auto& g = oi->grad;
            if (gi->requires_grad) {
                gi->ensure_grad();
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t j = 0; j < d; ++j)
                        gi->grad[j] += g[r * d + j] * xhat[r * d + j];
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t j = 0; j < d; ++j) bi->grad[j] += g[r * d + j];
            }
            if (ai->requires_grad) {
                ai->ensure_grad();
                for (std::size_t r = 0; r < m; ++r) {
                    double m1 = 0.0, m2 = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = g[r * d + j] * gi->value[j];
                        m1 += dxh;
                        m2 += dxh * xhat[r * d + j];
                    }
                    m1 /= static_cast<double>(d);
                    m2 /= static_cast<double>(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = g[r * d + j] * gi->value[j];
                        ai->grad[r * d + j] += (dxh - m1 - xhat[r * d + j] * m2) * inv_sd[r];
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Mean negative log softmax probability of the target class, stabilised by
// per-row max subtraction.
inline Tensor cross_entropy_loss(const Tensor& logits, const std::vector<std::size_t>& targets) {
    detail::check_rank2("cross_entropy_loss", logits);
    const std::size_t n = logits.shape()[0], c = logits.shape()[1];
    if (targets.size() != n)
        throw std::invalid_argument("cross_entropy_loss: " + std::to_string(targets.size()) +
                                    " targets for " + std::to_string(n) + " rows");
    if (n == 0) throw std::invalid_argument("cross_entropy_loss: no rows");
    for (std::size_t t : targets)
        if (t >= c)
            throw std::out_of_range("cross_entropy_loss: target class " + std::to_string(t) +
                                    " out of range [0, " + std::to_string(c) + ")");
    std::vector<double> probs(n * c);
    double total = 0.0;
    const auto& zv = logits.values();
    for (std::size_t r = 0; r < n; ++r) {
        double mx = zv[r * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, zv[r * c + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) denom += std::exp(zv[r * c + j] - mx);
        const double lse = mx + std::log(denom);
        for (std::size_t j = 0; j < c; ++j) probs[r * c + j] = std::exp(zv[r * c + j] - lse);
        total += lse - zv[r * c + targets[r]];
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(n));
    if (Tape* tape = detail::recording({&logits})) {
        auto zi = logits.impl(), oi = out.impl();
        tape->record(oi, {zi}, [zi, oi, probs = std::move(probs), targets, n, c] {
            zi->ensure_grad();
            const double g = oi->grad[0] / static_cast<double>(n);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t j = 0; j < c; ++j)
                    zi->grad[r * c + j] += g * (probs[r * c + j] - (j == targets[r] ? 1.0 : 0.0));
        });
    }
    return out;
}

// Mean absolute error; the subgradient at exact ties is 0.
inline Tensor l1_loss(const Tensor& pred, const Tensor& target) {
    detail::check_same_shape("l1_loss", pred, target);
    if (pred.size() == 0) throw std::invalid_argument("l1_loss: empty tensors");
    const std::size_t n = pred.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += std::abs(pred.values()[i] - target.values()[i]);
    Tensor out = Tensor::scalar(total / static_cast<double>(n));
    if (Tape* tape = detail::recording({&pred, &target})) {
        auto pi = pred.impl(), ti = target.impl(), oi = out.impl();
        tape->record(oi, {pi, ti}, [pi, ti, oi, n] {
            const double g = oi->grad[0] / static_cast<double>(n);
            auto sign = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
            if (pi->requires_grad) {
                pi->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    pi->grad[i] += g * sign(pi->value[i] - ti->value[i]);
            }
            if (ti->requires_grad) {
                ti->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    ti->grad[i] -= g * sign(pi->value[i] - ti->value[i]);
            }
        });
    }
    return out;
}

} // namespace gig
