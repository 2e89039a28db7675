#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace tsattack {

namespace detail {
struct Node;
}

// Dense tensor of doubles with a minimal reverse-mode tape.
//
// A Tensor is a shared handle to a graph node. Operations record themselves
// on the tape only when at least one input requires a gradient; otherwise
// they produce plain value nodes, so attack bookkeeping arithmetic stays
// tape-free. Everything is 64-bit double. A tape is meant to be built and
// consumed by a single context; distinct tapes share no mutable state.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<long> shape, bool requires_grad = false);
    static Tensor from(std::vector<long> shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const std::vector<long>& shape() const;
    long size() const;
    long rows() const;  // first dimension (1 for scalars)
    long cols() const;  // second dimension (1 for vectors/scalars)

    const std::vector<double>& values() const;
    // In-place access for leaf tensors (parameter updates between tapes).
    // Rejected on interior tape nodes.
    std::vector<double>& mutable_values();
    double value() const;  // scalar tensors only
    double at(long r, long c) const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on);

    // Accumulated gradient of this leaf. Zero-filled until a backward pass
    // reaches it.
    const std::vector<double>& grad() const;
    void zero_grad() const;

    // Reverse pass from a scalar root. Leaf gradients accumulate additively
    // across calls; zero_grad() resets them.
    void backward() const;

    // Value copy detached from any tape.
    Tensor detached() const;

    std::shared_ptr<detail::Node> node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::Node> node_;

    friend Tensor make_op(const char* op, std::vector<long> shape,
                          std::vector<double> values,
                          std::vector<Tensor> inputs,
                          std::function<void(detail::Node&)> backprop);
};

// ---- forward ops -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);
// x: (m x k), bias: (k); bias broadcast over the leading axis. The only
// broadcast in the engine.
Tensor bias_add(const Tensor& x, const Tensor& bias);
// affine(x, w, b) = bias_add(matmul(x, w), b)
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor tanh(const Tensor& x);
// Backward uses subgradient 0 at exactly 0.
Tensor relu(const Tensor& x);
Tensor reshape(const Tensor& x, std::vector<long> shape);
// Rows [row0, row1) of a 2-D tensor; the leading axis is the time axis.
Tensor slice_rows(const Tensor& x, long row0, long row1);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor mean(const Tensor& x);
// Scalar mean of (pred - target)^2 over all elements.
Tensor squared_error(const Tensor& pred, const Tensor& target);
// Scalar mean of |pred - target|; backward uses sign with sign(0) = 0.
Tensor absolute_error(const Tensor& pred, const Tensor& target);

// ---- oracle ----------------------------------------------------------------

// Central finite differences (f(x + h e_i) - f(x - h e_i)) / (2h) per
// element. Independent of the tape; used as the gradient oracle in tests.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f,
                            const Tensor& x, double h);

// ---- instrumentation -------------------------------------------------------

// Number of backward passes executed so far (process-wide).
std::uint64_t backward_invocations();
void reset_backward_invocations();

}  // namespace tsattack
