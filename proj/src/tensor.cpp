#include "tsattack/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_set>

namespace tsattack {

namespace detail {

struct Node {
    std::vector<long> shape;
    std::vector<double> values;
    std::vector<double> grad;       // persistent, leaves only
    std::vector<double> pass_grad;  // scratch for one backward pass
    bool requires_grad = false;
    const char* op = nullptr;  // null for leaves
    std::vector<std::shared_ptr<Node>> parents;
    // Distributes pass_grad into the parents' pass_grad buffers.
    std::function<void(Node&)> backprop;

    bool is_leaf() const { return op == nullptr; }
};

}  // namespace detail

using detail::Node;

namespace {

std::uint64_t g_backward_count = 0;

long product(const std::vector<long>& shape) {
    long n = 1;
    for (long d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<long>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

[[noreturn]] void shape_error(const char* op, const std::vector<long>& a,
                              const std::vector<long>& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a) + " vs " + shape_str(b));
}

void require_2d(const char* op, const Tensor& t) {
    if (t.shape().size() != 2)
        throw std::invalid_argument(std::string(op) + ": expected 2-D tensor, got " +
                                    shape_str(t.shape()));
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

bool any_requires_grad(const std::vector<Tensor>& inputs) {
    for (const auto& t : inputs)
        if (t.requires_grad()) return true;
    return false;
}

}  // namespace

// ---- Tensor basics ---------------------------------------------------------

Tensor make_op(const char* op, std::vector<long> shape, std::vector<double> values,
               std::vector<Tensor> inputs, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    if (any_requires_grad(inputs)) {
        n->requires_grad = true;
        n->op = op;
        n->parents.reserve(inputs.size());
        for (auto& t : inputs) n->parents.push_back(t.node());
        n->backprop = std::move(backprop);
    }
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(std::vector<long> shape, bool requires_grad) {
    long n = product(shape);
    return from(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0),
                requires_grad);
}

Tensor Tensor::from(std::vector<long> shape, std::vector<double> values,
                    bool requires_grad) {
    if (product(shape) != static_cast<long>(values.size()))
        throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                    " values do not fill shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.assign(n->values.size(), 0.0);
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

const std::vector<long>& Tensor::shape() const { return node_->shape; }

long Tensor::size() const { return static_cast<long>(node_->values.size()); }

long Tensor::rows() const { return node_->shape.empty() ? 1 : node_->shape[0]; }

long Tensor::cols() const { return node_->shape.size() < 2 ? 1 : node_->shape[1]; }

const std::vector<double>& Tensor::values() const { return node_->values; }

std::vector<double>& Tensor::mutable_values() {
    if (!node_->is_leaf())
        throw std::logic_error("tensor: in-place mutation of a tape node");
    return node_->values;
}

double Tensor::value() const {
    if (size() != 1)
        throw std::invalid_argument("tensor: value() on non-scalar " +
                                    shape_str(node_->shape));
    return node_->values[0];
}

double Tensor::at(long r, long c) const { return node_->values[r * cols() + c]; }

bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
    if (!node_->is_leaf())
        throw std::logic_error("tensor: requires_grad is settable on leaves only");
    node_->requires_grad = on;
    if (on && node_->grad.size() != node_->values.size())
        node_->grad.assign(node_->values.size(), 0.0);
    return *this;
}

const std::vector<double>& Tensor::grad() const {
    if (node_->grad.size() != node_->values.size())
        node_->grad.assign(node_->values.size(), 0.0);
    return node_->grad;
}

void Tensor::zero_grad() const { node_->grad.assign(node_->values.size(), 0.0); }

Tensor Tensor::detached() const { return from(node_->shape, node_->values); }

// ---- backward --------------------------------------------------------------

void Tensor::backward() const {
    if (size() != 1)
        throw std::invalid_argument("backward: root must be scalar, got " +
                                    shape_str(node_->shape));
    if (!node_->requires_grad) return;  // nothing on the tape depends on a leaf
    ++g_backward_count;

    // Topological order over the requires_grad subgraph.
    std::vector<Node*> topo;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            topo.push_back(n);
            stack.pop_back();
        }
    }
    // topo is child-after-parents; traverse in reverse for the backward pass.

    for (Node* n : topo) n->pass_grad.assign(n->values.size(), 0.0);
    node_->pass_grad[0] = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);

    for (Node* n : topo) {
        if (!n->is_leaf()) continue;
        if (n->grad.size() != n->values.size()) n->grad.assign(n->values.size(), 0.0);
        for (size_t i = 0; i < n->grad.size(); ++i) n->grad[i] += n->pass_grad[i];
    }
}

std::uint64_t backward_invocations() { return g_backward_count; }

void reset_backward_invocations() { g_backward_count = 0; }

// ---- elementwise ops -------------------------------------------------------

namespace {

// Adds src into the parent's pass gradient if that parent participates in the
// pass (constants have no buffer).
void scatter(Node& parent, const std::vector<double>& src) {
    if (!parent.requires_grad) return;
    for (size_t i = 0; i < src.size(); ++i) parent.pass_grad[i] += src[i];
}

template <typename Fwd, typename Bwd>
Tensor elementwise_binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd,
                          Bwd bwd) {
    if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
    std::vector<double> out(a.values().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.values()[i], b.values()[i]);
    return make_op(op, a.shape(), std::move(out), {a, b}, [bwd](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        for (size_t i = 0; i < self.pass_grad.size(); ++i) {
            double g = self.pass_grad[i];
            if (g == 0.0) continue;
            double da, db;
            bwd(pa.values[i], pb.values[i], g, da, db);
            if (pa.requires_grad) pa.pass_grad[i] += da;
            if (pb.requires_grad) pb.pass_grad[i] += db;
        }
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = g;
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = -g;
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g * y;
            db = g * x;
        });
}

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d("matmul", a);
    require_2d("matmul", b);
    const long m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) shape_error("matmul", a.shape(), b.shape());
    std::vector<double> out(static_cast<size_t>(m * n), 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (long i = 0; i < m; ++i)
        for (long p = 0; p < k; ++p) {
            double x = av[i * k + p];
            if (x == 0.0) continue;
            for (long j = 0; j < n; ++j) out[i * n + j] += x * bv[p * n + j];
        }
    return make_op("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const auto& g = self.pass_grad;
        if (pa.requires_grad) {  // dA = G * B^T
            for (long i = 0; i < m; ++i)
                for (long p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (long j = 0; j < n; ++j)
                        s += g[i * n + j] * pb.values[p * n + j];
                    pa.pass_grad[i * k + p] += s;
                }
        }
        if (pb.requires_grad) {  // dB = A^T * G
            for (long p = 0; p < k; ++p)
                for (long j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (long i = 0; i < m; ++i)
                        s += pa.values[i * k + p] * g[i * n + j];
                    pb.pass_grad[p * n + j] += s;
                }
        }
    });
}

Tensor bias_add(const Tensor& x, const Tensor& bias) {
    require_2d("bias_add", x);
    if (bias.shape().size() != 1 || bias.size() != x.cols())
        shape_error("bias_add", x.shape(), bias.shape());
    const long m = x.rows(), k = x.cols();
    std::vector<double> out(x.values().size());
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < k; ++j)
            out[i * k + j] = x.values()[i * k + j] + bias.values()[j];
    return make_op("bias_add", x.shape(), std::move(out), {x, bias}, [m, k](Node& self) {
        Node& px = *self.parents[0];
        Node& pb = *self.parents[1];
        scatter(px, self.pass_grad);
        if (pb.requires_grad)
            for (long i = 0; i < m; ++i)
                for (long j = 0; j < k; ++j) pb.pass_grad[j] += self.pass_grad[i * k + j];
    });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    return bias_add(matmul(x, w), b);
}

// ---- nonlinearities --------------------------------------------------------

Tensor tanh(const Tensor& x) {
    std::vector<double> out(x.values().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.values()[i]);
    return make_op("tanh", x.shape(), std::move(out), {x}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (size_t i = 0; i < self.pass_grad.size(); ++i) {
            double y = self.values[i];
            p.pass_grad[i] += self.pass_grad[i] * (1.0 - y * y);
        }
    });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.values().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.values()[i]);
    return make_op("relu", x.shape(), std::move(out), {x}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (size_t i = 0; i < self.pass_grad.size(); ++i)
            if (p.values[i] > 0.0) p.pass_grad[i] += self.pass_grad[i];
    });
}

// ---- structural ops --------------------------------------------------------

Tensor reshape(const Tensor& x, std::vector<long> shape) {
    if (product(shape) != x.size()) shape_error("reshape", x.shape(), shape);
    return make_op("reshape", std::move(shape), x.values(), {x},
                   [](Node& self) { scatter(*self.parents[0], self.pass_grad); });
}

Tensor slice_rows(const Tensor& x, long row0, long row1) {
    require_2d("slice_rows", x);
    if (row0 < 0 || row1 > x.rows() || row0 >= row1)
        throw std::invalid_argument("slice_rows: rows [" + std::to_string(row0) + "," +
                                    std::to_string(row1) + ") out of range for " +
                                    shape_str(x.shape()));
    const long k = x.cols();
    std::vector<double> out(x.values().begin() + row0 * k,
                            x.values().begin() + row1 * k);
    return make_op("slice_rows", {row1 - row0, k}, std::move(out), {x},
                   [row0, k](Node& self) {
                       Node& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       for (size_t i = 0; i < self.pass_grad.size(); ++i)
                           p.pass_grad[static_cast<size_t>(row0 * k) + i] +=
                               self.pass_grad[i];
                   });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    const long k = parts[0].cols();
    long m = 0;
    std::vector<double> out;
    for (const auto& p : parts) {
        require_2d("concat_rows", p);
        if (p.cols() != k) shape_error("concat_rows", parts[0].shape(), p.shape());
        out.insert(out.end(), p.values().begin(), p.values().end());
        m += p.rows();
    }
    return make_op("concat_rows", {m, k}, std::move(out), parts, [](Node& self) {
        size_t off = 0;
        for (auto& parent : self.parents) {
            if (parent->requires_grad)
                for (size_t i = 0; i < parent->values.size(); ++i)
                    parent->pass_grad[i] += self.pass_grad[off + i];
            off += parent->values.size();
        }
    });
}

// ---- reductions ------------------------------------------------------------

Tensor mean(const Tensor& x) {
    const double n = static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x.values()) s += v;
    return make_op("mean", {1}, {s / n}, {x}, [n](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        double g = self.pass_grad[0] / n;
        for (auto& pg : p.pass_grad) pg += g;
    });
}

Tensor squared_error(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        shape_error("squared_error", pred.shape(), target.shape());
    const double n = static_cast<double>(pred.size());
    double s = 0.0;
    for (size_t i = 0; i < pred.values().size(); ++i) {
        double r = pred.values()[i] - target.values()[i];
        s += r * r;
    }
    return make_op("squared_error", {1}, {s / n}, {pred, target}, [n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        double g = self.pass_grad[0];
        for (size_t i = 0; i < pa.values.size(); ++i) {
            double d = g * 2.0 * (pa.values[i] - pb.values[i]) / n;
            if (pa.requires_grad) pa.pass_grad[i] += d;
            if (pb.requires_grad) pb.pass_grad[i] -= d;
        }
    });
}

Tensor absolute_error(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        shape_error("absolute_error", pred.shape(), target.shape());
    const double n = static_cast<double>(pred.size());
    double s = 0.0;
    for (size_t i = 0; i < pred.values().size(); ++i)
        s += std::abs(pred.values()[i] - target.values()[i]);
    return make_op("absolute_error", {1}, {s / n}, {pred, target}, [n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        double g = self.pass_grad[0];
        for (size_t i = 0; i < pa.values.size(); ++i) {
            double d = g * sign(pa.values[i] - pb.values[i]) / n;
            if (pa.requires_grad) pa.pass_grad[i] += d;
            if (pb.requires_grad) pb.pass_grad[i] -= d;
        }
    });
}

// ---- oracle ----------------------------------------------------------------

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f,
                            const Tensor& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient: h must be > 0");
    std::vector<double> g(x.values().size());
    for (size_t i = 0; i < g.size(); ++i) {
        std::vector<double> vp = x.values();
        std::vector<double> vm = x.values();
        vp[i] += h;
        vm[i] -= h;
        double fp = f(Tensor::from(x.shape(), std::move(vp)));
        double fm = f(Tensor::from(x.shape(), std::move(vm)));
        g[i] = (fp - fm) / (2.0 * h);
    }
    return Tensor::from(x.shape(), std::move(g));
}

}  // namespace tsattack
