#include "slowfast/autodiff.hpp"

#include "slowfast/error.hpp"
#include "slowfast/kernels.hpp"

#include <cmath>

namespace slowfast {

namespace {

void add_into(Tensor& dst, const Tensor& src) {
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] += s[i];
    }
}

} // namespace

const Graph::Node& Graph::node(Var v) const {
    if (v.index >= nodes_.size()) {
        throw ContractError("variable does not belong to this graph");
    }
    return nodes_[v.index];
}

const Tensor& Graph::grad(Var v) const {
    const Node& n = node(v);
    if (!n.requires_grad) {
        throw ContractError("node does not require a gradient");
    }
    return n.grad;
}

Var Graph::push(Node n) {
    if (n.requires_grad) {
        n.grad = Tensor(n.value.rows(), n.value.cols());
    }
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

void Graph::check_same_shape(const char* op, Var a, Var b) const {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (!x.same_shape(y)) {
        throw DimensionError(std::string(op) + " shape mismatch: " + x.shape_str() + " vs " + y.shape_str());
    }
}

Var Graph::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
    Node n;
    kernels::gemm_nn(value(a), value(b), n.value, false);
    n.op = OpTag::matmul;
    n.lhs = a.index;
    n.rhs = b.index;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return push(std::move(n));
}

Var Graph::transpose(Var a) {
    const Tensor& x = value(a);
    Node n;
    n.value = Tensor(x.cols(), x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            n.value(c, r) = x(r, c);
        }
    }
    n.op = OpTag::transpose;
    n.lhs = a.index;
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
    check_same_shape("add", a, b);
    Node n;
    n.value = value(a);
    add_into(n.value, value(b));
    n.op = OpTag::add;
    n.lhs = a.index;
    n.rhs = b.index;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
    check_same_shape("sub", a, b);
    Node n;
    n.value = value(a);
    auto d = n.value.data();
    auto s = value(b).data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] -= s[i];
    }
    n.op = OpTag::sub;
    n.lhs = a.index;
    n.rhs = b.index;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return push(std::move(n));
}

Var Graph::hadamard(Var a, Var b) {
    check_same_shape("hadamard", a, b);
    Node n;
    n.value = value(a);
    auto d = n.value.data();
    auto s = value(b).data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] *= s[i];
    }
    n.op = OpTag::hadamard;
    n.lhs = a.index;
    n.rhs = b.index;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return push(std::move(n));
}

Var Graph::scale(Var a, double s) {
    Node n;
    n.value = value(a);
    for (double& v : n.value.data()) {
        v *= s;
    }
    n.op = OpTag::scale;
    n.lhs = a.index;
    n.scalar = s;
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Var Graph::silu(Var a) {
    Node n;
    n.value = value(a);
    // aux caches sigmoid(x) for the backward pass.
    n.aux = Tensor(n.value.rows(), n.value.cols());
    auto d = n.value.data();
    auto sg = n.aux.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        sg[i] = kernels::sigmoid(d[i]);
        d[i] *= sg[i];
    }
    n.op = OpTag::silu;
    n.lhs = a.index;
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Var Graph::tanh(Var a) {
    Node n;
    n.value = value(a);
    for (double& v : n.value.data()) {
        v = std::tanh(v);
    }
    n.op = OpTag::tanh;
    n.lhs = a.index;
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Var Graph::add_bias(Var x, Var bias) {
    const Tensor& xv = value(x);
    const Tensor& bv = value(bias);
    if (bv.rows() != 1 || bv.cols() != xv.cols()) {
        throw DimensionError("add_bias shape mismatch: " + xv.shape_str() + " + " + bv.shape_str());
    }
    Node n;
    n.value = xv;
    for (std::size_t r = 0; r < xv.rows(); ++r) {
        auto row = n.value.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            row[c] += bv[c];
        }
    }
    n.op = OpTag::add_bias;
    n.lhs = x.index;
    n.rhs = bias.index;
    n.requires_grad = requires_grad(x) || requires_grad(bias);
    return push(std::move(n));
}

Var Graph::concat_cols(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (x.rows() != y.rows()) {
        throw DimensionError("concat_cols row mismatch: " + x.shape_str() + " | " + y.shape_str());
    }
    Node n;
    n.value = Tensor(x.rows(), x.cols() + y.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto out = n.value.row(r);
        auto xr = x.row(r);
        auto yr = y.row(r);
        std::copy(xr.begin(), xr.end(), out.begin());
        std::copy(yr.begin(), yr.end(), out.begin() + static_cast<std::ptrdiff_t>(xr.size()));
    }
    n.op = OpTag::concat_cols;
    n.lhs = a.index;
    n.rhs = b.index;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return push(std::move(n));
}

Var Graph::gather_rows(Var table, std::span<const std::size_t> ids) {
    Node n;
    n.value = value(table).gather_rows(ids);
    n.ids.assign(ids.begin(), ids.end());
    n.op = OpTag::gather_rows;
    n.lhs = table.index;
    n.requires_grad = requires_grad(table);
    return push(std::move(n));
}

Var Graph::mse(Var pred, const Tensor& target) {
    const Tensor& p = value(pred);
    if (!p.same_shape(target)) {
        throw DimensionError("mse shape mismatch: " + p.shape_str() + " vs " + target.shape_str());
    }
    if (p.size() == 0) {
        throw ContractError("mse of an empty tensor");
    }
    Node n;
    n.aux = p;
    auto res = n.aux.data();
    auto t = target.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < res.size(); ++i) {
        res[i] -= t[i];
        acc += res[i] * res[i];
    }
    n.value = Tensor::scalar(acc / static_cast<double>(res.size()));
    n.op = OpTag::mse;
    n.lhs = pred.index;
    n.requires_grad = requires_grad(pred);
    return push(std::move(n));
}

Var Graph::elementwise(ElementwiseOp op, Var a, Var b, double scalar) {
    switch (op) {
    case ElementwiseOp::add:
        return add(a, b);
    case ElementwiseOp::sub:
        return sub(a, b);
    case ElementwiseOp::hadamard:
        return hadamard(a, b);
    case ElementwiseOp::scale:
        return scale(a, scalar);
    case ElementwiseOp::silu:
        return silu(a);
    case ElementwiseOp::tanh:
        return tanh(a);
    }
    throw ContractError("unknown elementwise op");
}

void Graph::zero_grad() {
    for (Node& n : nodes_) {
        n.grad.fill(0.0);
    }
}

void Graph::backward(Var loss) {
    const Node& root = node(loss);
    if (root.value.rows() != 1 || root.value.cols() != 1) {
        throw ContractError("backward requires a scalar loss, got " + root.value.shape_str());
    }
    // Fresh adjoints for this sweep; added into the persistent grads at the end
    // so repeated calls accumulate.
    std::vector<Tensor> adj(loss.index + 1);
    adj[loss.index] = Tensor::scalar(1.0);

    auto adj_of = [&](std::size_t i) -> Tensor& {
        if (adj[i].empty() && nodes_[i].value.size() != 0) {
            adj[i] = Tensor(nodes_[i].value.rows(), nodes_[i].value.cols());
        }
        return adj[i];
    };

    for (std::size_t idx = loss.index + 1; idx-- > 0;) {
        const Node& n = nodes_[idx];
        if (!n.requires_grad || adj[idx].empty() || n.op == OpTag::leaf) {
            continue;
        }
        const Tensor& g = adj[idx];
        const bool lg = n.lhs < nodes_.size() && nodes_[n.lhs].requires_grad;
        const bool rg = n.rhs < nodes_.size() && nodes_[n.rhs].requires_grad;
        switch (n.op) {
        case OpTag::leaf:
            break;
        case OpTag::matmul:
            if (lg) {
                kernels::gemm_nt(g, nodes_[n.rhs].value, adj_of(n.lhs), true);
            }
            if (rg) {
                kernels::gemm_tn(nodes_[n.lhs].value, g, adj_of(n.rhs), true);
            }
            break;
        case OpTag::transpose:
            if (lg) {
                Tensor& d = adj_of(n.lhs);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    for (std::size_t c = 0; c < g.cols(); ++c) {
                        d(c, r) += g(r, c);
                    }
                }
            }
            break;
        case OpTag::add:
            if (lg) {
                add_into(adj_of(n.lhs), g);
            }
            if (rg) {
                add_into(adj_of(n.rhs), g);
            }
            break;
        case OpTag::sub:
            if (lg) {
                add_into(adj_of(n.lhs), g);
            }
            if (rg) {
                auto d = adj_of(n.rhs).data();
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d[i] -= g[i];
                }
            }
            break;
        case OpTag::hadamard:
            if (lg) {
                auto d = adj_of(n.lhs).data();
                const Tensor& other = nodes_[n.rhs].value;
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d[i] += g[i] * other[i];
                }
            }
            if (rg) {
                auto d = adj_of(n.rhs).data();
                const Tensor& other = nodes_[n.lhs].value;
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d[i] += g[i] * other[i];
                }
            }
            break;
        case OpTag::scale:
            if (lg) {
                auto d = adj_of(n.lhs).data();
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d[i] += g[i] * n.scalar;
                }
            }
            break;
        case OpTag::silu:
            if (lg) {
                auto d = adj_of(n.lhs).data();
                const Tensor& x = nodes_[n.lhs].value;
                for (std::size_t i = 0; i < d.size(); ++i) {
                    const double s = n.aux[i];
                    d[i] += g[i] * (s * (1.0 + x[i] * (1.0 - s)));
                }
            }
            break;
        case OpTag::tanh:
            if (lg) {
                auto d = adj_of(n.lhs).data();
                for (std::size_t i = 0; i < d.size(); ++i) {
                    const double t = n.value[i];
                    d[i] += g[i] * (1.0 - t * t);
                }
            }
            break;
        case OpTag::add_bias:
            if (lg) {
                add_into(adj_of(n.lhs), g);
            }
            if (rg) {
                Tensor& d = adj_of(n.rhs);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    auto row = g.row(r);
                    for (std::size_t c = 0; c < row.size(); ++c) {
                        d[c] += row[c];
                    }
                }
            }
            break;
        case OpTag::concat_cols: {
            const std::size_t left = nodes_[n.lhs].value.cols();
            if (lg) {
                Tensor& d = adj_of(n.lhs);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    for (std::size_t c = 0; c < left; ++c) {
                        d(r, c) += g(r, c);
                    }
                }
            }
            if (rg) {
                Tensor& d = adj_of(n.rhs);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    for (std::size_t c = left; c < g.cols(); ++c) {
                        d(r, c - left) += g(r, c);
                    }
                }
            }
            break;
        }
        case OpTag::gather_rows:
            if (lg) {
                Tensor& d = adj_of(n.lhs);
                for (std::size_t r = 0; r < n.ids.size(); ++r) {
                    auto src = g.row(r);
                    auto dst = d.row(n.ids[r]);
                    for (std::size_t c = 0; c < src.size(); ++c) {
                        dst[c] += src[c];
                    }
                }
            }
            break;
        case OpTag::mse:
            if (lg) {
                auto d = adj_of(n.lhs).data();
                const double k = 2.0 * g[0] / static_cast<double>(n.aux.size());
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d[i] += k * n.aux[i];
                }
            }
            break;
        }
    }

    for (std::size_t i = 0; i < adj.size(); ++i) {
        if (!adj[i].empty() && nodes_[i].requires_grad) {
            add_into(nodes_[i].grad, adj[i]);
        }
    }
}

} // namespace slowfast
