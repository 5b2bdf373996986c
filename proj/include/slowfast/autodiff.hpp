#pragma once

// Reverse-mode automatic differentiation over a static tape. A Graph is built
// fresh for every forward pass; nodes are appended in evaluation order, so the
// node index is a valid topological order for the backward sweep.

#include "slowfast/tensor.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace slowfast {

struct Var {
    std::size_t index = static_cast<std::size_t>(-1);
};

enum class OpTag {
    leaf,
    matmul,
    transpose,
    add,
    sub,
    hadamard,
    scale,
    silu,
    tanh,
    add_bias,
    concat_cols,
    gather_rows,
    mse,
};

enum class ElementwiseOp { add, sub, hadamard, scale, silu, tanh };

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    // Differentiable input (parameter or probe).
    Var leaf(Tensor value, bool requires_grad = true);
    // Input that never receives a gradient.
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var scale(Var a, double s);
    Var silu(Var a);
    Var tanh(Var a);
    // x[b×n] + bias[1×n] broadcast over rows.
    Var add_bias(Var x, Var bias);
    Var concat_cols(Var a, Var b);
    // Rows of table selected by ids; backward scatters into the table.
    Var gather_rows(Var table, std::span<const std::size_t> ids);
    // Mean over all entries of (pred − target)².
    Var mse(Var pred, const Tensor& target);

    // Unary ops ignore `b`; scale reads `scalar`.
    Var elementwise(ElementwiseOp op, Var a, Var b = {}, double scalar = 0.0);

    // Accumulates dloss/dnode into grad() of every node that requires a gradient.
    void backward(Var loss);
    void zero_grad();

    const Tensor& value(Var v) const { return node(v).value; }
    // Only nodes that require a gradient carry one; others throw ContractError.
    const Tensor& grad(Var v) const;
    bool requires_grad(Var v) const { return node(v).requires_grad; }
    OpTag op(Var v) const { return node(v).op; }
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        OpTag op = OpTag::leaf;
        std::size_t lhs = static_cast<std::size_t>(-1);
        std::size_t rhs = static_cast<std::size_t>(-1);
        double scalar = 0.0;
        std::vector<std::size_t> ids;
        Tensor aux;
        bool requires_grad = false;
    };

    const Node& node(Var v) const;
    Var push(Node n);
    void check_same_shape(const char* op, Var a, Var b) const;

    std::vector<Node> nodes_;
};

} // namespace slowfast
