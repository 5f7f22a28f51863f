#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "wganplan/tensor.hpp"

namespace wganplan {

using VarId = std::int32_t;

/// Eagerly-evaluated computation tape. Every operation appends a node whose
/// value is computed immediately; `gradients` emits the reverse pass as new
/// nodes on the same tape, so gradient expressions are themselves
/// differentiable (reverse-over-reverse for the gradient penalty).
class Graph {
  public:
    enum class Op : std::uint8_t {
        Leaf,
        Constant,
        Add,
        Sub,
        Mul,
        Scale,
        AddScalar,
        PowConst,
        Tanh,
        LeakyRelu,
        MatMul,
        Transpose,
        Gather,
        ScatterAdd,
        Reshape,
    };

    using IndexTable = std::shared_ptr<const std::vector<std::int64_t>>;

    VarId leaf(Tensor v, bool requires_grad = true);
    VarId constant(Tensor v);

    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId mul(VarId a, VarId b);
    VarId scale(VarId a, double c);
    VarId add_scalar(VarId a, double c);
    VarId pow_const(VarId a, double p);
    VarId tanh_op(VarId a);
    VarId leaky_relu(VarId a, double slope);
    /// [m,k] x [k,n] -> [m,n]
    VarId matmul(VarId a, VarId b);
    VarId transpose(VarId a);
    /// out[i] = table[i] < 0 ? 0 : a[table[i]]
    VarId gather(VarId a, IndexTable table, std::vector<std::size_t> out_shape);
    /// out[table[i]] += a[i] (entries with table[i] < 0 are dropped)
    VarId scatter_add(VarId a, IndexTable table, std::vector<std::size_t> out_shape);
    VarId reshape(VarId a, std::vector<std::size_t> shape);

    VarId sum(VarId a);
    VarId mean(VarId a);

    const Tensor& value(VarId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    bool requires_grad(VarId id) const {
        return nodes_[static_cast<std::size_t>(id)].requires_grad;
    }
    std::size_t size() const { return nodes_.size(); }

    /// Reverse-mode gradients of a scalar output w.r.t. each var in `wrt`.
    /// The returned vars live on this tape and may be differentiated again.
    /// Vars the output does not depend on get zero tensors.
    std::vector<VarId> gradients(VarId output, std::span<const VarId> wrt);

  private:
    struct Node {
        Op op;
        VarId in0 = -1;
        VarId in1 = -1;
        double scalar = 0.0;
        IndexTable table;
        Tensor value;
        bool requires_grad = false;
    };

    VarId push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<VarId>(nodes_.size() - 1);
    }
    const Node& node(VarId id) const { return nodes_[static_cast<std::size_t>(id)]; }

    std::vector<Node> nodes_;
};

}  // namespace wganplan
