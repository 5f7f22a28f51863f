#include "wganplan/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace wganplan {

VarId Graph::leaf(Tensor v, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

VarId Graph::constant(Tensor v) {
    Node n;
    n.op = Op::Constant;
    n.value = std::move(v);
    n.requires_grad = false;
    return push(std::move(n));
}

static void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

VarId Graph::add(VarId a, VarId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    check_same_shape(va, vb, "add");
    Node n;
    n.op = Op::Add;
    n.in0 = a;
    n.in1 = b;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = va.data[i] + vb.data[i];
    return push(std::move(n));
}

VarId Graph::sub(VarId a, VarId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    check_same_shape(va, vb, "sub");
    Node n;
    n.op = Op::Sub;
    n.in0 = a;
    n.in1 = b;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = va.data[i] - vb.data[i];
    return push(std::move(n));
}

VarId Graph::mul(VarId a, VarId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    check_same_shape(va, vb, "mul");
    Node n;
    n.op = Op::Mul;
    n.in0 = a;
    n.in1 = b;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = va.data[i] * vb.data[i];
    return push(std::move(n));
}

VarId Graph::scale(VarId a, double c) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::Scale;
    n.in0 = a;
    n.scalar = c;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = c * va.data[i];
    return push(std::move(n));
}

VarId Graph::add_scalar(VarId a, double c) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::AddScalar;
    n.in0 = a;
    n.scalar = c;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = va.data[i] + c;
    return push(std::move(n));
}

VarId Graph::pow_const(VarId a, double p) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::PowConst;
    n.in0 = a;
    n.scalar = p;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = std::pow(va.data[i], p);
    return push(std::move(n));
}

VarId Graph::tanh_op(VarId a) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::Tanh;
    n.in0 = a;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = std::tanh(va.data[i]);
    return push(std::move(n));
}

VarId Graph::leaky_relu(VarId a, double slope) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::LeakyRelu;
    n.in0 = a;
    n.scalar = slope;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) {
        double x = va.data[i];
        n.value.data[i] = x > 0.0 ? x : slope * x;
    }
    return push(std::move(n));
}

VarId Graph::matmul(VarId a, VarId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.ndim() != 2 || vb.ndim() != 2 || va.shape[1] != vb.shape[0])
        throw std::invalid_argument("matmul: incompatible shapes");
    const std::size_t m = va.shape[0], k = va.shape[1], nn = vb.shape[1];
    Node n;
    n.op = Op::MatMul;
    n.in0 = a;
    n.in1 = b;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = Tensor({m, nn});
    const double* A = va.data.data();
    const double* B = vb.data.data();
    double* C = n.value.data.data();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = C + i * nn;
        for (std::size_t kk = 0; kk < k; ++kk) {
            double aik = A[i * k + kk];
            if (aik == 0.0) continue;
            const double* brow = B + kk * nn;
            for (std::size_t j = 0; j < nn; ++j) crow[j] += aik * brow[j];
        }
    }
    return push(std::move(n));
}

VarId Graph::transpose(VarId a) {
    const Tensor& va = value(a);
    if (va.ndim() != 2) throw std::invalid_argument("transpose: need a 2-D tensor");
    Node n;
    n.op = Op::Transpose;
    n.in0 = a;
    n.requires_grad = requires_grad(a);
    n.value = Tensor({va.shape[1], va.shape[0]});
    for (std::size_t r = 0; r < va.shape[0]; ++r)
        for (std::size_t c = 0; c < va.shape[1]; ++c) n.value.at2(c, r) = va.at2(r, c);
    return push(std::move(n));
}

VarId Graph::gather(VarId a, IndexTable table, std::vector<std::size_t> out_shape) {
    const Tensor& va = value(a);
    if (table->size() != Tensor::numel_of(out_shape))
        throw std::invalid_argument("gather: table length must match output size");
    Node n;
    n.op = Op::Gather;
    n.in0 = a;
    n.table = std::move(table);
    n.requires_grad = requires_grad(a);
    n.value = Tensor(std::move(out_shape));
    for (std::size_t i = 0; i < n.value.numel(); ++i) {
        std::int64_t src = (*n.table)[i];
        n.value.data[i] = src < 0 ? 0.0 : va.data[static_cast<std::size_t>(src)];
    }
    return push(std::move(n));
}

VarId Graph::scatter_add(VarId a, IndexTable table, std::vector<std::size_t> out_shape) {
    const Tensor& va = value(a);
    if (table->size() != va.numel())
        throw std::invalid_argument("scatter_add: table length must match input size");
    Node n;
    n.op = Op::ScatterAdd;
    n.in0 = a;
    n.table = std::move(table);
    n.requires_grad = requires_grad(a);
    n.value = Tensor(std::move(out_shape));
    for (std::size_t i = 0; i < va.numel(); ++i) {
        std::int64_t dst = (*n.table)[i];
        if (dst >= 0) n.value.data[static_cast<std::size_t>(dst)] += va.data[i];
    }
    return push(std::move(n));
}

VarId Graph::reshape(VarId a, std::vector<std::size_t> shape) {
    const Tensor& va = value(a);
    if (Tensor::numel_of(shape) != va.numel())
        throw std::invalid_argument("reshape: element count mismatch");
    Node n;
    n.op = Op::Reshape;
    n.in0 = a;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(std::move(shape), va.data);
    return push(std::move(n));
}

VarId Graph::sum(VarId a) {
    const Tensor& va = value(a);
    auto table = std::make_shared<std::vector<std::int64_t>>(va.numel(), 0);
    return scatter_add(a, std::move(table), {1});
}

VarId Graph::mean(VarId a) {
    return scale(sum(a), 1.0 / static_cast<double>(value(a).numel()));
}

std::vector<VarId> Graph::gradients(VarId output, std::span<const VarId> wrt) {
    if (value(output).numel() != 1)
        throw std::invalid_argument("gradients: output must be a scalar");

    // Node ids are already topologically ordered (append-only tape).
    std::unordered_map<VarId, VarId> adjoint;
    adjoint.reserve(64);
    if (requires_grad(output)) adjoint[output] = constant(Tensor::scalar(1.0));

    auto accumulate = [&](VarId target, VarId contribution) {
        if (!requires_grad(target)) return;
        auto it = adjoint.find(target);
        if (it == adjoint.end())
            adjoint[target] = contribution;
        else
            it->second = add(it->second, contribution);
    };

    for (VarId id = output; id >= 0; --id) {
        auto it = adjoint.find(id);
        if (it == adjoint.end()) continue;
        const VarId g = it->second;
        // copy node fields; `nodes_` may reallocate as new nodes are pushed
        const Op op = node(id).op;
        const VarId in0 = node(id).in0;
        const VarId in1 = node(id).in1;
        const double s = node(id).scalar;
        const IndexTable table = node(id).table;

        switch (op) {
            case Op::Leaf:
            case Op::Constant:
                break;
            case Op::Add:
                accumulate(in0, g);
                accumulate(in1, g);
                break;
            case Op::Sub:
                accumulate(in0, g);
                accumulate(in1, scale(g, -1.0));
                break;
            case Op::Mul:
                if (requires_grad(in0)) accumulate(in0, mul(g, in1));
                if (requires_grad(in1)) accumulate(in1, mul(g, in0));
                break;
            case Op::Scale:
                accumulate(in0, scale(g, s));
                break;
            case Op::AddScalar:
                accumulate(in0, g);
                break;
            case Op::PowConst:
                if (requires_grad(in0))
                    accumulate(in0, mul(g, scale(pow_const(in0, s - 1.0), s)));
                break;
            case Op::Tanh:
                if (requires_grad(in0)) {
                    VarId one_minus_y2 = add_scalar(scale(mul(id, id), -1.0), 1.0);
                    accumulate(in0, mul(g, one_minus_y2));
                }
                break;
            case Op::LeakyRelu:
                if (requires_grad(in0)) {
                    // the slope mask is piecewise constant; treating it as a
                    // constant is exact away from the kink
                    const Tensor& x = value(in0);
                    Tensor mask(x.shape);
                    for (std::size_t i = 0; i < x.numel(); ++i)
                        mask.data[i] = x.data[i] > 0.0 ? 1.0 : s;
                    accumulate(in0, mul(g, constant(std::move(mask))));
                }
                break;
            case Op::MatMul:
                if (requires_grad(in0)) accumulate(in0, matmul(g, transpose(in1)));
                if (requires_grad(in1)) accumulate(in1, matmul(transpose(in0), g));
                break;
            case Op::Transpose:
                accumulate(in0, transpose(g));
                break;
            case Op::Gather:
                if (requires_grad(in0)) accumulate(in0, scatter_add(g, table, value(in0).shape));
                break;
            case Op::ScatterAdd:
                if (requires_grad(in0)) accumulate(in0, gather(g, table, value(in0).shape));
                break;
            case Op::Reshape:
                accumulate(in0, reshape(g, value(in0).shape));
                break;
        }
        adjoint.erase(id);  // done with this node's adjoint entry unless it is a wrt
        if (op == Op::Leaf) adjoint[id] = g;
    }

    std::vector<VarId> out;
    out.reserve(wrt.size());
    for (VarId w : wrt) {
        auto it = adjoint.find(w);
        if (it != adjoint.end())
            out.push_back(it->second);
        else
            out.push_back(constant(Tensor(value(w).shape)));
    }
    return out;
}

}  // namespace wganplan
