#include "wganplan/net.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace wganplan {

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride, std::size_t padding) {
    if (in_ch == 0 || out_ch == 0 || kernel == 0 || stride == 0)
        throw std::invalid_argument("conv2d: zero-sized geometry");
    LayerSpec l;
    l.kind = Kind::Conv2d;
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    l.kernel = kernel;
    l.stride = stride;
    l.padding = padding;
    return l;
}

LayerSpec LayerSpec::dense(std::size_t in_features, std::size_t out_features) {
    if (in_features == 0 || out_features == 0)
        throw std::invalid_argument("dense: zero-sized geometry");
    LayerSpec l;
    l.kind = Kind::Dense;
    l.in_features = in_features;
    l.out_features = out_features;
    return l;
}

LayerSpec LayerSpec::leaky_relu(double slope) {
    LayerSpec l;
    l.kind = Kind::LeakyRelu;
    l.slope = slope;
    return l;
}

LayerSpec LayerSpec::tanh_layer() {
    LayerSpec l;
    l.kind = Kind::Tanh;
    return l;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec l;
    l.kind = Kind::Flatten;
    return l;
}

LayerSpec LayerSpec::reshape(std::vector<std::size_t> shape) {
    LayerSpec l;
    l.kind = Kind::Reshape;
    l.target_shape = std::move(shape);
    return l;
}

namespace {

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
    std::size_t padded = in + 2 * padding;
    if (padded < kernel) throw std::invalid_argument("conv2d: kernel larger than padded input");
    return (padded - kernel) / stride + 1;
}

// im2col index tables are pure geometry; cache them across calls.
Graph::IndexTable im2col_table(std::size_t ch, std::size_t h, std::size_t w, std::size_t k,
                               std::size_t s, std::size_t p) {
    using Key = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t, std::size_t,
                           std::size_t>;
    static std::map<Key, Graph::IndexTable> cache;
    static std::mutex mutex;
    Key key{ch, h, w, k, s, p};
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    std::size_t ho = conv_out_extent(h, k, s, p);
    std::size_t wo = conv_out_extent(w, k, s, p);
    auto table = std::make_shared<std::vector<std::int64_t>>(ch * k * k * ho * wo);
    std::size_t idx = 0;
    for (std::size_t c = 0; c < ch; ++c) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    std::int64_t iy =
                        static_cast<std::int64_t>(oy * s + ki) - static_cast<std::int64_t>(p);
                    for (std::size_t ox = 0; ox < wo; ++ox, ++idx) {
                        std::int64_t ix =
                            static_cast<std::int64_t>(ox * s + kj) - static_cast<std::int64_t>(p);
                        bool inside = iy >= 0 && iy < static_cast<std::int64_t>(h) && ix >= 0 &&
                                      ix < static_cast<std::int64_t>(w);
                        (*table)[idx] =
                            inside ? (static_cast<std::int64_t>(c * h) + iy) *
                                             static_cast<std::int64_t>(w) +
                                         ix
                                   : -1;
                    }
                }
            }
        }
    }
    cache[key] = table;
    return table;
}

Graph::IndexTable row_broadcast_table(std::size_t rows, std::size_t cols) {
    using Key = std::pair<std::size_t, std::size_t>;
    static std::map<Key, Graph::IndexTable> cache;
    static std::mutex mutex;
    std::lock_guard lock(mutex);
    auto it = cache.find({rows, cols});
    if (it != cache.end()) return it->second;
    auto table = std::make_shared<std::vector<std::int64_t>>(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) (*table)[r * cols + c] = static_cast<std::int64_t>(r);
    cache[{rows, cols}] = table;
    return table;
}

}  // namespace

std::vector<std::size_t> NetSpec::output_shape(std::vector<std::size_t> shape) const {
    for (const LayerSpec& l : layers) {
        switch (l.kind) {
            case LayerSpec::Kind::Conv2d: {
                if (shape.size() != 3 || shape[0] != l.in_ch)
                    throw std::invalid_argument("NetSpec: conv2d input must be [in_ch,H,W]");
                shape = {l.out_ch, conv_out_extent(shape[1], l.kernel, l.stride, l.padding),
                         conv_out_extent(shape[2], l.kernel, l.stride, l.padding)};
                break;
            }
            case LayerSpec::Kind::Dense:
                if (shape.size() != 1 || shape[0] != l.in_features)
                    throw std::invalid_argument("NetSpec: dense input must be [in_features]");
                shape = {l.out_features};
                break;
            case LayerSpec::Kind::LeakyRelu:
            case LayerSpec::Kind::Tanh:
                break;
            case LayerSpec::Kind::Flatten:
                shape = {Tensor::numel_of(shape)};
                break;
            case LayerSpec::Kind::Reshape:
                if (Tensor::numel_of(l.target_shape) != Tensor::numel_of(shape))
                    throw std::invalid_argument("NetSpec: reshape element count mismatch");
                shape = l.target_shape;
                break;
        }
    }
    return shape;
}

std::vector<std::vector<std::size_t>> NetSpec::param_shapes() const {
    std::vector<std::vector<std::size_t>> shapes;
    for (const LayerSpec& l : layers) {
        if (l.kind == LayerSpec::Kind::Conv2d) {
            shapes.push_back({l.out_ch, l.in_ch * l.kernel * l.kernel});
            shapes.push_back({l.out_ch});
        } else if (l.kind == LayerSpec::Kind::Dense) {
            shapes.push_back({l.out_features, l.in_features});
            shapes.push_back({l.out_features});
        }
    }
    return shapes;
}

std::vector<Tensor> init_params(const NetSpec& net, Rng& rng) {
    std::vector<Tensor> params;
    for (const LayerSpec& l : net.layers) {
        if (l.kind == LayerSpec::Kind::Conv2d || l.kind == LayerSpec::Kind::Dense) {
            std::size_t fan_in =
                l.kind == LayerSpec::Kind::Conv2d ? l.in_ch * l.kernel * l.kernel : l.in_features;
            std::size_t out =
                l.kind == LayerSpec::Kind::Conv2d ? l.out_ch : l.out_features;
            std::size_t cols = l.kind == LayerSpec::Kind::Conv2d ? l.in_ch * l.kernel * l.kernel
                                                                 : l.in_features;
            Tensor w({out, cols});
            double std_dev = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (double& v : w.data) v = std_dev * rng.normal();
            params.push_back(std::move(w));
            params.push_back(Tensor({out}));  // zero bias
        }
    }
    return params;
}

VarId build_forward(Graph& g, const NetSpec& net, std::span<const VarId> params, VarId x) {
    if (params.size() != net.param_count())
        throw std::invalid_argument("build_forward: parameter count mismatch");
    net.output_shape(g.value(x).shape);  // validates the whole chain up front

    VarId cur = x;
    std::size_t pi = 0;
    for (const LayerSpec& l : net.layers) {
        switch (l.kind) {
            case LayerSpec::Kind::Conv2d: {
                const auto& shape = g.value(cur).shape;
                std::size_t h = shape[1], w = shape[2];
                std::size_t ho = conv_out_extent(h, l.kernel, l.stride, l.padding);
                std::size_t wo = conv_out_extent(w, l.kernel, l.stride, l.padding);
                VarId weights = params[pi++];
                VarId bias = params[pi++];
                VarId cols = g.gather(cur, im2col_table(l.in_ch, h, w, l.kernel, l.stride, l.padding),
                                      {l.in_ch * l.kernel * l.kernel, ho * wo});
                VarId mm = g.matmul(weights, cols);
                VarId bb = g.gather(bias, row_broadcast_table(l.out_ch, ho * wo), {l.out_ch, ho * wo});
                cur = g.reshape(g.add(mm, bb), {l.out_ch, ho, wo});
                break;
            }
            case LayerSpec::Kind::Dense: {
                VarId weights = params[pi++];
                VarId bias = params[pi++];
                VarId xm = g.reshape(cur, {l.in_features, 1});
                VarId mm = g.matmul(weights, xm);
                VarId sum = g.add(mm, g.reshape(bias, {l.out_features, 1}));
                cur = g.reshape(sum, {l.out_features});
                break;
            }
            case LayerSpec::Kind::LeakyRelu:
                cur = g.leaky_relu(cur, l.slope);
                break;
            case LayerSpec::Kind::Tanh:
                cur = g.tanh_op(cur);
                break;
            case LayerSpec::Kind::Flatten:
                cur = g.reshape(cur, {g.value(cur).numel()});
                break;
            case LayerSpec::Kind::Reshape:
                cur = g.reshape(cur, l.target_shape);
                break;
        }
    }
    return cur;
}

Tensor forward_eval(const NetSpec& net, const std::vector<Tensor>& params, const Tensor& x) {
    Graph g;
    std::vector<VarId> pv;
    pv.reserve(params.size());
    for (const Tensor& p : params) pv.push_back(g.constant(p));
    VarId out = build_forward(g, net, pv, g.constant(x));
    return g.value(out);
}

std::vector<Tensor> backward_eval(const NetSpec& net, const std::vector<Tensor>& params,
                                  const Tensor& x) {
    Graph g;
    std::vector<VarId> vars;
    vars.reserve(params.size() + 1);
    for (const Tensor& p : params) vars.push_back(g.leaf(p));
    VarId xv = g.leaf(x);
    vars.push_back(xv);
    VarId out = build_forward(g, net, std::span(vars.data(), params.size()), xv);
    if (g.value(out).numel() != 1)
        throw std::invalid_argument("backward_eval: net output must be scalar");
    std::vector<VarId> grads = g.gradients(out, vars);
    std::vector<Tensor> out_tensors;
    out_tensors.reserve(grads.size());
    for (VarId gv : grads) out_tensors.push_back(g.value(gv));
    return out_tensors;
}

VarId input_grad_norm_graph(Graph& g, const NetSpec& net, std::span<const VarId> params, VarId x) {
    if (!g.requires_grad(x))
        throw std::invalid_argument("input_grad_norm_graph: input var must require gradients");
    VarId out = build_forward(g, net, params, x);
    if (g.value(out).numel() != 1)
        throw std::invalid_argument("input_grad_norm_graph: net output must be scalar");
    VarId grad_x = g.gradients(out, std::span(&x, 1))[0];
    VarId sumsq = g.sum(g.mul(grad_x, grad_x));
    // tiny bias keeps the norm differentiable at exactly zero gradient
    return g.pow_const(g.add_scalar(sumsq, 1e-12), 0.5);
}

AdamState AdamState::init(const std::vector<Tensor>& params, double lr, double beta1,
                          double beta2) {
    AdamState s;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor& p : params) {
        s.m.push_back(Tensor(p.shape));
        s.v.push_back(Tensor(p.shape));
    }
    return s;
}

void adam_step(AdamState& state, std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: size mismatch");
    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].same_shape(grads[i]))
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        for (std::size_t j = 0; j < params[i].numel(); ++j) {
            double gval = grads[i].data[j];
            double& m = state.m[i].data[j];
            double& v = state.v[i].data[j];
            m = state.beta1 * m + (1.0 - state.beta1) * gval;
            v = state.beta2 * v + (1.0 - state.beta2) * gval * gval;
            double m_hat = m / bc1;
            double v_hat = v / bc2;
            params[i].data[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("weights: truncated stream");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("weights: truncated stream");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

constexpr char kWeightsMagic[9] = "WGPWTS01";

}  // namespace

void save_weights(std::ostream& out, const std::vector<Tensor>& tensors,
                  const std::vector<std::uint32_t>& kind_tags) {
    if (tensors.size() != kind_tags.size())
        throw std::invalid_argument("save_weights: one kind tag per tensor");
    out.write(kWeightsMagic, 8);
    write_u32(out, 1);  // format version
    write_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        write_u32(out, kind_tags[i]);
        write_u32(out, static_cast<std::uint32_t>(tensors[i].ndim()));
        for (std::size_t dim : tensors[i].shape) write_u64(out, dim);
        for (double v : tensors[i].data) write_f64(out, v);
    }
}

void load_weights(std::istream& in, std::vector<Tensor>& tensors,
                  std::vector<std::uint32_t>& kind_tags) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string_view(magic, 8) != std::string_view(kWeightsMagic, 8))
        throw std::runtime_error("weights: bad magic");
    std::uint32_t version = read_u32(in);
    if (version != 1) throw std::runtime_error("weights: unsupported version");
    std::uint32_t count = read_u32(in);
    tensors.clear();
    kind_tags.clear();
    tensors.reserve(count);
    kind_tags.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        kind_tags.push_back(read_u32(in));
        std::uint32_t ndim = read_u32(in);
        std::vector<std::size_t> shape(ndim);
        for (std::uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<std::size_t>(read_u64(in));
        Tensor t(shape);
        for (double& v : t.data) v = read_f64(in);
        tensors.push_back(std::move(t));
    }
}

}  // namespace wganplan
