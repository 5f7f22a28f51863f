#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wganplan/autodiff.hpp"
#include "wganplan/rng.hpp"
#include "wganplan/tensor.hpp"

namespace wganplan {

struct LayerSpec {
    enum class Kind { Conv2d, Dense, LeakyRelu, Tanh, Flatten, Reshape };
    Kind kind = Kind::Tanh;

    std::size_t in_ch = 0, out_ch = 0, kernel = 0, stride = 1, padding = 0;  // conv2d
    std::size_t in_features = 0, out_features = 0;                           // dense
    double slope = 0.2;                                                      // leaky_relu
    std::vector<std::size_t> target_shape;                                   // reshape

    static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride = 1, std::size_t padding = 0);
    static LayerSpec dense(std::size_t in_features, std::size_t out_features);
    static LayerSpec leaky_relu(double slope = 0.2);
    static LayerSpec tanh_layer();
    static LayerSpec flatten();
    static LayerSpec reshape(std::vector<std::size_t> shape);
};

/// Ordered layer stack. Shape compatibility is validated against a concrete
/// input shape; parameters are one weight and one bias tensor per conv2d or
/// dense layer, in layer order.
struct NetSpec {
    std::vector<LayerSpec> layers;

    /// Output shape for the given input shape; throws on incompatibility.
    std::vector<std::size_t> output_shape(std::vector<std::size_t> input_shape) const;
    /// Parameter tensor shapes (conv: W[out_ch, in_ch*k*k], b[out_ch];
    /// dense: W[out,in], b[out]).
    std::vector<std::vector<std::size_t>> param_shapes() const;
    std::size_t param_count() const { return param_shapes().size(); }
};

/// Deterministic scaled-normal initialization (std = 1/sqrt(fan_in), zero biases).
std::vector<Tensor> init_params(const NetSpec& net, Rng& rng);

/// Appends the net's forward computation to the graph and returns the output
/// var. `params` are leaf/constant vars matching net.param_shapes().
VarId build_forward(Graph& g, const NetSpec& net, std::span<const VarId> params, VarId x);

/// One-shot evaluation without keeping the tape.
Tensor forward_eval(const NetSpec& net, const std::vector<Tensor>& params, const Tensor& x);

/// Numeric reverse pass: gradients of a scalar loss w.r.t. all params and
/// the input. Returns {param_grads..., input_grad}.
std::vector<Tensor> backward_eval(const NetSpec& net, const std::vector<Tensor>& params,
                                  const Tensor& x);

/// Builds ||d f / d x||_2 as a differentiable scalar var. `f` must be scalar
/// valued; the result can be differentiated again w.r.t. the params.
VarId input_grad_norm_graph(Graph& g, const NetSpec& net, std::span<const VarId> params, VarId x);

struct AdamState {
    double lr = 4e-5;
    double beta1 = 0.0;
    double beta2 = 0.9;
    double eps = 1e-8;
    long long step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    static AdamState init(const std::vector<Tensor>& params, double lr = 4e-5,
                          double beta1 = 0.0, double beta2 = 0.9);
};

/// Standard bias-corrected Adam update, in place.
void adam_step(AdamState& state, std::vector<Tensor>& params, const std::vector<Tensor>& grads);

/// Versioned little-endian weights block: magic, version, tensor count, then
/// per tensor a kind tag, shape and raw 64-bit reals.
void save_weights(std::ostream& out, const std::vector<Tensor>& tensors,
                  const std::vector<std::uint32_t>& kind_tags);
void load_weights(std::istream& in, std::vector<Tensor>& tensors,
                  std::vector<std::uint32_t>& kind_tags);

}  // namespace wganplan
