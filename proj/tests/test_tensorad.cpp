#include <doctest.h>

#include <cmath>
#include <sstream>

#include "wganplan/net.hpp"
#include "wganplan/rng.hpp"

using namespace wganplan;

namespace {

double scalar_out(const NetSpec& net, const std::vector<Tensor>& params, const Tensor& x) {
    return forward_eval(net, params, x).data[0];
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

// central finite differences of the scalar net output w.r.t. every parameter
// entry and every input entry
double max_fd_rel_err(const NetSpec& net, const std::vector<Tensor>& params, const Tensor& x,
                      double h = 1e-5) {
    std::vector<Tensor> grads = backward_eval(net, params, x);
    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        for (std::size_t j = 0; j < params[pi].numel(); ++j) {
            auto pp = params;
            pp[pi].data[j] += h;
            double fp = scalar_out(net, pp, x);
            pp[pi].data[j] -= 2 * h;
            double fm = scalar_out(net, pp, x);
            double fd = (fp - fm) / (2 * h);
            double ad = grads[pi].data[j];
            if (std::abs(fd) > 1e-7 || std::abs(ad) > 1e-7)
                worst = std::max(worst, rel_err(fd, ad));
        }
    }
    for (std::size_t j = 0; j < x.numel(); ++j) {
        Tensor xx = x;
        xx.data[j] += h;
        double fp = scalar_out(net, params, xx);
        xx.data[j] -= 2 * h;
        double fm = scalar_out(net, params, xx);
        double fd = (fp - fm) / (2 * h);
        double ad = grads.back().data[j];
        if (std::abs(fd) > 1e-7 || std::abs(ad) > 1e-7) worst = std::max(worst, rel_err(fd, ad));
    }
    return worst;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.normal();
    return t;
}

}  // namespace

TEST_CASE("forward: identity dense layer reproduces the input") {
    NetSpec net;
    net.layers = {LayerSpec::dense(3, 3)};
    std::vector<Tensor> params = {Tensor({3, 3}), Tensor({3})};
    for (int i = 0; i < 3; ++i) params[0].at2(i, i) = 1.0;
    Tensor x({3}, {0.3, -0.8, 1.5});
    CHECK(forward_eval(net, params, x).data == x.data);
}

TEST_CASE("forward: tanh of zero is zero") {
    NetSpec net;
    net.layers = {LayerSpec::tanh_layer()};
    Tensor x({4});
    Tensor y = forward_eval(net, {}, x);
    for (double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("forward matches a straight-line recomputation on a 2-layer net") {
    Rng rng(64);
    NetSpec net;
    net.layers = {LayerSpec::dense(4, 5), LayerSpec::tanh_layer(), LayerSpec::dense(5, 2)};
    auto params = init_params(net, rng);
    Tensor x = random_tensor({4}, rng);

    Tensor out = forward_eval(net, params, x);

    std::vector<double> h(5, 0.0);
    for (int r = 0; r < 5; ++r) {
        double acc = params[1].data[r];
        for (int c = 0; c < 4; ++c) acc += params[0].at2(r, c) * x.data[c];
        h[r] = std::tanh(acc);
    }
    for (int r = 0; r < 2; ++r) {
        double acc = params[3].data[r];
        for (int c = 0; c < 5; ++c) acc += params[2].at2(r, c) * h[c];
        CHECK(out.data[r] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("backward: linear net input gradient equals the weights") {
    NetSpec net;
    net.layers = {LayerSpec::dense(4, 1)};
    std::vector<Tensor> params = {Tensor({1, 4}, {0.5, -1.0, 2.0, 0.25}), Tensor({1})};
    Tensor x({4}, {0.1, 0.2, 0.3, 0.4});
    auto grads = backward_eval(net, params, x);
    CHECK(grads.back().data == params[0].data);
}

TEST_CASE("backward: constant-in-x net has zero input gradient") {
    NetSpec net;
    net.layers = {LayerSpec::dense(3, 1)};
    std::vector<Tensor> params = {Tensor({1, 3}), Tensor({1}, {2.5})};
    Tensor x({3}, {1.0, 1.0, 1.0});
    auto grads = backward_eval(net, params, x);
    for (double v : grads.back().data) CHECK(v == 0.0);  // zero weights: df/dx = 0
    CHECK(grads[0].data == x.data);                      // df/dW = x

    // zero input as well: every gradient except the bias vanishes
    auto zero_grads = backward_eval(net, params, Tensor({3}));
    for (double v : zero_grads[0].data) CHECK(v == 0.0);
    for (double v : zero_grads.back().data) CHECK(v == 0.0);
    CHECK(zero_grads[1].data == std::vector<double>{1.0});
}

TEST_CASE("gradients match finite differences for every layer type") {
    Rng rng(2718);
    std::vector<NetSpec> nets;

    NetSpec conv_net;
    conv_net.layers = {LayerSpec::conv2d(2, 3, 3, 2, 1), LayerSpec::tanh_layer(),
                       LayerSpec::flatten(), LayerSpec::dense(27, 1)};
    nets.push_back(conv_net);

    NetSpec dense_net;
    dense_net.layers = {LayerSpec::dense(6, 8), LayerSpec::leaky_relu(0.2),
                        LayerSpec::dense(8, 1)};
    nets.push_back(dense_net);

    NetSpec reshape_net;
    reshape_net.layers = {LayerSpec::reshape({1, 3, 3}), LayerSpec::conv2d(1, 2, 2, 1, 0),
                          LayerSpec::tanh_layer(), LayerSpec::flatten(), LayerSpec::dense(8, 1)};
    nets.push_back(reshape_net);

    for (const NetSpec& net : nets) {
        std::vector<std::size_t> in_shape;
        if (net.layers.front().kind == LayerSpec::Kind::Conv2d)
            in_shape = {net.layers.front().in_ch, 6, 6};
        else if (net.layers.front().kind == LayerSpec::Kind::Reshape)
            in_shape = {9};
        else
            in_shape = {net.layers.front().in_features};
        for (int trial = 0; trial < 5; ++trial) {
            auto params = init_params(net, rng);
            Tensor x = random_tensor(in_shape, rng);
            CHECK(max_fd_rel_err(net, params, x) < 1e-4);
        }
    }
}

TEST_CASE("conv2d agrees with a naive quadruple-loop oracle") {
    Rng rng(31415);
    const std::size_t in_ch = 2, out_ch = 3, k = 3, stride = 2, pad = 1, H = 7, W = 5;
    NetSpec net;
    net.layers = {LayerSpec::conv2d(in_ch, out_ch, k, stride, pad)};
    auto params = init_params(net, rng);
    Tensor x = random_tensor({in_ch, H, W}, rng);
    Tensor out = forward_eval(net, params, x);

    const std::size_t ho = (H + 2 * pad - k) / stride + 1;
    const std::size_t wo = (W + 2 * pad - k) / stride + 1;
    REQUIRE(out.shape == std::vector<std::size_t>{out_ch, ho, wo});
    for (std::size_t oc = 0; oc < out_ch; ++oc)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                double acc = params[1].data[oc];
                for (std::size_t ic = 0; ic < in_ch; ++ic)
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            long long iy = static_cast<long long>(oy * stride + ky) -
                                           static_cast<long long>(pad);
                            long long ix = static_cast<long long>(ox * stride + kx) -
                                           static_cast<long long>(pad);
                            if (iy < 0 || iy >= static_cast<long long>(H) || ix < 0 ||
                                ix >= static_cast<long long>(W))
                                continue;
                            acc += params[0].at2(oc, (ic * k + ky) * k + kx) *
                                   x.at3(ic, static_cast<std::size_t>(iy),
                                         static_cast<std::size_t>(ix));
                        }
                CHECK(out.at3(oc, oy, ox) == doctest::Approx(acc).epsilon(1e-10));
            }
}

TEST_CASE("input_grad_norm_graph: linear critic with unit weights") {
    NetSpec net;
    net.layers = {LayerSpec::dense(4, 1)};
    double n = std::sqrt(4.0);
    std::vector<Tensor> params = {Tensor({1, 4}, {0.5, 0.5, 0.5, 0.5}), Tensor({1})};
    // rescale weights to unit norm
    for (double& v : params[0].data) v /= n * 0.5;
    Graph g;
    std::vector<VarId> pv;
    for (const Tensor& p : params) pv.push_back(g.leaf(p));
    VarId x = g.leaf(Tensor({4}, {0.2, -0.1, 0.4, 0.8}));
    VarId norm_var = input_grad_norm_graph(g, net, pv, x);
    CHECK(g.value(norm_var).data[0] == doctest::Approx(1.0).epsilon(1e-9));

    auto grads = g.gradients(norm_var, pv);
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(g.value(grads[0]).data[j] == doctest::Approx(params[0].data[j]).epsilon(1e-9));
}

TEST_CASE("input_grad_norm_graph: constant critic has zero norm") {
    NetSpec net;
    net.layers = {LayerSpec::dense(3, 1)};
    std::vector<Tensor> params = {Tensor({1, 3}), Tensor({1}, {5.0})};
    Graph g;
    std::vector<VarId> pv;
    for (const Tensor& p : params) pv.push_back(g.leaf(p));
    VarId x = g.leaf(Tensor({3}, {0.1, 0.2, 0.3}));
    VarId norm_var = input_grad_norm_graph(g, net, pv, x);
    CHECK(g.value(norm_var).data[0] < 1e-5);
}

TEST_CASE("gradient-penalty derivative matches finite differences") {
    Rng rng(161803);
    NetSpec net;
    net.layers = {LayerSpec::dense(5, 7), LayerSpec::tanh_layer(), LayerSpec::dense(7, 1)};

    auto penalty = [&](const std::vector<Tensor>& params, const Tensor& x) {
        Graph g;
        std::vector<VarId> pv;
        for (const Tensor& p : params) pv.push_back(g.leaf(p));
        VarId nv = input_grad_norm_graph(g, net, pv, g.leaf(x));
        double n = g.value(nv).data[0];
        return (n - 1.0) * (n - 1.0);
    };

    for (int trial = 0; trial < 5; ++trial) {
        auto params = init_params(net, rng);
        Tensor x = random_tensor({5}, rng);

        Graph g;
        std::vector<VarId> pv;
        for (const Tensor& p : params) pv.push_back(g.leaf(p));
        VarId nv = input_grad_norm_graph(g, net, pv, g.leaf(x));
        VarId pen = g.mul(g.add_scalar(nv, -1.0), g.add_scalar(nv, -1.0));
        auto grads = g.gradients(pen, pv);

        const double h = 1e-5;
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            for (std::size_t j = 0; j < params[pi].numel();
                 j += std::max<std::size_t>(1, params[pi].numel() / 6)) {
                auto pp = params;
                pp[pi].data[j] += h;
                double fp = penalty(pp, x);
                pp[pi].data[j] -= 2 * h;
                double fm = penalty(pp, x);
                double fd = (fp - fm) / (2 * h);
                double ad = g.value(grads[pi]).data[j];
                if (std::abs(fd) > 1e-6 || std::abs(ad) > 1e-6) CHECK(rel_err(fd, ad) < 1e-3);
            }
        }
    }
}

TEST_CASE("forward/backward are bit-reproducible") {
    Rng rng(1);
    NetSpec net;
    net.layers = {LayerSpec::conv2d(3, 4, 3, 2, 1), LayerSpec::leaky_relu(),
                  LayerSpec::flatten(), LayerSpec::dense(36, 1)};
    auto params = init_params(net, rng);
    Tensor x = random_tensor({3, 6, 6}, rng);
    auto g1 = backward_eval(net, params, x);
    auto g2 = backward_eval(net, params, x);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i].data == g2[i].data);
}

TEST_CASE("adam: zero gradient leaves parameters untouched") {
    std::vector<Tensor> params = {Tensor({2}, {1.0, -2.0})};
    std::vector<Tensor> grads = {Tensor({2})};
    AdamState st = AdamState::init(params, 1e-3);
    adam_step(st, params, grads);
    CHECK(params[0].data == std::vector<double>{1.0, -2.0});
}

TEST_CASE("adam: first step matches a hand computation") {
    std::vector<Tensor> params = {Tensor({1}, {0.5})};
    std::vector<Tensor> grads = {Tensor({1}, {0.2})};
    double lr = 1e-2, b1 = 0.0, b2 = 0.9, eps = 1e-8;
    AdamState st = AdamState::init(params, lr, b1, b2);
    adam_step(st, params, grads);

    double m = (1 - b1) * 0.2;
    double v = (1 - b2) * 0.2 * 0.2;
    double m_hat = m / (1 - b1);
    double v_hat = v / (1 - b2);
    double expect = 0.5 - lr * m_hat / (std::sqrt(v_hat) + eps);
    CHECK(params[0].data[0] == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("adam: moments decay geometrically under zero gradients") {
    std::vector<Tensor> params = {Tensor({1}, {0.0})};
    AdamState st = AdamState::init(params, 1e-3, 0.5, 0.9);
    adam_step(st, params, {Tensor({1}, {1.0})});
    double m1 = st.m[0].data[0], v1 = st.v[0].data[0];
    adam_step(st, params, {Tensor({1}, {0.0})});
    CHECK(st.m[0].data[0] == doctest::Approx(0.5 * m1).epsilon(1e-15));
    CHECK(st.v[0].data[0] == doctest::Approx(0.9 * v1).epsilon(1e-15));
}

TEST_CASE("weights file round trips bit-exactly") {
    Rng rng(9);
    std::vector<Tensor> tensors = {random_tensor({3, 4}, rng), random_tensor({4}, rng),
                                   random_tensor({2, 2, 2}, rng)};
    std::vector<std::uint32_t> tags = {1, 2, 3};
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    save_weights(buf, tensors, tags);

    std::vector<Tensor> loaded;
    std::vector<std::uint32_t> loaded_tags;
    load_weights(buf, loaded, loaded_tags);
    REQUIRE(loaded.size() == tensors.size());
    CHECK(loaded_tags == tags);
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        CHECK(loaded[i].shape == tensors[i].shape);
        CHECK(loaded[i].data == tensors[i].data);
    }
}

TEST_CASE("weights loader rejects corrupt streams") {
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    buf << "NOTMAGIC";
    std::vector<Tensor> loaded;
    std::vector<std::uint32_t> tags;
    CHECK_THROWS_AS(load_weights(buf, loaded, tags), std::runtime_error);
}

TEST_CASE("NetSpec validates layer chains") {
    NetSpec bad;
    bad.layers = {LayerSpec::dense(4, 5), LayerSpec::dense(6, 2)};
    CHECK_THROWS_AS(bad.output_shape({4}), std::invalid_argument);
    NetSpec good;
    good.layers = {LayerSpec::conv2d(1, 2, 3, 1, 1), LayerSpec::flatten(), LayerSpec::dense(32, 1)};
    CHECK(good.output_shape({1, 4, 4}) == std::vector<std::size_t>{1});
}
