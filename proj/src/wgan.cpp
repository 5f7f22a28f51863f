#include "wganplan/wgan.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace wganplan {

namespace {

// fixed work-unit size so gradient reductions are identical for any worker count
constexpr std::size_t kGradChunk = 8;

Graph::IndexTable upsample4_table(std::size_t channels) {
    static std::map<std::size_t, Graph::IndexTable> cache;
    static std::mutex mutex;
    std::lock_guard lock(mutex);
    auto it = cache.find(channels);
    if (it != cache.end()) return it->second;
    const std::size_t n = kImageSize;          // 32
    const std::size_t m = kMatrixRows;         // 8
    auto table = std::make_shared<std::vector<std::int64_t>>(channels * n * n);
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t col = 0; col < n; ++col)
                (*table)[(c * n + r) * n + col] =
                    static_cast<std::int64_t>((c * m + r / 4) * m + col / 4);
    cache[channels] = table;
    return table;
}

// placement of a [ch,32,32] block into channels [offset, offset+ch) of a
// [total,32,32] tensor
Graph::IndexTable channel_place_table(std::size_t total, std::size_t offset, std::size_t ch) {
    using Key = std::tuple<std::size_t, std::size_t, std::size_t>;
    static std::map<Key, Graph::IndexTable> cache;
    static std::mutex mutex;
    Key key{total, offset, ch};
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const std::size_t plane = kImageSize * kImageSize;
    auto table = std::make_shared<std::vector<std::int64_t>>(total * plane, -1);
    for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            (*table)[(offset + c) * plane + i] = static_cast<std::int64_t>(c * plane + i);
    cache[key] = table;
    return table;
}

VarId grad_norm_of(Graph& g, VarId scalar_out, VarId wrt) {
    VarId gx = g.gradients(scalar_out, std::span(&wrt, 1))[0];
    VarId sumsq = g.sum(g.mul(gx, gx));
    return g.pow_const(g.add_scalar(sumsq, 1e-12), 0.5);
}

std::size_t resolve_workers(std::size_t requested) {
    if (requested != 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

struct ChunkAccumulator {
    double loss_sum = 0.0;
    double wasserstein_sum = 0.0;
    double penalty_sum = 0.0;
    std::vector<Tensor> grad_sums;
};

/// Runs `fn(chunk_index, accumulator)` over ceil(n/kGradChunk) chunks on up
/// to `workers` threads and merges results in chunk order.
template <typename Fn>
ObjectiveResult run_chunked(std::size_t n, const std::vector<std::vector<std::size_t>>& param_shapes,
                            std::size_t workers, Fn&& fn) {
    const std::size_t chunks = (n + kGradChunk - 1) / kGradChunk;
    std::vector<ChunkAccumulator> results(chunks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker_body = [&]() {
        for (;;) {
            std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            try {
                fn(c, results[c]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    std::size_t nthreads = std::min(resolve_workers(workers), chunks);
    if (nthreads <= 1) {
        worker_body();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker_body);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    ObjectiveResult out;
    out.grads.reserve(param_shapes.size());
    for (const auto& s : param_shapes) out.grads.push_back(Tensor(s));
    for (const ChunkAccumulator& acc : results) {
        out.loss += acc.loss_sum;
        out.wasserstein += acc.wasserstein_sum;
        out.gradient_penalty += acc.penalty_sum;
        for (std::size_t p = 0; p < out.grads.size(); ++p)
            for (std::size_t j = 0; j < out.grads[p].numel(); ++j)
                out.grads[p].data[j] += acc.grad_sums[p].data[j];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    out.loss *= inv_n;
    out.wasserstein *= inv_n;
    out.gradient_penalty *= inv_n;
    for (Tensor& gt : out.grads)
        for (double& v : gt.data) v *= inv_n;
    return out;
}

}  // namespace

GeneratorModel make_generator(std::size_t d, std::uint64_t seed) {
    GeneratorModel gen;
    gen.d = d;
    gen.net.layers = {
        LayerSpec::conv2d(5, 16, 3, 2, 1),   // 16 x 16 x 16
        LayerSpec::leaky_relu(),
        LayerSpec::conv2d(16, 24, 3, 2, 1),  // 24 x 8 x 8
        LayerSpec::leaky_relu(),
        LayerSpec::conv2d(24, 32, 3, 2, 1),  // 32 x 4 x 4
        LayerSpec::leaky_relu(),
        LayerSpec::flatten(),
        LayerSpec::dense(512, 128),
        LayerSpec::leaky_relu(),
        LayerSpec::dense(128, 16 * kMatrixRows * kMatrixCols),
        LayerSpec::leaky_relu(),
        LayerSpec::reshape({16, kMatrixRows, kMatrixCols}),
        LayerSpec::conv2d(16, 16, 3, 1, 1),
        LayerSpec::leaky_relu(),
        LayerSpec::conv2d(16, d, 3, 1, 1),
        LayerSpec::tanh_layer(),
    };
    Rng rng(seed);
    gen.params = init_params(gen.net, rng);
    return gen;
}

CriticModel make_critic(std::size_t d, std::uint64_t seed) {
    CriticModel critic;
    critic.d = d;
    critic.net.layers = {
        LayerSpec::conv2d(d + 5, 16, 3, 2, 1),  // 16 x 16 x 16
        LayerSpec::leaky_relu(),
        LayerSpec::conv2d(16, 24, 3, 2, 1),     // 24 x 8 x 8
        LayerSpec::leaky_relu(),
        LayerSpec::conv2d(24, 32, 3, 2, 1),     // 32 x 4 x 4
        LayerSpec::leaky_relu(),
        LayerSpec::flatten(),
        LayerSpec::dense(512, 64),
        LayerSpec::leaky_relu(),
        LayerSpec::dense(64, 1),
    };
    Rng rng(seed);
    critic.params = init_params(critic.net, rng);
    return critic;
}

VarId generator_forward(Graph& g, const GeneratorModel& gen, std::span<const VarId> params,
                        VarId y_t) {
    VarId raw = build_forward(g, gen.net, params, y_t);  // tanh output in [-1,1]
    return g.add_scalar(g.scale(raw, 0.5), 0.5);
}

VarId critic_score(Graph& g, const CriticModel& critic, std::span<const VarId> params,
                   VarId path_matrix, VarId image) {
    const std::size_t d = critic.d;
    VarId up = g.gather(path_matrix, upsample4_table(d), {d, kImageSize, kImageSize});
    VarId placed_pm = g.gather(up, channel_place_table(d + 5, 0, d), {d + 5, kImageSize, kImageSize});
    VarId placed_img = g.gather(image, channel_place_table(d + 5, d, 5), {d + 5, kImageSize, kImageSize});
    VarId joint = g.add(placed_pm, placed_img);
    return build_forward(g, critic.net, params, joint);
}

ObjectiveResult critic_objective(const CriticModel& critic, const std::vector<Tensor>& real,
                                 const std::vector<Tensor>& fake, const std::vector<Tensor>& cond,
                                 double lambda_gp, const std::vector<double>& mix_draws,
                                 std::size_t workers) {
    const std::size_t n = real.size();
    if (n == 0 || fake.size() != n || cond.size() != n || mix_draws.size() != n)
        throw std::invalid_argument("critic_objective: batch vectors must align");

    auto shapes = critic.net.param_shapes();
    return run_chunked(n, shapes, workers, [&](std::size_t chunk, ChunkAccumulator& acc) {
        const std::size_t lo = chunk * kGradChunk;
        const std::size_t hi = std::min(n, lo + kGradChunk);
        Graph g;
        std::vector<VarId> pv;
        pv.reserve(critic.params.size());
        for (const Tensor& p : critic.params) pv.push_back(g.leaf(p));

        VarId chunk_loss = -1;
        for (std::size_t i = lo; i < hi; ++i) {
            VarId image = g.constant(cond[i]);
            VarId score_real = critic_score(g, critic, pv, g.constant(real[i]), image);
            VarId score_fake = critic_score(g, critic, pv, g.constant(fake[i]), image);

            const double u = mix_draws[i];
            Tensor mixed(real[i].shape);
            for (std::size_t j = 0; j < mixed.numel(); ++j)
                mixed.data[j] = u * real[i].data[j] + (1.0 - u) * fake[i].data[j];
            VarId x_hat = g.leaf(std::move(mixed));
            VarId score_hat = critic_score(g, critic, pv, x_hat, image);
            VarId gnorm = grad_norm_of(g, score_hat, x_hat);
            VarId excess = g.add_scalar(gnorm, -1.0);
            VarId penalty = g.mul(excess, excess);

            VarId loss_i = g.add(g.sub(score_fake, score_real), g.scale(penalty, lambda_gp));
            chunk_loss = chunk_loss < 0 ? loss_i : g.add(chunk_loss, loss_i);
            acc.wasserstein_sum += g.value(score_real).data[0] - g.value(score_fake).data[0];
            acc.penalty_sum += g.value(penalty).data[0];
        }
        acc.loss_sum = g.value(chunk_loss).data[0];
        std::vector<VarId> grads = g.gradients(chunk_loss, pv);
        acc.grad_sums.reserve(grads.size());
        for (VarId gv : grads) acc.grad_sums.push_back(g.value(gv));
    });
}

double generator_loss_value(std::span<const double> scores) {
    double s = 0.0;
    for (double v : scores) s += v;
    return scores.empty() ? 0.0 : -s / static_cast<double>(scores.size());
}

ObjectiveResult generator_objective(const GeneratorModel& gen, const CriticModel& critic,
                                    const std::vector<Tensor>& y_t, const std::vector<Tensor>& cond,
                                    std::size_t workers) {
    const std::size_t n = y_t.size();
    if (n == 0 || cond.size() != n)
        throw std::invalid_argument("generator_objective: batch vectors must align");

    auto shapes = gen.net.param_shapes();
    return run_chunked(n, shapes, workers, [&](std::size_t chunk, ChunkAccumulator& acc) {
        const std::size_t lo = chunk * kGradChunk;
        const std::size_t hi = std::min(n, lo + kGradChunk);
        Graph g;
        std::vector<VarId> gen_pv;
        gen_pv.reserve(gen.params.size());
        for (const Tensor& p : gen.params) gen_pv.push_back(g.leaf(p));
        std::vector<VarId> critic_pv;
        critic_pv.reserve(critic.params.size());
        for (const Tensor& p : critic.params) critic_pv.push_back(g.constant(p));

        VarId chunk_loss = -1;
        for (std::size_t i = lo; i < hi; ++i) {
            VarId pm = generator_forward(g, gen, gen_pv, g.constant(y_t[i]));
            VarId score = critic_score(g, critic, critic_pv, pm, g.constant(cond[i]));
            VarId loss_i = g.scale(score, -1.0);
            chunk_loss = chunk_loss < 0 ? loss_i : g.add(chunk_loss, loss_i);
        }
        acc.loss_sum = g.value(chunk_loss).data[0];
        std::vector<VarId> grads = g.gradients(chunk_loss, gen_pv);
        acc.grad_sums.reserve(grads.size());
        for (VarId gv : grads) acc.grad_sums.push_back(g.value(gv));
    });
}

namespace {

struct BatchStream {
    const std::size_t n;
    Rng& rng;
    std::vector<std::size_t> order;
    std::size_t pos = 0;

    BatchStream(std::size_t n_, Rng& rng_) : n(n_), rng(rng_) {
        order.resize(n);
        std::iota(order.begin(), order.end(), 0);
        shuffle();
    }
    void shuffle() {
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_index(i)]);
        pos = 0;
    }
    std::size_t next() {
        if (pos >= n) shuffle();
        return order[pos++];
    }
};

}  // namespace

TrainHistory train(const std::vector<WganSample>& dataset, GeneratorModel& gen, CriticModel& critic,
                   const TrainConfig& cfg, const NoiseSchedule& schedule, std::uint64_t seed) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    for (const WganSample& s : dataset) {
        if (s.y0.shape != std::vector<std::size_t>{5, kImageSize, kImageSize})
            throw std::invalid_argument("train: y0 must be 5x32x32");
        if (s.target.shape != std::vector<std::size_t>{gen.d, kMatrixRows, kMatrixCols})
            throw std::invalid_argument("train: target dimension mismatch");
    }

    Rng rng(seed);
    BatchStream stream(dataset.size(), rng);
    const std::size_t batch = std::min(cfg.batch, dataset.size());
    const std::size_t gen_iters_per_epoch = (dataset.size() + cfg.batch - 1) / cfg.batch;

    AdamState critic_opt = AdamState::init(critic.params, cfg.lr);
    AdamState gen_opt = AdamState::init(gen.params, cfg.lr);
    TrainHistory history;

    auto draw_batch = [&](std::vector<Tensor>& y_t, std::vector<Tensor>& y0,
                          std::vector<Tensor>& targets) {
        y_t.clear();
        y0.clear();
        targets.clear();
        for (std::size_t b = 0; b < batch; ++b) {
            const WganSample& s = dataset[stream.next()];
            std::size_t t = 1 + static_cast<std::size_t>(rng.uniform_index(schedule.steps));
            Tensor noise = gaussian_like(s.y0, rng);
            y_t.push_back(diffuse(s.y0, t, schedule, noise));
            y0.push_back(s.y0);
            targets.push_back(s.target);
        }
    };

    std::vector<Tensor> y_t, y0, targets;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t it = 0; it < gen_iters_per_epoch; ++it) {
            double critic_loss_sum = 0.0;
            for (std::size_t c = 0; c < cfg.n_critic; ++c) {
                draw_batch(y_t, y0, targets);
                // fake matrices from the current generator, detached
                std::vector<Tensor> fake;
                fake.reserve(batch);
                for (const Tensor& yt : y_t) {
                    Graph g;
                    std::vector<VarId> pv;
                    for (const Tensor& p : gen.params) pv.push_back(g.constant(p));
                    fake.push_back(g.value(generator_forward(g, gen, pv, g.constant(yt))));
                }
                std::vector<double> mix(batch);
                for (double& u : mix) u = rng.uniform();
                ObjectiveResult res =
                    critic_objective(critic, targets, fake, y0, cfg.lambda_gp, mix, cfg.workers);
                adam_step(critic_opt, critic.params, res.grads);
                critic_loss_sum += res.loss;
            }
            draw_batch(y_t, y0, targets);
            ObjectiveResult gres = generator_objective(gen, critic, y_t, y0, cfg.workers);
            adam_step(gen_opt, gen.params, gres.grads);
            history.critic_loss.push_back(critic_loss_sum / static_cast<double>(cfg.n_critic));
            history.generator_loss.push_back(gres.loss);
        }
    }
    return history;
}

std::vector<Config> generate_exemplars(const GeneratorModel& gen, const WorkspaceImage& image,
                                       std::size_t t, const NoiseSchedule& schedule,
                                       const Tensor& noise) {
    Tensor y_t = diffuse(image.tensor, t, schedule, noise);
    Graph g;
    std::vector<VarId> pv;
    pv.reserve(gen.params.size());
    for (const Tensor& p : gen.params) pv.push_back(g.constant(p));
    Tensor out = g.value(generator_forward(g, gen, pv, g.constant(y_t)));

    PathMatrix m;
    m.values = std::move(out);
    m.used_slots = kMatrixRows * kMatrixCols;
    std::vector<Config> exemplars = decode_matrix(m);
    for (Config& q : exemplars)
        for (double& v : q) v = std::clamp(v, 0.0, 1.0);
    return exemplars;
}

namespace {

void write_netspec(std::ostream& out, const NetSpec& net) {
    auto w32 = [&](std::uint32_t v) {
        char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        out.write(b, 4);
    };
    auto w64 = [&](std::uint64_t v) {
        char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        out.write(b, 8);
    };
    w32(static_cast<std::uint32_t>(net.layers.size()));
    for (const LayerSpec& l : net.layers) {
        w32(static_cast<std::uint32_t>(l.kind));
        w64(l.in_ch);
        w64(l.out_ch);
        w64(l.kernel);
        w64(l.stride);
        w64(l.padding);
        w64(l.in_features);
        w64(l.out_features);
        w64(std::bit_cast<std::uint64_t>(l.slope));
        w32(static_cast<std::uint32_t>(l.target_shape.size()));
        for (std::size_t dim : l.target_shape) w64(dim);
    }
}

NetSpec read_netspec(std::istream& in) {
    auto r32 = [&]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (!in) throw std::runtime_error("checkpoint: truncated stream");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    };
    auto r64 = [&]() {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (!in) throw std::runtime_error("checkpoint: truncated stream");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    };
    NetSpec net;
    std::uint32_t layer_count = r32();
    net.layers.resize(layer_count);
    for (LayerSpec& l : net.layers) {
        l.kind = static_cast<LayerSpec::Kind>(r32());
        l.in_ch = r64();
        l.out_ch = r64();
        l.kernel = r64();
        l.stride = r64();
        l.padding = r64();
        l.in_features = r64();
        l.out_features = r64();
        l.slope = std::bit_cast<double>(r64());
        std::uint32_t ndim = r32();
        l.target_shape.resize(ndim);
        for (std::size_t& dim : l.target_shape) dim = r64();
    }
    return net;
}

constexpr char kCheckpointMagic[9] = "WGPCKPT1";

std::vector<std::uint32_t> param_kind_tags(const NetSpec& net) {
    std::vector<std::uint32_t> tags;
    for (const LayerSpec& l : net.layers) {
        if (l.kind == LayerSpec::Kind::Conv2d) {
            tags.push_back(1);  // conv weight
            tags.push_back(2);  // conv bias
        } else if (l.kind == LayerSpec::Kind::Dense) {
            tags.push_back(3);  // dense weight
            tags.push_back(4);  // dense bias
        }
    }
    return tags;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    out.write(kCheckpointMagic, 8);
    auto w64 = [&](std::uint64_t v) {
        char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        out.write(b, 8);
    };
    w64(1);  // version
    w64(ckpt.generator.d);
    w64(ckpt.matrix_rows);
    w64(ckpt.matrix_cols);
    w64(ckpt.schedule_steps);
    w64(std::bit_cast<std::uint64_t>(ckpt.beta_start));
    w64(std::bit_cast<std::uint64_t>(ckpt.beta_end));
    w64(ckpt.inference_t);
    write_netspec(out, ckpt.generator.net);
    save_weights(out, ckpt.generator.params, param_kind_tags(ckpt.generator.net));
    write_netspec(out, ckpt.critic.net);
    save_weights(out, ckpt.critic.params, param_kind_tags(ckpt.critic.net));
}

Checkpoint load_checkpoint(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string_view(magic, 8) != std::string_view(kCheckpointMagic, 8))
        throw std::runtime_error("checkpoint: bad magic");
    auto r64 = [&]() {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (!in) throw std::runtime_error("checkpoint: truncated stream");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    };
    Checkpoint ckpt;
    std::uint64_t version = r64();
    if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
    std::size_t d = r64();
    ckpt.matrix_rows = r64();
    ckpt.matrix_cols = r64();
    ckpt.schedule_steps = r64();
    ckpt.beta_start = std::bit_cast<double>(r64());
    ckpt.beta_end = std::bit_cast<double>(r64());
    ckpt.inference_t = r64();
    ckpt.generator.d = d;
    ckpt.critic.d = d;
    ckpt.generator.net = read_netspec(in);
    std::vector<std::uint32_t> tags;
    load_weights(in, ckpt.generator.params, tags);
    ckpt.critic.net = read_netspec(in);
    load_weights(in, ckpt.critic.params, tags);
    return ckpt;
}

void save_checkpoint_file(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    save_checkpoint(out, ckpt);
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    return load_checkpoint(in);
}

}  // namespace wganplan
