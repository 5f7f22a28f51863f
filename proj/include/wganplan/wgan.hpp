#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wganplan/autodiff.hpp"
#include "wganplan/diffusion.hpp"
#include "wganplan/encoding.hpp"
#include "wganplan/net.hpp"
#include "wganplan/rng.hpp"

namespace wganplan {

/// Maps the diffused workspace image y_t to a PathMatrix. The net ends in
/// tanh; generator_forward applies the affine map into [0,1].
struct GeneratorModel {
    NetSpec net;
    std::vector<Tensor> params;
    std::size_t d = 2;
};

/// Scores a (PathMatrix, workspace image) pair. The PathMatrix is upsampled
/// nearest-neighbor to 32x32 and concatenated with the undiffused image.
struct CriticModel {
    NetSpec net;
    std::vector<Tensor> params;
    std::size_t d = 2;
};

struct TrainConfig {
    double lr = 4e-5;
    std::size_t batch = 64;
    double lambda_gp = 10.0;
    std::size_t n_critic = 5;
    std::size_t epochs = 1;
    std::size_t workers = 0;  // 0 = hardware concurrency
};

struct WganSample {
    Tensor y0;      // {5,32,32}
    Tensor target;  // {d,8,8}
};

struct TrainHistory {
    std::vector<double> critic_loss;     // per generator iteration (mean of its critic steps)
    std::vector<double> generator_loss;  // per generator iteration
};

GeneratorModel make_generator(std::size_t d, std::uint64_t seed);
CriticModel make_critic(std::size_t d, std::uint64_t seed);

/// Generator forward pass on the tape; returns the [d,8,8] output var in [0,1].
VarId generator_forward(Graph& g, const GeneratorModel& gen, std::span<const VarId> params,
                        VarId y_t);

/// Critic score var for a PathMatrix var conditioned on a workspace image var.
VarId critic_score(Graph& g, const CriticModel& critic, std::span<const VarId> params,
                   VarId path_matrix, VarId image);

struct ObjectiveResult {
    double loss = 0.0;
    std::vector<Tensor> grads;
    double wasserstein = 0.0;      // mean f(real) - mean f(fake)
    double gradient_penalty = 0.0; // mean (||grad|| - 1)^2
};

/// Critic loss mean[f(fake)] - mean[f(real)] + lambda * mean[(||grad f(x_hat)|| - 1)^2]
/// with x_hat = u*real + (1-u)*fake per sample, and its critic-parameter
/// gradients. Deterministic for any worker count.
ObjectiveResult critic_objective(const CriticModel& critic, const std::vector<Tensor>& real,
                                 const std::vector<Tensor>& fake, const std::vector<Tensor>& cond,
                                 double lambda_gp, const std::vector<double>& mix_draws,
                                 std::size_t workers = 1);

/// Loss -mean(scores) for a batch of critic scores.
double generator_loss_value(std::span<const double> scores);

/// Generator loss -mean[f(g(y_t))] and its generator-parameter gradients;
/// gradients flow through the (frozen) critic.
ObjectiveResult generator_objective(const GeneratorModel& gen, const CriticModel& critic,
                                    const std::vector<Tensor>& y_t, const std::vector<Tensor>& cond,
                                    std::size_t workers = 1);

/// WGAN-GP training: n_critic critic steps per generator step, per-sample
/// uniform t and fresh noise, Adam updates, fully deterministic in seed.
TrainHistory train(const std::vector<WganSample>& dataset, GeneratorModel& gen, CriticModel& critic,
                   const TrainConfig& cfg, const NoiseSchedule& schedule, std::uint64_t seed);

/// Diffuse the image to y_t, run the generator, and decode the output matrix
/// into up to R*C exemplar configurations clamped to [0,1]^d.
std::vector<Config> generate_exemplars(const GeneratorModel& gen, const WorkspaceImage& image,
                                       std::size_t t, const NoiseSchedule& schedule,
                                       const Tensor& noise);

/// Checkpoint: header (d, matrix shape, schedule, inference t) + both nets'
/// layer specs and weights, all little-endian and byte-stable.
struct Checkpoint {
    GeneratorModel generator;
    CriticModel critic;
    std::size_t matrix_rows = kMatrixRows;
    std::size_t matrix_cols = kMatrixCols;
    std::size_t schedule_steps = kDefaultDiffusionSteps;
    double beta_start = kDefaultBetaStart;
    double beta_end = kDefaultBetaEnd;
    std::size_t inference_t = kDefaultDiffusionSteps / 4;
};

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
void save_checkpoint_file(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint_file(const std::string& path);

}  // namespace wganplan
