#pragma once

#include <cstddef>
#include <vector>

#include "wganplan/tensor.hpp"
#include "wganplan/workspace.hpp"

namespace wganplan {

/// Ordered exemplar waypoints of one path as a d x R x C image. Slots are
/// filled row-major in path order; slots past used_slots repeat the last
/// used waypoint so the image stays near-continuous.
struct PathMatrix {
    Tensor values;  // shape {d, R, C}, entries in [0,1]
    std::size_t used_slots = 0;

    std::size_t dim() const { return values.shape[0]; }
    std::size_t rows() const { return values.shape[1]; }
    std::size_t cols() const { return values.shape[2]; }
    std::size_t slot_count() const { return rows() * cols(); }
};

/// 32x32 channel carrying start/goal components in its first 2d cells and a
/// sinusoidal positional-encoding fill everywhere else.
struct ConditionChannel {
    Tensor grid;  // shape {32, 32}
};

/// The 5x32x32 network input: rasterized scene channels plus the condition
/// channel.
struct WorkspaceImage {
    Tensor tensor;  // shape {5, 32, 32}
};

constexpr std::size_t kImageSize = 32;
constexpr std::size_t kMatrixRows = 8;
constexpr std::size_t kMatrixCols = 8;

/// Deterministic slot indices used when a path is longer than the matrix:
/// uniform subsample over [0, len) keeping first and last.
std::vector<std::size_t> subsample_indices(std::size_t len, std::size_t slots);

PathMatrix encode_path(const std::vector<Config>& waypoints, std::size_t rows = kMatrixRows,
                       std::size_t cols = kMatrixCols);

std::vector<Config> decode_matrix(const PathMatrix& m);

ConditionChannel build_condition(const Config& start, const Config& goal);

WorkspaceImage assemble_input(const Tensor& scene_raster, const ConditionChannel& cond);

/// Full scene -> network-input pipeline: rasterize + condition channel.
WorkspaceImage make_workspace_image(const Scene& scene, const Config& start, const Config& goal);

}  // namespace wganplan
