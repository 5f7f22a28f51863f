#include "wganplan/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wganplan {

std::vector<std::size_t> subsample_indices(std::size_t len, std::size_t slots) {
    std::vector<std::size_t> idx;
    if (len <= slots) {
        idx.resize(len);
        for (std::size_t i = 0; i < len; ++i) idx[i] = i;
        return idx;
    }
    idx.resize(slots);
    for (std::size_t s = 0; s < slots; ++s)
        idx[s] = (s * (len - 1)) / (slots - 1);  // keeps first and last, order-preserving
    return idx;
}

PathMatrix encode_path(const std::vector<Config>& waypoints, std::size_t rows, std::size_t cols) {
    if (waypoints.empty()) throw std::invalid_argument("encode_path: empty waypoint sequence");
    const std::size_t d = waypoints.front().size();
    for (const Config& w : waypoints)
        if (w.size() != d) throw std::invalid_argument("encode_path: mixed waypoint dimensions");

    const std::size_t slots = rows * cols;
    std::vector<std::size_t> idx = subsample_indices(waypoints.size(), slots);

    PathMatrix m;
    m.values = Tensor({d, rows, cols});
    m.used_slots = idx.size();
    for (std::size_t s = 0; s < slots; ++s) {
        const Config& w = waypoints[s < idx.size() ? idx[s] : idx.back()];
        for (std::size_t k = 0; k < d; ++k) m.values.at3(k, s / cols, s % cols) = w[k];
    }
    return m;
}

std::vector<Config> decode_matrix(const PathMatrix& m) {
    const std::size_t d = m.dim();
    const std::size_t cols = m.cols();
    std::vector<Config> out(m.used_slots, Config(d));
    for (std::size_t s = 0; s < m.used_slots; ++s)
        for (std::size_t k = 0; k < d; ++k) out[s][k] = m.values.at3(k, s / cols, s % cols);
    return out;
}

ConditionChannel build_condition(const Config& start, const Config& goal) {
    if (start.size() != goal.size())
        throw std::invalid_argument("build_condition: start/goal dimension mismatch");
    const std::size_t d = start.size();
    const std::size_t n = kImageSize;
    if (2 * d > n * n) throw std::invalid_argument("build_condition: dimension too large");

    ConditionChannel cond;
    cond.grid = Tensor({n, n});
    for (std::size_t k = 0; k < d; ++k) {
        cond.grid.data[k] = start[k];
        cond.grid.data[d + k] = goal[k];
    }
    // Sinusoidal positional encoding over the remaining cells, evaluated at
    // each cell's (row, col) with d_model = 32, affinely mapped to [0,1].
    const double d_model = static_cast<double>(n);
    for (std::size_t cell = 2 * d; cell < n * n; ++cell) {
        std::size_t row = cell / n;
        std::size_t col = cell % n;
        double exponent = 2.0 * std::floor(static_cast<double>(col) / 2.0) / d_model;
        double angle = static_cast<double>(row) / std::pow(10000.0, exponent);
        double v = (col % 2 == 0) ? std::sin(angle) : std::cos(angle);
        cond.grid.data[cell] = (v + 1.0) / 2.0;
    }
    return cond;
}

WorkspaceImage assemble_input(const Tensor& scene_raster, const ConditionChannel& cond) {
    if (scene_raster.shape != std::vector<std::size_t>{4, kImageSize, kImageSize})
        throw std::invalid_argument("assemble_input: raster must be 4x32x32");
    if (cond.grid.shape != std::vector<std::size_t>{kImageSize, kImageSize})
        throw std::invalid_argument("assemble_input: condition must be 32x32");

    WorkspaceImage img;
    img.tensor = Tensor({5, kImageSize, kImageSize});
    std::copy(scene_raster.data.begin(), scene_raster.data.end(), img.tensor.data.begin());
    std::copy(cond.grid.data.begin(), cond.grid.data.end(),
              img.tensor.data.begin() + 4 * kImageSize * kImageSize);
    return img;
}

WorkspaceImage make_workspace_image(const Scene& scene, const Config& start, const Config& goal) {
    return assemble_input(rasterize(scene, kImageSize, kImageSize), build_condition(start, goal));
}

}  // namespace wganplan
