#pragma once

#include <cstddef>
#include <vector>

#include "wganplan/workspace.hpp"

namespace wganplan {

struct APConfig {
    double damping = 0.9;            // in [0.5, 1)
    std::size_t max_iterations = 300;
    std::size_t convergence_window = 20;
    double preference = 0.0;
    bool median_preference = true;   // overrides preference when set
};

struct ClusterResult {
    std::vector<Config> exemplars;        // in order of first assigned input index
    std::vector<std::size_t> assignment;  // per input: index into exemplars
    std::vector<std::size_t> exemplar_input_index;  // per exemplar: index into the input set
    bool converged = true;
};

/// Negative squared Euclidean similarities; diagonal holds the preference
/// (median of the off-diagonal entries when cfg.median_preference).
std::vector<std::vector<double>> similarity_matrix(const std::vector<Config>& points,
                                                   const APConfig& cfg);

/// Standard affinity propagation message passing with damping. Exemplars are
/// input points with positive self responsibility + availability; every
/// input is assigned to its best exemplar and exemplars to themselves.
ClusterResult affinity_propagate(const std::vector<Config>& points, const APConfig& cfg = {});

/// Exemplars sorted by the minimum original waypoint index among their
/// assigned points (ties by exemplar input index).
std::vector<Config> order_exemplars(const ClusterResult& result,
                                    const std::vector<std::size_t>& original_order);

}  // namespace wganplan
