#include "wganplan/affinity.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace wganplan {

namespace {

double squared_distance(const Config& a, const Config& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    double hi = *mid;
    if (n % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), mid);
    return (lo + hi) / 2.0;
}

}  // namespace

std::vector<std::vector<double>> similarity_matrix(const std::vector<Config>& points,
                                                   const APConfig& cfg) {
    const std::size_t n = points.size();
    if (n == 0) throw std::invalid_argument("similarity_matrix: empty point set");
    std::vector<std::vector<double>> s(n, std::vector<double>(n, 0.0));
    std::vector<double> offdiag;
    offdiag.reserve(n * (n - 1));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            if (i == k) continue;
            s[i][k] = -squared_distance(points[i], points[k]);
            offdiag.push_back(s[i][k]);
        }
    }
    double pref = cfg.preference;
    if (cfg.median_preference && !offdiag.empty()) pref = median_of(std::move(offdiag));
    if (n == 1) pref = 0.0;
    for (std::size_t i = 0; i < n; ++i) s[i][i] = pref;
    return s;
}

ClusterResult affinity_propagate(const std::vector<Config>& points, const APConfig& cfg) {
    const std::size_t n = points.size();
    if (n == 0) throw std::invalid_argument("affinity_propagate: empty point set");
    if (cfg.damping < 0.5 || cfg.damping >= 1.0)
        throw std::invalid_argument("affinity_propagate: damping must be in [0.5, 1)");
    if (cfg.max_iterations < cfg.convergence_window || cfg.convergence_window < 1)
        throw std::invalid_argument("affinity_propagate: max_iterations >= convergence_window >= 1");

    ClusterResult result;
    if (n == 1) {
        result.exemplars = {points[0]};
        result.assignment = {0};
        result.exemplar_input_index = {0};
        return result;
    }

    const auto s = similarity_matrix(points, cfg);
    const double lambda = cfg.damping;
    std::vector<std::vector<double>> r(n, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));

    std::vector<bool> exemplar_mask(n, false);
    std::size_t stable_iters = 0;
    result.converged = false;

    for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
        // responsibilities
        for (std::size_t i = 0; i < n; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            double second = best;
            std::size_t best_k = 0;
            for (std::size_t k = 0; k < n; ++k) {
                double v = a[i][k] + s[i][k];
                if (v > best) {
                    second = best;
                    best = v;
                    best_k = k;
                } else if (v > second) {
                    second = v;
                }
            }
            for (std::size_t k = 0; k < n; ++k) {
                double fresh = s[i][k] - (k == best_k ? second : best);
                r[i][k] = lambda * r[i][k] + (1.0 - lambda) * fresh;
            }
        }
        // availabilities
        for (std::size_t k = 0; k < n; ++k) {
            double positive_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (i != k) positive_sum += std::max(0.0, r[i][k]);
            for (std::size_t i = 0; i < n; ++i) {
                double fresh;
                if (i == k) {
                    fresh = positive_sum;
                } else {
                    fresh = std::min(0.0, r[k][k] + positive_sum - std::max(0.0, r[i][k]));
                }
                a[i][k] = lambda * a[i][k] + (1.0 - lambda) * fresh;
            }
        }
        // exemplar set stability check
        bool changed = false;
        for (std::size_t k = 0; k < n; ++k) {
            bool is_ex = r[k][k] + a[k][k] > 0.0;
            if (is_ex != exemplar_mask[k]) {
                exemplar_mask[k] = is_ex;
                changed = true;
            }
        }
        stable_iters = changed ? 0 : stable_iters + 1;
        if (stable_iters >= cfg.convergence_window &&
            std::any_of(exemplar_mask.begin(), exemplar_mask.end(), [](bool b) { return b; })) {
            result.converged = true;
            break;
        }
    }

    std::vector<std::size_t> exemplar_inputs;
    for (std::size_t k = 0; k < n; ++k)
        if (exemplar_mask[k]) exemplar_inputs.push_back(k);

    if (exemplar_inputs.empty()) {
        // pathological preference: fall back to the point with maximal total similarity
        double best_total = -std::numeric_limits<double>::infinity();
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double total = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                if (k != i) total += s[i][k];
            if (total > best_total) {
                best_total = total;
                best_i = i;
            }
        }
        exemplar_inputs.push_back(best_i);
        result.converged = false;
    }

    // assign every point to its most similar exemplar; exemplars to themselves
    std::vector<std::size_t> assignment_input(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best_k = exemplar_inputs[0];
        double best_s = -std::numeric_limits<double>::infinity();
        bool self_is_exemplar = false;
        for (std::size_t e : exemplar_inputs) {
            if (e == i) {
                self_is_exemplar = true;
                break;
            }
            if (s[i][e] > best_s) {
                best_s = s[i][e];
                best_k = e;
            }
        }
        assignment_input[i] = self_is_exemplar ? i : best_k;
    }

    // exemplars ordered by first assigned input index
    std::vector<std::size_t> first_index(exemplar_inputs.size(),
                                         std::numeric_limits<std::size_t>::max());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t e = 0; e < exemplar_inputs.size(); ++e) {
            if (assignment_input[i] == exemplar_inputs[e]) {
                first_index[e] = std::min(first_index[e], i);
                break;
            }
        }
    }
    std::vector<std::size_t> order(exemplar_inputs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (first_index[x] != first_index[y]) return first_index[x] < first_index[y];
        return exemplar_inputs[x] < exemplar_inputs[y];
    });

    std::vector<std::size_t> exemplar_slot(n, 0);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        std::size_t input_idx = exemplar_inputs[order[pos]];
        result.exemplars.push_back(points[input_idx]);
        result.exemplar_input_index.push_back(input_idx);
        exemplar_slot[input_idx] = pos;
    }
    result.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) result.assignment[i] = exemplar_slot[assignment_input[i]];
    return result;
}

std::vector<Config> order_exemplars(const ClusterResult& result,
                                    const std::vector<std::size_t>& original_order) {
    if (original_order.size() != result.assignment.size())
        throw std::invalid_argument("order_exemplars: order list must cover all inputs");
    const std::size_t m = result.exemplars.size();
    std::vector<std::size_t> min_orig(m, std::numeric_limits<std::size_t>::max());
    for (std::size_t i = 0; i < result.assignment.size(); ++i) {
        std::size_t e = result.assignment[i];
        min_orig[e] = std::min(min_orig[e], original_order[i]);
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (min_orig[x] != min_orig[y]) return min_orig[x] < min_orig[y];
        return result.exemplar_input_index[x] < result.exemplar_input_index[y];
    });
    std::vector<Config> out;
    out.reserve(m);
    for (std::size_t e : order) out.push_back(result.exemplars[e]);
    return out;
}

}  // namespace wganplan
