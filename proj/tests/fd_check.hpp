#pragma once

// Central finite-difference gradient oracle, independent of the tape's
// backward rules: it only re-evaluates the forward function at perturbed
// leaf values.

#include <functional>
#include <random>
#include <vector>

#include "bcp/tensor.hpp"

namespace bcp::testing {

using LossFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Max relative error between analytic gradients and central differences
// over every element of every leaf.
inline double fd_max_rel_err(const LossFn& f, const std::vector<Tensor>& leaf_values,
                             double step = 1e-5) {
    std::vector<Tensor> leaves;
    for (const auto& t : leaf_values) leaves.emplace_back(t.shape(), t.values(), true);
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        Tensor loss = f(leaves);
        backward(loss, tape);
        for (const auto& l : leaves) {
            analytic.push_back(l.has_grad() ? l.grad()
                                            : std::vector<double>(l.size(), 0.0));
        }
    }
    auto eval_at = [&](std::size_t leaf, std::size_t elem, double delta) {
        std::vector<Tensor> probe;
        for (std::size_t i = 0; i < leaf_values.size(); ++i) {
            std::vector<double> v = leaf_values[i].values();
            if (i == leaf) v[elem] += delta;
            probe.emplace_back(leaf_values[i].shape(), std::move(v), false);
        }
        return f(probe).item();
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < leaf_values.size(); ++i) {
        for (std::size_t e = 0; e < leaf_values[i].size(); ++e) {
            const double fp = eval_at(i, e, step);
            const double fm = eval_at(i, e, -step);
            const double fd = (fp - fm) / (2.0 * step);
            const double a = analytic[i][e];
            const double scale = std::max({std::abs(fd), std::abs(a), 1e-4});
            worst = std::max(worst, std::abs(a - fd) / scale);
        }
    }
    return worst;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(numel(shape));
    for (double& x : v) x = dist(rng);
    return Tensor(std::move(shape), std::move(v));
}

}  // namespace bcp::testing
