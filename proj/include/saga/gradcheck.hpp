#pragma once

#include <algorithm>

#include "saga/graph.hpp"

namespace saga {

// Central-difference check of the AD gradient of a scalar-valued function.
// `f` builds the loss on the given graph from the id of its single argument;
// the same builder serves the AD pass and every finite-difference evaluation.
// Returns max over coordinates of |ad - fd| / max(1, |ad|, |fd|).
template <typename T, typename F>
double grad_check(F f, Tensor<T> x, double eps) {
    if (!(eps > 0.0 && eps <= 1e-2)) throw config_error("grad_check: eps must be in (0, 1e-2]");

    x.requires_grad = true;
    std::vector<T> ad;
    {
        Graph<T> g;
        auto id = g.leaf(x);
        auto loss = f(g, id);
        if (!g.value(loss).is_scalar()) {
            throw config_error("grad_check: f must return a scalar, got shape " +
                               shape_str(g.value(loss).shape));
        }
        g.backward(loss);
        ad = x.grad;
    }

    auto eval = [&](const Tensor<T>& p) -> double {
        Graph<T> g;
        Tensor<T> c = p;
        c.requires_grad = false;
        auto id = g.leaf(c);
        return static_cast<double>(g.value(f(g, id)).scalar());
    };

    double worst = 0.0;
    Tensor<T> probe = x;
    probe.requires_grad = false;
    for (size_t i = 0; i < x.numel(); i++) {
        const T orig = probe.data[i];
        probe.data[i] = orig + static_cast<T>(eps);
        const double fp = eval(probe);
        probe.data[i] = orig - static_cast<T>(eps);
        const double fm = eval(probe);
        probe.data[i] = orig;
        const double fd = (fp - fm) / (2.0 * eps);
        const double a = static_cast<double>(ad[i]);
        const double err = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace saga
