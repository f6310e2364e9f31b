#pragma once

// Shared test helpers: the central finite-difference gradient oracle and
// small generators. The oracle is independent of the tape's backward path:
// it re-runs the full forward at perturbed parameter values.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "shad/graph.hpp"
#include "shad/matrix.hpp"
#include "shad/rng.hpp"

namespace shad::testutil {

struct GradCheckResult {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::string worst;  // "param[i]" of the worst entry
};

// Central finite differences (step h) of a scalar-valued forward in each
// entry of each listed parameter, compared against the analytic gradients
// the caller computed beforehand. Relative error uses a unit floor on the
// denominator scale.
inline GradCheckResult finite_difference_check(
    std::vector<Param*> params, const std::function<double()>& forward,
    const std::function<const Matrix&(size_t)>& analytic_grad, double h = 1e-5) {
    GradCheckResult res;
    for (size_t p = 0; p < params.size(); ++p) {
        Matrix& value = params[p]->value;
        const Matrix& grad = analytic_grad(p);
        for (int i = 0; i < value.size(); ++i) {
            const double keep = value.at_flat(i);
            value.at_flat(i) = keep + h;
            const double up = forward();
            value.at_flat(i) = keep - h;
            const double down = forward();
            value.at_flat(i) = keep;
            const double fd = (up - down) / (2.0 * h);
            const double an = grad.at_flat(i);
            const double abs_err = std::fabs(fd - an);
            const double rel_err = abs_err / std::max({std::fabs(fd), std::fabs(an), 1.0});
            if (rel_err > res.max_rel_err) {
                res.max_rel_err = rel_err;
                res.max_abs_err = abs_err;
                res.worst = "param" + std::to_string(p) + "[" + std::to_string(i) + "]";
            }
        }
    }
    return res;
}

// Convenience wrapper: builds the graph with `build`, runs backward once for
// the analytic gradients, then runs the finite-difference oracle with the
// same builder.
inline GradCheckResult gradcheck(std::vector<Param*> params,
                                 const std::function<Node(Graph&)>& build, double h = 1e-5) {
    for (Param* p : params) p->zero_grad();
    double analytic_value;
    {
        Graph g;
        Node root = build(g);
        analytic_value = root.scalar();
        g.backward(root);
    }
    (void)analytic_value;
    std::vector<Matrix> grads;
    grads.reserve(params.size());
    for (Param* p : params) grads.push_back(p->grad);
    auto forward = [&]() {
        Graph g;
        return build(g).scalar();
    };
    return finite_difference_check(
        params, forward, [&](size_t i) -> const Matrix& { return grads[i]; }, h);
}

inline Matrix random_matrix(Rng& rng, int rows, int cols, double lo = -2.0, double hi = 2.0) {
    return rng.uniform_matrix(rows, cols, lo, hi);
}

} // namespace shad::testutil
