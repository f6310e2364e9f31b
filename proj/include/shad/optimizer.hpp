#pragma once

// SGD with momentum and optional weight decay over a ParamStore's trainable
// entries. Velocity buffers are keyed by entry name and persist across steps.

#include <string>
#include <unordered_map>

#include "shad/param_store.hpp"

namespace shad {

class SgdOptimizer {
public:
    SgdOptimizer(double lr, double momentum = 0.9, double weight_decay = 0.0)
        : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

    // p -= lr * v,  v = momentum * v + (grad + wd * p)
    void step(ParamStore& store) {
        for (const auto& name : store.names()) {
            Param& p = store.get(name);
            if (!p.trainable) continue;
            auto [it, fresh] = velocity_.try_emplace(name, Matrix(p.value.rows(), p.value.cols()));
            Matrix& v = it->second;
            if (!fresh && !v.same_shape(p.value)) throw_shape_error("optimizer velocity", v, p.value);
            for (int i = 0; i < p.value.size(); ++i) {
                const double g = p.grad.at_flat(i) + weight_decay_ * p.value.at_flat(i);
                v.at_flat(i) = momentum_ * v.at_flat(i) + g;
                p.value.at_flat(i) -= lr_ * v.at_flat(i);
            }
        }
    }

private:
    double lr_;
    double momentum_;
    double weight_decay_;
    std::unordered_map<std::string, Matrix> velocity_;
};

} // namespace shad
