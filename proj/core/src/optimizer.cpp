#include "convbench/optimizer.hpp"

#include <cmath>

namespace convbench {

OptimizerKind optimizer_kind_from_string(const std::string& name) {
    if (name == "sgd") {
        return OptimizerKind::Sgd;
    }
    if (name == "adam") {
        return OptimizerKind::Adam;
    }
    throw ConfigError("optimizer", "unknown optimizer '" + name + "' (expected sgd|adam)");
}

std::string to_string(OptimizerKind kind) {
    return kind == OptimizerKind::Sgd ? "sgd" : "adam";
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, AdamConfig adam)
    : kind_(kind), lr_(learning_rate), adam_(adam) {
    if (!(learning_rate > 0.0)) {
        throw ConfigError("learning_rate", "must be > 0");
    }
}

void Optimizer::step(const std::vector<Parameter*>& params) {
    if (kind_ == OptimizerKind::Sgd) {
        for (Parameter* p : params) {
            p->value().add_scaled(p->grad(), -lr_);
            p->value().require_finite("sgd update");
        }
        return;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(t_));
    for (Parameter* p : params) {
        Moments& mom = state_.try_emplace(p->id(), Moments{Tensor::zeros_like(p->value()),
                                                           Tensor::zeros_like(p->value())})
                           .first->second;
        Tensor& w = p->value();
        const Tensor& g = p->grad();
        for (std::int64_t i = 0; i < w.size(); ++i) {
            mom.m[i] = adam_.beta1 * mom.m[i] + (1.0 - adam_.beta1) * g[i];
            mom.v[i] = adam_.beta2 * mom.v[i] + (1.0 - adam_.beta2) * g[i] * g[i];
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + adam_.eps);
        }
        w.require_finite("adam update");
    }
}

} // namespace convbench
