#pragma once

#include <map>
#include <string>
#include <vector>

#include "convbench/autodiff.hpp"

namespace convbench {

enum class OptimizerKind { Sgd, Adam };

OptimizerKind optimizer_kind_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// SGD: w -= lr * g. Adam: standard first/second moment recurrences with
/// bias correction; moment state is keyed by parameter id and starts at the
/// first step() call.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double learning_rate, AdamConfig adam = {});

    void step(const std::vector<Parameter*>& params);
    OptimizerKind kind() const { return kind_; }
    double learning_rate() const { return lr_; }

private:
    struct Moments {
        Tensor m;
        Tensor v;
    };

    OptimizerKind kind_;
    double lr_;
    AdamConfig adam_;
    std::int64_t t_ = 0;
    std::map<std::string, Moments> state_;
};

} // namespace convbench
