#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "convbench/tensor.hpp"

namespace convbench {

enum class Activation { Sigmoid, Tanh, Relu };

/// Trainable tensor with persistent gradient storage. Gradients accumulate
/// additively across backward passes until zero_grad().
class Parameter {
public:
    Parameter(std::string id, Tensor value)
        : id_(std::move(id)), value_(std::move(value)), grad_(Tensor::zeros_like(value_)) {}

    const std::string& id() const { return id_; }
    Tensor& value() { return value_; }
    const Tensor& value() const { return value_; }
    Tensor& grad() { return grad_; }
    const Tensor& grad() const { return grad_; }
    void zero_grad() { grad_.fill(0.0); }

private:
    std::string id_;
    Tensor value_;
    Tensor grad_;
};

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    int node = -1;
};

/// Raw-tensor kernels shared by the tape and by oracle-independent callers.
/// Output spatial extents follow the usual floor/stride conventions; see
/// each operation's declaration.
namespace ops {

/// Cross-correlation (no kernel flip). input [Ci,H,W], kernel [Co,Ci,kh,kw],
/// optional bias [Co]; out [Co,Ho,Wo] with Ho = (H + 2p - kh)/s + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor* bias, int stride,
              int padding);

/// Adjoint of conv2d under the unrolled-matrix view. input [Ci,H,W], kernel
/// [Ci,Co,kh,kw]; out [Co,Ho,Wo] with Ho = (H - 1)*s - 2p + kh.
Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, int stride, int padding);

/// Window max with first-in-scan-order tie break. H and W must divide by
/// `window`. If `argmax` is non-null it receives, per output element, the
/// flat input index of the chosen maximum.
Tensor max_pool2d(const Tensor& input, int window, std::vector<std::int64_t>* argmax);

Tensor activation(const Tensor& x, Activation kind);

double mse(const Tensor& pred, const Tensor& target);

double inner(const Tensor& a, const Tensor& b);

} // namespace ops

/// Reverse-mode tape. Records an ordered list of operation nodes (input ids,
/// output id, local gradient rule); backward() walks it once in reverse and
/// accumulates into every reachable Parameter's grad. replay() recomputes
/// all node values in recorded order and must reproduce them bit-identically.
///
/// A tape is single-threaded; independent tapes may run concurrently and may
/// share Parameters read-only.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value);
    Var param(Parameter& p);

    Var conv2d(Var input, Var kernel, Var bias, int stride, int padding);
    Var conv2d(Var input, Var kernel, int stride, int padding);
    Var transposed_conv2d(Var input, Var kernel, int stride, int padding);
    Var max_pool2d(Var input, int window);
    Var activation(Var x, Activation kind);
    Var add(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var add_channel_bias(Var x, Var bias); // x [C,H,W] + bias [C]
    Var concat_channels(Var a, Var b);
    Var mse_loss(Var pred, Var target);

    const Tensor& value(Var v) const;
    int node_count() const { return static_cast<int>(nodes_.size()); }

    /// Scalar loss only; accumulates into Parameter::grad for every
    /// parameter leaf on the tape.
    void backward(Var loss);

    /// Recompute every node value in recorded order from the leaves.
    void replay();

    /// Signature of every data-dependent branch taken during the forward
    /// pass: relu input signs and pool argmax choices. Two evaluations with
    /// equal signatures lie on the same smooth piece of the network, which
    /// is the validity condition for central finite differences.
    std::vector<std::int32_t> branch_signature() const;

private:
    enum class NodeKind {
        Leaf,
        ParamLeaf,
        Conv2d,
        ConvT2d,
        MaxPool,
        Act,
        Add,
        Mul,
        Bias,
        Concat,
        Mse
    };

    struct Node {
        NodeKind kind;
        Activation act = Activation::Relu;
        Tensor value;
        Tensor grad; // empty until backward touches it
        std::vector<int> inputs;
        Parameter* parameter = nullptr;
        std::function<Tensor(Tape&)> forward_fn;        // empty for leaves
        std::function<void(Tape&, int)> backward_fn;    // empty for leaves
        std::shared_ptr<std::vector<std::int64_t>> aux; // pool argmax cache
    };

    int push(Node node);
    Tensor& grad_of(int node); // allocates zeros on first touch
    void check_var(Var v, const char* what) const;

    std::vector<Node> nodes_;

    friend struct TapeAccess;
};

} // namespace convbench
