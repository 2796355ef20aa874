#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "convbench/autodiff.hpp"

namespace convbench {

/// Gate kernels and biases of a ConvLSTM cell. Eight square odd-sized
/// kernels (input->gate and hidden->gate for each of i, f, o, g) plus one
/// bias per gate, all registered as trainable Parameters.
struct ConvLSTMWeights {
    int in_channels = 0;
    int hidden_channels = 0;
    int kernel = 3;

    std::unique_ptr<Parameter> w_xi, w_hi, w_xf, w_hf, w_xo, w_ho, w_xg, w_hg;
    std::unique_ptr<Parameter> b_i, b_f, b_o, b_g;

    /// Deterministic init: kernels uniform in +-sqrt(1/fan_in) drawn from
    /// `rng_state`; forget-gate bias 1.0, other biases 0.
    static ConvLSTMWeights init(int in_channels, int hidden_channels, int kernel,
                                std::uint64_t& rng_state, const std::string& id_prefix);

    std::vector<Parameter*> parameters();
    void validate() const;
};

/// Recurrent state: H is the short-term memory h_t (bounded to (-1,1)), C
/// the long-term memory cell.
struct ConvLSTMState {
    Tensor h;
    Tensor c;
};

/// Tape-level state for rollouts recorded as part of a larger graph.
struct ConvLSTMStateVar {
    Var h;
    Var c;
};

/// One gate update:
///   i,f,o = sigmoid(Wx* . X + Wh* . H + b),  g = tanh(...)
///   C_t = f (.) C_{t-1} + i (.) g,           h_t = o (.) tanh(C_t)
/// Convolutions use "same" zero padding so spatial dims are preserved.
ConvLSTMStateVar convlstm_step(Tape& tape, Var x, const ConvLSTMStateVar& state,
                               ConvLSTMWeights& w);

/// Value-level convenience wrapper over a scratch tape.
ConvLSTMState convlstm_step(const Tensor& x, const ConvLSTMState& state, ConvLSTMWeights& w);

/// Folds convlstm_step over the sequence starting from zero H, C; returns
/// the final state. The sequence must be non-empty and uniformly shaped.
ConvLSTMStateVar convlstm_rollout(Tape& tape, const std::vector<Var>& sequence,
                                  ConvLSTMWeights& w);

ConvLSTMState convlstm_rollout(const std::vector<Tensor>& sequence, ConvLSTMWeights& w);

} // namespace convbench
