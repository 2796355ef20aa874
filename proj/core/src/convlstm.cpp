#include "convbench/convlstm.hpp"

#include "convbench/rng.hpp"

namespace convbench {
namespace {

Tensor uniform_kernel(int co, int ci, int k, std::uint64_t& rng_state) {
    Tensor t({co, ci, k, k});
    const double bound = std::sqrt(1.0 / (static_cast<double>(ci) * k * k));
    for (std::int64_t i = 0; i < t.size(); ++i) {
        t[i] = next_uniform(rng_state, bound);
    }
    return t;
}

} // namespace

ConvLSTMWeights ConvLSTMWeights::init(int in_channels, int hidden_channels, int kernel,
                                      std::uint64_t& rng_state, const std::string& id_prefix) {
    if (kernel < 1 || kernel % 2 == 0) {
        throw ConfigError("kernel", "convlstm kernel size must be odd, got " +
                                        std::to_string(kernel));
    }
    if (in_channels < 1 || hidden_channels < 1) {
        throw ConfigError("channels", "convlstm channel counts must be >= 1");
    }
    ConvLSTMWeights w;
    w.in_channels = in_channels;
    w.hidden_channels = hidden_channels;
    w.kernel = kernel;
    auto kparam = [&](const char* name, int ci) {
        return std::make_unique<Parameter>(id_prefix + name,
                                           uniform_kernel(hidden_channels, ci, kernel, rng_state));
    };
    w.w_xi = kparam("w_xi", in_channels);
    w.w_hi = kparam("w_hi", hidden_channels);
    w.w_xf = kparam("w_xf", in_channels);
    w.w_hf = kparam("w_hf", hidden_channels);
    w.w_xo = kparam("w_xo", in_channels);
    w.w_ho = kparam("w_ho", hidden_channels);
    w.w_xg = kparam("w_xg", in_channels);
    w.w_hg = kparam("w_hg", hidden_channels);
    w.b_i = std::make_unique<Parameter>(id_prefix + "b_i", Tensor({hidden_channels}));
    // forget gate opens at init so early training does not wipe the cell
    w.b_f = std::make_unique<Parameter>(id_prefix + "b_f",
                                        Tensor::full({hidden_channels}, 1.0));
    w.b_o = std::make_unique<Parameter>(id_prefix + "b_o", Tensor({hidden_channels}));
    w.b_g = std::make_unique<Parameter>(id_prefix + "b_g", Tensor({hidden_channels}));
    return w;
}

std::vector<Parameter*> ConvLSTMWeights::parameters() {
    return {w_xi.get(), w_hi.get(), w_xf.get(), w_hf.get(), w_xo.get(), w_ho.get(),
            w_xg.get(), w_hg.get(), b_i.get(),  b_f.get(),  b_o.get(),  b_g.get()};
}

void ConvLSTMWeights::validate() const {
    if (!w_xi || !w_hi || !w_xf || !w_hf || !w_xo || !w_ho || !w_xg || !w_hg || !b_i || !b_f ||
        !b_o || !b_g) {
        throw UsageError("convlstm weights are not initialized");
    }
}

ConvLSTMStateVar convlstm_step(Tape& tape, Var x, const ConvLSTMStateVar& state,
                               ConvLSTMWeights& w) {
    w.validate();
    const Tensor& xv = tape.value(x);
    const Tensor& hv = tape.value(state.h);
    if (xv.rank() != 3 || xv.extent(1) != hv.extent(1) || xv.extent(2) != hv.extent(2)) {
        throw DimensionError("convlstm_step spatial dims differ: x " + shape_str(xv.shape()) +
                             " vs state " + shape_str(hv.shape()));
    }
    if (xv.extent(0) != w.in_channels) {
        throw DimensionError("convlstm_step input channels " + std::to_string(xv.extent(0)) +
                             " != " + std::to_string(w.in_channels));
    }
    const int pad = w.kernel / 2;

    auto gate = [&](Parameter& wx, Parameter& wh, Parameter& b, Activation act) {
        Var a = tape.conv2d(x, tape.param(wx), tape.param(b), 1, pad);
        Var bterm = tape.conv2d(state.h, tape.param(wh), 1, pad);
        return tape.activation(tape.add(a, bterm), act);
    };
    Var i = gate(*w.w_xi, *w.w_hi, *w.b_i, Activation::Sigmoid);
    Var f = gate(*w.w_xf, *w.w_hf, *w.b_f, Activation::Sigmoid);
    Var o = gate(*w.w_xo, *w.w_ho, *w.b_o, Activation::Sigmoid);
    Var g = gate(*w.w_xg, *w.w_hg, *w.b_g, Activation::Tanh);

    Var c_next = tape.add(tape.hadamard(f, state.c), tape.hadamard(i, g));
    Var h_next = tape.hadamard(o, tape.activation(c_next, Activation::Tanh));
    return {h_next, c_next};
}

ConvLSTMState convlstm_step(const Tensor& x, const ConvLSTMState& state, ConvLSTMWeights& w) {
    Tape tape;
    ConvLSTMStateVar sv{tape.leaf(state.h), tape.leaf(state.c)};
    ConvLSTMStateVar next = convlstm_step(tape, tape.leaf(x), sv, w);
    return {tape.value(next.h), tape.value(next.c)};
}

ConvLSTMStateVar convlstm_rollout(Tape& tape, const std::vector<Var>& sequence,
                                  ConvLSTMWeights& w) {
    if (sequence.empty()) {
        throw UsageError("convlstm_rollout requires a non-empty sequence");
    }
    const Shape frame_shape = tape.value(sequence.front()).shape(); // copy: tape may grow
    if (frame_shape.size() != 3) {
        throw DimensionError("convlstm_rollout expects [C,H,W] frames");
    }
    const Shape state_shape{w.hidden_channels, frame_shape[1], frame_shape[2]};
    ConvLSTMStateVar state{tape.leaf(Tensor(state_shape)), tape.leaf(Tensor(state_shape))};
    for (Var frame : sequence) {
        if (tape.value(frame).shape() != frame_shape) {
            throw DimensionError("convlstm_rollout frames must share one shape");
        }
        state = convlstm_step(tape, frame, state, w);
    }
    return state;
}

ConvLSTMState convlstm_rollout(const std::vector<Tensor>& sequence, ConvLSTMWeights& w) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(sequence.size());
    for (const Tensor& t : sequence) {
        vars.push_back(tape.leaf(t));
    }
    ConvLSTMStateVar final_state = convlstm_rollout(tape, vars, w);
    return {tape.value(final_state.h), tape.value(final_state.c)};
}

} // namespace convbench
