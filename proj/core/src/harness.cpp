#include "convbench/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <limits>
#include <numeric>

#include "convbench/rng.hpp"

namespace convbench {
namespace {

void affine_encode(const std::vector<double>& src, const VarRange& r, double* dst) {
    const double scale = 1.0 / (r.max - r.min);
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = (src[i] - r.min) * scale;
    }
}

void affine_decode(const double* src, const VarRange& r, std::vector<double>& dst) {
    const double span = r.max - r.min;
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = src[i] * span + r.min;
    }
}

} // namespace

void SplitConfig::validate(int dataset_count) const {
    if (n_train < 2) {
        throw ConfigError("n_train", "must be >= 2");
    }
    if (n_val < 1 || n_test < 1) {
        throw ConfigError("n_val", "val and test counts must be >= 1");
    }
    if (n_train + n_val + n_test > dataset_count) {
        throw ConfigError("split", "n_train + n_val + n_test = " +
                                       std::to_string(n_train + n_val + n_test) +
                                       " exceeds dataset count " +
                                       std::to_string(dataset_count));
    }
}

Strategy strategy_from_string(const std::string& name) {
    if (name == "absolute") {
        return Strategy::Absolute;
    }
    if (name == "difference") {
        return Strategy::Difference;
    }
    throw ConfigError("strategy", "unknown strategy '" + name +
                                      "' (expected absolute|difference)");
}

std::string to_string(Strategy s) {
    return s == Strategy::Absolute ? "absolute" : "difference";
}

GenerationMode mode_from_string(const std::string& name) {
    if (name == "sequential") {
        return GenerationMode::Sequential;
    }
    if (name == "regressive") {
        return GenerationMode::Regressive;
    }
    throw ConfigError("mode", "unknown mode '" + name + "' (expected sequential|regressive)");
}

std::string to_string(GenerationMode m) {
    return m == GenerationMode::Sequential ? "sequential" : "regressive";
}

void Normalizer::check(const VarRange& r, const char* name) {
    if (!(r.min < r.max)) {
        throw ConfigError(name, "degenerate range: min " + std::to_string(r.min) +
                                    " >= max " + std::to_string(r.max));
    }
}

Normalizer Normalizer::from_ranges(VarRange ux, VarRange uy, VarRange T, VarRange dux,
                                   VarRange duy, VarRange dT) {
    Normalizer n;
    n.ux_ = ux;
    n.uy_ = uy;
    n.T_ = T;
    n.dux_ = dux;
    n.duy_ = duy;
    n.dT_ = dT;
    check(ux, "ux_range");
    check(uy, "uy_range");
    check(T, "T_range");
    check(dux, "dux_range");
    check(duy, "duy_range");
    check(dT, "dT_range");
    return n;
}

Normalizer Normalizer::fit(const LoadedDataset& dataset, const SplitConfig& split) {
    split.validate(static_cast<int>(dataset.states.size()));
    const double inf = std::numeric_limits<double>::infinity();
    VarRange rux{inf, -inf}, ruy{inf, -inf}, rT{inf, -inf};
    VarRange rdux{inf, -inf}, rduy{inf, -inf}, rdT{inf, -inf};
    auto absorb = [](VarRange& r, const std::vector<double>& f) {
        for (double v : f) {
            r.min = std::min(r.min, v);
            r.max = std::max(r.max, v);
        }
    };
    auto absorb_diff = [](VarRange& r, const std::vector<double>& a,
                          const std::vector<double>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = b[i] - a[i];
            r.min = std::min(r.min, d);
            r.max = std::max(r.max, d);
        }
    };
    for (int t = 0; t < split.n_train; ++t) {
        const FlowState& s = dataset.states[static_cast<std::size_t>(t)];
        absorb(rux, s.u_x);
        absorb(ruy, s.u_y);
        absorb(rT, s.T);
        if (t + 1 < split.n_train) {
            const FlowState& nxt = dataset.states[static_cast<std::size_t>(t + 1)];
            absorb_diff(rdux, s.u_x, nxt.u_x);
            absorb_diff(rduy, s.u_y, nxt.u_y);
            absorb_diff(rdT, s.T, nxt.T);
        }
    }
    return from_ranges(rux, ruy, rT, rdux, rduy, rdT);
}

Tensor Normalizer::encode_state(const FlowState& state) const {
    Tensor t({3, state.nx, state.ny});
    const std::int64_t plane = static_cast<std::int64_t>(state.nx) * state.ny;
    affine_encode(state.u_x, ux_, t.data());
    affine_encode(state.u_y, uy_, t.data() + plane);
    affine_encode(state.T, T_, t.data() + 2 * plane);
    return t;
}

FlowState Normalizer::decode_state(const Tensor& t, const SolverParams& params) const {
    if (t.rank() != 3 || t.extent(0) != 3) {
        throw DimensionError("decode_state expects a [3,nx,ny] tensor");
    }
    FlowState s = FlowState::zeros(t.extent(1), t.extent(2));
    const std::int64_t plane = static_cast<std::int64_t>(s.nx) * s.ny;
    affine_decode(t.data(), ux_, s.u_x);
    affine_decode(t.data() + plane, uy_, s.u_y);
    affine_decode(t.data() + 2 * plane, T_, s.T);
    fill_hydrostatic(s, params);
    return s;
}

Tensor Normalizer::encode_diff(const FlowState& from, const FlowState& to) const {
    if (!from.same_grid(to)) {
        throw DimensionError("encode_diff states have different grids");
    }
    Tensor t({3, from.nx, from.ny});
    const std::int64_t plane = static_cast<std::int64_t>(from.nx) * from.ny;
    auto enc = [&](const std::vector<double>& a, const std::vector<double>& b,
                   const VarRange& r, double* dst) {
        const double scale = 1.0 / (r.max - r.min);
        for (std::size_t i = 0; i < a.size(); ++i) {
            dst[i] = ((b[i] - a[i]) - r.min) * scale;
        }
    };
    enc(from.u_x, to.u_x, dux_, t.data());
    enc(from.u_y, to.u_y, duy_, t.data() + plane);
    enc(from.T, to.T, dT_, t.data() + 2 * plane);
    return t;
}

FlowState Normalizer::apply_diff(const Tensor& t, const FlowState& base,
                                 const SolverParams& params) const {
    if (t.rank() != 3 || t.extent(0) != 3 || t.extent(1) != base.nx || t.extent(2) != base.ny) {
        throw DimensionError("apply_diff tensor/grid mismatch");
    }
    FlowState s = FlowState::zeros(base.nx, base.ny);
    const std::int64_t plane = static_cast<std::int64_t>(base.nx) * base.ny;
    auto dec = [&](const double* src, const std::vector<double>& b, const VarRange& r,
                   std::vector<double>& dst) {
        const double span = r.max - r.min;
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = b[i] + (src[i] * span + r.min);
        }
    };
    dec(t.data(), base.u_x, dux_, s.u_x);
    dec(t.data() + plane, base.u_y, duy_, s.u_y);
    dec(t.data() + 2 * plane, base.T, dT_, s.T);
    fill_hydrostatic(s, params);
    return s;
}

TrainingSet make_targets(const LoadedDataset& dataset, const SplitConfig& split,
                         Strategy strategy, int window) {
    if (window < 1) {
        throw ConfigError("window", "must be >= 1");
    }
    split.validate(static_cast<int>(dataset.states.size()));
    if (split.n_train <= window) {
        throw ConfigError("n_train", "too small for input window " + std::to_string(window));
    }
    if (split.n_val <= window) {
        throw ConfigError("n_val", "too small for input window " + std::to_string(window));
    }
    TrainingSet set;
    set.strategy = strategy;
    set.window = window;
    set.normalizer = Normalizer::fit(dataset, split);

    const int limit = split.n_train + split.n_val;
    set.frames.reserve(static_cast<std::size_t>(limit));
    for (int t = 0; t < limit; ++t) {
        set.frames.push_back(
            set.normalizer.encode_state(dataset.states[static_cast<std::size_t>(t)]));
    }
    auto add_samples = [&](int begin, int end, std::vector<Sample>& samples,
                           std::vector<Tensor>& targets) {
        // t is the last input frame; windows stay inside [begin, end)
        for (int t = begin + window - 1; t + 1 < end; ++t) {
            Sample s;
            for (int k = t - window + 1; k <= t; ++k) {
                s.input_frames.push_back(k);
            }
            s.target_frame = t + 1;
            if (strategy == Strategy::Absolute) {
                targets.push_back(set.frames[static_cast<std::size_t>(t + 1)]);
            } else {
                targets.push_back(set.normalizer.encode_diff(
                    dataset.states[static_cast<std::size_t>(t)],
                    dataset.states[static_cast<std::size_t>(t + 1)]));
            }
            samples.push_back(std::move(s));
        }
    };
    add_samples(0, split.n_train, set.train_samples, set.train_targets);
    add_samples(split.n_train, limit, set.val_samples, set.val_targets);
    return set;
}

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw ConfigError("epochs", "must be >= 1");
    }
    if (batch < 1) {
        throw ConfigError("batch", "must be >= 1");
    }
    if (lr < 0.0) {
        throw ConfigError("learning_rate", "must be >= 0");
    }
}

TrainResult train(Network& net, const TrainingSet& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.train_samples.empty() || data.val_samples.empty()) {
        throw ConfigError("split", "empty train or val sample set");
    }
    auto params = net.parameters();
    std::optional<Optimizer> opt;
    if (cfg.lr > 0.0) {
        opt.emplace(cfg.optimizer, cfg.lr);
    }

    auto run_sample = [&](const Sample& s, const Tensor& target, bool with_grad) {
        Tape tape;
        Var out;
        if (data.window == 1) {
            out = net.forward_on_tape(
                tape, tape.leaf(data.frames[static_cast<std::size_t>(s.input_frames[0])]));
        } else {
            std::vector<Var> xs;
            xs.reserve(s.input_frames.size());
            for (int idx : s.input_frames) {
                xs.push_back(tape.leaf(data.frames[static_cast<std::size_t>(idx)]));
            }
            out = net.forward_sequence_on_tape(tape, xs);
        }
        Var loss = tape.mse_loss(out, tape.leaf(target));
        const double value = tape.value(loss)[0];
        if (with_grad) {
            tape.backward(loss);
        }
        return value;
    };

    TrainResult result;
    result.best_val = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_params;
    best_params.reserve(params.size());
    for (Parameter* p : params) {
        best_params.push_back(p->value());
    }

    std::uint64_t rng = cfg.seed;
    const int n_train = static_cast<int>(data.train_samples.size());
    std::vector<int> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = n_train - 1; i > 0; --i) { // Fisher-Yates
            const int j = static_cast<int>(next_below(rng, static_cast<std::uint64_t>(i + 1)));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
        double train_sum = 0.0;
        for (int start = 0; start < n_train; start += cfg.batch) {
            const int bs = std::min(cfg.batch, n_train - start);
            for (Parameter* p : params) {
                p->zero_grad();
            }
            double batch_sum = 0.0;
            for (int k = 0; k < bs; ++k) {
                const int idx = order[static_cast<std::size_t>(start + k)];
                batch_sum += run_sample(data.train_samples[static_cast<std::size_t>(idx)],
                                        data.train_targets[static_cast<std::size_t>(idx)], true);
            }
            if (!std::isfinite(batch_sum)) {
                throw TrainingDivergedError(epoch, "non-finite training loss");
            }
            train_sum += batch_sum;
            const double inv = 1.0 / static_cast<double>(bs);
            for (Parameter* p : params) {
                Tensor& g = p->grad();
                for (std::int64_t i = 0; i < g.size(); ++i) {
                    g[i] *= inv;
                }
            }
            if (opt) {
                opt->step(params);
            }
        }
        const double train_mse = train_sum / static_cast<double>(n_train);

        double val_sum = 0.0;
        for (std::size_t i = 0; i < data.val_samples.size(); ++i) {
            val_sum += run_sample(data.val_samples[i], data.val_targets[i], false);
        }
        const double val_mse = val_sum / static_cast<double>(data.val_samples.size());
        if (!std::isfinite(val_mse)) {
            throw TrainingDivergedError(epoch, "non-finite validation loss");
        }
        result.train_curve.push_back(train_mse);
        result.val_curve.push_back(val_mse);

        if (val_mse < result.best_val) {
            result.best_val = val_mse;
            result.best_epoch = epoch;
            for (std::size_t i = 0; i < params.size(); ++i) {
                best_params[i] = params[i]->value();
            }
            since_best = 0;
        } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
            break;
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i]->value() = best_params[i];
    }
    return result;
}

namespace {

int input_window(const Network& net) {
    return net.spec().kind == NetworkKind::ConvLstmUnet ? net.spec().seq_len : 1;
}

Tensor forward_window(Network& net, const Normalizer& norm,
                      const std::deque<const FlowState*>& window_states) {
    if (window_states.size() == 1) {
        return net.forward_single(norm.encode_state(*window_states.front()));
    }
    std::vector<Tensor> xs;
    xs.reserve(window_states.size());
    for (const FlowState* s : window_states) {
        xs.push_back(norm.encode_state(*s));
    }
    return net.forward_sequence(xs);
}

FlowState decode_prediction(Strategy strategy, const Normalizer& norm, const Tensor& y,
                            const FlowState& base, const SolverParams& params) {
    return strategy == Strategy::Absolute ? norm.decode_state(y, params)
                                          : norm.apply_diff(y, base, params);
}

} // namespace

std::vector<FlowState> predict_sequential(Network& net, Strategy strategy,
                                          const Normalizer& norm,
                                          const std::vector<FlowState>& test_truth,
                                          const SolverParams& params) {
    const int window = input_window(net);
    const int n = static_cast<int>(test_truth.size());
    if (n <= window) {
        throw ConfigError("n_test", "needs more than " + std::to_string(window) + " states");
    }
    std::vector<FlowState> preds;
    preds.reserve(static_cast<std::size_t>(n - window));
    for (int t = window - 1; t + 1 < n; ++t) {
        std::deque<const FlowState*> win;
        for (int k = t - window + 1; k <= t; ++k) {
            win.push_back(&test_truth[static_cast<std::size_t>(k)]);
        }
        const Tensor y = forward_window(net, norm, win);
        preds.push_back(
            decode_prediction(strategy, norm, y, test_truth[static_cast<std::size_t>(t)],
                              params));
    }
    return preds;
}

std::vector<FlowState> predict_regressive(Network& net, Strategy strategy,
                                          const Normalizer& norm,
                                          const std::vector<FlowState>& seed_states,
                                          int n_steps, const SolverParams& params) {
    const int window = input_window(net);
    if (static_cast<int>(seed_states.size()) != window) {
        throw UsageError("seed length " + std::to_string(seed_states.size()) +
                         " != network input window " + std::to_string(window));
    }
    if (n_steps < 1) {
        throw ConfigError("n_steps", "must be >= 1");
    }
    std::deque<FlowState> history(seed_states.begin(), seed_states.end());
    std::vector<FlowState> preds;
    preds.reserve(static_cast<std::size_t>(n_steps));
    for (int k = 1; k <= n_steps; ++k) {
        std::deque<const FlowState*> win;
        for (const FlowState& s : history) {
            win.push_back(&s);
        }
        FlowState next;
        try {
            const Tensor y = forward_window(net, norm, win);
            next = decode_prediction(strategy, norm, y, history.back(), params);
            next.require_finite();
        } catch (const NumericError& e) {
            throw RolloutDivergedError(k, e.what());
        }
        history.push_back(next);
        history.pop_front();
        preds.push_back(std::move(next));
    }
    return preds;
}

MaxError max_error(const FlowState& pred, const FlowState& truth) {
    if (!pred.same_grid(truth)) {
        throw DimensionError("max_error states have different grids");
    }
    MaxError e;
    for (std::size_t i = 0; i < pred.T.size(); ++i) {
        e.T = std::max(e.T, std::abs(pred.T[i] - truth.T[i]));
        e.ux = std::max(e.ux, std::abs(pred.u_x[i] - truth.u_x[i]));
        e.uy = std::max(e.uy, std::abs(pred.u_y[i] - truth.u_y[i]));
    }
    return e;
}

void ThresholdConfig::validate() const {
    if (!(tau_T > 0.0) || !(tau_ux > 0.0) || !(tau_uy > 0.0)) {
        throw ConfigError("thresholds", "must all be > 0");
    }
}

Horizons threshold_horizon(const std::vector<MetricsRecord>& series,
                           const ThresholdConfig& tau) {
    tau.validate();
    if (series.empty()) {
        throw UsageError("threshold_horizon requires a non-empty series");
    }
    Horizons h;
    for (const MetricsRecord& r : series) {
        if (!h.T && r.max_err_T > tau.tau_T) {
            h.T = r.step;
        }
        if (!h.ux && r.max_err_ux > tau.tau_ux) {
            h.ux = r.step;
        }
        if (!h.uy && r.max_err_uy > tau.tau_uy) {
            h.uy = r.step;
        }
    }
    return h;
}

std::vector<ResidualNorms> monitor_residuals(const std::vector<FlowState>& predictions,
                                             const SolverParams& params) {
    if (predictions.size() < 2) {
        throw UsageError("monitor_residuals needs at least two consecutive states");
    }
    std::vector<ResidualNorms> out;
    out.reserve(predictions.size() - 1);
    for (std::size_t i = 0; i + 1 < predictions.size(); ++i) {
        out.push_back(residual_norms(predictions[i], predictions[i + 1], params));
    }
    return out;
}

RepitThresholds RepitThresholds::from_baseline(const ResidualNorms& baseline, double factor) {
    if (!(factor > 0.0)) {
        throw ConfigError("factor", "must be > 0");
    }
    return {baseline.mass * factor, baseline.momentum * factor, baseline.heat * factor};
}

RepitDecision repit_switch(const std::vector<ResidualNorms>& series,
                           const RepitThresholds& thresholds) {
    if (!(thresholds.mass > 0.0) || !(thresholds.momentum > 0.0) || !(thresholds.heat > 0.0)) {
        throw ConfigError("residual_threshold", "must all be > 0");
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        const ResidualNorms& r = series[i];
        if (r.mass > thresholds.mass || r.momentum > thresholds.momentum ||
            r.heat > thresholds.heat) {
            return {true, static_cast<int>(i) + 1};
        }
    }
    return {false, 0};
}

ExperimentCell evaluate_cell(Network& net, Strategy strategy, GenerationMode mode,
                             const Normalizer& norm, const std::vector<FlowState>& test_truth,
                             const SolverParams& params) {
    const int window = input_window(net);
    const int n = static_cast<int>(test_truth.size());
    if (n <= window) {
        throw ConfigError("n_test", "needs more than " + std::to_string(window) + " states");
    }
    std::vector<FlowState> preds;
    if (mode == GenerationMode::Sequential) {
        preds = predict_sequential(net, strategy, norm, test_truth, params);
    } else {
        std::vector<FlowState> seeds(test_truth.begin(), test_truth.begin() + window);
        preds = predict_regressive(net, strategy, norm, seeds, n - window, params);
    }

    ExperimentCell cell;
    cell.model = to_string(net.spec().kind);
    cell.strategy = to_string(strategy);
    cell.mode = to_string(mode);
    const std::vector<ResidualNorms> residuals =
        preds.size() >= 2 ? monitor_residuals(preds, params) : std::vector<ResidualNorms>{};
    for (std::size_t k = 0; k < preds.size(); ++k) {
        const FlowState& truth = test_truth[static_cast<std::size_t>(window) + k];
        const MaxError err = max_error(preds[k], truth);
        MetricsRecord rec;
        rec.step = static_cast<int>(k) + 1;
        rec.max_err_T = err.T;
        rec.max_err_ux = err.ux;
        rec.max_err_uy = err.uy;
        if (k >= 1) {
            rec.res_mass = residuals[k - 1].mass;
            rec.res_mom = residuals[k - 1].momentum;
            rec.res_heat = residuals[k - 1].heat;
        }
        cell.max_over_rollout.T = std::max(cell.max_over_rollout.T, err.T);
        cell.max_over_rollout.ux = std::max(cell.max_over_rollout.ux, err.ux);
        cell.max_over_rollout.uy = std::max(cell.max_over_rollout.uy, err.uy);
        cell.records.push_back(rec);
    }
    return cell;
}

} // namespace convbench
