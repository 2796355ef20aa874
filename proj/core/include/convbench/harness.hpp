#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "convbench/dataset_io.hpp"
#include "convbench/network.hpp"
#include "convbench/optimizer.hpp"
#include "convbench/residuals.hpp"

namespace convbench {

/// Contiguous train / validation / test windows, in dataset order starting
/// at record 0.
struct SplitConfig {
    int n_train = 300;
    int n_val = 50;
    int n_test = 50;

    void validate(int dataset_count) const;
    int test_begin() const { return n_train + n_val; }
};

enum class Strategy { Absolute, Difference };
enum class GenerationMode { Sequential, Regressive };

Strategy strategy_from_string(const std::string& name);
std::string to_string(Strategy s);
GenerationMode mode_from_string(const std::string& name);
std::string to_string(GenerationMode m);

/// Affine [0,1] maps fitted on the training split: one per variable for
/// absolute values and one per variable for consecutive differences.
/// normalize . denormalize is the identity to rounding.
class Normalizer {
public:
    static Normalizer fit(const LoadedDataset& dataset, const SplitConfig& split);
    static Normalizer from_ranges(VarRange ux, VarRange uy, VarRange T, VarRange dux,
                                  VarRange duy, VarRange dT);

    /// State -> [3,nx,ny] tensor (channels u_x, u_y, T), absolute ranges.
    Tensor encode_state(const FlowState& state) const;
    /// Inverse of encode_state; pressure is set to the hydrostatic column.
    FlowState decode_state(const Tensor& t, const SolverParams& params) const;
    /// (to - from) -> [3,nx,ny] tensor under the difference ranges.
    Tensor encode_diff(const FlowState& from, const FlowState& to) const;
    /// base + denormalized diff; pressure hydrostatic.
    FlowState apply_diff(const Tensor& t, const FlowState& base,
                         const SolverParams& params) const;

    const VarRange& ux() const { return ux_; }
    const VarRange& uy() const { return uy_; }
    const VarRange& T() const { return T_; }
    const VarRange& dux() const { return dux_; }
    const VarRange& duy() const { return duy_; }
    const VarRange& dT() const { return dT_; }

private:
    static void check(const VarRange& r, const char* name);
    VarRange ux_, uy_, T_, dux_, duy_, dT_;
};

/// One supervised pair: input frame indices (oldest first) and the index of
/// the state being predicted. Indices refer to the dataset record order.
struct Sample {
    std::vector<int> input_frames;
    int target_frame = 0;
};

/// Materialized training data: normalized frames for the train+val range,
/// window samples, and per-sample target tensors (next normalized state in
/// Absolute mode, normalized one-step difference in Difference mode).
struct TrainingSet {
    Strategy strategy = Strategy::Absolute;
    int window = 1;
    Normalizer normalizer;
    std::vector<Tensor> frames; // indices [0, n_train + n_val)
    std::vector<Sample> train_samples;
    std::vector<Sample> val_samples;
    std::vector<Tensor> train_targets;
    std::vector<Tensor> val_targets;
};

/// Build supervised pairs for the given strategy. `window` is the input
/// length: 1 for single-frame kinds, seq_len for ConvLstmUnet. Yields
/// n_train - window training samples.
TrainingSet make_targets(const LoadedDataset& dataset, const SplitConfig& split,
                         Strategy strategy, int window);

struct TrainConfig {
    int epochs = 200;
    int batch = 8;
    double lr = 1e-3; // 0 disables updates (parameters stay fixed)
    OptimizerKind optimizer = OptimizerKind::Adam;
    int patience = 20; // epochs without val improvement; <= 0 disables
    std::uint64_t seed = 1;

    void validate() const;
};

struct TrainResult {
    std::vector<double> train_curve;
    std::vector<double> val_curve;
    int best_epoch = 0; // 0-based index into the curves
    double best_val = 0.0;
};

/// Minibatch training with seeded shuffling and early stopping on the
/// validation MSE; the best-validation parameters are restored before
/// returning. Throws TrainingDivergedError when the loss goes non-finite.
TrainResult train(Network& net, const TrainingSet& data, const TrainConfig& cfg);

/// One-step-ahead evaluation: every input window comes from ground truth.
/// Returns n_test - window predictions in physical units.
std::vector<FlowState> predict_sequential(Network& net, Strategy strategy,
                                          const Normalizer& norm,
                                          const std::vector<FlowState>& test_truth,
                                          const SolverParams& params);

/// Autoregressive rollout from the seed window (seed length must equal the
/// network's input window). Throws RolloutDivergedError with the 1-based
/// step index if a prediction goes non-finite.
std::vector<FlowState> predict_regressive(Network& net, Strategy strategy,
                                          const Normalizer& norm,
                                          const std::vector<FlowState>& seed_states,
                                          int n_steps, const SolverParams& params);

struct MaxError {
    double T = 0.0;
    double ux = 0.0;
    double uy = 0.0;
};

/// Per-variable maximum absolute difference over the whole grid.
MaxError max_error(const FlowState& pred, const FlowState& truth);

struct MetricsRecord {
    int step = 0; // 1-based position in the evaluated series
    double max_err_T = 0.0;
    double max_err_ux = 0.0;
    double max_err_uy = 0.0;
    double res_mass = 0.0;
    double res_mom = 0.0;
    double res_heat = 0.0;
};

/// Maximum allowable errors before a variable is considered lost.
struct ThresholdConfig {
    double tau_T = 0.4;    // K
    double tau_ux = 0.024; // m/s
    double tau_uy = 0.024; // m/s

    void validate() const;
};

struct Horizons {
    std::optional<int> T;
    std::optional<int> ux;
    std::optional<int> uy;
};

/// First 1-based step whose max error exceeds the variable's threshold;
/// empty when never crossed.
Horizons threshold_horizon(const std::vector<MetricsRecord>& series,
                           const ThresholdConfig& tau);

/// Residual norms of consecutive prediction pairs; size = predictions - 1.
std::vector<ResidualNorms> monitor_residuals(const std::vector<FlowState>& predictions,
                                             const SolverParams& params);

struct RepitThresholds {
    double mass = 0.0;
    double momentum = 0.0;
    double heat = 0.0;

    /// Default policy: 10x the frozen solver-pair residual bounds.
    static RepitThresholds from_baseline(const ResidualNorms& baseline, double factor = 10.0);
};

struct RepitDecision {
    bool switch_to_cfd = false;
    int step = 0; // 1-based index into the residual series when switching
};

/// First step whose any residual exceeds its threshold. The transfer-
/// learning phase that would follow a switch is out of scope; the decision
/// is reported, not acted on.
RepitDecision repit_switch(const std::vector<ResidualNorms>& series,
                           const RepitThresholds& thresholds);

/// One evaluated (model, strategy, mode) combination.
struct ExperimentCell {
    std::string model;
    std::string strategy;
    std::string mode;
    std::vector<MetricsRecord> records;
    MaxError max_over_rollout;
};

/// Runs the rollout for one cell and scores it: errors against ground truth
/// per step, residuals over consecutive predictions (first record zero).
ExperimentCell evaluate_cell(Network& net, Strategy strategy, GenerationMode mode,
                             const Normalizer& norm, const std::vector<FlowState>& test_truth,
                             const SolverParams& params);

} // namespace convbench
