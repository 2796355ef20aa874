#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "convbench/flow.hpp"

namespace convbench {

struct DatasetManifest;

/// Incompressible Boussinesq projection solver for the differentially
/// heated cavity (hot left wall, cold right wall, adiabatic top/bottom,
/// no-slip everywhere).
///
/// Discretization: staggered (MAC) velocities on a (nx-1) x (ny-1) cell
/// mesh, cell-centered temperature and pressure; first-order upwind
/// advection, second-order central diffusion, explicit Euler in time. Each
/// step advances T with the current solenoidal velocity, then the momentum
/// equations with the updated buoyancy, then projects: the pressure Poisson
/// problem is solved directly by a cosine-basis eigendecomposition of the
/// Neumann Laplacian, so the staggered divergence after correction is zero
/// to rounding.
///
/// Exported states are sampled at grid nodes (walls included) by averaging
/// the adjacent face/cell values; wall nodes carry the boundary conditions
/// exactly. The node-averaged field keeps the projection's divergence-free
/// property under the central-difference divergence as well.
class CavitySolver {
public:
    explicit CavitySolver(const SolverParams& params);
    CavitySolver(const SolverParams& params, const FlowState& state);

    /// One projection step. Throws StabilityError when the advective CFL
    /// bound is violated and SolverError when the projection misses its
    /// divergence tolerance.
    void step();

    /// Node-centered snapshot; p = p_ref + hydrostatic + rho * phi.
    FlowState state() const;

    /// Max staggered-cell |div u| after the last projection.
    double max_divergence() const { return last_div_; }
    /// max(|u|) * dt / min(hx, hy) of the current velocity field.
    double cfl() const;
    int steps_taken() const { return steps_; }
    const SolverParams& params() const { return params_; }

private:
    double& u(int i, int j) { return u_[static_cast<std::size_t>(i) * cy_ + j]; }
    double u(int i, int j) const { return u_[static_cast<std::size_t>(i) * cy_ + j]; }
    double& v(int i, int j) { return v_[static_cast<std::size_t>(i) * (cy_ + 1) + j]; }
    double v(int i, int j) const { return v_[static_cast<std::size_t>(i) * (cy_ + 1) + j]; }
    double& tc(int i, int j) { return T_[static_cast<std::size_t>(i) * cy_ + j]; }
    double tc(int i, int j) const { return T_[static_cast<std::size_t>(i) * cy_ + j]; }

    void import_state(const FlowState& state);
    void advance_temperature();
    void advance_momentum();
    void project();
    void check_finite() const;

    SolverParams params_;
    int cx_ = 0, cy_ = 0; // cell counts = nx-1, ny-1
    double hx_ = 0.0, hy_ = 0.0;
    std::vector<double> u_;   // (cx+1) x cy, x-faces
    std::vector<double> v_;   // cx x (cy+1), y-faces
    std::vector<double> T_;   // cx x cy, cell centers
    std::vector<double> phi_; // cx x cy, kinematic projection pressure
    std::vector<double> us_, vs_, tn_;
    std::vector<double> dct_fx_, dct_ix_, dct_fy_, dct_iy_; // cosine bases
    std::vector<double> lam_x_, lam_y_;                     // Laplacian eigenvalues
    double last_div_ = 0.0;
    int steps_ = 0;
};

/// Cavity at rest: interior temperature T_init, wall columns at their fixed
/// temperatures, zero velocity, hydrostatic pressure.
FlowState init_cavity(const SolverParams& params);

/// One-shot step: import a node-centered state, advance one dt, export.
FlowState step_flow(const FlowState& state, const SolverParams& params);

/// Run the solver for n_timesteps snapshots (record 0 is the initial state)
/// writing the NCFD dataset and its manifest sidecar. Per-variable ranges in
/// the manifest cover the first `train_count` records, matching the split
/// the normalizer will be fitted on. `seed` is recorded for provenance; the
/// solver itself is deterministic. The observer, when set, is invoked after
/// every solver step.
DatasetManifest generate_dataset(
    const SolverParams& params, int n_timesteps, int train_count, std::uint64_t seed,
    const std::string& data_path, const std::string& manifest_path,
    const std::function<void(int step, const CavitySolver&)>& observer = {});

} // namespace convbench
