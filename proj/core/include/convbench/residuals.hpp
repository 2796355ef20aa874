#pragma once

#include <vector>

#include "convbench/flow.hpp"

namespace convbench {

/// Per-node imbalance of one governing equation plus its max-norm over the
/// evaluated region. Entries outside the stencil-supported interior are
/// zero; `margin` records how many boundary layers were excluded.
struct ResidualResult {
    int nx = 0;
    int ny = 0;
    int margin = 1;
    std::vector<double> field; // nx*ny row-major, max over components
    double max_norm = 0.0;

    double at(int ix, int iy) const { return field[static_cast<std::size_t>(ix) * ny + iy]; }
};

// Governing-equation residuals on a pair of consecutive node-centered
// states: central differences in space (on `next`), forward difference in
// time. Conventions, fixed here and used consistently:
//   gravity acts in -y; the gravity term carries the Boussinesq density
//   rho*(1 - beta*(T - T_ref)); the heat equation's diffusive term applies
//   the effective conductivity alpha_eff = rho*c_p*alpha to grad T.
// Residuals of the continuum solution vanish under these conventions; what
// remains on solver pairs is discretization mismatch, which the harness
// freezes as its baseline.

/// rho * div(u); no time term since the Boussinesq density is constant.
ResidualResult residual_mass(const FlowState& prev, const FlowState& next,
                             const SolverParams& params);

/// d(rho u)/dt + div(rho u u) + grad p - rho(T) g
///   - mu_eff*(lap u + grad(div u)) + (2/3) mu_eff * grad(div u),
/// reduced over the two components by max-norm. Margin 2 (the div-gradient
/// needs nested central stencils).
ResidualResult residual_momentum(const FlowState& prev, const FlowState& next,
                                 const SolverParams& params);

/// d(rho E)/dt + div(rho u E) - dp/dt - div(alpha_eff grad T) - rho u . g
/// with E = h + K, h = c_p T, K = |u|^2 / 2.
ResidualResult residual_heat(const FlowState& prev, const FlowState& next,
                             const SolverParams& params);

struct ResidualNorms {
    double mass = 0.0;
    double momentum = 0.0;
    double heat = 0.0;
};

ResidualNorms residual_norms(const FlowState& prev, const FlowState& next,
                             const SolverParams& params);

} // namespace convbench
