#pragma once

#include <vector>

#include "convbench/errors.hpp"

namespace convbench {

/// One timestep of the cavity flow sampled at grid nodes, walls included:
/// node (ix, iy) sits at (ix*h, iy*h), ix in [0, nx), iy in [0, ny), with the
/// hot wall at ix = 0 and the cold wall at ix = nx-1. Fields are nx*ny
/// row-major over (ix, iy): f[ix*ny + iy].
///
/// Boundary nodes carry the boundary conditions exactly: u = 0 on all walls,
/// T fixed on the vertical columns, zero normal gradient on the horizontal
/// rows. Pressure is solver-internal (not exported to models or files).
struct FlowState {
    int nx = 0;
    int ny = 0;
    std::vector<double> u_x; // m/s
    std::vector<double> u_y; // m/s
    std::vector<double> T;   // K
    std::vector<double> p;   // Pa

    static FlowState zeros(int nx, int ny);

    double& ux(int ix, int iy) { return u_x[static_cast<std::size_t>(ix) * ny + iy]; }
    double ux(int ix, int iy) const { return u_x[static_cast<std::size_t>(ix) * ny + iy]; }
    double& uy(int ix, int iy) { return u_y[static_cast<std::size_t>(ix) * ny + iy]; }
    double uy(int ix, int iy) const { return u_y[static_cast<std::size_t>(ix) * ny + iy]; }
    double& temp(int ix, int iy) { return T[static_cast<std::size_t>(ix) * ny + iy]; }
    double temp(int ix, int iy) const { return T[static_cast<std::size_t>(ix) * ny + iy]; }
    double& pres(int ix, int iy) { return p[static_cast<std::size_t>(ix) * ny + iy]; }
    double pres(int ix, int iy) const { return p[static_cast<std::size_t>(ix) * ny + iy]; }

    bool same_grid(const FlowState& other) const { return nx == other.nx && ny == other.ny; }
    void require_finite() const;
};

/// Physical and numerical parameters of the natural-convection cavity.
/// Defaults describe air near 300 K in a 0.1 m square box on a 64x64 node
/// grid with dt = 0.01 s.
struct SolverParams {
    int nx = 64;
    int ny = 64;
    double dt = 0.01;      // s
    double length = 0.1;   // m, cavity side (square cells)
    double T_hot = 307.75; // K, left wall
    double T_cold = 288.15;
    double T_init = 293.0;
    double T_ref = 0.5 * (307.75 + 288.15); // Boussinesq reference
    double p_ref = 101325.0;                // Pa
    double rho = 1.2;                       // kg/m^3
    double nu = 1.5e-5;                     // m^2/s
    double alpha = 2.1e-5;                  // m^2/s
    double beta = 3.4e-3;                   // 1/K
    double g = 9.81;                        // m/s^2
    double c_p = 1005.0;                    // J/(kg K)
    double cfl_limit = 0.5;
    double div_tol = 1e-9; // post-projection divergence bound

    double hx() const { return length / (nx - 1); }
    double hy() const { return length / (ny - 1); }
    /// Effective viscosity used by the momentum residual.
    double mu_eff() const { return rho * nu; }
    /// Effective thermal conductivity used by the heat residual (applied to
    /// the temperature gradient).
    double alpha_eff() const { return rho * c_p * alpha; }

    /// Hydrostatic pressure at height y for the reference density.
    double hydrostatic_p(double y) const { return p_ref - rho * g * (y - 0.5 * length); }

    void validate() const;
};

} // namespace convbench
