#include "convbench/flow.hpp"

#include <cmath>
#include <string>

namespace convbench {

FlowState FlowState::zeros(int nx, int ny) {
    if (nx < 4 || ny < 4) {
        throw DimensionError("grid must be at least 4x4 nodes");
    }
    FlowState s;
    s.nx = nx;
    s.ny = ny;
    const std::size_t n = static_cast<std::size_t>(nx) * ny;
    s.u_x.assign(n, 0.0);
    s.u_y.assign(n, 0.0);
    s.T.assign(n, 0.0);
    s.p.assign(n, 0.0);
    return s;
}

void FlowState::require_finite() const {
    auto check = [](const std::vector<double>& f, const char* name) {
        for (double v : f) {
            if (!std::isfinite(v)) {
                throw NumericError(std::string("non-finite value in field ") + name);
            }
        }
    };
    check(u_x, "u_x");
    check(u_y, "u_y");
    check(T, "T");
    check(p, "p");
}

void SolverParams::validate() const {
    if (nx < 8 || ny < 8) {
        throw ConfigError("nx", "grid must be at least 8x8 nodes");
    }
    if (!(dt > 0.0)) {
        throw ConfigError("dt", "must be > 0");
    }
    if (!(length > 0.0)) {
        throw ConfigError("length", "must be > 0");
    }
    if (!(rho > 0.0)) {
        throw ConfigError("rho", "must be > 0");
    }
    if (!(nu > 0.0)) {
        throw ConfigError("nu", "must be > 0");
    }
    if (!(alpha > 0.0)) {
        throw ConfigError("alpha", "must be > 0");
    }
    if (!(beta > 0.0)) {
        throw ConfigError("beta", "must be > 0");
    }
    if (!(T_hot > T_cold)) {
        throw ConfigError("T_hot", "must exceed T_cold");
    }
    if (!(c_p > 0.0)) {
        throw ConfigError("c_p", "must be > 0");
    }
    if (!(cfl_limit > 0.0)) {
        throw ConfigError("cfl_limit", "must be > 0");
    }
    // explicit diffusion stability; advective CFL is checked per step
    const double h2 = std::min(hx(), hy());
    const double diff = 4.0 * std::max(nu, alpha) * dt / (h2 * h2);
    if (diff > 0.45) {
        throw ConfigError("dt", "explicit diffusion unstable: 4*max(nu,alpha)*dt/h^2 = " +
                                    std::to_string(diff) + " > 0.45");
    }
}

} // namespace convbench
