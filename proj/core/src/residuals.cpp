#include "convbench/residuals.hpp"

#include <cmath>

namespace convbench {
namespace {

void check_pair(const FlowState& prev, const FlowState& next, const SolverParams& params) {
    if (!prev.same_grid(next)) {
        throw DimensionError("residual states have different grids");
    }
    if (prev.nx != params.nx || prev.ny != params.ny) {
        throw DimensionError("residual states do not match params grid");
    }
    prev.require_finite();
    next.require_finite();
}

struct Stencils {
    const FlowState& s;
    double hx, hy;

    double ddx(const std::vector<double>& f, int i, int j) const {
        return (f[static_cast<std::size_t>(i + 1) * s.ny + j] -
                f[static_cast<std::size_t>(i - 1) * s.ny + j]) /
               (2.0 * hx);
    }
    double ddy(const std::vector<double>& f, int i, int j) const {
        return (f[static_cast<std::size_t>(i) * s.ny + j + 1] -
                f[static_cast<std::size_t>(i) * s.ny + j - 1]) /
               (2.0 * hy);
    }
    double lap(const std::vector<double>& f, int i, int j) const {
        const auto at = [&](int a, int b) {
            return f[static_cast<std::size_t>(a) * s.ny + b];
        };
        return (at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j)) / (hx * hx) +
               (at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1)) / (hy * hy);
    }
};

} // namespace

ResidualResult residual_mass(const FlowState& prev, const FlowState& next,
                             const SolverParams& params) {
    check_pair(prev, next, params);
    ResidualResult r;
    r.nx = next.nx;
    r.ny = next.ny;
    r.margin = 1;
    r.field.assign(static_cast<std::size_t>(r.nx) * r.ny, 0.0);
    Stencils st{next, params.hx(), params.hy()};
    for (int i = 1; i < r.nx - 1; ++i) {
        for (int j = 1; j < r.ny - 1; ++j) {
            const double div = st.ddx(next.u_x, i, j) + st.ddy(next.u_y, i, j);
            const double val = params.rho * std::abs(div);
            r.field[static_cast<std::size_t>(i) * r.ny + j] = val;
            r.max_norm = std::max(r.max_norm, val);
        }
    }
    return r;
}

ResidualResult residual_momentum(const FlowState& prev, const FlowState& next,
                                 const SolverParams& params) {
    check_pair(prev, next, params);
    ResidualResult r;
    r.nx = next.nx;
    r.ny = next.ny;
    r.margin = 2;
    r.field.assign(static_cast<std::size_t>(r.nx) * r.ny, 0.0);
    Stencils st{next, params.hx(), params.hy()};
    const double rho = params.rho;
    const double mu = params.mu_eff();
    const double dt = params.dt;

    // products and the divergence field, for nested central differences
    const std::size_t n = next.u_x.size();
    std::vector<double> uu(n), uv(n), vv(n), divu(n, 0.0);
    for (std::size_t q = 0; q < n; ++q) {
        uu[q] = next.u_x[q] * next.u_x[q];
        uv[q] = next.u_x[q] * next.u_y[q];
        vv[q] = next.u_y[q] * next.u_y[q];
    }
    for (int i = 1; i < r.nx - 1; ++i) {
        for (int j = 1; j < r.ny - 1; ++j) {
            divu[static_cast<std::size_t>(i) * r.ny + j] =
                st.ddx(next.u_x, i, j) + st.ddy(next.u_y, i, j);
        }
    }
    for (int i = 2; i < r.nx - 2; ++i) {
        for (int j = 2; j < r.ny - 2; ++j) {
            const std::size_t q = static_cast<std::size_t>(i) * r.ny + j;
            const double rho_t = rho * (1.0 - params.beta * (next.T[q] - params.T_ref));
            const double ddiv_dx = st.ddx(divu, i, j);
            const double ddiv_dy = st.ddy(divu, i, j);
            const double rx = rho * (next.u_x[q] - prev.u_x[q]) / dt +
                              rho * (st.ddx(uu, i, j) + st.ddy(uv, i, j)) +
                              st.ddx(next.p, i, j) -
                              mu * (st.lap(next.u_x, i, j) + ddiv_dx) +
                              (2.0 / 3.0) * mu * ddiv_dx;
            const double ry = rho * (next.u_y[q] - prev.u_y[q]) / dt +
                              rho * (st.ddx(uv, i, j) + st.ddy(vv, i, j)) +
                              st.ddy(next.p, i, j) + rho_t * params.g -
                              mu * (st.lap(next.u_y, i, j) + ddiv_dy) +
                              (2.0 / 3.0) * mu * ddiv_dy;
            const double val = std::max(std::abs(rx), std::abs(ry));
            r.field[q] = val;
            r.max_norm = std::max(r.max_norm, val);
        }
    }
    return r;
}

ResidualResult residual_heat(const FlowState& prev, const FlowState& next,
                             const SolverParams& params) {
    check_pair(prev, next, params);
    ResidualResult r;
    r.nx = next.nx;
    r.ny = next.ny;
    r.margin = 1;
    r.field.assign(static_cast<std::size_t>(r.nx) * r.ny, 0.0);
    Stencils st{next, params.hx(), params.hy()};
    const double rho = params.rho;
    const double dt = params.dt;
    const double k_eff = params.alpha_eff();

    const std::size_t n = next.u_x.size();
    auto energy = [&](const FlowState& s, std::size_t q) {
        return params.c_p * s.T[q] + 0.5 * (s.u_x[q] * s.u_x[q] + s.u_y[q] * s.u_y[q]);
    };
    std::vector<double> e_next(n), flux_x(n), flux_y(n);
    for (std::size_t q = 0; q < n; ++q) {
        e_next[q] = energy(next, q);
        flux_x[q] = next.u_x[q] * e_next[q];
        flux_y[q] = next.u_y[q] * e_next[q];
    }
    for (int i = 1; i < r.nx - 1; ++i) {
        for (int j = 1; j < r.ny - 1; ++j) {
            const std::size_t q = static_cast<std::size_t>(i) * r.ny + j;
            const double val = std::abs(
                rho * (e_next[q] - energy(prev, q)) / dt +
                rho * (st.ddx(flux_x, i, j) + st.ddy(flux_y, i, j)) -
                (next.p[q] - prev.p[q]) / dt - k_eff * st.lap(next.T, i, j) +
                rho * params.g * next.u_y[q]);
            r.field[q] = val;
            r.max_norm = std::max(r.max_norm, val);
        }
    }
    return r;
}

ResidualNorms residual_norms(const FlowState& prev, const FlowState& next,
                             const SolverParams& params) {
    return {residual_mass(prev, next, params).max_norm,
            residual_momentum(prev, next, params).max_norm,
            residual_heat(prev, next, params).max_norm};
}

} // namespace convbench
