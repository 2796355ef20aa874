#include "convbench/solver.hpp"

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "convbench/dataset_io.hpp"

namespace convbench {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

constexpr double kPi = 3.14159265358979323846;

// Cosine eigenbasis of the 1D cell-centered Neumann Laplacian:
// basis[k][i] = cos(pi*k*(i+1/2)/n), eigenvalue (2cos(pi*k/n) - 2)/h^2.
void build_dct(int n, double h, std::vector<double>& fwd, std::vector<double>& inv,
               std::vector<double>& lam) {
    fwd.assign(static_cast<std::size_t>(n) * n, 0.0);
    inv.assign(static_cast<std::size_t>(n) * n, 0.0);
    lam.assign(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
        lam[static_cast<std::size_t>(k)] = (2.0 * std::cos(kPi * k / n) - 2.0) / (h * h);
        const double norm = (k == 0 ? 1.0 : 2.0) / n;
        for (int i = 0; i < n; ++i) {
            const double b = std::cos(kPi * k * (i + 0.5) / n);
            fwd[static_cast<std::size_t>(k) * n + i] = b;
            inv[static_cast<std::size_t>(i) * n + k] = b * norm;
        }
    }
}

} // namespace

CavitySolver::CavitySolver(const SolverParams& params) : params_(params) {
    params_.validate();
    cx_ = params_.nx - 1;
    cy_ = params_.ny - 1;
    hx_ = params_.hx();
    hy_ = params_.hy();
    u_.assign(static_cast<std::size_t>(cx_ + 1) * cy_, 0.0);
    v_.assign(static_cast<std::size_t>(cx_) * (cy_ + 1), 0.0);
    T_.assign(static_cast<std::size_t>(cx_) * cy_, params_.T_init);
    phi_.assign(static_cast<std::size_t>(cx_) * cy_, 0.0);
    us_ = u_;
    vs_ = v_;
    tn_ = T_;
    build_dct(cx_, hx_, dct_fx_, dct_ix_, lam_x_);
    build_dct(cy_, hy_, dct_fy_, dct_iy_, lam_y_);
}

CavitySolver::CavitySolver(const SolverParams& params, const FlowState& state)
    : CavitySolver(params) {
    import_state(state);
}

void CavitySolver::import_state(const FlowState& state) {
    if (state.nx != params_.nx || state.ny != params_.ny) {
        throw DimensionError("state grid does not match solver params");
    }
    state.require_finite();
    // node -> face averages; wall faces pinned to the no-slip condition
    for (int i = 0; i <= cx_; ++i) {
        for (int j = 0; j < cy_; ++j) {
            u(i, j) = (i == 0 || i == cx_)
                          ? 0.0
                          : 0.5 * (state.ux(i, j) + state.ux(i, j + 1));
        }
    }
    for (int i = 0; i < cx_; ++i) {
        for (int j = 0; j <= cy_; ++j) {
            v(i, j) = (j == 0 || j == cy_)
                          ? 0.0
                          : 0.5 * (state.uy(i, j) + state.uy(i + 1, j));
        }
    }
    for (int i = 0; i < cx_; ++i) {
        for (int j = 0; j < cy_; ++j) {
            tc(i, j) = 0.25 * (state.temp(i, j) + state.temp(i + 1, j) +
                               state.temp(i, j + 1) + state.temp(i + 1, j + 1));
        }
    }
    std::fill(phi_.begin(), phi_.end(), 0.0);
}

double CavitySolver::cfl() const {
    double vmax = 0.0;
    for (double x : u_) {
        vmax = std::max(vmax, std::abs(x));
    }
    for (double x : v_) {
        vmax = std::max(vmax, std::abs(x));
    }
    return vmax * params_.dt / std::min(hx_, hy_);
}

void CavitySolver::advance_temperature() {
    const double dt = params_.dt;
    const double a = params_.alpha;
    for (int i = 0; i < cx_; ++i) {
        for (int j = 0; j < cy_; ++j) {
            const double t0 = tc(i, j);
            // donor-cell fluxes; wall faces carry zero velocity
            const double ue = u(i + 1, j), uw = u(i, j);
            const double vn = v(i, j + 1), vs = v(i, j);
            const double fe = ue * (ue >= 0.0 ? t0 : tc(i + 1, j));
            const double fw = uw * (uw >= 0.0 ? (i > 0 ? tc(i - 1, j) : t0) : t0);
            const double fn = vn * (vn >= 0.0 ? t0 : tc(i, j + 1));
            const double fs = vs * (vs >= 0.0 ? (j > 0 ? tc(i, j - 1) : t0) : t0);
            const double adv = (fe - fw) / hx_ + (fn - fs) / hy_;
            // Dirichlet ghosts on the heated columns, adiabatic rows
            const double tw = i > 0 ? tc(i - 1, j) : 2.0 * params_.T_hot - t0;
            const double te = i < cx_ - 1 ? tc(i + 1, j) : 2.0 * params_.T_cold - t0;
            const double ts = j > 0 ? tc(i, j - 1) : t0;
            const double tn = j < cy_ - 1 ? tc(i, j + 1) : t0;
            const double lap = (te - 2.0 * t0 + tw) / (hx_ * hx_) +
                               (tn - 2.0 * t0 + ts) / (hy_ * hy_);
            tn_[static_cast<std::size_t>(i) * cy_ + j] = t0 + dt * (a * lap - adv);
        }
    }
    T_.swap(tn_);
}

void CavitySolver::advance_momentum() {
    const double dt = params_.dt;
    const double nu = params_.nu;
    us_ = u_;
    vs_ = v_;
    // x-momentum on interior x-faces
    for (int i = 1; i < cx_; ++i) {
        for (int j = 0; j < cy_; ++j) {
            const double uc = u(i, j);
            const double vbar = 0.25 * (v(i - 1, j) + v(i, j) + v(i - 1, j + 1) + v(i, j + 1));
            const double u_s = j > 0 ? u(i, j - 1) : -uc; // no-slip mirror
            const double u_n = j < cy_ - 1 ? u(i, j + 1) : -uc;
            const double dudx = uc >= 0.0 ? (uc - u(i - 1, j)) / hx_ : (u(i + 1, j) - uc) / hx_;
            const double dudy = vbar >= 0.0 ? (uc - u_s) / hy_ : (u_n - uc) / hy_;
            const double lap = (u(i + 1, j) - 2.0 * uc + u(i - 1, j)) / (hx_ * hx_) +
                               (u_n - 2.0 * uc + u_s) / (hy_ * hy_);
            us_[static_cast<std::size_t>(i) * cy_ + j] =
                uc + dt * (nu * lap - uc * dudx - vbar * dudy);
        }
    }
    // y-momentum on interior y-faces, with the buoyancy source
    for (int i = 0; i < cx_; ++i) {
        for (int j = 1; j < cy_; ++j) {
            const double vc = v(i, j);
            const double ubar = 0.25 * (u(i, j - 1) + u(i + 1, j - 1) + u(i, j) + u(i + 1, j));
            const double v_w = i > 0 ? v(i - 1, j) : -vc;
            const double v_e = i < cx_ - 1 ? v(i + 1, j) : -vc;
            const double dvdx = ubar >= 0.0 ? (vc - v_w) / hx_ : (v_e - vc) / hx_;
            const double dvdy = vc >= 0.0 ? (vc - v(i, j - 1)) / hy_ : (v(i, j + 1) - vc) / hy_;
            const double lap = (v_e - 2.0 * vc + v_w) / (hx_ * hx_) +
                               (v(i, j + 1) - 2.0 * vc + v(i, j - 1)) / (hy_ * hy_);
            const double t_face = 0.5 * (tc(i, j - 1) + tc(i, j));
            const double buoy = params_.g * params_.beta * (t_face - params_.T_ref);
            vs_[static_cast<std::size_t>(i) * (cy_ + 1) + j] =
                vc + dt * (nu * lap - ubar * dvdx - vc * dvdy + buoy);
        }
    }
    u_.swap(us_);
    v_.swap(vs_);
}

void CavitySolver::project() {
    const double dt = params_.dt;
    RowMat rhs(cx_, cy_);
    double mean = 0.0;
    for (int i = 0; i < cx_; ++i) {
        for (int j = 0; j < cy_; ++j) {
            const double div =
                (u(i + 1, j) - u(i, j)) / hx_ + (v(i, j + 1) - v(i, j)) / hy_;
            rhs(i, j) = div / dt;
            mean += rhs(i, j);
        }
    }
    // closed walls make the rhs compatible up to rounding; remove the rest
    mean /= static_cast<double>(cx_) * cy_;
    rhs.array() -= mean;

    CMapRM fx(dct_fx_.data(), cx_, cx_), ix(dct_ix_.data(), cx_, cx_);
    CMapRM fy(dct_fy_.data(), cy_, cy_), iy(dct_iy_.data(), cy_, cy_);
    RowMat rhat = fx * rhs * fy.transpose();
    for (int k = 0; k < cx_; ++k) {
        for (int l = 0; l < cy_; ++l) {
            const double lam = lam_x_[static_cast<std::size_t>(k)] +
                               lam_y_[static_cast<std::size_t>(l)];
            rhat(k, l) = (k == 0 && l == 0) ? 0.0 : rhat(k, l) / lam;
        }
    }
    RowMat phi = ix * rhat * iy.transpose();
    for (int i = 0; i < cx_; ++i) {
        for (int j = 0; j < cy_; ++j) {
            phi_[static_cast<std::size_t>(i) * cy_ + j] = phi(i, j);
        }
    }
    for (int i = 1; i < cx_; ++i) {
        for (int j = 0; j < cy_; ++j) {
            u(i, j) -= dt * (phi(i, j) - phi(i - 1, j)) / hx_;
        }
    }
    for (int i = 0; i < cx_; ++i) {
        for (int j = 1; j < cy_; ++j) {
            v(i, j) -= dt * (phi(i, j) - phi(i, j - 1)) / hy_;
        }
    }
    last_div_ = 0.0;
    for (int i = 0; i < cx_; ++i) {
        for (int j = 0; j < cy_; ++j) {
            const double div =
                (u(i + 1, j) - u(i, j)) / hx_ + (v(i, j + 1) - v(i, j)) / hy_;
            last_div_ = std::max(last_div_, std::abs(div));
        }
    }
    if (last_div_ > params_.div_tol) {
        throw SolverError("projection did not converge: max divergence " +
                          std::to_string(last_div_) + " > " + std::to_string(params_.div_tol));
    }
}

void CavitySolver::check_finite() const {
    for (const auto* f : {&u_, &v_, &T_}) {
        for (double x : *f) {
            if (!std::isfinite(x)) {
                throw NumericError("solver state became non-finite at step " +
                                   std::to_string(steps_));
            }
        }
    }
}

void CavitySolver::step() {
    const double c = cfl();
    if (c > params_.cfl_limit * (1.0 + 1e-12)) {
        throw StabilityError("CFL " + std::to_string(c) + " exceeds limit " +
                             std::to_string(params_.cfl_limit));
    }
    advance_temperature();
    advance_momentum();
    project();
    check_finite();
    ++steps_;
}

FlowState CavitySolver::state() const {
    FlowState s = FlowState::zeros(params_.nx, params_.ny);
    const int nx = params_.nx, ny = params_.ny;
    for (int ix = 0; ix < nx; ++ix) {
        for (int iy = 0; iy < ny; ++iy) {
            s.ux(ix, iy) =
                (iy == 0 || iy == cy_) ? 0.0 : 0.5 * (u(ix, iy - 1) + u(ix, iy));
            s.uy(ix, iy) =
                (ix == 0 || ix == cx_) ? 0.0 : 0.5 * (v(ix - 1, iy) + v(ix, iy));
        }
    }
    for (int ix = 0; ix < nx; ++ix) {
        for (int iy = 0; iy < ny; ++iy) {
            if (ix == 0) {
                s.temp(ix, iy) = params_.T_hot;
            } else if (ix == cx_) {
                s.temp(ix, iy) = params_.T_cold;
            } else if (iy == 0) {
                s.temp(ix, iy) = 0.5 * (tc(ix - 1, 0) + tc(ix, 0));
            } else if (iy == cy_) {
                s.temp(ix, iy) = 0.5 * (tc(ix - 1, cy_ - 1) + tc(ix, cy_ - 1));
            } else {
                s.temp(ix, iy) = 0.25 * (tc(ix - 1, iy - 1) + tc(ix, iy - 1) +
                                         tc(ix - 1, iy) + tc(ix, iy));
            }
        }
    }
    auto p_cell = [&](int i, int j) {
        const double yc = (j + 0.5) * hy_;
        return params_.hydrostatic_p(yc) +
               params_.rho * phi_[static_cast<std::size_t>(i) * cy_ + j];
    };
    for (int ix = 0; ix < nx; ++ix) {
        for (int iy = 0; iy < ny; ++iy) {
            const int i0 = std::max(ix - 1, 0), i1 = std::min(ix, cx_ - 1);
            const int j0 = std::max(iy - 1, 0), j1 = std::min(iy, cy_ - 1);
            s.pres(ix, iy) =
                0.25 * (p_cell(i0, j0) + p_cell(i1, j0) + p_cell(i0, j1) + p_cell(i1, j1));
        }
    }
    return s;
}

FlowState init_cavity(const SolverParams& params) {
    return CavitySolver(params).state();
}

FlowState step_flow(const FlowState& state, const SolverParams& params) {
    CavitySolver solver(params, state);
    solver.step();
    return solver.state();
}

DatasetManifest generate_dataset(
    const SolverParams& params, int n_timesteps, int train_count, std::uint64_t seed,
    const std::string& data_path, const std::string& manifest_path,
    const std::function<void(int step, const CavitySolver&)>& observer) {
    if (n_timesteps < 1) {
        throw ConfigError("steps", "must be >= 1, got " + std::to_string(n_timesteps));
    }
    if (train_count < 2 || train_count > n_timesteps) {
        throw ConfigError("train_count", "must be in [2, steps]");
    }
    params.validate();

    CavitySolver solver(params);
    NcfdWriter writer(data_path, params.nx, params.ny, params.dt, n_timesteps);

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

    FlowState prev = solver.state(); // record 0 = initial state
    writer.write(prev);
    absorb(rux, prev.u_x);
    absorb(ruy, prev.u_y);
    absorb(rT, prev.T);
    for (int rec = 1; rec < n_timesteps; ++rec) {
        solver.step();
        if (observer) {
            observer(rec, solver);
        }
        FlowState cur = solver.state();
        writer.write(cur);
        if (rec < train_count) {
            absorb(rux, cur.u_x);
            absorb(ruy, cur.u_y);
            absorb(rT, cur.T);
            absorb_diff(rdux, prev.u_x, cur.u_x);
            absorb_diff(rduy, prev.u_y, cur.u_y);
            absorb_diff(rdT, prev.T, cur.T);
        }
        prev = std::move(cur);
    }
    writer.finish();

    DatasetManifest m;
    m.nx = params.nx;
    m.ny = params.ny;
    m.dt = params.dt;
    m.count = n_timesteps;
    m.train_count = train_count;
    m.seed = seed;
    m.length = params.length;
    const auto slash = data_path.find_last_of('/');
    m.data_file = slash == std::string::npos ? data_path : data_path.substr(slash + 1);
    m.header_bytes = kNcfdHeaderBytes;
    m.record_bytes = ncfd_record_bytes(params.nx, params.ny);
    m.ux = rux;
    m.uy = ruy;
    m.T = rT;
    m.dux = rdux;
    m.duy = rduy;
    m.dT = rdT;
    m.save(manifest_path);
    return m;
}

} // namespace convbench
