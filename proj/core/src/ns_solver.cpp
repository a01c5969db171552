#include "kickns/ns_solver.hpp"

#include "kickns/error.hpp"
#include "kickns/fast_solvers.hpp"
#include "kickns/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace kickns {

namespace {

bool on_step_grid(double t, double dt) {
    const double k = t / dt;
    return std::abs(k - std::round(k)) < 1e-9;
}

// One-sided upwind derivative from the samples c = f(0), m1 = f(-1 h), m2 = f(-2 h)
// in the upwind direction; `second` selects the three-point stencil.
inline double upwind(double c, double m1, double m2, bool second, double inv_h) {
    return second ? (3.0 * c - 4.0 * m1 + m2) * 0.5 * inv_h : (c - m1) * inv_h;
}

}  // namespace

VelocityField advection_term(const VelocityField& f, int order) {
    const DomainSpec& d = f.domain();
    const int nx = d.nx, ny = d.ny;
    const double ihx = nx, ihy = ny;
    const bool high = order >= 2;
    VelocityField out(d);

    auto ue = [&](int i, int j) {
        if (j < 0) return -f.u(i, 0);
        if (j >= ny) return -f.u(i, ny - 1);
        return f.u(i, j);
    };
    auto ve = [&](int i, int j) {
        if (i < 0) return -f.v(0, j);
        if (i >= nx) return -f.v(nx - 1, j);
        return f.v(i, j);
    };

    for (int i = 1; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            const double uc = f.u(i, j);
            const double vc = 0.25 * (f.v(i - 1, j) + f.v(i, j) + f.v(i - 1, j + 1) + f.v(i, j + 1));
            double dudx, dudy;
            if (uc > 0.0)
                dudx = upwind(uc, f.u(i - 1, j), i >= 2 ? f.u(i - 2, j) : 0.0, high && i >= 2, ihx);
            else
                dudx = -upwind(uc, f.u(i + 1, j), i + 2 <= nx ? f.u(i + 2, j) : 0.0, high && i + 2 <= nx, ihx);
            if (vc > 0.0)
                dudy = upwind(uc, ue(i, j - 1), j >= 2 ? f.u(i, j - 2) : 0.0, high && j >= 2, ihy);
            else
                dudy = -upwind(uc, ue(i, j + 1), j + 2 < ny ? f.u(i, j + 2) : 0.0, high && j + 2 < ny, ihy);
            out.u(i, j) = uc * dudx + vc * dudy;
        }
    }
    for (int i = 0; i < nx; ++i) {
        for (int j = 1; j < ny; ++j) {
            const double vc = f.v(i, j);
            const double uc = 0.25 * (f.u(i, j - 1) + f.u(i + 1, j - 1) + f.u(i, j) + f.u(i + 1, j));
            double dvdx, dvdy;
            if (vc > 0.0)
                dvdy = upwind(vc, f.v(i, j - 1), j >= 2 ? f.v(i, j - 2) : 0.0, high && j >= 2, ihy);
            else
                dvdy = -upwind(vc, f.v(i, j + 1), j + 2 <= ny ? f.v(i, j + 2) : 0.0, high && j + 2 <= ny, ihy);
            if (uc > 0.0)
                dvdx = upwind(vc, ve(i - 1, j), i >= 2 ? f.v(i - 2, j) : 0.0, high && i >= 2, ihx);
            else
                dvdx = -upwind(vc, ve(i + 1, j), i + 2 < nx ? f.v(i + 2, j) : 0.0, high && i + 2 < nx, ihx);
            out.v(i, j) = uc * dvdx + vc * dvdy;
        }
    }
    return out;
}

NavierStokesSolver::NavierStokesSolver(const DomainSpec& domain, const NoiseModel& noise, const SolverConfig& config)
    : domain_(domain), config_(config), forcing_(noise, domain), steps_(0) {
    if (!(config.dt > 0.0) || !on_step_grid(1.0, config.dt))
        throw InputError("ns_solver", "time step must divide the unit period exactly");
    steps_ = static_cast<int>(std::lround(1.0 / config.dt));
    const Window& w = noise.window();
    if (!on_step_grid(w.t0, config.dt) || !on_step_grid(w.t1, config.dt))
        throw InputError("ns_solver", "kick window endpoints must fall on step boundaries");
    if (config.advection_order != 1 && config.advection_order != 2)
        throw InputError("ns_solver", "advection order must be 1 or 2");
    if (!(config.cfl_limit > 0.0)) throw InputError("ns_solver", "CFL limit must be positive");
    FastSolvers::get(domain.nx, domain.ny);
}

double NavierStokesSolver::cfl_number(const VelocityField& u, double dt) const {
    double mu = 0.0, mv = 0.0;
    for (double x : u.u_values()) mu = std::max(mu, std::abs(x));
    for (double x : u.v_values()) mv = std::max(mv, std::abs(x));
    return (mu * domain_.nx + mv * domain_.ny) * dt;
}

void NavierStokesSolver::advance(VelocityField& u, const VelocityField* forcing, double dt) const {
    const int nx = domain_.nx, ny = domain_.ny;
    const double nu = domain_.viscosity;
    const VelocityField adv = advection_term(u, config_.advection_order);
    const VelocityField lap = vector_laplacian(u);
    VelocityField rhs = u;
    rhs.axpy(-dt, adv);
    rhs.axpy(0.5 * nu * dt, lap);
    if (forcing) rhs.axpy(dt, *forcing);
    rhs.clear_wall_normals();

    const FastSolvers& fs = FastSolvers::get(nx, ny);
    const double alpha = 0.5 * nu * dt;
    fs.helmholtz_u(rhs.u_values().subspan(static_cast<std::size_t>(ny), static_cast<std::size_t>((nx - 1) * ny)), alpha);
    std::vector<double> interior_v(static_cast<std::size_t>(nx) * (ny - 1));
    for (int i = 0; i < nx; ++i)
        for (int j = 1; j < ny; ++j) interior_v[static_cast<std::size_t>(i) * (ny - 1) + (j - 1)] = rhs.v(i, j);
    fs.helmholtz_v(interior_v, alpha);
    for (int i = 0; i < nx; ++i)
        for (int j = 1; j < ny; ++j) rhs.v(i, j) = interior_v[static_cast<std::size_t>(i) * (ny - 1) + (j - 1)];
    u = leray_project(rhs);
    if (!u.is_finite()) throw SolverError("non-finite velocity after a time step");
}

VelocityField NavierStokesSolver::step(const VelocityField& u, const VelocityField* forcing, double dt) const {
    if (!(u.domain() == domain_)) throw InvalidFieldError("field does not live on the solver grid");
    const double c = cfl_number(u, dt);
    if (c > config_.cfl_limit) throw CflViolation(c, config_.cfl_limit);
    VelocityField out = u;
    advance(out, forcing, dt);
    return out;
}

VelocityField NavierStokesSolver::solve_period(const VelocityField& u0, const KickRealization& kick) const {
    if (!(u0.domain() == domain_)) throw InvalidFieldError("field does not live on the solver grid");
    if (kick.xi.size() != noise().modes()) throw InputError("ns_solver", "kick has the wrong number of modes");
    const bool forced = !kick.xi.isZero(0.0);
    VelocityField u = u0;
    VelocityField force(domain_);
    const double dt = config_.dt;
    for (int k = 0; k < steps_; ++k) {
        // Split the base step until the CFL condition holds on the current state.
        int pieces = 1;
        int halvings = 0;
        while (cfl_number(u, dt / pieces) > config_.cfl_limit) {
            if (++halvings > config_.max_halvings) throw CflViolation(cfl_number(u, dt / pieces), config_.cfl_limit);
            pieces *= 2;
        }
        const double h = dt / pieces;
        for (int p = 0; p < pieces; ++p) {
            const double c = cfl_number(u, h);
            if (c > config_.cfl_limit) throw CflViolation(c, config_.cfl_limit);
            const double t_mid = k * dt + (p + 0.5) * h;
            const bool active = forced && forcing_.evaluate(kick, t_mid, force);
            advance(u, active ? &force : nullptr, h);
        }
    }
    return u;
}

VelocityField NavierStokesSolver::solve_controlled(const VelocityField& v, std::span<const KickRealization> kicks) const {
    VelocityField u = v;
    for (const auto& k : kicks) u = solve_period(u, k);
    return u;
}

// ---------------------------------------------------------------------------
// Dissipation constants

VelocityField random_smooth_state(const StokesBasis& basis, int modes, double radius, Stream& rng) {
    modes = std::min(modes, basis.size());
    Eigen::VectorXd c(modes);
    for (int j = 0; j < modes; ++j) c[j] = 2.0 * rng.uniform() - 1.0;
    const double n = c.norm();
    if (n == 0.0) c[0] = 1.0;
    return basis.synthesize(c * (radius / c.norm()));
}

namespace {

struct DissipationSample {
    double u_norm = 0.0;
    double out_norm = 0.0;
    double eta_norm = 0.0;
};

// Fitting sample i is unforced for even i and forced for odd i; both halves
// cycle through the radius list. One in four unforced rounds uses the slowest
// Stokes mode, the direction of weakest linear decay.
DissipationSample dissipation_sample(const NavierStokesSolver& solver, const StokesBasis& basis,
                                     const DissipationOptions& opt, std::uint64_t seed, std::uint64_t tag,
                                     std::size_t i, bool forced_only) {
    Stream rng = Stream::derive(seed, {stream_tag::dissipation, tag, i});
    const bool forced = forced_only || i % 2 == 1;
    const std::size_t slot = forced_only ? i : i / 2;
    const double radius = opt.radii[slot % opt.radii.size()];
    VelocityField u0(solver.domain());
    if (!forced && (slot / opt.radii.size()) % 4 == 0) {
        u0 = basis.mode(0);
        u0 *= (rng.uniform() < 0.5 ? -radius : radius);
    } else {
        u0 = random_smooth_state(basis, opt.smooth_modes, radius, rng);
    }
    const NoiseModel& noise = solver.noise();
    const KickRealization kick = forced ? sample_kick(noise, rng) : KickRealization::zero(noise.modes());
    DissipationSample s;
    s.u_norm = l2_norm(u0);
    s.out_norm = l2_norm(solver.solve_period(u0, kick));
    s.eta_norm = kick_l2_norm(noise, kick);
    return s;
}

}  // namespace

DissipationEstimate estimate_dissipation(const NavierStokesSolver& solver, const StokesBasis& basis,
                                         const DissipationOptions& opt, std::uint64_t seed) {
    if (opt.samples < 100) throw InputError("ns_solver", "dissipation fit needs at least 100 samples");
    if (opt.radii.empty()) throw InputError("ns_solver", "dissipation fit needs at least one radius");
    std::vector<DissipationSample> samples(opt.samples);
    parallel_for(opt.samples, [&](std::size_t i) { samples[i] = dissipation_sample(solver, basis, opt, seed, 0, i, false); });

    DissipationEstimate est;
    est.samples = opt.samples;
    est.kick_radius = solver.noise().kick_radius();
    for (const auto& s : samples)
        if (s.eta_norm == 0.0 && s.u_norm > 0.0) est.kappa = std::max(est.kappa, s.out_norm / s.u_norm);
    if (!(est.kappa < 1.0))
        throw DissipationFailure("fitted contraction factor " + std::to_string(est.kappa) + " is not below 1");
    for (const auto& s : samples)
        if (s.eta_norm > 0.0) est.c1 = std::max(est.c1, std::max(0.0, s.out_norm - est.kappa * s.u_norm) / s.eta_norm);
    std::size_t ok = 0;
    for (const auto& s : samples)
        if (s.out_norm <= est.kappa * s.u_norm + est.c1 * s.eta_norm) ++ok;
    est.fraction = static_cast<double>(ok) / static_cast<double>(samples.size());
    est.r_min = est.c1 * est.kick_radius / (1.0 - est.kappa);
    return est;
}

double validate_dissipation(const NavierStokesSolver& solver, const StokesBasis& basis, const DissipationEstimate& est,
                            const DissipationOptions& opt, std::size_t samples, std::uint64_t seed) {
    if (samples == 0) return 1.0;
    std::vector<char> ok(samples, 0);
    parallel_for(samples, [&](std::size_t i) {
        const DissipationSample s = dissipation_sample(solver, basis, opt, seed, 1, i, true);
        ok[i] = s.out_norm <= est.kappa * s.u_norm + est.c1 * s.eta_norm;
    });
    return static_cast<double>(std::count(ok.begin(), ok.end(), 1)) / static_cast<double>(samples);
}

}  // namespace kickns
