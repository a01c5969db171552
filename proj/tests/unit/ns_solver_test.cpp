#include <doctest.h>

#include "fixture.hpp"

#include <kickns/error.hpp>
#include <kickns/ns_solver.hpp>

#include <cmath>
#include <numbers>
#include <vector>

using namespace kickns;
using kickns::test::Flow;

namespace {

// Divergence-free field from psi = a sin^2(pi x) sin^2(pi y) sampled at the nodes.
VelocityField analytic_state(const DomainSpec& d, double a) {
    std::vector<double> psi;
    const double pi = std::numbers::pi;
    for (int i = 1; i < d.nx; ++i)
        for (int j = 1; j < d.ny; ++j) {
            const double x = i * d.hx(), y = j * d.hy();
            psi.push_back(a * std::pow(std::sin(pi * x) * std::sin(pi * y), 2) * (1.0 + 0.5 * std::sin(2 * pi * x)));
        }
    return curl_of_streamfunction(d, psi);
}

// Restriction of a field to the grid coarsened by two: vertical u faces at
// even indices averaged over the two fine cells they span, likewise for v.
VelocityField restrict_by_two(const VelocityField& f) {
    const DomainSpec& fd = f.domain();
    const DomainSpec cd = DomainSpec::make(fd.nx / 2, fd.ny / 2, fd.viscosity);
    VelocityField c(cd);
    for (int i = 0; i <= cd.nx; ++i)
        for (int j = 0; j < cd.ny; ++j) c.u(i, j) = 0.5 * (f.u(2 * i, 2 * j) + f.u(2 * i, 2 * j + 1));
    for (int i = 0; i < cd.nx; ++i)
        for (int j = 0; j <= cd.ny; ++j) c.v(i, j) = 0.5 * (f.v(2 * i, 2 * j) + f.v(2 * i + 1, 2 * j));
    return c;
}

VelocityField run_steps(const NavierStokesSolver& s, VelocityField u, int steps, double dt) {
    for (int k = 0; k < steps; ++k) u = s.step(u, nullptr, dt);
    return u;
}

}  // namespace

TEST_CASE("rest state and unforced decay") {
    const Flow& f = Flow::get();
    const VelocityField zero(f.domain);
    CHECK(f.solver.step(zero, nullptr, 1e-2).is_zero());
    CHECK(f.solver.solve_period(zero, KickRealization::zero(f.noise.modes())).is_zero());

    const VelocityField e1 = 1e-2 * f.basis->mode(0);
    const VelocityField next = f.solver.step(e1, nullptr, 1e-2);
    CHECK(l2_norm(next) < l2_norm(e1));

    VelocityField unit = f.smooth(1.0, 3);
    const VelocityField s = f.solver.solve_period(unit, KickRealization::zero(f.noise.modes()));
    CHECK(l2_norm(s) < 1.0);
    CHECK(relative_divergence(s) <= 1e-10);
}

TEST_CASE("steps per period and CFL enforcement") {
    const Flow& f = Flow::get();
    CHECK(f.solver.steps_per_period() == 100);
    VelocityField big = 50.0 * f.basis->mode(0);
    CHECK_THROWS_AS(f.solver.step(big, nullptr, 1e-2), CflViolation);
    // solve_period subdivides instead of failing.
    CHECK(f.solver.solve_period(big, KickRealization::zero(f.noise.modes())).is_finite());
    SolverConfig bad;
    bad.dt = 0.03;
    CHECK_THROWS_AS(NavierStokesSolver(f.domain, f.noise, bad), InputError);
}

TEST_CASE("time self-convergence is at least first order") {
    const DomainSpec d = DomainSpec::make(32, 32, 0.05);
    const NavierStokesSolver s(d, Flow::get().noise);
    const VelocityField u0 = analytic_state(d, 0.02);
    REQUIRE(u0.max_abs() > 0.05);
    const double dt = 1e-2;
    const VelocityField ref = run_steps(s, u0, 800, dt / 8);
    const VelocityField a = run_steps(s, u0, 100, dt);
    const VelocityField b = run_steps(s, u0, 200, dt / 2);
    const double ea = l2_distance(a, ref), eb = l2_distance(b, ref);
    MESSAGE("dt error " << ea << ", dt/2 error " << eb);
    CHECK(ea <= 1e-2 * l2_norm(ref));
    CHECK(std::log2(ea / eb) >= 1.0);
}

TEST_CASE("grid refinement of one kicked period") {
    const NoiseModel& noise = Flow::get().noise;
    Stream rng(21, 0);
    const KickRealization kick{sample_kick(noise, rng).xi * 4.0};
    std::vector<VelocityField> out;
    for (int n : {16, 32, 64}) {
        const DomainSpec d = DomainSpec::make(n, n, 0.05);
        const NavierStokesSolver s(d, noise);
        out.push_back(s.solve_period(analytic_state(d, 0.02), kick));
    }
    const double e_coarse = l2_distance(restrict_by_two(out[1]), out[0]);
    const double e_fine = l2_distance(restrict_by_two(out[2]), out[1]);
    MESSAGE("16/32 difference " << e_coarse << ", 32/64 difference " << e_fine);
    CHECK(e_fine < e_coarse);
    CHECK(e_fine <= 0.1 * l2_norm(out[1]));
}

TEST_CASE("controlled solutions") {
    const Flow& f = Flow::get();
    const VelocityField v = f.smooth(1e-3, 5);
    CHECK(f.solver.solve_controlled(v, {}) == v);
    Stream rng(22, 0);
    const KickRealization k = sample_kick(f.noise, rng);
    const std::vector<KickRealization> one{k};
    CHECK(f.solver.solve_controlled(v, one) == f.solver.solve_period(v, k));

    DissipationOptions opt;
    opt.samples = 120;
    const DissipationEstimate est = estimate_dissipation(f.solver, *f.basis, opt, 7);
    const std::vector<KickRealization> zeros(4, KickRealization::zero(f.noise.modes()));
    VelocityField iter = v;
    for (int l = 1; l <= 4; ++l) {
        iter = f.solver.solve_period(iter, zeros[0]);
        const VelocityField direct =
            f.solver.solve_controlled(v, std::span<const KickRealization>(zeros.data(), static_cast<std::size_t>(l)));
        CHECK(direct == iter);
        // kappa is a sampled maximum, so a state outside the sample may sit slightly above it.
        CHECK(l2_norm(direct) <= std::pow(est.kappa * 1.01, l) * l2_norm(v));
    }
}

TEST_CASE("dissipation fit") {
    const Flow& f = Flow::get();
    DissipationOptions opt;
    opt.samples = 150;
    const DissipationEstimate est = estimate_dissipation(f.solver, *f.basis, opt, 8);
    CHECK(est.kappa > 0.0);
    CHECK(est.kappa < 1.0);
    CHECK(est.c1 >= 0.0);
    CHECK(est.fraction >= 0.99);
    CHECK(est.r_min == doctest::Approx(est.c1 * est.kick_radius / (1.0 - est.kappa)));

    Stream rng(23, 0);
    for (int i = 0; i < 10; ++i) {
        const VelocityField u = f.smooth(0.01 * (i + 1), 100 + i);
        CHECK(l2_norm(f.solver.solve_period(u, KickRealization::zero(f.noise.modes()))) < l2_norm(u));
    }
    CHECK(validate_dissipation(f.solver, *f.basis, est, opt, 200, 9) >= 0.99);

    const DomainSpec thick = DomainSpec::make(32, 32, 0.1);
    const NavierStokesSolver s2(thick, f.noise);
    const StokesBasis b2 = stokes_basis(thick, 16);
    const DissipationEstimate est2 = estimate_dissipation(s2, b2, opt, 8);
    CHECK(est2.kappa < est.kappa);
}

TEST_CASE("solver output is deterministic") {
    const Flow& f = Flow::get();
    Stream r1(24, 0), r2(24, 0);
    const VelocityField u = f.smooth(2e-3, 6);
    CHECK(f.solver.solve_period(u, sample_kick(f.noise, r1)) == f.solver.solve_period(u, sample_kick(f.noise, r2)));
}
