#pragma once

#include "kickns/grid_field.hpp"
#include "kickns/noise.hpp"

#include <span>
#include <vector>

namespace kickns {

struct SolverConfig {
    /// Base time step; 1/dt must be an integer and the kick window endpoints
    /// must fall on step boundaries.
    double dt = 1e-2;
    /// 1 or 2: order of the upwind advection stencil away from the walls.
    int advection_order = 2;
    /// Largest admissible (|u|max/hx + |v|max/hy) * dt.
    double cfl_limit = 0.5;
    /// solve_period halves a base step at most this many times to restore CFL.
    int max_halvings = 8;
};

/// Time integrator for the kicked Navier-Stokes system on one grid:
/// explicit upwind advection, Crank-Nicolson diffusion, forcing at the step
/// midpoint, and a Leray projection at the end of every step.
class NavierStokesSolver {
public:
    NavierStokesSolver(const DomainSpec& domain, const NoiseModel& noise, const SolverConfig& config = {});

    const DomainSpec& domain() const noexcept { return domain_; }
    const NoiseModel& noise() const noexcept { return forcing_.model(); }
    const SolverConfig& config() const noexcept { return config_; }
    int steps_per_period() const noexcept { return steps_; }

    double cfl_number(const VelocityField& u, double dt) const;

    /// One step of length dt with the given body force (nullptr for none).
    /// Throws CflViolation if the CFL number exceeds the configured limit.
    VelocityField step(const VelocityField& u, const VelocityField* forcing, double dt) const;

    /// S(u0, eta): one unit period driven by the kick. Base steps that would
    /// violate CFL are split into 2, 4, ... substeps.
    VelocityField solve_period(const VelocityField& u0, const KickRealization& kick) const;

    /// S_l(v, theta_1..theta_l) by iterating solve_period.
    VelocityField solve_controlled(const VelocityField& v, std::span<const KickRealization> kicks) const;

private:
    void advance(VelocityField& u, const VelocityField* forcing, double dt) const;

    DomainSpec domain_;
    SolverConfig config_;
    KickForcing forcing_;
    int steps_;
};

/// Per-cell advection term (u . grad) u on the interior faces.
VelocityField advection_term(const VelocityField& u, int order);

struct DissipationOptions {
    std::size_t samples = 1200;
    /// Radii of the sampled initial states.
    std::vector<double> radii = {0.0, 0.001, 0.003, 0.01, 0.03, 0.1};
    /// Stokes modes used to build smooth random initial states.
    int smooth_modes = 16;
};

struct DissipationEstimate {
    double kappa = 0.0;
    double c1 = 0.0;
    std::size_t samples = 0;
    /// Fraction of the fitting samples satisfying the affine bound.
    double fraction = 0.0;
    double kick_radius = 0.0;
    /// C1 r / (1 - kappa).
    double r_min = 0.0;
};

/// Smooth random state of L2 norm `radius` in the span of the first modes.
VelocityField random_smooth_state(const StokesBasis& basis, int modes, double radius, Stream& rng);

/// Fits kappa = max ||S(u,0)||/||u|| over unforced samples and then
/// C1 = max (||S(u,eta)|| - kappa ||u||)_+ / ||eta||_{L2(Q)} over forced ones.
/// Throws DissipationFailure when kappa >= 1.
DissipationEstimate estimate_dissipation(const NavierStokesSolver& solver, const StokesBasis& basis,
                                         const DissipationOptions& options, std::uint64_t seed);

/// Fraction of fresh forced samples satisfying ||S(u,eta)|| <= kappa ||u|| + C1 ||eta||.
double validate_dissipation(const NavierStokesSolver& solver, const StokesBasis& basis,
                            const DissipationEstimate& estimate, const DissipationOptions& options,
                            std::size_t samples, std::uint64_t seed);

}  // namespace kickns
