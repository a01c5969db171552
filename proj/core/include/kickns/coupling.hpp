#pragma once

#include "kickns/grid_field.hpp"
#include "kickns/noise.hpp"
#include "kickns/ns_solver.hpp"
#include "kickns/stats.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace kickns {

struct CouplingConfig {
    /// Contraction target: the control aims at a gap <= (q/2) ||u0 - u0'||.
    double q = 0.5;
    /// Number of controlled kick coefficients (the first m modes).
    int control_modes = 8;
    /// Coupling threshold: larger gaps get independent kicks.
    double threshold = 0.02;
    int gauss_newton_iterations = 4;
    /// Stop when the residual drops below this fraction of the uncontrolled one.
    double gauss_newton_tolerance = 1e-6;
    /// Forward-difference step on the kick coefficients.
    double fd_step = 1e-4;
    /// Singular values below this fraction of the largest are dropped from
    /// the least-squares pseudoinverse.
    double svd_cutoff = 1e-2;
    /// The cutoff rho(s) is 1 for s <= inner and 0 for s >= outer, with s the
    /// H1(Q) norm of the kick; inner <= 0 selects B_trunc, outer <= inner
    /// selects inner + 1.
    double cutoff_inner = 0.0;
    double cutoff_outer = 0.0;
    /// Include the finite-difference Jacobian of Psi in the density ratio.
    bool jacobian_correction = true;
    /// Proposal cap for the residual-law rejection sampler.
    int rejection_cap = 100000;
};

/// The smooth cutoff rho with rho = 1 on [0, inner] and 0 on [outer, inf).
double smooth_cutoff(double s, double inner, double outer) noexcept;

struct ControlResult {
    /// Correction on the first m coefficients.
    Eigen::VectorXd w;
    /// ||S(u0', h + w) - S(u0, h)||.
    double residual = 0.0;
    /// ||S(u0', h) - S(u0, h)||.
    double uncontrolled = 0.0;
    /// residual <= (q/2) ||u0 - u0'||
    bool contracted = false;
    int iterations = 0;
    int periods = 0;
    /// Forward-difference sensitivities of S(u0', .) at h in the first m coordinates.
    Eigen::MatrixXd jacobian;
    /// S(u0, h) and S(u0', h + w).
    VelocityField target;
    VelocityField controlled;
};

/// Gauss-Newton least squares for min_w ||S(u0', h + w) - S(u0, h)|| over
/// the first m coefficients (frozen forward-difference Jacobian).
ControlResult control_map_phi(const NavierStokesSolver& solver, const VelocityField& u0, const VelocityField& u0p,
                              const KickRealization& h, const CouplingConfig& cfg);

struct PsiResult {
    KickRealization zeta;
    /// det of the first m x m block of D Psi (finite differences).
    double jacobian_det = 1.0;
    double cutoff = 1.0;
    ControlResult control;
};

/// Psi(h) = h + rho(||h||_1) Phi(h), changing only the first m coefficients.
PsiResult psi_transform(const NavierStokesSolver& solver, const KickRealization& h, const VelocityField& u0,
                        const VelocityField& u0p, const CouplingConfig& cfg);

struct CouplingPair {
    VelocityField u1;
    VelocityField u1p;
    /// The kick of the primed side was identified with Psi(xi).
    bool identified = false;
    /// Both sides were within the threshold and the maximal coupling ran.
    bool coupled_branch = false;
    KickRealization xi;
    KickRealization xip;
    double control_residual = 0.0;
    bool contracted = false;
    /// Residual-law proposals used after a rejection (0 if none).
    int proposals = 0;
    /// The residual sampler hit its cap and fell back to an independent draw.
    bool capped = false;
};

/// One step of the coupling operator: independent kicks when the gap exceeds
/// the threshold, otherwise a maximal coupling of xi ~ lambda and Psi(xi).
CouplingPair couple_step(const NavierStokesSolver& solver, const VelocityField& u0, const VelocityField& u0p,
                         const CouplingConfig& cfg, Stream& rng);

struct ContractionRow {
    double d = 0.0;
    double q = 0.0;
    std::size_t n_mc = 0;
    std::size_t failures = 0;
    double frequency = 0.0;
    double ratio = 0.0;
    double ratio_lower = 0.0;
    double ratio_upper = 0.0;
    std::size_t identified = 0;
    /// Identified events with post-step gap <= (q/2 + 0.1) * d.
    std::size_t identified_within = 0;
};

/// Produces (u0, u0') with ||u0 - u0'|| = d for replicate i.
using PairSampler = std::function<std::pair<VelocityField, VelocityField>(double d, std::size_t i)>;

/// Failure frequency of ||u1 - u1'|| > q d over n_mc coupled steps per d.
std::vector<ContractionRow> verify_contraction(const NavierStokesSolver& solver, const std::vector<double>& d_list,
                                               const CouplingConfig& cfg, std::size_t n_mc, const PairSampler& pairs,
                                               std::uint64_t seed);

/// Empirical K_eps: 1 - |M|/n, M a maximum matching in the bipartite graph
/// joining x_i and y_j when dist(x_i, y_j) <= eps (Hopcroft-Karp).
double k_eps_distance(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b, double eps);
double k_eps_distance(const std::vector<VelocityField>& a, const std::vector<VelocityField>& b, double eps);
/// Same from a precomputed n x n distance matrix.
double k_eps_from_distances(const Eigen::MatrixXd& dist, double eps);

/// Maximum bipartite matching size for an adjacency list (left -> right).
std::size_t hopcroft_karp(const std::vector<std::vector<int>>& adjacency, int right_count);

}  // namespace kickns
