#pragma once

#include "kickns/grid_field.hpp"
#include "kickns/rng.hpp"
#include "kickns/stats.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace kickns {

/// Space-time window (t0, t1) x (x0, x1) x (y0, y1) inside [0, 1] x D.
struct Window {
    double t0 = 0.25, t1 = 0.75;
    double x0 = 0.25, x1 = 0.5;
    double y0 = 0.25, y1 = 0.5;

    double duration() const noexcept { return t1 - t0; }
    double width() const noexcept { return x1 - x0; }
    double height() const noexcept { return y1 - y0; }
};

/// b_j = scale * j^(-exponent), j = 1..count.
std::vector<double> power_law_amplitudes(int count, double scale = 0.1, double exponent = 2.0);

struct NoiseOptions {
    Window window;
    /// One amplitude per mode; the mode count J is amplitudes.size().
    std::vector<double> amplitudes = power_law_amplitudes(16);
    /// sigma in the bump exp(sigma * (1 - 1 / (1 - s^2))).
    double cutoff_sharpness = 1.0;
    /// p in rho(x) = c (1 - x^2)^p; integer p >= 2 keeps rho C^1 on the line.
    int density_exponent = 2;
    /// Midpoint nodes per window axis for the norm and Gram quadrature.
    int quadrature_points = 128;
};

/// The coefficient density rho(x) = c (1 - x^2)^p on [-1, 1].
class CoefficientDensity {
public:
    explicit CoefficientDensity(int exponent);

    int exponent() const noexcept { return p_; }
    double pdf(double x) const noexcept;
    double log_pdf(double x) const noexcept;
    double cdf(double x) const noexcept;
    /// Inverse CDF by safeguarded Newton iteration, |F(x) - u| <= 1e-12.
    double quantile(double u) const noexcept;
    double variance() const noexcept;

private:
    int p_;
    double norm_;                   // 1 / integral of (1 - x^2)^p
    std::vector<double> poly_;      // coefficients of s^(2k) in (1 - s^2)^p
};

struct ModeIndex {
    int a = 1, b = 1, c = 1;  // time, x and y frequencies
    int component = 0;        // 0: u, 1: v
};

/// Mode list: (a, b, c) sorted by a + b + c, ties lexicographically, each
/// triple used first for the u component and then for v.
std::vector<ModeIndex> mode_ordering(int count);

/// Coefficient vector xi in [-1, 1]^J of one kick; the force is
/// sum_j b_j xi_j psi_j with psi_j = chi * phi_j.
struct KickRealization {
    Eigen::VectorXd xi;

    static KickRealization zero(int modes) { return {Eigen::VectorXd::Zero(modes)}; }
    friend bool operator==(const KickRealization& a, const KickRealization& b) {
        return a.xi.size() == b.xi.size() && a.xi == b.xi;
    }
};

class NoiseModel {
public:
    /// Validates the options: J >= 1, every b_j > 0 (NondegeneracyError
    /// otherwise), the window inside [0, 1] in time and strictly inside D
    /// in space (GeometryError otherwise).
    static NoiseModel build(const NoiseOptions& options);

    const NoiseOptions& options() const noexcept { return opt_; }
    const Window& window() const noexcept { return opt_.window; }
    int modes() const noexcept { return static_cast<int>(opt_.amplitudes.size()); }
    double amplitude(int j) const { return opt_.amplitudes.at(static_cast<std::size_t>(j)); }
    const std::vector<double>& amplitudes() const noexcept { return opt_.amplitudes; }
    const ModeIndex& mode(int j) const { return modes_.at(static_cast<std::size_t>(j)); }
    const CoefficientDensity& density() const noexcept { return density_; }

    /// ||psi_j||_{L2(Q)} and the full H1(Q) norm (value plus space-time gradient).
    double l2_norm(int j) const { return std::sqrt(gram_l2_(j, j)); }
    double h1_norm(int j) const { return std::sqrt(gram_l2_(j, j) + gram_grad_(j, j)); }
    /// B_trunc = sum_j b_j ||psi_j||_1.
    double b_trunc() const noexcept { return b_trunc_; }
    /// r = sum_j b_j ||psi_j||_{L2(Q)}; an almost-sure bound on ||eta||_{L2(Q)}.
    double kick_radius() const noexcept { return kick_radius_; }
    /// Quadrature Gram matrix <psi_j, psi_k>_{L2(Q)}.
    const Eigen::MatrixXd& l2_gram() const noexcept { return gram_l2_; }
    /// Gram matrix of the H1(Q) inner product.
    Eigen::MatrixXd h1_gram() const { return gram_l2_ + gram_grad_; }

    /// The cutoff chi(t, x, y); exactly zero on and outside the window boundary.
    double cutoff(double t, double x, double y) const noexcept;
    /// phi_j(t, x, y), the scalar part of the j-th orthonormal sine mode.
    double phi(int j, double t, double x, double y) const noexcept;
    /// Scalar part of psi_j = chi * phi_j.
    double psi(int j, double t, double x, double y) const noexcept;

    /// Separable factors: psi_j = time_factor(j, t) * space_factor(j, x, y).
    double time_factor(int j, double t) const noexcept;
    double space_factor(int j, double x, double y) const noexcept;

    /// Same model with every amplitude multiplied by s > 0.
    NoiseModel scaled(double s) const;

private:
    NoiseModel(NoiseOptions opt);

    NoiseOptions opt_;
    std::vector<ModeIndex> modes_;
    CoefficientDensity density_;
    double normalisation_ = 0.0;
    Eigen::MatrixXd gram_l2_;
    Eigen::MatrixXd gram_grad_;
    double b_trunc_ = 0.0;
    double kick_radius_ = 0.0;
};

/// Draws xi_j = quantile(U_j) with U_j the j-th uniform of the stream, so
/// (stream seed, stream id, mode index) fixes every coefficient.
KickRealization sample_kick(const NoiseModel& model, Stream& rng);

/// ||eta||_{L2(Q)} of a realization under the model's quadrature.
double kick_l2_norm(const NoiseModel& model, const KickRealization& kick);
double kick_l2_distance(const NoiseModel& model, const KickRealization& a, const KickRealization& b);
/// ||eta||_{H1(Q)} of a realization.
double kick_h1_norm(const NoiseModel& model, const KickRealization& kick);

/// Precomputed spatial profiles of the modes on a MAC grid; evaluates the
/// body force of a kick at any time of the period.
class KickForcing {
public:
    KickForcing(const NoiseModel& model, const DomainSpec& domain);

    const DomainSpec& domain() const noexcept { return domain_; }
    const NoiseModel& model() const noexcept { return model_; }
    /// out = eta(t, .) at the face centres; out is overwritten. Returns false
    /// (and leaves out zero) when t is outside the time window.
    bool evaluate(const KickRealization& kick, double t, VelocityField& out) const;
    /// Spatial profile of mode j on the grid (without the time factor).
    const VelocityField& profile(int j) const { return profiles_.at(static_cast<std::size_t>(j)); }

private:
    NoiseModel model_;
    DomainSpec domain_;
    std::vector<VelocityField> profiles_;
};

/// Body force of a kick at time t in [0, 1] on the faces of the grid.
VelocityField eval_kick(const NoiseModel& model, const KickRealization& kick, double t, const DomainSpec& domain);

/// Monte-Carlo estimate of P(||eta_j - theta_j||_{L2(Q)} < radius for all j)
/// with eta_1..eta_M independent kicks.
ProbabilityEstimate kick_ball_probability(const NoiseModel& model, const std::vector<KickRealization>& targets,
                                          double radius, std::uint64_t n_mc, std::uint64_t seed);

}  // namespace kickns
