#pragma once

#include "kickns/grid_field.hpp"
#include "kickns/noise.hpp"
#include "kickns/ns_solver.hpp"
#include "kickns/stats.hpp"

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <vector>

namespace kickns {

/// Feature vector of a state: the first `count` Stokes coefficients followed
/// by the kinetic energy ||u||^2 / 2.
class FeatureMap {
public:
    FeatureMap(std::shared_ptr<const StokesBasis> basis, int count);

    int coefficients() const noexcept { return count_; }
    int dimension() const noexcept { return count_ + 1; }
    const StokesBasis& basis() const noexcept { return *basis_; }
    Eigen::VectorXd operator()(const VelocityField& u) const;

private:
    std::shared_ptr<const StokesBasis> basis_;
    int count_;
};

/// One transition of the kicked chain, u -> S(u, eta) with eta drawn from
/// the stream. Satisfies the kernel interface used by the Feynman-Kac code.
class KickedChain {
public:
    using State = VelocityField;

    explicit KickedChain(const NavierStokesSolver& solver) : solver_(&solver) {}

    const NavierStokesSolver& solver() const noexcept { return *solver_; }
    State step(const State& u, Stream& rng) const { return solver_->solve_period(u, sample_kick(solver_->noise(), rng)); }

private:
    const NavierStokesSolver* solver_;
};

struct ChainConfig {
    std::size_t length = 1;
    /// Keep every `thin`-th state (plus the last); 0 keeps only u_0 and u_n.
    std::size_t thin = 1;
    /// Drive the chain with zero kicks (the noise-free dynamics).
    bool zero_noise = false;
    std::uint64_t seed = 0;
    /// Distinguishes independent replicates sharing a seed.
    std::uint64_t replicate = 0;
};

/// Stream of the k-th kick (k = 1..n) of a chain replicate.
Stream chain_kick_stream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t k);

struct Trajectory {
    /// Kept states and their step indices.
    std::vector<VelocityField> states;
    std::vector<std::size_t> steps;
    /// kicks[k - 1] drove the transition u_{k-1} -> u_k.
    std::vector<KickRealization> kicks;
    /// Feature vectors of u_0..u_n (every step, thinned or not).
    std::vector<Eigen::VectorXd> features;
    /// ||u_k|| for k = 0..n.
    std::vector<double> norms;
    ChainConfig config;
};

Trajectory run_chain(const NavierStokesSolver& solver, const FeatureMap& features, const VelocityField& u0,
                     const ChainConfig& config);

/// Largest ||S(u_{k-1}, eta_k) - u_k|| over consecutive kept states.
double replay_error(const NavierStokesSolver& solver, const Trajectory& t);

/// Regular grid over the first `dims` feature coordinates with `bins` cells
/// per axis on [-range, range]; values outside land in the edge bins.
struct FeatureBinning {
    int dims = 8;
    int bins = 16;
    double range = 1.0;

    std::vector<int> bin_of(const Eigen::VectorXd& x) const;
    double centre(int bin) const noexcept { return -range + (bin + 0.5) * (2.0 * range / bins); }
};

using SparseHistogram = std::map<std::vector<int>, double>;

/// Empirical measure (1/k) sum_{j<k} delta_{feature(u_j)}.
struct OccupationMeasure {
    std::size_t count = 0;
    std::vector<Eigen::VectorXd> points;
    FeatureBinning binning;
    SparseHistogram histogram;  // probabilities, summing to 1
    Eigen::VectorXd mean;
    Eigen::VectorXd second_moment;  // componentwise E[x^2]

    static OccupationMeasure from_points(std::vector<Eigen::VectorXd> points, const FeatureBinning& binning);
};

/// Occupation measure of u_0..u_{n-1}.
OccupationMeasure occupation_measure(const Trajectory& t, const FeatureBinning& binning);
/// Length-weighted mixture (the occupation measure of the concatenation).
OccupationMeasure mixture(const OccupationMeasure& a, const OccupationMeasure& b);
double total_variation(const SparseHistogram& a, const SparseHistogram& b);

struct ControllabilityResult {
    int steps = 0;
    /// ||S_l(v, 0..0)|| for l = 0..steps.
    std::vector<double> norms;
};

/// Smallest l with ||S_l(v, 0, ..., 0)|| <= eps (target state 0). Throws
/// ControllabilityFailure when l would exceed the cap.
ControllabilityResult check_controllability(const NavierStokesSolver& solver, const VelocityField& v, double eps,
                                            int cap = 200);

/// ceil(log(eps / ||v||) / log(kappa)), the geometric-decay step bound.
int controllability_bound(double v_norm, double eps, double kappa);

struct AttainabilityOptions {
    int depth = 20;
    /// New states per level.
    std::size_t per_level = 50;
    /// Share of level samples driven by corners of the coefficient cube.
    double corner_fraction = 0.03;
    std::uint64_t seed = 0;
};

/// Sampled attainability sets from the zero state: level k holds every
/// level k-1 point (valid since S(0, 0) = 0 makes paths with a zero prefix
/// one period longer) plus per_level children S(p, theta) of random parents
/// p, with theta the zero kick, a cube corner, or a draw from the kick law.
struct AttainabilityCloud {
    int depth = 0;
    std::vector<VelocityField> states;
    std::vector<Eigen::VectorXd> features;
    /// Level at which each point entered.
    std::vector<int> level;

    /// Number of points belonging to the depth-k cloud.
    std::size_t size_at(int k) const;
    /// Largest pairwise L2 distance among the states.
    double diameter() const;
};

AttainabilityCloud attainability_sample(const NavierStokesSolver& solver, const FeatureMap& features,
                                        const AttainabilityOptions& options);

/// P(||u_m - a|| <= r | u_0 = x) by Monte Carlo.
ProbabilityEstimate estimate_irreducibility(const NavierStokesSolver& solver, const VelocityField& x,
                                            const VelocityField& a, int m, double r, std::uint64_t n_mc,
                                            std::uint64_t seed);

struct SupportReport {
    /// Occupation samples within r of the cloud.
    double occupation_near_cloud = 0.0;
    /// Cloud points within r of some occupation sample.
    double cloud_near_occupation = 0.0;
};

SupportReport stationary_support_check(const std::vector<Eigen::VectorXd>& occupation,
                                       const std::vector<Eigen::VectorXd>& cloud, double r);

/// max over a in A of the distance from a to the nearest point of B.
double directed_hausdorff(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b);

}  // namespace kickns
