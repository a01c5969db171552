#pragma once

#include "kickns/rng.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kickns {

/// Finite-state Markov chain with the same kernel interface as the kicked NS
/// chain (State = state index).
class FiniteChain {
public:
    using State = int;

    /// Validates P (entries >= 0, rows summing to 1 within 1e-12). Coordinates
    /// default to the points 0, 1, ..., s-1 on a line. With require_irreducible
    /// a reducible P is rejected.
    explicit FiniteChain(Eigen::MatrixXd p, Eigen::MatrixXd coordinates = {},
                         std::optional<Eigen::VectorXd> potential = std::nullopt, bool require_irreducible = false);

    int size() const noexcept { return static_cast<int>(p_.rows()); }
    const Eigen::MatrixXd& matrix() const noexcept { return p_; }
    const Eigen::MatrixXd& coordinates() const noexcept { return coords_; }
    const std::optional<Eigen::VectorXd>& potential() const noexcept { return potential_; }

    /// Every state reaches every other along positive entries.
    bool irreducible() const;

    int step(int i, Stream& rng) const;
    /// Euclidean distance between embedded coordinates.
    double distance(int i, int j) const;

private:
    Eigen::MatrixXd p_;
    Eigen::MatrixXd cumulative_;
    Eigen::MatrixXd coords_;
    std::optional<Eigen::VectorXd> potential_;
};

/// Dense eigensolves are capped at this state count.
inline constexpr int oracle_max_states = 200;

/// Chain with entries drawn uniformly and rows normalized (all positive).
FiniteChain random_chain(int states, Stream& rng);

/// Parses the plain-text chain format:
///   states S [dim D]
///   S rows of S probabilities
///   coords            (optional, then S rows of D numbers)
///   potential         (optional, then S numbers)
/// Lines starting with '#' are comments.
FiniteChain parse_chain(std::istream& in);
FiniteChain read_chain(const std::string& path);
void write_chain(std::ostream& out, const FiniteChain& c);

/// The weighted matrix [P(i,j) e^{V(j)}].
Eigen::MatrixXd weighted_matrix(const FiniteChain& c, const Eigen::VectorXd& v);

/// B_n^V f over all states: n applications of the weighted matrix to f.
Eigen::VectorXd exact_fk_apply(const FiniteChain& c, const Eigen::VectorXd& v, const Eigen::VectorXd& f, int n);

/// B_n^V f by summing exp(sum V) f over all s^n paths from each state.
Eigen::VectorXd enumerate_fk_paths(const FiniteChain& c, const Eigen::VectorXd& v, const Eigen::VectorXd& f, int n);

/// log of the Perron root of the weighted matrix. Constant V returns the
/// constant. Throws InputError for reducible or oversized chains.
double exact_Q(const FiniteChain& c, const Eigen::VectorXd& v);

struct EigenTriple {
    double lambda = 0.0;
    /// Right eigenvector, entrywise positive.
    Eigen::VectorXd h;
    /// Left eigenvector, a probability vector; <h, mu> = 1.
    Eigen::VectorXd mu;
    /// Largest modulus among the other eigenvalues.
    double subdominant = 0.0;
};

/// Throws DegeneracyError when the Perron root is not simple.
EigenTriple exact_eigen_triple(const FiniteChain& c, const Eigen::VectorXd& v);

/// ||lambda^{-k} B_k^V f - <f, mu> h||_inf for k = 0..k_max.
std::vector<double> eigen_triple_errors(const FiniteChain& c, const Eigen::VectorXd& v, const Eigen::VectorXd& f,
                                        int k_max);

/// Least-squares slope of log(errors) against k, as a ratio; entries below
/// `floor` are ignored.
double fitted_geometric_ratio(const std::vector<double>& errors, double floor = 1e-14);

/// Cartesian product of per-state value axes.
std::vector<Eigen::VectorXd> potential_grid(const std::vector<std::vector<double>>& axes);

struct ExactRate {
    double value = 0.0;
    std::size_t argmax = 0;
};

/// max over the grid of <V, sigma> - exact_Q(V).
ExactRate exact_rate_function(const FiniteChain& c, const Eigen::VectorXd& sigma, const std::vector<Eigen::VectorXd>& grid);

/// Donsker-Varadhan value at the point mass on state x: -log P(x, x).
double point_mass_rate(const FiniteChain& c, int x);

/// Stationary distribution (left Perron vector of P).
Eigen::VectorXd stationary_distribution(const FiniteChain& c);

struct ExactUfpRow {
    int n = 0;
    double ratio = 0.0;
    /// log of max_i B_n 1(i).
    double log_norm_one = 0.0;
};

/// R_n = max over pairs |B_n f(i) - B_n f(j)| / (max B_n 1 * d(i, j)) for
/// n = 1..n_max, with B_n 1 maximized over all states. Values are rescaled
/// each step since R_n is scale free.
std::vector<ExactUfpRow> exact_ufp(const FiniteChain& c, const Eigen::VectorXd& v, const Eigen::VectorXd& f,
                                   const std::vector<std::pair<int, int>>& pairs, int n_max);

}  // namespace kickns
