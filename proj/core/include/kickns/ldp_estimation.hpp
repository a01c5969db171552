#pragma once

#include "kickns/error.hpp"
#include "kickns/markov_chain.hpp"
#include "kickns/parallel.hpp"
#include "kickns/rng.hpp"
#include "kickns/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <vector>

namespace kickns {

/// A Markov kernel: one transition x -> x' drawing from the stream.
template <typename K>
concept MarkovKernel = requires(const K& k, const typename K::State& x, Stream& rng) {
    { k.step(x, rng) } -> std::convertible_to<typename K::State>;
};

/// Potential on feature space (or on a finite state set, via the table):
/// V(x) = c + a.x + sum_k q_k x_k^2, or V(i) = table[i].
class Potential {
public:
    enum class Kind { constant, affine, quadratic, table };

    static Potential constant(double c, std::string id = {});
    static Potential affine(double c, Eigen::VectorXd linear, std::string id = {});
    static Potential quadratic(double c, Eigen::VectorXd linear, Eigen::VectorXd diagonal, std::string id = {});
    static Potential tabulated(Eigen::VectorXd values, std::string id = {});

    Kind kind() const noexcept { return kind_; }
    const std::string& id() const noexcept { return id_; }
    double offset() const noexcept { return c_; }
    const Eigen::VectorXd& linear() const noexcept { return a_; }
    const Eigen::VectorXd& diagonal() const noexcept { return q_; }
    const Eigen::VectorXd& table() const noexcept { return table_; }

    double operator()(const Eigen::VectorXd& x) const;
    double operator()(int state) const;

    /// V + s, with the same id suffixed by the shift.
    Potential shifted(double s) const;

    /// sup |V| over the box |x_k| <= bound_k (the invariant-ball image in
    /// feature space); for a table, the largest |entry|.
    double sup_bound(const Eigen::VectorXd& bound) const;
    /// Euclidean Lipschitz constant of V over the same box.
    double lipschitz(const Eigen::VectorXd& bound) const;

private:
    Kind kind_ = Kind::constant;
    std::string id_;
    double c_ = 0.0;
    Eigen::VectorXd a_, q_, table_;
};

/// gamma implied by q e^{||V||_inf} <= e^{-gamma}, i.e. -log q - ||V||_inf.
/// Positive values mean the contraction target is compatible with V.
double implied_gamma(double q, double sup_norm) noexcept;

/// Default dictionary for the Legendre transform: V = 0, then for each of the
/// first `coordinates` features x_k and each scale c, +-c x_k / radius and
/// +-c (x_k / radius)^2.
std::vector<Potential> default_dictionary(int feature_dim, int coordinates, double radius,
                                          const std::vector<double>& scales);

/// <V, sigma> with sigma a feature histogram, evaluating V at bin centres in
/// the binned coordinates (the others are set to zero).
double histogram_expectation(const Potential& v, const SparseHistogram& sigma, const FeatureBinning& binning,
                             int feature_dim);

// ---------------------------------------------------------------------------
// Direct Feynman-Kac averages

/// Per-replicate path weights: log_weight(i, k) = sum_{l=1..k} V(u_l) and
/// value(i, k) = f(u_k) on replicate i, for k = 0..n.
struct FkSamples {
    Eigen::MatrixXd log_weight;
    Eigen::MatrixXd value;
};

struct FkEstimate {
    double value = 0.0;
    double standard_error = 0.0;
    std::size_t samples = 0;
};

/// Replicate i uses the stream (seed, fk_propagate, i) for all its steps, so
/// two calls with the same seed from different initial states are driven by
/// common random numbers.
template <MarkovKernel K, typename V, typename F>
FkSamples fk_samples(const K& kernel, const V& potential, const F& f, const typename K::State& x0, std::size_t n,
                     std::size_t n_mc, std::uint64_t seed) {
    FkSamples s{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_mc), static_cast<Eigen::Index>(n + 1)),
                Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_mc), static_cast<Eigen::Index>(n + 1))};
    parallel_for(n_mc, [&](std::size_t i) {
        Stream rng = Stream::derive(seed, {stream_tag::fk_propagate, i});
        const auto r = static_cast<Eigen::Index>(i);
        typename K::State x = x0;
        double lw = 0.0;
        s.value(r, 0) = f(x);
        for (std::size_t k = 1; k <= n; ++k) {
            x = kernel.step(x, rng);
            lw += potential(x);
            s.log_weight(r, static_cast<Eigen::Index>(k)) = lw;
            s.value(r, static_cast<Eigen::Index>(k)) = f(x);
        }
    });
    return s;
}

/// Mean of exp(log_weight(., k)) value(., k) with its standard error,
/// accumulated relative to the largest log-weight.
FkEstimate fk_column_estimate(const FkSamples& s, std::size_t k);

/// Paired difference B f(u) - B f(u') from common-random-number samples.
FkEstimate fk_paired_difference(const FkSamples& a, const FkSamples& b, std::size_t k);

/// Direct Monte Carlo estimate of B_n^V f(u0) = E exp(sum_{i=1..n} V(u_i)) f(u_n).
template <MarkovKernel K, typename V, typename F>
FkEstimate fk_apply(const K& kernel, const V& potential, const F& f, const typename K::State& x0, std::size_t n,
                    std::size_t n_mc, std::uint64_t seed) {
    if (n == 0) return FkEstimate{f(x0), 0.0, n_mc};
    return fk_column_estimate(fk_samples(kernel, potential, f, x0, n, n_mc, seed), n);
}

// ---------------------------------------------------------------------------
// Interacting particles (cloning)

template <typename State>
struct FKEnsemble {
    std::vector<State> particles;
    /// Log-weights relative to the current maximum (so the largest is 0).
    std::vector<double> log_weights;
    std::size_t steps = 0;
    /// log of the weighted mean of exp V over each step.
    std::vector<double> log_normalizers;
    std::size_t resamples = 0;

    static FKEnsemble from_state(const State& x, std::size_t count) {
        FKEnsemble e;
        e.particles.assign(count, x);
        e.log_weights.assign(count, 0.0);
        return e;
    }
};

/// Effective sample size (sum w)^2 / sum w^2 from log-weights.
double effective_sample_size(const std::vector<double>& log_weights);

/// Multinomial ancestor indices drawn from the normalized weights.
std::vector<std::size_t> multinomial_ancestors(const std::vector<double>& log_weights, Stream& rng);

/// log(sum_i W_i e^{V_i} / sum_i W_i), computed so that constant V returns
/// exactly that constant. Throws DegeneracyError when no weight is finite.
double log_weighted_mean_exp(const std::vector<double>& log_weights, const std::vector<double>& values,
                             std::size_t step);

/// Advances the ensemble by `steps` Feynman-Kac steps: move every particle,
/// add V to its log-weight, record the normalizer, and resample when the
/// ESS drops below ess_fraction * N. Step k uses streams (seed,
/// fk_propagate, k, i) for particle i and (seed, fk_resample, k).
template <MarkovKernel K, typename V>
void fk_evolve(const K& kernel, const V& potential, FKEnsemble<typename K::State>& e, std::size_t steps,
               std::uint64_t seed, double ess_fraction = 0.5) {
    const std::size_t n = e.particles.size();
    if (n == 0) throw InputError("ldp_estimation", "Feynman-Kac ensemble is empty");
    std::vector<double> values(n);
    for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t k = e.steps + 1;
        parallel_for(n, [&](std::size_t i) {
            Stream rng = Stream::derive(seed, {stream_tag::fk_propagate, k, i});
            e.particles[i] = kernel.step(e.particles[i], rng);
            values[i] = potential(e.particles[i]);
        });
        e.log_normalizers.push_back(log_weighted_mean_exp(e.log_weights, values, k));
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            e.log_weights[i] += values[i];
            top = std::max(top, e.log_weights[i]);
        }
        for (double& w : e.log_weights) w -= top;
        e.steps = k;
        if (effective_sample_size(e.log_weights) < ess_fraction * static_cast<double>(n)) {
            Stream rng = Stream::derive(seed, {stream_tag::fk_resample, k});
            const auto parents = multinomial_ancestors(e.log_weights, rng);
            std::vector<typename K::State> next;
            next.reserve(n);
            for (std::size_t p : parents) next.push_back(e.particles[p]);
            e.particles = std::move(next);
            std::fill(e.log_weights.begin(), e.log_weights.end(), 0.0);
            ++e.resamples;
        }
    }
}

// ---------------------------------------------------------------------------
// Q(V)

enum class QMethod { direct, cloning };

const char* to_string(QMethod m) noexcept;

struct QEstimate {
    double value = 0.0;
    double standard_error = 0.0;
    QMethod method = QMethod::cloning;
    std::size_t n = 0;
    std::size_t particles = 0;
    /// Per-initial-state estimates and standard errors.
    std::vector<double> per_initial;
    std::vector<double> per_initial_se;
    /// max - min of the per-initial estimates.
    double spread = 0.0;
    /// Running mean of the pooled step normalizers after each step (cloning)
    /// or (1/k) log of the mean path weight (direct).
    std::vector<double> running;
};

struct QOptions {
    QMethod method = QMethod::cloning;
    std::size_t n = 200;
    /// Particles per initial state (cloning) or chains per initial state (direct).
    std::size_t particles = 512;
    double burn_in_fraction = 0.5;
    double ess_fraction = 0.5;
    std::size_t batches = 20;
    std::uint64_t seed = 0;
};

/// Mean of the retained window with a batch-means standard error.
MeanEstimate batch_mean(const std::vector<double>& series, std::size_t first, std::size_t batches);

/// Pools per-initial-state results into a QEstimate.
QEstimate pool_q(std::vector<MeanEstimate> per_initial, std::vector<std::vector<double>> running, const QOptions& opt);

/// The direct method is confined to n <= this.
inline constexpr std::size_t direct_method_max_n = 30;

template <MarkovKernel K, typename V>
QEstimate estimate_Q(const K& kernel, const V& potential, const std::vector<typename K::State>& initial,
                     const QOptions& opt) {
    if (initial.empty()) throw InputError("ldp_estimation", "estimate_Q needs at least one initial state");
    if (opt.n < 2) throw InputError("ldp_estimation", "estimate_Q needs n >= 2");
    std::vector<MeanEstimate> per;
    std::vector<std::vector<double>> running;
    for (std::size_t s = 0; s < initial.size(); ++s) {
        const std::uint64_t seed = stream_id({opt.seed, s});
        std::vector<double> run;
        if (opt.method == QMethod::cloning) {
            auto e = FKEnsemble<typename K::State>::from_state(initial[s], opt.particles);
            fk_evolve(kernel, potential, e, opt.n, seed, opt.ess_fraction);
            const auto first = static_cast<std::size_t>(std::floor(opt.burn_in_fraction * static_cast<double>(opt.n)));
            per.push_back(batch_mean(e.log_normalizers, first, opt.batches));
            run = e.log_normalizers;
        } else {
            if (opt.n > direct_method_max_n)
                throw InputError("ldp_estimation", "direct method is limited to n <= " +
                                                       std::to_string(direct_method_max_n));
            const auto one = [](const typename K::State&) { return 1.0; };
            const FkSamples fs = fk_samples(kernel, potential, one, initial[s], opt.n, opt.particles, seed);
            for (std::size_t k = 1; k <= opt.n; ++k) {
                const FkEstimate b = fk_column_estimate(fs, k);
                run.push_back(std::log(b.value) / static_cast<double>(k));
            }
            const FkEstimate b = fk_column_estimate(fs, opt.n);
            const double nn = static_cast<double>(opt.n);
            per.push_back(MeanEstimate{std::log(b.value) / nn, b.standard_error / (b.value * nn), opt.particles});
        }
        running.push_back(std::move(run));
    }
    return pool_q(std::move(per), std::move(running), opt);
}

// ---------------------------------------------------------------------------
// Rate function

struct RateFunctionEstimate {
    /// I(sigma) estimate: the largest bracket.
    double value = 0.0;
    std::size_t argmax = 0;
    std::string argmax_id;
    /// <V_k, sigma> - Q(V_k) for each dictionary member.
    std::vector<double> brackets;
    /// Standard error of each bracket, sqrt(se_Q^2 + se_sigma^2).
    std::vector<double> bracket_se;
    /// Largest Q standard error over the dictionary.
    double max_q_se = 0.0;
    /// Root mean square of the bracket standard errors.
    double pooled_se = 0.0;
};

/// Maximizes <V, sigma> - Q(V) over a dictionary given <V_k, sigma> and Q
/// values. sigma_se may be empty (exact expectations).
RateFunctionEstimate estimate_rate_function(const std::vector<Potential>& dictionary,
                                            const std::vector<double>& sigma_values,
                                            const std::vector<double>& sigma_se,
                                            const std::vector<QEstimate>& q);

// ---------------------------------------------------------------------------
// Uniform Feller diagnostic

struct UfpRow {
    std::size_t n = 0;
    /// max over pairs of |B f(u) - B f(u')| / (||B 1||_inf ||u - u'||).
    double ratio = 0.0;
    /// Standard error of the maximizing pair's ratio.
    double noise_floor = 0.0;
    /// max of B 1 over the probe set.
    double norm_one = 0.0;
};

struct UfpOptions {
    std::vector<std::size_t> n_list;
    std::size_t n_mc = 64;
    std::uint64_t seed = 0;
};

/// R_n for each n in the list. Both states of a pair and all probes share
/// common random numbers. Pairs closer than 1e-12 are rejected.
template <MarkovKernel K, typename V, typename F, typename Dist>
std::vector<UfpRow> ufp_diagnostic(const K& kernel, const V& potential, const F& f,
                                   const std::vector<std::pair<typename K::State, typename K::State>>& pairs,
                                   const std::vector<typename K::State>& probes, const Dist& distance,
                                   const UfpOptions& opt) {
    std::vector<UfpRow> rows;
    if (opt.n_list.empty()) return rows;
    if (probes.empty()) throw InputError("ldp_estimation", "uniform Feller diagnostic needs probe states");
    const std::size_t n_max = *std::max_element(opt.n_list.begin(), opt.n_list.end());
    const auto one = [](const typename K::State&) { return 1.0; };
    std::vector<FkSamples> probe_samples;
    for (const auto& p : probes) probe_samples.push_back(fk_samples(kernel, potential, one, p, n_max, opt.n_mc, opt.seed));
    std::vector<std::pair<FkSamples, FkSamples>> pair_samples;
    std::vector<double> gaps;
    for (const auto& [u, up] : pairs) {
        const double g = distance(u, up);
        if (!(g >= 1e-12)) throw InputError("ldp_estimation", "uniform Feller pair closer than 1e-12");
        gaps.push_back(g);
        pair_samples.emplace_back(fk_samples(kernel, potential, f, u, n_max, opt.n_mc, opt.seed),
                                  fk_samples(kernel, potential, f, up, n_max, opt.n_mc, opt.seed));
    }
    for (std::size_t n : opt.n_list) {
        UfpRow row;
        row.n = n;
        for (const auto& ps : probe_samples) row.norm_one = std::max(row.norm_one, fk_column_estimate(ps, n).value);
        for (std::size_t p = 0; p < pair_samples.size(); ++p) {
            const FkEstimate diff = fk_paired_difference(pair_samples[p].first, pair_samples[p].second, n);
            const double r = std::abs(diff.value) / (row.norm_one * gaps[p]);
            if (p == 0 || r > row.ratio) {
                row.ratio = r;
                row.noise_floor = diff.standard_error / (row.norm_one * gaps[p]);
            }
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace kickns
