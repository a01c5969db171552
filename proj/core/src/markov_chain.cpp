#include "kickns/markov_chain.hpp"

#include "kickns/error.hpp"
#include "kickns/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kickns {

FeatureMap::FeatureMap(std::shared_ptr<const StokesBasis> basis, int count) : basis_(std::move(basis)), count_(count) {
    if (!basis_) throw InputError("markov_chain", "feature map needs a Stokes basis");
    if (count < 0 || count > basis_->size()) throw InputError("markov_chain", "feature count exceeds the basis size");
}

Eigen::VectorXd FeatureMap::operator()(const VelocityField& u) const {
    Eigen::VectorXd x(count_ + 1);
    x.head(count_) = basis_->coefficients(u, count_);
    x[count_] = 0.5 * inner(u, u);
    return x;
}

Stream chain_kick_stream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t k) {
    return Stream::derive(seed, {stream_tag::chain_kick, replicate, k});
}

Trajectory run_chain(const NavierStokesSolver& solver, const FeatureMap& features, const VelocityField& u0,
                     const ChainConfig& cfg) {
    if (cfg.length < 1) throw InputError("markov_chain", "chain length must be at least 1");
    Trajectory t;
    t.config = cfg;
    const NoiseModel& noise = solver.noise();
    VelocityField u = u0;
    t.states.push_back(u);
    t.steps.push_back(0);
    t.features.push_back(features(u));
    t.norms.push_back(l2_norm(u));
    for (std::size_t k = 1; k <= cfg.length; ++k) {
        KickRealization kick = KickRealization::zero(noise.modes());
        if (!cfg.zero_noise) {
            Stream rng = chain_kick_stream(cfg.seed, cfg.replicate, k);
            kick = sample_kick(noise, rng);
        }
        try {
            u = solver.solve_period(u, kick);
        } catch (const Error& e) {
            throw ChainError(k, e.what());
        }
        t.kicks.push_back(std::move(kick));
        t.features.push_back(features(u));
        t.norms.push_back(l2_norm(u));
        if (k == cfg.length || (cfg.thin > 0 && k % cfg.thin == 0)) {
            t.states.push_back(u);
            t.steps.push_back(k);
        }
    }
    return t;
}

double replay_error(const NavierStokesSolver& solver, const Trajectory& t) {
    double worst = 0.0;
    for (std::size_t s = 1; s < t.states.size(); ++s) {
        if (t.steps[s] != t.steps[s - 1] + 1) continue;
        const VelocityField again = solver.solve_period(t.states[s - 1], t.kicks[t.steps[s] - 1]);
        worst = std::max(worst, l2_distance(again, t.states[s]));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Occupation measures

std::vector<int> FeatureBinning::bin_of(const Eigen::VectorXd& x) const {
    const int n = std::min<int>(dims, static_cast<int>(x.size()));
    std::vector<int> b(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int k = static_cast<int>(std::floor((x[i] + range) / (2.0 * range) * bins));
        b[static_cast<std::size_t>(i)] = std::clamp(k, 0, bins - 1);
    }
    return b;
}

OccupationMeasure OccupationMeasure::from_points(std::vector<Eigen::VectorXd> points, const FeatureBinning& binning) {
    OccupationMeasure m;
    m.count = points.size();
    m.binning = binning;
    if (points.empty()) return m;
    const auto dim = points.front().size();
    m.mean = Eigen::VectorXd::Zero(dim);
    m.second_moment = Eigen::VectorXd::Zero(dim);
    const double w = 1.0 / static_cast<double>(points.size());
    for (const auto& p : points) {
        m.mean += p;
        m.second_moment += p.cwiseProduct(p);
        m.histogram[binning.bin_of(p)] += 1.0;
    }
    m.mean *= w;
    m.second_moment *= w;
    for (auto& [bin, c] : m.histogram) c *= w;
    m.points = std::move(points);
    return m;
}

OccupationMeasure occupation_measure(const Trajectory& t, const FeatureBinning& binning) {
    if (t.features.size() < 2) throw InputError("markov_chain", "occupation measure needs a trajectory of length >= 1");
    std::vector<Eigen::VectorXd> pts(t.features.begin(), t.features.end() - 1);
    return OccupationMeasure::from_points(std::move(pts), binning);
}

OccupationMeasure mixture(const OccupationMeasure& a, const OccupationMeasure& b) {
    std::vector<Eigen::VectorXd> pts = a.points;
    pts.insert(pts.end(), b.points.begin(), b.points.end());
    return OccupationMeasure::from_points(std::move(pts), a.binning);
}

double total_variation(const SparseHistogram& a, const SparseHistogram& b) {
    double s = 0.0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() || ib != b.end()) {
        if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
            s += std::abs(ia->second);
            ++ia;
        } else if (ia == a.end() || ib->first < ia->first) {
            s += std::abs(ib->second);
            ++ib;
        } else {
            s += std::abs(ia->second - ib->second);
            ++ia;
            ++ib;
        }
    }
    return 0.5 * s;
}

// ---------------------------------------------------------------------------
// Controllability

ControllabilityResult check_controllability(const NavierStokesSolver& solver, const VelocityField& v, double eps,
                                            int cap) {
    ControllabilityResult r;
    const KickRealization zero = KickRealization::zero(solver.noise().modes());
    VelocityField u = v;
    r.norms.push_back(l2_norm(u));
    while (r.norms.back() > eps) {
        if (r.steps >= cap)
            throw ControllabilityFailure("no decay to within " + std::to_string(eps) + " after " + std::to_string(cap) +
                                         " unforced periods (norm " + std::to_string(r.norms.back()) + ")");
        u = solver.solve_period(u, zero);
        ++r.steps;
        r.norms.push_back(l2_norm(u));
    }
    return r;
}

int controllability_bound(double v_norm, double eps, double kappa) {
    if (v_norm <= eps) return 0;
    return static_cast<int>(std::ceil(std::log(eps / v_norm) / std::log(kappa)));
}

// ---------------------------------------------------------------------------
// Attainability

std::size_t AttainabilityCloud::size_at(int k) const {
    return static_cast<std::size_t>(std::count_if(level.begin(), level.end(), [k](int l) { return l <= k; }));
}

double AttainabilityCloud::diameter() const {
    double d = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i)
        for (std::size_t j = i + 1; j < states.size(); ++j) d = std::max(d, l2_distance(states[i], states[j]));
    return d;
}

AttainabilityCloud attainability_sample(const NavierStokesSolver& solver, const FeatureMap& features,
                                        const AttainabilityOptions& opt) {
    if (opt.depth < 0) throw InputError("markov_chain", "attainability depth must be nonnegative");
    const NoiseModel& noise = solver.noise();
    const int J = noise.modes();
    AttainabilityCloud c;
    c.depth = opt.depth;
    VelocityField zero_state(solver.domain());
    c.states.push_back(zero_state);
    c.features.push_back(features(zero_state));
    c.level.push_back(0);
    const auto corners = static_cast<std::size_t>(std::ceil(opt.corner_fraction * static_cast<double>(opt.per_level)));
    for (int k = 1; k <= opt.depth; ++k) {
        const std::size_t parents = c.states.size();
        std::vector<VelocityField> children(opt.per_level, VelocityField(solver.domain()));
        parallel_for(opt.per_level, [&](std::size_t s) {
            Stream rng = Stream::derive(opt.seed, {stream_tag::attainability, static_cast<std::uint64_t>(k), s});
            const std::size_t parent = static_cast<std::size_t>(rng.below(parents));
            KickRealization theta = KickRealization::zero(J);
            if (s == 0) {
                // zero kick
            } else if (s <= corners) {
                for (int j = 0; j < J; ++j) theta.xi[j] = rng.uniform() < 0.5 ? -1.0 : 1.0;
            } else {
                theta = sample_kick(noise, rng);
            }
            children[s] = solver.solve_period(c.states[parent], theta);
        });
        for (auto& child : children) {
            c.features.push_back(features(child));
            c.states.push_back(std::move(child));
            c.level.push_back(k);
        }
    }
    return c;
}

ProbabilityEstimate estimate_irreducibility(const NavierStokesSolver& solver, const VelocityField& x,
                                            const VelocityField& a, int m, double r, std::uint64_t n_mc,
                                            std::uint64_t seed) {
    std::vector<char> hit(n_mc, 0);
    const KickedChain chain(solver);
    parallel_for(n_mc, [&](std::size_t trial) {
        Stream rng = Stream::derive(seed, {stream_tag::irreducibility, trial});
        VelocityField u = x;
        for (int s = 0; s < m; ++s) u = chain.step(u, rng);
        hit[trial] = l2_distance(u, a) <= r;
    });
    return wilson_interval(static_cast<std::uint64_t>(std::count(hit.begin(), hit.end(), 1)), n_mc);
}

namespace {

double nearest(const Eigen::VectorXd& p, const std::vector<Eigen::VectorXd>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : set) best = std::min(best, (p - q).squaredNorm());
    return std::sqrt(best);
}

}  // namespace

SupportReport stationary_support_check(const std::vector<Eigen::VectorXd>& occupation,
                                       const std::vector<Eigen::VectorXd>& cloud, double r) {
    SupportReport rep;
    if (!occupation.empty()) {
        std::size_t in = 0;
        for (const auto& p : occupation) in += nearest(p, cloud) <= r;
        rep.occupation_near_cloud = static_cast<double>(in) / static_cast<double>(occupation.size());
    }
    if (!cloud.empty()) {
        std::size_t in = 0;
        for (const auto& p : cloud) in += nearest(p, occupation) <= r;
        rep.cloud_near_occupation = static_cast<double>(in) / static_cast<double>(cloud.size());
    }
    return rep;
}

double directed_hausdorff(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b) {
    double d = 0.0;
    for (const auto& p : a) d = std::max(d, nearest(p, b));
    return d;
}

}  // namespace kickns
