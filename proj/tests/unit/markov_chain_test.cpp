#include <doctest.h>

#include "fixture.hpp"

#include <kickns/error.hpp>
#include <kickns/markov_chain.hpp>

#include <cmath>

using namespace kickns;
using kickns::test::Flow;

namespace {

const FeatureMap& features() {
    static const FeatureMap f(Flow::get().basis, 8);
    return f;
}

ChainConfig chain(std::size_t n, std::uint64_t seed) {
    ChainConfig c;
    c.length = n;
    c.seed = seed;
    return c;
}

const Trajectory& long_run(int which) {
    static const Trajectory a = run_chain(Flow::get().solver, features(), VelocityField(Flow::get().domain), chain(1000, 31));
    static const Trajectory b = run_chain(Flow::get().solver, features(), Flow::get().smooth(0.003, 9), chain(1000, 32));
    return which == 0 ? a : b;
}

}  // namespace

TEST_CASE("single step is one period with the first kick") {
    const Flow& f = Flow::get();
    const VelocityField u0 = f.smooth(1e-3, 1);
    const Trajectory t = run_chain(f.solver, features(), u0, chain(1, 5));
    REQUIRE(t.kicks.size() == 1);
    REQUIRE(t.states.size() == 2);
    Stream rng = chain_kick_stream(5, 0, 1);
    CHECK(t.kicks[0] == sample_kick(f.noise, rng));
    CHECK(t.states[1] == f.solver.solve_period(u0, t.kicks[0]));
    CHECK(t.norms.size() == 2);
    CHECK(t.features.size() == 2);
    CHECK(features().dimension() == 9);
}

TEST_CASE("trajectories are reproducible and replayable") {
    const Flow& f = Flow::get();
    const VelocityField u0 = f.smooth(2e-3, 2);
    ChainConfig c = chain(12, 6);
    c.thin = 1;
    const Trajectory a = run_chain(f.solver, features(), u0, c);
    const Trajectory b = run_chain(f.solver, features(), u0, c);
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t i = 0; i < a.states.size(); ++i) CHECK(a.states[i] == b.states[i]);
    CHECK(replay_error(f.solver, a) <= 1e-12);
    c.replicate = 1;
    CHECK_FALSE(run_chain(f.solver, features(), u0, c).states.back() == a.states.back());

    c.replicate = 0;
    c.thin = 0;
    const Trajectory ends = run_chain(f.solver, features(), u0, c);
    CHECK(ends.states.size() == 2);
    CHECK(ends.states.back() == a.states.back());
}

TEST_CASE("zero noise decays like the unforced iterates") {
    const Flow& f = Flow::get();
    const VelocityField u0 = f.smooth(1e-2, 3);
    ChainConfig c = chain(6, 7);
    c.zero_noise = true;
    const Trajectory t = run_chain(f.solver, features(), u0, c);
    VelocityField u = u0;
    for (std::size_t k = 1; k <= 6; ++k) {
        u = f.solver.solve_period(u, KickRealization::zero(f.noise.modes()));
        CHECK(t.norms[k] == l2_norm(u));
        CHECK(t.norms[k] < t.norms[k - 1]);
    }
    const double ratio = t.norms[6] / t.norms[5];
    CHECK(ratio < 0.2);
    CHECK(t.norms[5] / t.norms[4] == doctest::Approx(ratio).epsilon(0.05));
}

TEST_CASE("occupation measures") {
    const Flow& f = Flow::get();
    FeatureBinning coarse{2, 4, 0.004};
    SUBCASE("constant trajectory is a point mass") {
        ChainConfig c = chain(20, 8);
        c.zero_noise = true;
        const Trajectory t = run_chain(f.solver, features(), VelocityField(f.domain), c);
        const OccupationMeasure m = occupation_measure(t, coarse);
        CHECK(m.count == 20);
        CHECK(m.histogram.size() == 1);
        CHECK(m.histogram.begin()->second == 1.0);
        CHECK(m.mean.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("concatenation is the length-weighted mixture") {
        const Trajectory a = run_chain(f.solver, features(), f.smooth(1e-3, 4), chain(7, 9));
        const Trajectory b = run_chain(f.solver, features(), f.smooth(1e-3, 5), chain(4, 10));
        const OccupationMeasure ma = occupation_measure(a, coarse), mb = occupation_measure(b, coarse);
        std::vector<Eigen::VectorXd> joined(a.features.begin(), a.features.end() - 1);
        joined.insert(joined.end(), b.features.begin(), b.features.end() - 1);
        const OccupationMeasure direct = OccupationMeasure::from_points(joined, coarse);
        const OccupationMeasure mix = mixture(ma, mb);
        CHECK(mix.count == 11);
        CHECK(total_variation(mix.histogram, direct.histogram) <= 1e-12);
        CHECK((mix.mean - direct.mean).cwiseAbs().maxCoeff() <= 1e-12 * direct.mean.cwiseAbs().maxCoeff() + 1e-30);
        CHECK((mix.second_moment - direct.second_moment).cwiseAbs().maxCoeff() <=
              1e-12 * direct.second_moment.cwiseAbs().maxCoeff());
        double mass = 0.0;
        for (const auto& [bin, p] : mix.histogram) mass += p;
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("long runs from different initial states agree") {
        const OccupationMeasure a = occupation_measure(long_run(0), coarse);
        const OccupationMeasure b = occupation_measure(long_run(1), coarse);
        const double tv = total_variation(a.histogram, b.histogram);
        MESSAGE("coarse-histogram total variation " << tv);
        CHECK(tv <= 0.15);
    }
}

TEST_CASE("feature binning") {
    FeatureBinning b{2, 4, 1.0};
    Eigen::VectorXd x(3);
    x << -5.0, 0.1, 7.0;
    CHECK(b.bin_of(x) == std::vector<int>{0, 2});
    x << 0.99, 1e9, 0.0;
    CHECK(b.bin_of(x) == std::vector<int>{3, 3});
    CHECK(b.centre(0) == doctest::Approx(-0.75));
    SparseHistogram p{{{0}, 0.5}, {{1}, 0.5}}, q{{{1}, 1.0}};
    CHECK(total_variation(p, q) == doctest::Approx(0.5));
    CHECK(total_variation(q, q) == 0.0);
}

TEST_CASE("controllability to the zero state") {
    const Flow& f = Flow::get();
    CHECK(check_controllability(f.solver, VelocityField(f.domain), 1e-6).steps == 0);
    const VelocityField v = f.smooth(1.0, 11);
    CHECK(check_controllability(f.solver, v, 2.0).steps == 0);
    const ControllabilityResult r = check_controllability(f.solver, v, 0.1);
    CHECK(r.steps <= 5);
    CHECK(r.steps <= controllability_bound(1.0, 0.1, 0.5));
    CHECK(r.norms.size() == static_cast<std::size_t>(r.steps + 1));
    CHECK(r.norms.back() <= 0.1);
    CHECK_THROWS_AS(check_controllability(f.solver, v, 1e-300, 3), ControllabilityFailure);
    CHECK(controllability_bound(1.0, 0.1, 0.5) == 4);
    CHECK(controllability_bound(1.0, 2.0, 0.5) == 0);
}

TEST_CASE("attainability clouds") {
    const Flow& f = Flow::get();
    AttainabilityOptions o;
    o.depth = 0;
    const AttainabilityCloud c0 = attainability_sample(f.solver, features(), o);
    CHECK(c0.states.size() == 1);
    CHECK(c0.states[0].is_zero());

    o.depth = 6;
    o.per_level = 12;
    o.seed = 3;
    const AttainabilityCloud c = attainability_sample(f.solver, features(), o);
    CHECK(c.size_at(0) == 1);
    CHECK(c.size_at(1) == 13);
    CHECK(c.size_at(6) == c.states.size());
    // The zero kick from the zero state reproduces S(0, 0) = 0 at depth 1.
    bool has_zero = false;
    for (std::size_t i = 1; i < c.size_at(1); ++i) has_zero = has_zero || c.states[i].is_zero();
    CHECK(has_zero);
    // Nesting: every level contains the previous one.
    for (std::size_t i = 1; i < c.level.size(); ++i) CHECK(c.level[i] >= c.level[i - 1]);
    CHECK(c.diameter() > 0.0);
}

TEST_CASE("attainability clouds approach the long-run occupation") {
    const Flow& f = Flow::get();
    AttainabilityOptions o;
    o.depth = 20;
    o.per_level = 50;
    o.seed = 4;
    const AttainabilityCloud c = attainability_sample(f.solver, features(), o);
    const auto& occ = long_run(0).features;
    auto depth_cloud = [&](int k) {
        return std::vector<Eigen::VectorXd>(c.features.begin(),
                                            c.features.begin() + static_cast<std::ptrdiff_t>(c.size_at(k)));
    };
    const double h5 = directed_hausdorff(occ, depth_cloud(5));
    const double h10 = directed_hausdorff(occ, depth_cloud(10));
    const double h20 = directed_hausdorff(occ, depth_cloud(20));
    MESSAGE("Hausdorff distances " << h5 << " " << h10 << " " << h20);
    CHECK(h10 <= h5);
    CHECK(h20 <= h10);
    CHECK(h20 < h5);

    const double bin_width = 2.0 * 0.004 / 16.0;
    const SupportReport s = stationary_support_check(occ, c.features, bin_width);
    MESSAGE("support fractions " << s.occupation_near_cloud << " " << s.cloud_near_occupation);
    CHECK(s.occupation_near_cloud >= 0.95);
    CHECK(s.cloud_near_occupation >= 0.95);

    const SupportReport self = stationary_support_check(occ, occ, 0.0);
    CHECK(self.occupation_near_cloud == 1.0);
    CHECK(self.cloud_near_occupation == 1.0);
    const SupportReport wide = stationary_support_check(occ, c.features, 1e300);
    CHECK(wide.occupation_near_cloud == 1.0);
    CHECK(wide.cloud_near_occupation == 1.0);
}

TEST_CASE("irreducibility estimates") {
    const Flow& f = Flow::get();
    const VelocityField zero(f.domain);
    CHECK(estimate_irreducibility(f.solver, zero, zero, 1, 1.0, 40, 1).estimate == 1.0);
    CHECK(estimate_irreducibility(f.solver, zero, zero, 1, 0.0, 40, 1).estimate == 0.0);
    AttainabilityOptions o;
    o.depth = 5;
    o.per_level = 10;
    o.seed = 5;
    const AttainabilityCloud c = attainability_sample(f.solver, features(), o);
    const double r = 0.1 * c.diameter();
    const ProbabilityEstimate p = estimate_irreducibility(f.solver, c.states[20], c.states[45], 3, r, 60, 2);
    CHECK(p.lower > 0.0);
}
