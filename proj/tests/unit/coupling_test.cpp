#include <doctest.h>

#include "fixture.hpp"

#include <kickns/coupling.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace kickns;
using kickns::test::Flow;

namespace {

std::pair<VelocityField, VelocityField> pair_at(double d, std::uint64_t seed) {
    const Flow& f = Flow::get();
    const VelocityField u0 = f.smooth(2e-3, seed);
    VelocityField delta = f.smooth(1.0, seed + 1000);
    delta *= d / l2_norm(delta);
    return {u0, u0 + delta};
}

std::vector<Eigen::VectorXd> cloud(int n, int dim, Stream& rng) {
    std::vector<Eigen::VectorXd> c;
    for (int i = 0; i < n; ++i) c.push_back(Eigen::VectorXd::NullaryExpr(dim, [&] { return rng.uniform(); }));
    return c;
}

// Minimum mismatch count over all permutations.
std::size_t brute_force_mismatches(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b, double eps) {
    std::vector<int> perm(a.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = a.size();
    do {
        std::size_t miss = 0;
        for (std::size_t i = 0; i < a.size(); ++i) miss += (a[i] - b[static_cast<std::size_t>(perm[i])]).norm() > eps;
        best = std::min(best, miss);
    } while (best > 0 && std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST_CASE("smooth cutoff") {
    CHECK(smooth_cutoff(0.0, 1.0, 2.0) == 1.0);
    CHECK(smooth_cutoff(1.0, 1.0, 2.0) == 1.0);
    CHECK(smooth_cutoff(2.0, 1.0, 2.0) == 0.0);
    CHECK(smooth_cutoff(5.0, 1.0, 2.0) == 0.0);
    double prev = 1.0;
    for (double s = 1.0; s <= 2.0; s += 0.05) {
        const double v = smooth_cutoff(s, 1.0, 2.0);
        CHECK(v <= prev);
        CHECK(v >= 0.0);
        prev = v;
    }
}

TEST_CASE("control map") {
    const Flow& f = Flow::get();
    CouplingConfig cfg;
    Stream rng(41, 0);
    const KickRealization h = sample_kick(f.noise, rng);
    SUBCASE("equal states need no correction") {
        const auto [u0, u0p] = pair_at(1e-3, 1);
        const ControlResult r = control_map_phi(f.solver, u0, u0, h, cfg);
        CHECK(r.w.cwiseAbs().maxCoeff() == 0.0);
        CHECK(r.residual == 0.0);
    }
    SUBCASE("residual at gap 1e-3 is verified by re-solving") {
        const auto [u0, u0p] = pair_at(1e-3, 2);
        const ControlResult r = control_map_phi(f.solver, u0, u0p, h, cfg);
        KickRealization hw = h;
        hw.xi.head(cfg.control_modes) += r.w;
        const double post = l2_distance(f.solver.solve_period(u0p, hw), f.solver.solve_period(u0, h));
        CHECK(post == doctest::Approx(r.residual).epsilon(1e-12));
        CHECK(r.residual <= 5e-4 * cfg.q);
        CHECK(r.residual <= r.uncontrolled);
        CHECK(r.contracted);
    }
    SUBCASE("empty control space") {
        CouplingConfig none = cfg;
        none.control_modes = 0;
        const auto [u0, u0p] = pair_at(1e-3, 3);
        const ControlResult r = control_map_phi(f.solver, u0, u0p, h, none);
        CHECK(r.w.size() == 0);
        CHECK(r.residual == r.uncontrolled);
        CHECK(r.uncontrolled == doctest::Approx(l2_distance(f.solver.solve_period(u0p, h), f.solver.solve_period(u0, h))));
    }
}

TEST_CASE("Psi transform") {
    const Flow& f = Flow::get();
    CouplingConfig cfg;
    Stream rng(42, 0);
    const KickRealization h = sample_kick(f.noise, rng);
    const auto [u0, u0p] = pair_at(5e-3, 4);
    SUBCASE("identity for equal states") {
        const PsiResult p = psi_transform(f.solver, h, u0, u0, cfg);
        CHECK(p.zeta == h);
        CHECK(p.jacobian_det == 1.0);
    }
    SUBCASE("identity beyond the cutoff") {
        CouplingConfig tight = cfg;
        tight.cutoff_inner = 1e-9;
        tight.cutoff_outer = 2e-9;
        const PsiResult p = psi_transform(f.solver, h, u0, u0p, tight);
        CHECK(p.cutoff == 0.0);
        CHECK(p.zeta == h);
    }
    SUBCASE("only the controlled coefficients move") {
        const PsiResult p = psi_transform(f.solver, h, u0, u0p, cfg);
        const int m = cfg.control_modes;
        CHECK(p.zeta.xi.tail(f.noise.modes() - m) == h.xi.tail(f.noise.modes() - m));
        CHECK((p.zeta.xi.head(m) - h.xi.head(m)).cwiseAbs().maxCoeff() > 0.0);
        CHECK(p.jacobian_det > 0.0);
    }
}

TEST_CASE("coupled step") {
    const Flow& f = Flow::get();
    CouplingConfig cfg;
    SUBCASE("equal states stay equal") {
        const auto [u0, u0p] = pair_at(1e-3, 5);
        Stream rng(43, 0);
        const CouplingPair cp = couple_step(f.solver, u0, u0, cfg, rng);
        CHECK(cp.xi == cp.xip);
        CHECK(cp.u1 == cp.u1p);
        CHECK(cp.identified);
    }
    SUBCASE("far states get independent kicks") {
        const auto [u0, u0p] = pair_at(0.05, 6);
        Stream rng(43, 1);
        const CouplingPair cp = couple_step(f.solver, u0, u0p, cfg, rng);
        CHECK_FALSE(cp.coupled_branch);
        CHECK_FALSE(cp.identified);
        CHECK_FALSE(cp.xi == cp.xip);
    }
    SUBCASE("identified close pairs contract") {
        for (std::uint64_t i = 0; i < 3; ++i) {
            const auto [u0, u0p] = pair_at(5e-3, 10 + i);
            Stream rng(43, 10 + i);
            const CouplingPair cp = couple_step(f.solver, u0, u0p, cfg, rng);
            CHECK(cp.coupled_branch);
            if (cp.identified) {
                const double pre = l2_distance(u0, u0p), post = l2_distance(cp.u1, cp.u1p);
                CHECK(post <= 0.5 * cfg.q * pre + cp.control_residual + 1e-15);
            }
        }
    }
}

TEST_CASE("contraction table") {
    const Flow& f = Flow::get();
    const PairSampler pairs = [](double d, std::size_t i) { return pair_at(d, 200 + i); };
    CouplingConfig easy;
    easy.q = 1.0 - 1e-9;
    CHECK(verify_contraction(f.solver, {0.01}, easy, 0, pairs, 1).empty());
    const auto rows = verify_contraction(f.solver, {0.01, 0.005}, easy, 6, pairs, 1);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.n_mc == 6);
        CHECK(r.failures == 0);
        CHECK(r.frequency == 0.0);
        CHECK(r.ratio_lower == 0.0);
        CHECK(r.ratio_upper > 0.0);
        CHECK(r.identified_within <= r.identified);
    }
}

TEST_CASE("empirical K_eps distance") {
    Stream rng(44, 0);
    const auto a = cloud(40, 3, rng);
    const auto b = cloud(40, 3, rng);
    CHECK(k_eps_distance(a, a, 0.0) == 0.0);
    CHECK(k_eps_distance(a, b, 0.0) == 1.0);
    CHECK(k_eps_distance(a, b, 10.0) == 0.0);
    double prev = 1.0;
    for (double eps = 0.0; eps <= 1.0; eps += 0.05) {
        const double k = k_eps_distance(a, b, eps);
        CHECK(k <= prev);
        CHECK(k >= 0.0);
        CHECK(k == k_eps_distance(b, a, eps));
        prev = k;
    }
    for (int trial = 0; trial < 6; ++trial) {
        const auto x = cloud(10, 2, rng), y = cloud(10, 2, rng);
        for (double eps : {0.1, 0.25, 0.4})
            CHECK(std::lround(10.0 * k_eps_distance(x, y, eps)) == static_cast<long>(brute_force_mismatches(x, y, eps)));
    }
    const Flow& flow = Flow::get();
    const std::vector<VelocityField> fa{flow.smooth(1.0, 1), flow.smooth(1.0, 2)};
    CHECK(k_eps_distance(fa, fa, 0.0) == 0.0);
}

TEST_CASE("Hopcroft-Karp matching sizes") {
    CHECK(hopcroft_karp({}, 0) == 0);
    CHECK(hopcroft_karp({{0}, {0}, {0}}, 1) == 1);
    CHECK(hopcroft_karp({{0, 1}, {0}, {1, 2}}, 3) == 3);
    // Needs one augmenting path through an already matched vertex.
    CHECK(hopcroft_karp({{0}, {0, 1}}, 2) == 2);
    CHECK(hopcroft_karp({{}, {}, {1}}, 3) == 1);
    // Complete bipartite graph K_{5,7}.
    std::vector<std::vector<int>> full(5, {0, 1, 2, 3, 4, 5, 6});
    CHECK(hopcroft_karp(full, 7) == 5);
}
