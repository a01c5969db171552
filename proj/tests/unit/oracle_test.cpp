#include <doctest.h>

#include <kickns/error.hpp>
#include <kickns/oracle.hpp>

#include <cmath>
#include <sstream>

using namespace kickns;

namespace {

FiniteChain five_state() { return read_chain(KICKNS_DATA_DIR "/five_state.chain"); }

Eigen::VectorXd random_vector(int n, Stream& rng, double scale = 1.0) {
    return Eigen::VectorXd::NullaryExpr(n, [&] { return scale * (2.0 * rng.uniform() - 1.0); });
}

}  // namespace

TEST_CASE("chain validation") {
    Eigen::MatrixXd p(2, 2);
    p << 0.5, 0.5, 0.2, 0.8;
    CHECK(FiniteChain(p).irreducible());
    Eigen::MatrixXd neg = p;
    neg(0, 0) = -0.1;
    neg(0, 1) = 1.1;
    CHECK_THROWS_AS(FiniteChain{neg}, InputError);
    Eigen::MatrixXd off = p;
    off(1, 1) = 0.8 + 1e-9;
    CHECK_THROWS_AS(FiniteChain{off}, InputError);
    Eigen::MatrixXd red(3, 3);
    red << 1.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5;
    CHECK_FALSE(FiniteChain(red).irreducible());
    CHECK_THROWS_AS(FiniteChain(red, {}, std::nullopt, true), InputError);
    CHECK_THROWS_AS(exact_Q(FiniteChain(red), Eigen::Vector3d(0.1, 0.2, 0.3)), InputError);
    CHECK(FiniteChain(p).distance(0, 1) == 1.0);
}

TEST_CASE("chain file round trip") {
    const FiniteChain c = five_state();
    CHECK(c.size() == 5);
    REQUIRE(c.potential().has_value());
    CHECK(c.irreducible());
    std::stringstream ss;
    write_chain(ss, c);
    const FiniteChain back = parse_chain(ss);
    CHECK(back.matrix() == c.matrix());
    CHECK(back.coordinates() == c.coordinates());
    CHECK(*back.potential() == *c.potential());

    std::istringstream bad("states 2\n0.5 0.5\n0.5\n");
    CHECK_THROWS_AS(parse_chain(bad), InputError);
    std::istringstream junk("# only a comment\n");
    CHECK_THROWS_AS(parse_chain(junk), InputError);
    std::istringstream embedded("states 2 dim 2\n1 0\n0.3 0.7\ncoords\n0 0\n3 4\n");
    CHECK(parse_chain(embedded).distance(0, 1) == doctest::Approx(5.0));
}

TEST_CASE("exact Feynman-Kac recursion") {
    Stream rng(51, 0);
    const FiniteChain c = random_chain(3, rng);
    const Eigen::VectorXd v = random_vector(3, rng), f = random_vector(3, rng);
    CHECK(exact_fk_apply(c, v, f, 0) == f);
    for (int n : {1, 5, 20}) {
        const Eigen::VectorXd ones = exact_fk_apply(c, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3), n);
        CHECK((ones.array() - 1.0).abs().maxCoeff() <= 1e-12);
    }
    const Eigen::VectorXd mat = exact_fk_apply(c, v, f, 7);
    const Eigen::VectorXd paths = enumerate_fk_paths(c, v, f, 7);
    CHECK((mat - paths).cwiseAbs().maxCoeff() <= 1e-12 * mat.cwiseAbs().maxCoeff());
    // Semigroup law.
    const Eigen::VectorXd two_step = exact_fk_apply(c, v, exact_fk_apply(c, v, f, 4), 3);
    CHECK((two_step - mat).cwiseAbs().maxCoeff() <= 1e-12 * mat.cwiseAbs().maxCoeff());
}

TEST_CASE("exact Q") {
    Stream rng(52, 0);
    const FiniteChain c = random_chain(5, rng);
    const Eigen::VectorXd v = random_vector(5, rng);
    CHECK(exact_Q(c, Eigen::VectorXd::Constant(5, -0.3)) == -0.3);

    SUBCASE("power-iteration limit") {
        // log(B_501 1 / B_500 1) converges to Q geometrically.
        Eigen::VectorXd b = Eigen::VectorXd::Ones(5);
        const Eigen::MatrixXd w = weighted_matrix(c, v);
        double increment = 0.0;
        for (int n = 1; n <= 501; ++n) {
            const Eigen::VectorXd next = w * b;
            increment = std::log(next[0] / b[0]);
            b = next / next.maxCoeff();
        }
        CHECK(std::abs(exact_Q(c, v) - increment) <= 1e-8);
    }
    SUBCASE("invariant under relabeling") {
        Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
        perm.indices() << 3, 0, 4, 1, 2;
        const Eigen::MatrixXd pp = perm * c.matrix() * perm.transpose();
        const FiniteChain relabeled(pp);
        CHECK(exact_Q(relabeled, perm * v) == doctest::Approx(exact_Q(c, v)).epsilon(1e-12));
    }
    SUBCASE("convex and monotone in V") {
        for (int k = 0; k < 50; ++k) {
            const Eigen::VectorXd a = random_vector(5, rng), b = random_vector(5, rng);
            CHECK(exact_Q(c, 0.5 * (a + b)) <= 0.5 * (exact_Q(c, a) + exact_Q(c, b)) + 1e-10);
            const Eigen::VectorXd above = a.array() + b.array().abs();
            CHECK(exact_Q(c, above) >= exact_Q(c, a) - 1e-12);
        }
    }
    CHECK(exact_Q(c, v.array() + 0.8) == doctest::Approx(exact_Q(c, v) + 0.8).epsilon(1e-12));
}

TEST_CASE("eigen triple") {
    const FiniteChain c = five_state();
    SUBCASE("zero potential") {
        const EigenTriple t = exact_eigen_triple(c, Eigen::VectorXd::Zero(5));
        CHECK(t.lambda == doctest::Approx(1.0).epsilon(1e-12));
        CHECK((t.h.array() - 1.0).abs().maxCoeff() <= 1e-10);
        CHECK((t.mu - stationary_distribution(c)).cwiseAbs().maxCoeff() <= 1e-12);
    }
    const Eigen::VectorXd v = *c.potential();
    const EigenTriple t = exact_eigen_triple(c, v);
    CHECK(t.mu.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(t.h.dot(t.mu) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(t.h.minCoeff() > 0.0);
    CHECK(t.mu.minCoeff() > 0.0);
    CHECK(t.subdominant < t.lambda);
    const Eigen::MatrixXd w = weighted_matrix(c, v);
    CHECK((w * t.h - t.lambda * t.h).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((t.mu.transpose() * w - t.lambda * t.mu.transpose()).cwiseAbs().maxCoeff() <= 1e-12);

    SUBCASE("shift scales lambda only") {
        const EigenTriple s = exact_eigen_triple(c, v.array() + 0.5);
        CHECK(s.lambda == doctest::Approx(t.lambda * std::exp(0.5)).epsilon(1e-12));
        CHECK((s.h - t.h).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((s.mu - t.mu).cwiseAbs().maxCoeff() <= 1e-10);
    }
    SUBCASE("geometric convergence of the normalized semigroup") {
        const Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0);
        const auto err = eigen_triple_errors(c, v, f, 50);
        REQUIRE(err.size() == 51);
        const double ratio = fitted_geometric_ratio(err);
        CHECK(ratio < 1.0);
        CHECK(err.back() <= 1e-8 * err.front());
        // The fitted ratio tracks the spectral gap.
        CHECK(ratio == doctest::Approx(t.subdominant / t.lambda).epsilon(0.2));
    }
    Eigen::MatrixXd two(2, 2);
    two << 0.0, 1.0, 1.0, 0.0;
    // A periodic chain keeps a simple Perron root but has no spectral gap.
    const EigenTriple periodic = exact_eigen_triple(FiniteChain(two), Eigen::Vector2d(0.0, 0.0));
    CHECK(periodic.subdominant == doctest::Approx(periodic.lambda).epsilon(1e-12));
}

TEST_CASE("fitted geometric ratio") {
    std::vector<double> e;
    for (int k = 0; k < 30; ++k) e.push_back(3.0 * std::pow(0.6, k));
    CHECK(fitted_geometric_ratio(e) == doctest::Approx(0.6).epsilon(1e-12));
    e.push_back(0.0);
    CHECK(fitted_geometric_ratio(e) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("exact rate function") {
    const FiniteChain c = five_state();
    const Eigen::VectorXd pi = stationary_distribution(c);
    CHECK((pi.transpose() * c.matrix() - pi.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(pi.sum() == doctest::Approx(1.0).epsilon(1e-15));

    std::vector<std::vector<double>> axes(5, {-1.0, 0.0, 1.0});
    const auto grid = potential_grid(axes);
    CHECK(grid.size() == 243);
    const ExactRate at_pi = exact_rate_function(c, pi, grid);
    CHECK(at_pi.value >= 0.0);
    CHECK(at_pi.value <= 1e-8);

    Eigen::MatrixXd p(2, 2);
    p << 0.3, 0.7, 0.6, 0.4;
    const FiniteChain two(p);
    std::vector<double> fine, coarse;
    for (int k = 0; k <= 400; ++k) fine.push_back(-40.0 + 0.1 * k);
    for (int k = 0; k <= 200; ++k) coarse.push_back(-40.0 + 0.2 * k);
    const Eigen::Vector2d mass(1.0, 0.0);
    const ExactRate rf = exact_rate_function(two, mass, potential_grid({{0.0}, fine}));
    const ExactRate rc = exact_rate_function(two, mass, potential_grid({{0.0}, coarse}));
    CHECK(point_mass_rate(two, 0) == doctest::Approx(-std::log(0.3)).epsilon(1e-15));
    CHECK(std::abs(rf.value - point_mass_rate(two, 0)) <= 1e-6);
    CHECK(rf.value >= rc.value);
}

TEST_CASE("exact uniform Feller ratios") {
    const FiniteChain c = five_state();
    const Eigen::VectorXd v = *c.potential();
    const Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(5, 0.0, 1.0);
    const auto rows = exact_ufp(c, v, f, {{0, 1}, {0, 4}, {2, 3}}, 100);
    REQUIRE(rows.size() == 100);
    double m50 = 0.0, m100 = 0.0;
    for (const auto& r : rows) {
        if (r.n <= 50) m50 = std::max(m50, r.ratio);
        m100 = std::max(m100, r.ratio);
        CHECK(std::isfinite(r.log_norm_one));
    }
    CHECK(m100 <= 1.1 * m50);
    // Direct evaluation at small n.
    const Eigen::VectorXd b3 = exact_fk_apply(c, v, f, 3), one3 = exact_fk_apply(c, v, Eigen::VectorXd::Ones(5), 3);
    const double direct = std::max({std::abs(b3[0] - b3[1]) / 1.0, std::abs(b3[0] - b3[4]) / 4.0, std::abs(b3[2] - b3[3])}) /
                          one3.maxCoeff();
    CHECK(rows[2].ratio == doctest::Approx(direct).epsilon(1e-12));
}
