#include "kickns/coupling.hpp"

#include "kickns/error.hpp"
#include "kickns/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace kickns {

double smooth_cutoff(double s, double inner, double outer) noexcept {
    if (s <= inner) return 1.0;
    if (s >= outer) return 0.0;
    auto g = [](double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; };
    const double t = (s - inner) / (outer - inner);
    return g(1.0 - t) / (g(1.0 - t) + g(t));
}

namespace {

// Field as an L2-weighted flat vector, so Euclidean norms are discrete L2 norms.
Eigen::VectorXd flatten(const VelocityField& f) {
    const auto u = f.u_values();
    const auto v = f.v_values();
    Eigen::VectorXd x(static_cast<Eigen::Index>(u.size() + v.size()));
    const double w = std::sqrt(f.domain().cell_area());
    Eigen::Index k = 0;
    for (double a : u) x[k++] = w * a;
    for (double a : v) x[k++] = w * a;
    return x;
}

Eigen::MatrixXd forward_differences(const NavierStokesSolver& solver, const VelocityField& u, const KickRealization& h,
                                    const Eigen::VectorXd& base, int m, double step) {
    Eigen::MatrixXd jac(base.size(), m);
    for (int j = 0; j < m; ++j) {
        KickRealization hj = h;
        hj.xi[j] += step;
        jac.col(j) = (flatten(solver.solve_period(u, hj)) - base) / step;
    }
    return jac;
}

// Truncated-SVD pseudoinverse.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a, double cutoff) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    const double smax = s.size() > 0 ? s[0] : 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k)
        if (s[k] > cutoff * smax && s[k] > 0.0) inv[k] = 1.0 / s[k];
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

double log_density_ratio(const CoefficientDensity& rho, const Eigen::VectorXd& num, const Eigen::VectorXd& den, int m) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += rho.log_pdf(num[j]) - rho.log_pdf(den[j]);
    return s;
}

}  // namespace

ControlResult control_map_phi(const NavierStokesSolver& solver, const VelocityField& u0, const VelocityField& u0p,
                              const KickRealization& h, const CouplingConfig& cfg) {
    const int m = std::clamp(cfg.control_modes, 0, solver.noise().modes());
    ControlResult r{Eigen::VectorXd::Zero(m), 0.0, 0.0, false, 0, 0, {}, VelocityField(solver.domain()),
                    VelocityField(solver.domain())};
    const double gap = l2_distance(u0, u0p);
    r.target = solver.solve_period(u0, h);
    r.controlled = gap == 0.0 ? r.target : solver.solve_period(u0p, h);
    r.periods = gap == 0.0 ? 1 : 2;
    r.uncontrolled = l2_distance(r.controlled, r.target);
    r.residual = r.uncontrolled;
    r.contracted = r.residual <= 0.5 * cfg.q * gap;
    if (m == 0 || gap == 0.0) return r;

    const Eigen::VectorXd target = flatten(r.target);
    const Eigen::VectorXd base = flatten(r.controlled);
    r.jacobian = forward_differences(solver, u0p, h, base, m, cfg.fd_step);
    r.periods += m;
    const Eigen::MatrixXd pinv = pseudo_inverse(r.jacobian, cfg.svd_cutoff);

    Eigen::VectorXd residual = base - target;
    for (int it = 0; it < cfg.gauss_newton_iterations; ++it) {
        const Eigen::VectorXd w = r.w - pinv * residual;
        KickRealization hw = h;
        hw.xi.head(m) += w;
        VelocityField out = solver.solve_period(u0p, hw);
        ++r.periods;
        const Eigen::VectorXd res = flatten(out) - target;
        const double norm = res.norm();
        if (!(norm < r.residual)) break;  // chord step stalled; keep the previous iterate
        r.w = w;
        r.residual = norm;
        r.controlled = std::move(out);
        residual = res;
        r.iterations = it + 1;
        if (norm <= cfg.gauss_newton_tolerance * r.uncontrolled) break;
    }
    r.contracted = r.residual <= 0.5 * cfg.q * gap;
    return r;
}

PsiResult psi_transform(const NavierStokesSolver& solver, const KickRealization& h, const VelocityField& u0,
                        const VelocityField& u0p, const CouplingConfig& cfg) {
    const NoiseModel& noise = solver.noise();
    const int m = std::clamp(cfg.control_modes, 0, noise.modes());
    const double inner = cfg.cutoff_inner > 0.0 ? cfg.cutoff_inner : noise.b_trunc();
    const double outer = cfg.cutoff_outer > inner ? cfg.cutoff_outer : inner + 1.0;
    const double s = kick_h1_norm(noise, h);
    const double cutoff = smooth_cutoff(s, inner, outer);
    CouplingConfig active = cfg;
    if (cutoff == 0.0 || u0 == u0p) active.control_modes = 0;
    PsiResult out{h, 1.0, cutoff, control_map_phi(solver, u0, u0p, h, active)};
    if (m == 0 || active.control_modes == 0) return out;
    out.zeta.xi.head(m) += out.cutoff * out.control.w;
    if (out.cutoff < 1.0) {
        out.control.controlled = solver.solve_period(u0p, out.zeta);
        ++out.control.periods;
    }
    if (cfg.jacobian_correction && out.control.jacobian.size() > 0) {
        // D Psi on the controlled block: I + rho dw/dxi + w (grad rho)^T, with
        // dw/dxi = -J'^+ (J' - J0) from the linearised least-squares problem.
        const Eigen::VectorXd target = flatten(out.control.target);
        const Eigen::MatrixXd j0 = forward_differences(solver, u0, h, target, m, cfg.fd_step);
        out.control.periods += m;
        const Eigen::MatrixXd pinv = pseudo_inverse(out.control.jacobian, cfg.svd_cutoff);
        const Eigen::MatrixXd dw = -pinv * (out.control.jacobian - j0);
        Eigen::MatrixXd dpsi = Eigen::MatrixXd::Identity(m, m) + out.cutoff * dw;
        if (out.cutoff < 1.0 && s > 0.0) {
            const double ds = 1e-6 * std::max(1.0, s);
            const double drho = (smooth_cutoff(s + ds, inner, outer) - smooth_cutoff(s - ds, inner, outer)) / (2.0 * ds);
            const Eigen::Map<const Eigen::VectorXd> b(noise.amplitudes().data(), noise.modes());
            const Eigen::VectorXd c = h.xi.cwiseProduct(b);
            const Eigen::VectorXd grad_s = (noise.h1_gram() * c).cwiseProduct(b) / s;
            dpsi += out.control.w * (drho * grad_s.head(m)).transpose();
        }
        out.jacobian_det = std::abs(dpsi.determinant());
    }
    return out;
}

CouplingPair couple_step(const NavierStokesSolver& solver, const VelocityField& u0, const VelocityField& u0p,
                         const CouplingConfig& cfg, Stream& rng) {
    const NoiseModel& noise = solver.noise();
    const CoefficientDensity& rho = noise.density();
    const int m = std::clamp(cfg.control_modes, 0, noise.modes());
    CouplingPair p{VelocityField(solver.domain()), VelocityField(solver.domain()), false, false, {}, {}, 0.0, false, 0, false};
    const double gap = l2_distance(u0, u0p);
    p.xi = sample_kick(noise, rng);
    if (gap > cfg.threshold) {
        p.xip = sample_kick(noise, rng);
        p.u1 = solver.solve_period(u0, p.xi);
        p.u1p = solver.solve_period(u0p, p.xip);
        return p;
    }
    p.coupled_branch = true;
    if (gap == 0.0) {
        p.xip = p.xi;
        p.u1 = solver.solve_period(u0, p.xi);
        p.u1p = p.u1;
        p.identified = true;
        p.contracted = true;
        return p;
    }
    PsiResult psi = psi_transform(solver, p.xi, u0, u0p, cfg);
    p.control_residual = psi.control.residual;
    p.contracted = psi.control.contracted;
    p.u1 = psi.control.target;
    // Accept zeta = Psi(xi) with probability min(1, p(zeta) |det D Psi| / p(xi)).
    const double log_ratio = log_density_ratio(rho, psi.zeta.xi, p.xi.xi, m) + std::log(psi.jacobian_det);
    const double u = rng.uniform();
    if (std::log(u) < std::min(0.0, log_ratio)) {
        p.identified = true;
        p.xip = psi.zeta;
        p.u1p = std::move(psi.control.controlled);
        return p;
    }
    // Residual law (p - min(p, q~))_+ by rejection from lambda, with the
    // affine model q~(z) = p(z - rho w) / |det D Psi| on the first m modes.
    const Eigen::VectorXd shift = psi.zeta.xi - p.xi.xi;
    for (;;) {
        if (p.proposals >= cfg.rejection_cap) {
            p.capped = true;
            p.xip = sample_kick(noise, rng);
            break;
        }
        ++p.proposals;
        KickRealization cand = sample_kick(noise, rng);
        const Eigen::VectorXd pre = cand.xi - shift;
        const double lr = log_density_ratio(rho, pre, cand.xi, m) - std::log(psi.jacobian_det);
        const double accept = 1.0 - std::exp(std::min(0.0, lr));
        if (rng.uniform() < accept) {
            p.xip = std::move(cand);
            break;
        }
    }
    p.u1p = solver.solve_period(u0p, p.xip);
    return p;
}

std::vector<ContractionRow> verify_contraction(const NavierStokesSolver& solver, const std::vector<double>& d_list,
                                               const CouplingConfig& cfg, std::size_t n_mc, const PairSampler& pairs,
                                               std::uint64_t seed) {
    std::vector<ContractionRow> rows;
    if (n_mc == 0) return rows;
    for (std::size_t di = 0; di < d_list.size(); ++di) {
        const double d = d_list[di];
        std::vector<char> failed(n_mc, 0), ident(n_mc, 0), within(n_mc, 0);
        parallel_for(n_mc, [&](std::size_t i) {
            const auto [u0, u0p] = pairs(d, i);
            Stream rng = Stream::derive(seed, {stream_tag::coupling, di, i});
            const CouplingPair cp = couple_step(solver, u0, u0p, cfg, rng);
            const double pre = l2_distance(u0, u0p);
            const double post = l2_distance(cp.u1, cp.u1p);
            failed[i] = post > cfg.q * pre;
            ident[i] = cp.identified;
            within[i] = cp.identified && post <= (0.5 * cfg.q + 0.1) * pre;
        });
        ContractionRow row;
        row.d = d;
        row.q = cfg.q;
        row.n_mc = n_mc;
        row.failures = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
        row.identified = static_cast<std::size_t>(std::count(ident.begin(), ident.end(), 1));
        row.identified_within = static_cast<std::size_t>(std::count(within.begin(), within.end(), 1));
        const ProbabilityEstimate ci = wilson_interval(row.failures, n_mc);
        row.frequency = ci.estimate;
        row.ratio = ci.estimate / d;
        row.ratio_lower = ci.lower / d;
        row.ratio_upper = ci.upper / d;
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// K_eps

std::size_t hopcroft_karp(const std::vector<std::vector<int>>& adj, int right_count) {
    const int n = static_cast<int>(adj.size());
    constexpr int kFree = -1;
    constexpr int kInf = std::numeric_limits<int>::max();
    std::vector<int> match_l(static_cast<std::size_t>(n), kFree), match_r(static_cast<std::size_t>(right_count), kFree);
    std::vector<int> dist(static_cast<std::size_t>(n));
    std::vector<std::size_t> it(static_cast<std::size_t>(n));

    auto bfs = [&]() {
        std::queue<int> queue;
        bool found = false;
        for (int l = 0; l < n; ++l) {
            if (match_l[static_cast<std::size_t>(l)] == kFree) {
                dist[static_cast<std::size_t>(l)] = 0;
                queue.push(l);
            } else {
                dist[static_cast<std::size_t>(l)] = kInf;
            }
        }
        while (!queue.empty()) {
            const int l = queue.front();
            queue.pop();
            for (int r : adj[static_cast<std::size_t>(l)]) {
                const int next = match_r[static_cast<std::size_t>(r)];
                if (next == kFree) {
                    found = true;
                } else if (dist[static_cast<std::size_t>(next)] == kInf) {
                    dist[static_cast<std::size_t>(next)] = dist[static_cast<std::size_t>(l)] + 1;
                    queue.push(next);
                }
            }
        }
        return found;
    };

    // Iterative augmenting-path search along the BFS layers.
    auto dfs = [&](int root) {
        std::vector<int> stack{root};
        std::vector<int> via;  // right vertex used to reach stack[k + 1]
        while (!stack.empty()) {
            const int l = stack.back();
            auto& pos = it[static_cast<std::size_t>(l)];
            const auto& nb = adj[static_cast<std::size_t>(l)];
            bool advanced = false;
            while (pos < nb.size()) {
                const int r = nb[pos++];
                const int next = match_r[static_cast<std::size_t>(r)];
                if (next == kFree) {
                    // Augment along the stack.
                    int right = r;
                    for (std::size_t k = stack.size(); k-- > 0;) {
                        const int left = stack[k];
                        const int prev = match_l[static_cast<std::size_t>(left)];
                        match_l[static_cast<std::size_t>(left)] = right;
                        match_r[static_cast<std::size_t>(right)] = left;
                        right = prev;
                    }
                    return true;
                }
                if (dist[static_cast<std::size_t>(next)] == dist[static_cast<std::size_t>(l)] + 1) {
                    via.push_back(r);
                    stack.push_back(next);
                    advanced = true;
                    break;
                }
            }
            if (!advanced) {
                dist[static_cast<std::size_t>(l)] = kInf;
                stack.pop_back();
                if (!via.empty()) via.pop_back();
            }
        }
        return false;
    };

    std::size_t matching = 0;
    while (bfs()) {
        std::fill(it.begin(), it.end(), 0);
        for (int l = 0; l < n; ++l)
            if (match_l[static_cast<std::size_t>(l)] == kFree && dfs(l)) ++matching;
    }
    return matching;
}

double k_eps_from_distances(const Eigen::MatrixXd& dist, double eps) {
    if (dist.rows() != dist.cols()) throw InputError("coupling", "K_eps needs equal sample counts");
    const auto n = static_cast<int>(dist.rows());
    if (n == 0) return 0.0;
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (dist(i, j) <= eps) adj[static_cast<std::size_t>(i)].push_back(j);
    return 1.0 - static_cast<double>(hopcroft_karp(adj, n)) / n;
}

double k_eps_distance(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b, double eps) {
    if (a.size() != b.size()) throw InputError("coupling", "K_eps needs equal sample counts");
    const auto n = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd d(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) d(i, j) = (a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(j)]).norm();
    return k_eps_from_distances(d, eps);
}

double k_eps_distance(const std::vector<VelocityField>& a, const std::vector<VelocityField>& b, double eps) {
    if (a.size() != b.size()) throw InputError("coupling", "K_eps needs equal sample counts");
    const auto n = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd d(n, n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        for (Eigen::Index j = 0; j < n; ++j) d(static_cast<Eigen::Index>(i), j) = l2_distance(a[i], b[static_cast<std::size_t>(j)]);
    });
    return k_eps_from_distances(d, eps);
}

}  // namespace kickns
