#include "kickns_app/app.hpp"

#include <kickns/coupling.hpp>
#include <kickns/error.hpp>
#include <kickns/ldp_estimation.hpp>
#include <kickns/markov_chain.hpp>
#include <kickns/oracle.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>

namespace kickns::app {

using nlohmann::json;

namespace {

// Per-subcommand seed offsets so subcommands never share streams.
std::uint64_t sub_seed(const ExperimentConfig& c, std::uint64_t tag) { return stream_id({c.seed, tag}); }

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

template <typename T>
std::string str(T x) {
    if constexpr (std::is_floating_point_v<T>)
        return fmt(x);
    else
        return std::to_string(x);
}

struct Context {
    explicit Context(const ExperimentConfig& c)
        : cfg(c),
          noise(NoiseModel::build(c.noise)),
          solver(c.domain, noise, c.solver),
          basis(std::make_shared<StokesBasis>(stokes_basis(c.domain, c.basis_modes))),
          features(basis, c.chain.features),
          binning{c.chain.features, c.chain.bins, c.chain.range} {}

    const ExperimentConfig& cfg;
    NoiseModel noise;
    NavierStokesSolver solver;
    std::shared_ptr<const StokesBasis> basis;
    FeatureMap features;
    FeatureBinning binning;

    // States u_{warmup+1..warmup+count} of a chain started at rest.
    std::vector<VelocityField> warm_states(std::size_t count, std::size_t warmup, std::uint64_t seed) const {
        ChainConfig cc;
        cc.length = warmup + count;
        cc.thin = 1;
        cc.seed = seed;
        Trajectory t = run_chain(solver, features, VelocityField(cfg.domain), cc);
        return {t.states.begin() + static_cast<std::ptrdiff_t>(warmup + 1), t.states.end()};
    }

    // u + d e with e a smooth random unit direction.
    VelocityField perturbed(const VelocityField& u, double d, Stream& rng) const {
        VelocityField p = random_smooth_state(*basis, basis->size(), 1.0, rng);
        p *= d / l2_norm(p);
        p += u;
        return p;
    }

    std::vector<Potential> dictionary() const {
        return default_dictionary(features.dimension(), cfg.ldp.dictionary_coordinates, cfg.ldp.dictionary_radius,
                                  cfg.ldp.dictionary_scales);
    }
};

const Potential& pick(const std::vector<Potential>& dict, std::size_t index) {
    if (index >= dict.size())
        throw ConfigError("ldp.potential", "index " + std::to_string(index) + " outside the dictionary (size " +
                                               std::to_string(dict.size()) + ")");
    return dict[index];
}

FiniteChain oracle_chain(const ExperimentConfig& c) {
    std::filesystem::path p = c.oracle.chain;
    if (p.is_relative()) p = std::filesystem::path(c.base_dir) / p;
    return read_chain(p.string());
}

Eigen::VectorXd chain_potential(const FiniteChain& chain) {
    return chain.potential() ? *chain.potential() : Eigen::VectorXd::Zero(chain.size());
}

// ---------------------------------------------------------------------------

int simulate(const ExperimentConfig& c, Report& report, std::ostream& log) {
    Context ctx(c);
    const std::uint64_t seed = sub_seed(c, stream_tag::chain_kick);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<double, double>> norms;
    std::vector<OccupationMeasure> occ;
    double max_norm = 0.0;
    for (std::size_t r = 0; r < c.chain.replicates; ++r) {
        VelocityField u0(c.domain);
        if (c.chain.initial_radius > 0.0) {
            Stream rng = Stream::derive(seed, {stream_tag::misc, r});
            u0 = random_smooth_state(*ctx.basis, ctx.basis->size(), c.chain.initial_radius, rng);
        }
        ChainConfig cc;
        cc.length = c.chain.length;
        cc.thin = c.chain.thin;
        cc.seed = seed;
        cc.replicate = r;
        const Trajectory t = run_chain(ctx.solver, ctx.features, u0, cc);
        for (std::size_t k = 0; k < t.norms.size(); ++k) {
            std::vector<std::string> row{str(r), str(k), fmt(t.norms[k])};
            for (Eigen::Index i = 0; i < t.features[k].size(); ++i) row.push_back(fmt(t.features[k][i]));
            rows.push_back(std::move(row));
            max_norm = std::max(max_norm, t.norms[k]);
            if (r == 0) norms.emplace_back(static_cast<double>(k), t.norms[k]);
        }
        occ.push_back(occupation_measure(t, ctx.binning));
        if (r == 0) {
            write_snapshot(report.dir() / "final_state.knsf", t.states.back());
            report.artifact("final_state.knsf");
        }
    }
    std::vector<std::string> header{"replicate", "step", "norm"};
    for (int i = 0; i < c.chain.features; ++i) header.push_back("c" + std::to_string(i + 1));
    header.push_back("energy");
    report.table("trajectory.tsv", header, rows);
    report.series("norm_series.dat", "step", "norm", norms);

    OccupationMeasure all = occ.front();
    for (std::size_t r = 1; r < occ.size(); ++r) all = mixture(all, occ[r]);
    std::vector<std::vector<std::string>> hist;
    for (const auto& [bin, p] : all.histogram) hist.push_back({join(bin), fmt(p)});
    report.table("occupation.tsv", {"bin", "probability"}, hist);
    report.summary({{"length", c.chain.length},
                    {"replicates", c.chain.replicates},
                    {"max_norm", max_norm},
                    {"occupied_bins", all.histogram.size()},
                    {"feature_mean", std::vector<double>(all.mean.data(), all.mean.data() + all.mean.size())}});
    log << "simulate: " << c.chain.replicates << " x " << c.chain.length << " steps, max norm " << fmt(max_norm) << '\n';
    return exit_ok;
}

int dissipation(const ExperimentConfig& c, Report& report, std::ostream& log) {
    Context ctx(c);
    const std::uint64_t seed = sub_seed(c, stream_tag::dissipation);
    const DissipationEstimate e = estimate_dissipation(ctx.solver, *ctx.basis, c.chain.dissipation, seed);
    const double v = validate_dissipation(ctx.solver, *ctx.basis, e, c.chain.dissipation, c.chain.validation_samples,
                                          stream_id({seed, 1}));
    report.table("dissipation.tsv",
                 {"kappa", "c1", "samples", "fit_fraction", "kick_radius", "r_min", "validation_samples",
                  "validation_fraction"},
                 {{fmt(e.kappa), fmt(e.c1), str(e.samples), fmt(e.fraction), fmt(e.kick_radius), fmt(e.r_min),
                   str(c.chain.validation_samples), fmt(v)}});
    report.summary({{"kappa", e.kappa},
                    {"c1", e.c1},
                    {"r_min", e.r_min},
                    {"ball_radius", 1.1 * e.r_min},
                    {"validation_fraction", v}});
    log << "dissipation: kappa " << fmt(e.kappa) << ", C1 " << fmt(e.c1) << ", validation " << fmt(v) << '\n';
    return exit_ok;
}

AttainabilityCloud cloud_for(const Context& ctx) {
    AttainabilityOptions o = ctx.cfg.chain.attainability;
    o.seed = sub_seed(ctx.cfg, stream_tag::attainability);
    return attainability_sample(ctx.solver, ctx.features, o);
}

int attainability(const ExperimentConfig& c, Report& report, std::ostream& log) {
    Context ctx(c);
    const AttainabilityCloud cloud = cloud_for(ctx);
    std::vector<std::vector<std::string>> levels;
    for (int k = 0; k <= cloud.depth; ++k) levels.push_back({str(k), str(cloud.size_at(k))});
    report.table("attainability_levels.tsv", {"depth", "size"}, levels);
    std::vector<std::vector<std::string>> pts;
    for (std::size_t i = 0; i < cloud.states.size(); ++i) {
        std::vector<std::string> row{str(i), str(cloud.level[i]), fmt(l2_norm(cloud.states[i]))};
        for (Eigen::Index k = 0; k < cloud.features[i].size(); ++k) row.push_back(fmt(cloud.features[i][k]));
        pts.push_back(std::move(row));
    }
    std::vector<std::string> header{"index", "level", "norm"};
    for (int i = 0; i < c.chain.features; ++i) header.push_back("c" + std::to_string(i + 1));
    header.push_back("energy");
    report.table("attainability_cloud.tsv", header, pts);
    const double diam = cloud.diameter();
    report.summary({{"depth", cloud.depth}, {"size", cloud.states.size()}, {"diameter", diam}});
    log << "attainability: " << cloud.states.size() << " points, diameter " << fmt(diam) << '\n';
    return exit_ok;
}

int irreducibility(const ExperimentConfig& c, Report& report, std::ostream& log) {
    Context ctx(c);
    const AttainabilityCloud cloud = cloud_for(ctx);
    const double diam = cloud.diameter();
    const double r = c.chain.irreducibility_radius_fraction * diam;
    const std::uint64_t seed = sub_seed(c, stream_tag::irreducibility);
    Stream pick_rng = Stream::derive(seed, {stream_tag::misc});
    std::vector<std::vector<std::string>> rows;
    double min_lower = 1.0;
    for (std::size_t p = 0; p < c.chain.irreducibility_pairs; ++p) {
        const auto xi = static_cast<std::size_t>(pick_rng.below(cloud.states.size()));
        const auto ai = static_cast<std::size_t>(pick_rng.below(cloud.states.size()));
        const int m = check_controllability(ctx.solver, cloud.states[xi], 0.5 * r).steps + 1;
        const ProbabilityEstimate e = estimate_irreducibility(ctx.solver, cloud.states[xi], cloud.states[ai], m, r,
                                                              c.chain.irreducibility_n_mc, stream_id({seed, p}));
        min_lower = std::min(min_lower, e.lower);
        rows.push_back({str(p), str(xi), str(ai), str(cloud.level[ai]), str(m), fmt(r), str(e.successes), str(e.trials),
                        fmt(e.estimate), fmt(e.lower), fmt(e.upper)});
    }
    report.table("irreducibility.tsv",
                 {"pair", "x_index", "a_index", "a_level", "m", "radius", "successes", "trials", "estimate", "lower",
                  "upper"},
                 rows);
    report.summary({{"diameter", diam}, {"radius", r}, {"min_lower", min_lower}, {"all_positive", min_lower > 0.0}});
    log << "irreducibility: smallest Wilson lower bound " << fmt(min_lower) << '\n';
    return exit_ok;
}

int couple(const ExperimentConfig& c, Report& report, std::ostream& log) {
    Context ctx(c);
    const std::uint64_t seed = sub_seed(c, stream_tag::coupling);
    constexpr std::size_t bases = 40;
    const std::vector<VelocityField> base = ctx.warm_states(bases, c.couple.warmup, stream_id({seed, 0}));
    const PairSampler pairs = [&](double d, std::size_t i) {
        Stream rng = Stream::derive(seed, {stream_tag::misc, i});
        const VelocityField& u = base[i % bases];
        return std::make_pair(u, ctx.perturbed(u, d, rng));
    };
    const auto table = verify_contraction(ctx.solver, c.couple.d_list, c.couple.config, c.couple.n_mc, pairs,
                                          stream_id({seed, 1}));
    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<double, double>> pts;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& r : table) {
        rows.push_back({fmt(r.d), fmt(r.q), str(r.n_mc), str(r.failures), fmt(r.frequency), fmt(r.ratio),
                        fmt(r.ratio_lower), fmt(r.ratio_upper), str(r.identified), str(r.identified_within)});
        pts.emplace_back(r.d, r.ratio);
        lo = std::min(lo, r.ratio);
        hi = std::max(hi, r.ratio);
    }
    report.table("contraction.tsv",
                 {"d", "q", "n_mc", "failures", "frequency", "ratio", "ci_lower", "ci_upper", "identified",
                  "identified_within"},
                 rows);
    report.series("contraction_ratio.dat", "d", "ratio", pts);
    json s{{"rows", table.size()}};
    s["ratio_spread"] = lo > 0.0 ? json(hi / lo) : json(nullptr);
    report.summary(s);
    log << "couple: " << table.size() << " rows\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------
// LDP

void write_q(Report& report, const std::vector<std::string>& ids, const std::vector<QEstimate>& qs,
             const std::vector<double>& exact) {
    std::vector<std::vector<std::string>> rows, initial;
    for (std::size_t k = 0; k < qs.size(); ++k) {
        const QEstimate& q = qs[k];
        std::vector<std::string> row{ids[k], to_string(q.method), str(q.n), str(q.particles), fmt(q.value),
                                     fmt(q.standard_error), fmt(q.spread)};
        if (!exact.empty()) row.push_back(fmt(exact[k]));
        rows.push_back(std::move(row));
        for (std::size_t i = 0; i < q.per_initial.size(); ++i)
            initial.push_back({ids[k], str(i), fmt(q.per_initial[i]), fmt(q.per_initial_se[i])});
    }
    std::vector<std::string> header{"potential", "method", "n", "particles", "q", "stderr", "spread"};
    if (!exact.empty()) header.push_back("exact_q");
    report.table("q_estimates.tsv", header, rows);
    report.table("q_initial.tsv", {"potential", "initial", "q", "stderr"}, initial);
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < qs.front().running.size(); ++i)
        pts.emplace_back(static_cast<double>(i + 1), qs.front().running[i]);
    report.series("running_q.dat", "n", "running_q", pts);
}

json q_json(const std::string& id, const QEstimate& q) {
    return {{"potential", id}, {"q", q.value}, {"stderr", q.standard_error}, {"method", to_string(q.method)},
            {"n", q.n}, {"particles", q.particles}};
}

int estimate_q(const ExperimentConfig& c, Report& report, std::ostream& log) {
    QOptions opt = c.ldp.q;
    opt.seed = sub_seed(c, stream_tag::fk_propagate);
    if (c.ldp.backend == "oracle") {
        const FiniteChain chain = oracle_chain(c);
        const Potential v = Potential::tabulated(chain_potential(chain), "chain");
        std::vector<int> init;
        for (int i = 0; i < std::min<int>(static_cast<int>(c.ldp.initial_states), chain.size()); ++i) init.push_back(i);
        const QEstimate q = estimate_Q(chain, v, init, opt);
        const double exact = exact_Q(chain, v.table());
        write_q(report, {v.id()}, {q}, {exact});
        json s = q_json(v.id(), q);
        s["backend"] = "oracle";
        s["exact_q"] = exact;
        report.summary(s);
        log << "estimate-q: " << fmt(q.value) << " +- " << fmt(q.standard_error) << " (exact " << fmt(exact) << ")\n";
        return exit_ok;
    }
    Context ctx(c);
    const auto dict = ctx.dictionary();
    const Potential& v = pick(dict, c.ldp.potential);
    const auto vf = [&](const VelocityField& u) { return v(ctx.features(u)); };
    const auto init = ctx.warm_states(c.ldp.initial_states, c.couple.warmup, stream_id({opt.seed, 7}));
    const QEstimate q = estimate_Q(KickedChain(ctx.solver), vf, init, opt);
    write_q(report, {v.id()}, {q}, {});
    json s = q_json(v.id(), q);
    s["backend"] = "nse";
    s["implied_gamma"] = implied_gamma(c.couple.config.q,
                                       v.sup_bound(Eigen::VectorXd::Constant(ctx.features.dimension(), c.chain.range)));
    report.summary(s);
    log << "estimate-q: " << fmt(q.value) << " +- " << fmt(q.standard_error) << '\n';
    return exit_ok;
}

std::vector<Potential> oracle_dictionary(const FiniteChain& chain, const std::vector<double>& scales) {
    const Eigen::VectorXd v = chain_potential(chain);
    std::vector<Potential> d{Potential::constant(0.0, "zero"), Potential::tabulated(v, "chain"),
                             Potential::tabulated(-v, "-chain")};
    for (int i = 0; i < chain.size(); ++i)
        for (double s : scales)
            for (double sign : {1.0, -1.0}) {
                Eigen::VectorXd t = Eigen::VectorXd::Zero(chain.size());
                t[i] = sign * s;
                d.push_back(Potential::tabulated(t, "state" + std::to_string(i) + ":" + fmt(sign * s)));
            }
    return d;
}

int rate_function(const ExperimentConfig& c, Report& report, std::ostream& log) {
    QOptions opt = c.ldp.q;
    opt.seed = sub_seed(c, stream_tag::fk_propagate);
    std::vector<Potential> dict;
    std::vector<double> sigma, sigma_se, exact;
    std::vector<QEstimate> qs;
    json s;
    if (c.ldp.backend == "oracle") {
        const FiniteChain chain = oracle_chain(c);
        dict = oracle_dictionary(chain, c.ldp.dictionary_scales);
        Stream rng = Stream::derive(opt.seed, {stream_tag::misc});
        Eigen::VectorXd occ = Eigen::VectorXd::Zero(chain.size());
        std::vector<int> path;
        int x = 0;
        for (std::size_t k = 0; k < c.ldp.occupation_length; ++k) {
            path.push_back(x);
            occ[x] += 1.0;
            x = chain.step(x, rng);
        }
        occ /= static_cast<double>(c.ldp.occupation_length);
        std::vector<Eigen::VectorXd> tables;
        for (std::size_t k = 0; k < dict.size(); ++k) {
            const Potential& v = dict[k];
            const Eigen::VectorXd t = v.kind() == Potential::Kind::table ? v.table()
                                                                         : Eigen::VectorXd::Constant(chain.size(), v.offset());
            tables.push_back(t);
            std::vector<double> series;
            for (int p : path) series.push_back(t[p]);
            const MeanEstimate m = batch_mean(series, 0, opt.batches);
            sigma.push_back(m.mean);
            sigma_se.push_back(m.standard_error);
            std::vector<int> init{0};
            qs.push_back(estimate_Q(chain, v, init, opt));
            exact.push_back(exact_Q(chain, t));
        }
        const ExactRate er = exact_rate_function(chain, occ, tables);
        s["exact_value"] = er.value;
        s["exact_argmax"] = dict[er.argmax].id();
        s["backend"] = "oracle";
    } else {
        Context ctx(c);
        dict = ctx.dictionary();
        const auto warm = ctx.warm_states(1, c.couple.warmup, stream_id({opt.seed, 7}));
        ChainConfig cc;
        cc.length = c.ldp.occupation_length;
        cc.thin = 0;
        cc.seed = stream_id({opt.seed, 8});
        const Trajectory t = run_chain(ctx.solver, ctx.features, warm.front(), cc);
        const OccupationMeasure occ = occupation_measure(t, ctx.binning);
        const auto init = ctx.warm_states(c.ldp.initial_states, c.couple.warmup, stream_id({opt.seed, 9}));
        Eigen::VectorXd centre(ctx.features.dimension());
        for (std::size_t k = 0; k < dict.size(); ++k) {
            const Potential& v = dict[k];
            sigma.push_back(histogram_expectation(v, occ.histogram, ctx.binning, ctx.features.dimension()));
            std::vector<double> series;
            for (const auto& p : occ.points) {
                centre.setZero();
                const auto bin = ctx.binning.bin_of(p);
                for (std::size_t i = 0; i < bin.size(); ++i) centre[static_cast<Eigen::Index>(i)] = ctx.binning.centre(bin[i]);
                series.push_back(v(centre));
            }
            sigma_se.push_back(batch_mean(series, 0, opt.batches).standard_error);
            if (v.kind() == Potential::Kind::constant) {
                // Q(c) = c exactly; no simulation needed.
                QEstimate q;
                q.value = v.offset();
                q.method = opt.method;
                q.n = opt.n;
                q.particles = opt.particles;
                qs.push_back(q);
            } else {
                const auto vf = [&](const VelocityField& u) { return v(ctx.features(u)); };
                opt.seed = stream_id({sub_seed(c, stream_tag::fk_propagate), k});
                qs.push_back(estimate_Q(KickedChain(ctx.solver), vf, init, opt));
            }
        }
        s["backend"] = "nse";
    }
    const RateFunctionEstimate r = estimate_rate_function(dict, sigma, sigma_se, qs);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < dict.size(); ++k) {
        std::vector<std::string> row{dict[k].id(), fmt(sigma[k]), fmt(sigma_se[k]), fmt(qs[k].value),
                                     fmt(qs[k].standard_error), fmt(r.brackets[k]), fmt(r.bracket_se[k])};
        if (!exact.empty()) row.push_back(fmt(exact[k]));
        rows.push_back(std::move(row));
    }
    std::vector<std::string> header{"potential", "sigma_value", "sigma_stderr", "q", "q_stderr", "bracket", "bracket_stderr"};
    if (!exact.empty()) header.push_back("exact_q");
    report.table("rate_function.tsv", header, rows);
    s["value"] = r.value;
    s["argmax"] = r.argmax_id;
    s["pooled_se"] = r.pooled_se;
    s["max_q_se"] = r.max_q_se;
    s["potentials"] = dict.size();
    report.summary(s);
    log << "rate-function: I = " << fmt(r.value) << " at " << r.argmax_id << " (pooled se " << fmt(r.pooled_se) << ")\n";
    return exit_ok;
}

int ufp(const ExperimentConfig& c, Report& report, std::ostream& log) {
    UfpOptions opt;
    opt.n_list = c.ldp.ufp.n_list;
    opt.n_mc = c.ldp.ufp.n_mc;
    opt.seed = sub_seed(c, stream_tag::mixing);
    std::vector<UfpRow> rows;
    std::vector<double> exact;
    if (c.ldp.backend == "oracle") {
        const FiniteChain chain = oracle_chain(c);
        const Potential v = Potential::tabulated(chain_potential(chain), "chain");
        Eigen::VectorXd f(chain.size());
        for (int i = 0; i < chain.size(); ++i) f[i] = chain.coordinates()(i, 0);
        std::vector<std::pair<int, int>> pairs;
        for (int i = 0; i + 1 < chain.size(); ++i) pairs.emplace_back(i, i + 1);
        std::vector<int> probes;
        for (int i = 0; i < chain.size(); ++i) probes.push_back(i);
        const auto fv = [&](int i) { return f[i]; };
        const auto dist = [&](int i, int j) { return chain.distance(i, j); };
        rows = ufp_diagnostic(chain, v, fv, pairs, probes, dist, opt);
        const std::size_t n_max = opt.n_list.empty() ? 0 : *std::max_element(opt.n_list.begin(), opt.n_list.end());
        const auto ex = exact_ufp(chain, v.table(), f, pairs, static_cast<int>(n_max));
        for (std::size_t n : opt.n_list) exact.push_back(n == 0 ? 0.0 : ex[n - 1].ratio);
    } else {
        Context ctx(c);
        const auto dict = ctx.dictionary();
        const Potential& v = pick(dict, c.ldp.potential);
        const auto vf = [&](const VelocityField& u) { return v(ctx.features(u)); };
        const double scale = c.ldp.dictionary_radius;
        const auto f = [&](const VelocityField& u) {
            const Eigen::VectorXd x = ctx.features(u);
            return ctx.features.coefficients() > 0 ? x[0] / scale : x[x.size() - 1] / (0.5 * scale * scale);
        };
        const auto base = ctx.warm_states(c.ldp.ufp.pairs, c.couple.warmup, stream_id({opt.seed, 7}));
        std::vector<std::pair<VelocityField, VelocityField>> pairs;
        std::vector<VelocityField> probes;
        for (std::size_t i = 0; i < base.size(); ++i) {
            Stream rng = Stream::derive(opt.seed, {stream_tag::misc, i});
            pairs.emplace_back(base[i], ctx.perturbed(base[i], c.ldp.ufp.gap, rng));
            probes.push_back(pairs.back().first);
            probes.push_back(pairs.back().second);
        }
        const auto dist = [](const VelocityField& a, const VelocityField& b) { return l2_distance(a, b); };
        rows = ufp_diagnostic(KickedChain(ctx.solver), vf, f, pairs, probes, dist, opt);
    }
    std::vector<std::vector<std::string>> table;
    std::vector<std::pair<double, double>> pts;
    double top = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        std::vector<std::string> row{str(r.n), fmt(r.ratio), fmt(r.noise_floor), fmt(r.norm_one)};
        if (!exact.empty()) row.push_back(fmt(exact[k]));
        table.push_back(std::move(row));
        pts.emplace_back(static_cast<double>(r.n), r.ratio);
        top = std::max(top, r.ratio);
    }
    std::vector<std::string> header{"n", "ratio", "noise_floor", "norm_one"};
    if (!exact.empty()) header.push_back("exact_ratio");
    report.table("ufp.tsv", header, table);
    report.series("ufp.dat", "n", "ratio", pts);
    report.summary({{"backend", c.ldp.backend}, {"max_ratio", top}, {"rows", rows.size()}});
    log << "ufp: max R_n " << fmt(top) << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------------------

struct Check {
    std::string name;
    double value;
    double reference;
    double tolerance;
    bool pass;
};

int oracle_validate(const ExperimentConfig& c, Report& report, std::ostream& log) {
    const FiniteChain chain = oracle_chain(c);
    const Eigen::VectorXd v = chain_potential(chain);
    const Potential pv = Potential::tabulated(v, "chain");
    const std::uint64_t seed = sub_seed(c, stream_tag::fk_propagate);
    std::vector<Check> checks;
    auto within = [&](std::string name, double value, double ref, double tol) {
        checks.push_back({std::move(name), value, ref, tol, std::abs(value - ref) <= tol});
    };

    QOptions opt;
    opt.n = c.oracle.n;
    opt.particles = c.oracle.particles;
    opt.seed = seed;
    const double q_exact = exact_Q(chain, v);
    std::vector<int> all_states(static_cast<std::size_t>(chain.size()));
    std::iota(all_states.begin(), all_states.end(), 0);
    const QEstimate q = estimate_Q(chain, pv, all_states, opt);
    within("q_cloning_3se", q.value, q_exact, 3.0 * q.standard_error);
    const QEstimate qs = estimate_Q(chain, pv.shifted(0.75), all_states, opt);
    within("q_shift_equivariance", qs.value - q.value, 0.75, 1e-12);

    Eigen::VectorXd f(chain.size());
    for (int i = 0; i < chain.size(); ++i) f[i] = static_cast<double>(i + 1);
    const auto fv = [&](int i) { return f[i]; };
    for (int n : {1, 5, 20}) {
        const FkEstimate e = fk_apply(chain, pv, fv, 0, static_cast<std::size_t>(n), c.oracle.fk_samples,
                                      stream_id({seed, static_cast<std::uint64_t>(n)}));
        within("fk_apply_n" + std::to_string(n) + "_3se", e.value, exact_fk_apply(chain, v, f, n)[0],
               3.0 * e.standard_error);
    }

    Stream rng = Stream::derive(seed, {stream_tag::misc});
    const FiniteChain small = random_chain(3, rng);
    Eigen::VectorXd v3(3), f3(3);
    for (int i = 0; i < 3; ++i) {
        v3[i] = rng.uniform() - 0.5;
        f3[i] = rng.uniform();
    }
    const Eigen::VectorXd mat = exact_fk_apply(small, v3, f3, 7);
    const Eigen::VectorXd paths = enumerate_fk_paths(small, v3, f3, 7);
    within("fk_paths_s3_n7", (mat - paths).cwiseAbs().maxCoeff(), 0.0, 1e-12 * mat.cwiseAbs().maxCoeff());

    double worst_convexity = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 50; ++k) {
        Eigen::VectorXd a(chain.size()), b(chain.size());
        for (int i = 0; i < chain.size(); ++i) {
            a[i] = 2.0 * rng.uniform() - 1.0;
            b[i] = 2.0 * rng.uniform() - 1.0;
        }
        worst_convexity = std::max(worst_convexity, exact_Q(chain, 0.5 * (a + b)) - 0.5 * (exact_Q(chain, a) + exact_Q(chain, b)));
    }
    checks.push_back({"q_convexity_gap", worst_convexity, 0.0, 1e-10, worst_convexity <= 1e-10});

    const auto err = eigen_triple_errors(chain, v, f, 50);
    const double ratio = fitted_geometric_ratio(err);
    checks.push_back({"eigen_triple_ratio", ratio, 1.0, 0.0, ratio < 1.0});
    checks.push_back({"eigen_triple_endpoint", err.back() / err.front(), 0.0, 1e-8, err.back() <= 1e-8 * err.front()});

    std::vector<std::vector<double>> axes(static_cast<std::size_t>(chain.size()), {-0.5, 0.0, 0.5});
    const double stat = exact_rate_function(chain, stationary_distribution(chain), potential_grid(axes)).value;
    checks.push_back({"rate_stationary", stat, 0.0, 1e-8, stat >= 0.0 && stat <= 1e-8});

    Eigen::MatrixXd p2(2, 2);
    p2 << chain.matrix()(0, 0), 1.0 - chain.matrix()(0, 0), chain.matrix()(1, 0), 1.0 - chain.matrix()(1, 0);
    const FiniteChain two(p2);
    std::vector<double> ax;
    for (int i = 0; i <= 400; ++i) ax.push_back(-40.0 + 0.1 * i);
    Eigen::VectorXd delta(2);
    delta << 1.0, 0.0;
    within("rate_point_mass_two_state", exact_rate_function(two, delta, potential_grid({{0.0}, ax})).value,
           point_mass_rate(two, 0), 1e-6);

    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < chain.size(); ++i)
        for (int j = i + 1; j < chain.size(); ++j) pairs.emplace_back(i, j);
    const auto u = exact_ufp(chain, v, f, pairs, 100);
    double m50 = 0.0, m100 = 0.0;
    for (const auto& r : u) {
        if (r.n <= 50) m50 = std::max(m50, r.ratio);
        m100 = std::max(m100, r.ratio);
    }
    within("ufp_uniform_in_n", m100, m50, 0.1 * m50);

    std::vector<std::vector<std::string>> rows;
    bool all = true;
    for (const auto& k : checks) {
        rows.push_back({k.name, fmt(k.value), fmt(k.reference), fmt(k.tolerance), k.pass ? "pass" : "fail"});
        all = all && k.pass;
        log << (k.pass ? "PASS " : "FAIL ") << k.name << " value=" << fmt(k.value) << " reference=" << fmt(k.reference)
            << '\n';
    }
    report.table("oracle_validation.tsv", {"check", "value", "reference", "tolerance", "result"}, rows);
    report.summary({{"checks", checks.size()}, {"all_pass", all}, {"exact_q", q_exact}, {"q_estimate", q.value},
                    {"q_stderr", q.standard_error}});
    return all ? exit_ok : exit_check_failed;
}

using Command = int (*)(const ExperimentConfig&, Report&, std::ostream&);

const std::map<std::string, Command>& table() {
    static const std::map<std::string, Command> t{
        {"simulate", simulate},         {"dissipation", dissipation},     {"irreducibility", irreducibility},
        {"attainability", attainability}, {"couple", couple},             {"estimate-q", estimate_q},
        {"rate-function", rate_function}, {"ufp", ufp},                   {"oracle-validate", oracle_validate},
    };
    return t;
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"simulate", "dissipation", "irreducibility", "attainability", "couple",
                                                "estimate-q", "rate-function", "ufp", "oracle-validate"};
    return names;
}

int run_command(const std::string& name, const ExperimentConfig& config, Report& report, std::ostream& log) {
    const auto it = table().find(name);
    if (it == table().end()) throw ConfigError("<subcommand>", "unknown subcommand '" + name + "'");
    const int code = it->second(config, report, log);
    report.finish();
    return code;
}

}  // namespace kickns::app
