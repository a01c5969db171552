#include "kickns_app/config.hpp"

#include <kickns/error.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <type_traits>

namespace kickns::app {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported with their full path.
class Block {
public:
    Block(const json* j, std::string path) : j_(j), path_(std::move(path)) {
        if (j_ && !j_->is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        const json* v = find(key);
        if (!v) return;
        out = convert<T>(*v, at(key));
    }

    Block sub(const char* key) {
        const json* v = find(key);
        return Block(v, at(key));
    }

    void finish() const {
        if (!j_) return;
        for (const auto& [k, v] : j_->items())
            if (!seen_.count(k)) throw ConfigError(at(k.c_str()), "unknown key");
    }

    std::string at(const char* key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }

private:
    const json* find(const char* key) {
        if (!j_) return nullptr;
        seen_.insert(key);
        auto it = j_->find(key);
        return it == j_->end() ? nullptr : &*it;
    }

    template <typename T>
    static T convert(const json& v, const std::string& where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(where, "expected a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(where, "expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned()) throw ConfigError(where, "expected a nonnegative integer");
            return v.get<T>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
            return v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(where, "expected a number");
            return v.get<T>();
        } else {
            if (!v.is_array()) throw ConfigError(where, "expected an array");
            T out;
            for (std::size_t i = 0; i < v.size(); ++i)
                out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
            return out;
        }
    }

    const json* j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& where, const std::string& what) {
    if (!ok) throw ConfigError(where, what);
}

}  // namespace

ExperimentConfig parse_config(const json& doc, bool allow_missing_seed) {
    ExperimentConfig c;
    Block root(&doc, "");
    if (!doc.contains("seed") && !allow_missing_seed) throw ConfigError("seed", "missing (the seed is mandatory)");
    root.get("seed", c.seed);
    root.get("output_dir", c.output_dir);
    root.get("threads", c.threads);

    Block domain = root.sub("domain");
    domain.get("nx", c.domain.nx);
    domain.get("ny", c.domain.ny);
    domain.get("viscosity", c.domain.viscosity);
    domain.finish();
    try {
        c.domain = DomainSpec::make(c.domain.nx, c.domain.ny, c.domain.viscosity);
    } catch (const Error& e) {
        throw ConfigError("domain", e.what());
    }

    Block noise = root.sub("noise");
    noise.get("modes", c.noise_modes);
    noise.get("amplitude_scale", c.amplitude_scale);
    noise.get("amplitude_exponent", c.amplitude_exponent);
    require(c.noise_modes >= 1, "noise.modes", "must be >= 1");
    c.noise.amplitudes = power_law_amplitudes(c.noise_modes, c.amplitude_scale, c.amplitude_exponent);
    noise.get("amplitudes", c.noise.amplitudes);
    c.noise_modes = static_cast<int>(c.noise.amplitudes.size());
    Block window = noise.sub("window");
    window.get("t0", c.noise.window.t0);
    window.get("t1", c.noise.window.t1);
    window.get("x0", c.noise.window.x0);
    window.get("x1", c.noise.window.x1);
    window.get("y0", c.noise.window.y0);
    window.get("y1", c.noise.window.y1);
    window.finish();
    noise.get("cutoff_sharpness", c.noise.cutoff_sharpness);
    noise.get("density_exponent", c.noise.density_exponent);
    noise.get("quadrature_points", c.noise.quadrature_points);
    noise.finish();

    Block solver = root.sub("solver");
    solver.get("dt", c.solver.dt);
    solver.get("advection_order", c.solver.advection_order);
    solver.get("cfl_limit", c.solver.cfl_limit);
    solver.get("max_halvings", c.solver.max_halvings);
    solver.get("basis_modes", c.basis_modes);
    solver.finish();
    require(c.basis_modes >= 1, "solver.basis_modes", "must be >= 1");

    Block chain = root.sub("chain");
    chain.get("length", c.chain.length);
    chain.get("thin", c.chain.thin);
    chain.get("replicates", c.chain.replicates);
    chain.get("initial_radius", c.chain.initial_radius);
    chain.get("features", c.chain.features);
    chain.get("bins", c.chain.bins);
    chain.get("range", c.chain.range);
    require(c.chain.length >= 1, "chain.length", "must be >= 1");
    require(c.chain.features >= 0 && c.chain.features <= c.basis_modes, "chain.features", "must lie in [0, basis_modes]");
    require(c.chain.bins >= 1, "chain.bins", "must be >= 1");
    require(c.chain.range > 0.0, "chain.range", "must be positive");
    Block diss = chain.sub("dissipation");
    diss.get("samples", c.chain.dissipation.samples);
    diss.get("radii", c.chain.dissipation.radii);
    diss.get("smooth_modes", c.chain.dissipation.smooth_modes);
    diss.get("validation_samples", c.chain.validation_samples);
    diss.finish();
    Block att = chain.sub("attainability");
    att.get("depth", c.chain.attainability.depth);
    att.get("per_level", c.chain.attainability.per_level);
    att.get("corner_fraction", c.chain.attainability.corner_fraction);
    att.finish();
    Block irr = chain.sub("irreducibility");
    irr.get("pairs", c.chain.irreducibility_pairs);
    irr.get("n_mc", c.chain.irreducibility_n_mc);
    irr.get("radius_fraction", c.chain.irreducibility_radius_fraction);
    irr.finish();
    chain.finish();

    Block cp = root.sub("coupling");
    CouplingConfig& cc = c.couple.config;
    cp.get("q", cc.q);
    cp.get("control_modes", cc.control_modes);
    cp.get("threshold", cc.threshold);
    cp.get("gauss_newton_iterations", cc.gauss_newton_iterations);
    cp.get("gauss_newton_tolerance", cc.gauss_newton_tolerance);
    cp.get("fd_step", cc.fd_step);
    cp.get("svd_cutoff", cc.svd_cutoff);
    cp.get("cutoff_inner", cc.cutoff_inner);
    cp.get("cutoff_outer", cc.cutoff_outer);
    cp.get("jacobian_correction", cc.jacobian_correction);
    cp.get("rejection_cap", cc.rejection_cap);
    cp.get("d_list", c.couple.d_list);
    cp.get("n_mc", c.couple.n_mc);
    cp.get("warmup", c.couple.warmup);
    cp.finish();
    require(cc.q > 0.0 && cc.q < 1.0, "coupling.q", "must lie in (0, 1)");
    require(cc.control_modes >= 0 && cc.control_modes <= c.noise_modes, "coupling.control_modes", "must lie in [0, noise.modes]");
    require(cc.threshold > 0.0, "coupling.threshold", "must be positive");
    for (double d : c.couple.d_list) require(d > 0.0 && d <= cc.threshold, "coupling.d_list", "entries must lie in (0, threshold]");

    Block ldp = root.sub("ldp");
    ldp.get("backend", c.ldp.backend);
    require(c.ldp.backend == "nse" || c.ldp.backend == "oracle", "ldp.backend", "must be \"nse\" or \"oracle\"");
    std::string method = to_string(c.ldp.q.method);
    ldp.get("method", method);
    require(method == "direct" || method == "cloning", "ldp.method", "must be \"direct\" or \"cloning\"");
    c.ldp.q.method = method == "direct" ? QMethod::direct : QMethod::cloning;
    c.ldp.q.n = 40;
    c.ldp.q.particles = 48;
    ldp.get("n", c.ldp.q.n);
    ldp.get("particles", c.ldp.q.particles);
    ldp.get("burn_in_fraction", c.ldp.q.burn_in_fraction);
    ldp.get("ess_fraction", c.ldp.q.ess_fraction);
    ldp.get("batches", c.ldp.q.batches);
    ldp.get("initial_states", c.ldp.initial_states);
    ldp.get("potential", c.ldp.potential);
    ldp.get("occupation_length", c.ldp.occupation_length);
    require(c.ldp.q.n >= 2, "ldp.n", "must be >= 2");
    require(c.ldp.q.method != QMethod::direct || c.ldp.q.n <= direct_method_max_n, "ldp.n",
            "the direct method is limited to n <= " + std::to_string(direct_method_max_n));
    require(c.ldp.q.particles >= 1, "ldp.particles", "must be >= 1");
    require(c.ldp.initial_states >= 1, "ldp.initial_states", "must be >= 1");
    require(c.ldp.q.burn_in_fraction >= 0.0 && c.ldp.q.burn_in_fraction < 1.0, "ldp.burn_in_fraction", "must lie in [0, 1)");
    Block dict = ldp.sub("dictionary");
    dict.get("coordinates", c.ldp.dictionary_coordinates);
    dict.get("scales", c.ldp.dictionary_scales);
    dict.get("radius", c.ldp.dictionary_radius);
    dict.finish();
    require(c.ldp.dictionary_coordinates >= 0 && c.ldp.dictionary_coordinates <= c.chain.features,
            "ldp.dictionary.coordinates", "must lie in [0, chain.features]");
    require(c.ldp.dictionary_radius > 0.0, "ldp.dictionary.radius", "must be positive");
    Block ufp = ldp.sub("ufp");
    ufp.get("n_list", c.ldp.ufp.n_list);
    ufp.get("n_mc", c.ldp.ufp.n_mc);
    ufp.get("pairs", c.ldp.ufp.pairs);
    ufp.get("gap", c.ldp.ufp.gap);
    ufp.finish();
    require(c.ldp.ufp.gap > 0.0 && c.ldp.ufp.gap <= cc.threshold, "ldp.ufp.gap", "must lie in (0, coupling.threshold]");
    ldp.finish();

    Block oracle = root.sub("oracle");
    oracle.get("chain", c.oracle.chain);
    oracle.get("particles", c.oracle.particles);
    oracle.get("n", c.oracle.n);
    oracle.get("fk_samples", c.oracle.fk_samples);
    oracle.finish();

    root.finish();
    return c;
}

ExperimentConfig load_config(const std::string& path, bool allow_missing_seed) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot read config " + path);
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
    }
    ExperimentConfig c = parse_config(doc, allow_missing_seed);
    c.base_dir = std::filesystem::absolute(path).parent_path().string();
    return c;
}

json ExperimentConfig::canonical() const {
    const CouplingConfig& cc = couple.config;
    return json{
        {"seed", seed},
        {"domain", {{"nx", domain.nx}, {"ny", domain.ny}, {"viscosity", domain.viscosity}}},
        {"noise",
         {{"amplitudes", noise.amplitudes},
          {"window",
           {{"t0", noise.window.t0}, {"t1", noise.window.t1}, {"x0", noise.window.x0},
            {"x1", noise.window.x1}, {"y0", noise.window.y0}, {"y1", noise.window.y1}}},
          {"cutoff_sharpness", noise.cutoff_sharpness},
          {"density_exponent", noise.density_exponent},
          {"quadrature_points", noise.quadrature_points}}},
        {"solver",
         {{"dt", solver.dt}, {"advection_order", solver.advection_order}, {"cfl_limit", solver.cfl_limit},
          {"max_halvings", solver.max_halvings}, {"basis_modes", basis_modes}}},
        {"chain",
         {{"length", chain.length}, {"thin", chain.thin}, {"replicates", chain.replicates},
          {"initial_radius", chain.initial_radius}, {"features", chain.features}, {"bins", chain.bins},
          {"range", chain.range},
          {"dissipation",
           {{"samples", chain.dissipation.samples}, {"radii", chain.dissipation.radii},
            {"smooth_modes", chain.dissipation.smooth_modes}, {"validation_samples", chain.validation_samples}}},
          {"attainability",
           {{"depth", chain.attainability.depth}, {"per_level", chain.attainability.per_level},
            {"corner_fraction", chain.attainability.corner_fraction}}},
          {"irreducibility",
           {{"pairs", chain.irreducibility_pairs}, {"n_mc", chain.irreducibility_n_mc},
            {"radius_fraction", chain.irreducibility_radius_fraction}}}}},
        {"coupling",
         {{"q", cc.q}, {"control_modes", cc.control_modes}, {"threshold", cc.threshold},
          {"gauss_newton_iterations", cc.gauss_newton_iterations},
          {"gauss_newton_tolerance", cc.gauss_newton_tolerance}, {"fd_step", cc.fd_step},
          {"svd_cutoff", cc.svd_cutoff}, {"cutoff_inner", cc.cutoff_inner}, {"cutoff_outer", cc.cutoff_outer},
          {"jacobian_correction", cc.jacobian_correction}, {"rejection_cap", cc.rejection_cap},
          {"d_list", couple.d_list}, {"n_mc", couple.n_mc}, {"warmup", couple.warmup}}},
        {"ldp",
         {{"backend", ldp.backend}, {"method", to_string(ldp.q.method)}, {"n", ldp.q.n},
          {"particles", ldp.q.particles}, {"burn_in_fraction", ldp.q.burn_in_fraction},
          {"ess_fraction", ldp.q.ess_fraction}, {"batches", ldp.q.batches},
          {"initial_states", ldp.initial_states}, {"potential", ldp.potential},
          {"occupation_length", ldp.occupation_length},
          {"dictionary",
           {{"coordinates", ldp.dictionary_coordinates}, {"scales", ldp.dictionary_scales},
            {"radius", ldp.dictionary_radius}}},
          {"ufp",
           {{"n_list", ldp.ufp.n_list}, {"n_mc", ldp.ufp.n_mc}, {"pairs", ldp.ufp.pairs}, {"gap", ldp.ufp.gap}}}}},
        {"oracle",
         {{"chain", oracle.chain}, {"particles", oracle.particles}, {"n", oracle.n},
          {"fk_samples", oracle.fk_samples}}},
    };
}

std::string ExperimentConfig::hash() const {
    const std::string s = canonical().dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace kickns::app
