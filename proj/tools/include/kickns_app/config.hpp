#pragma once

#include <kickns/coupling.hpp>
#include <kickns/grid_field.hpp>
#include <kickns/ldp_estimation.hpp>
#include <kickns/markov_chain.hpp>
#include <kickns/noise.hpp>
#include <kickns/ns_solver.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace kickns::app {

struct ChainBlock {
    std::size_t length = 500;
    std::size_t thin = 0;
    std::size_t replicates = 1;
    /// Initial state: a smooth random field of this L2 norm (0 = rest).
    double initial_radius = 0.0;
    int features = 8;
    int bins = 16;
    double range = 0.004;
    DissipationOptions dissipation;
    std::size_t validation_samples = 1000;
    AttainabilityOptions attainability;
    std::size_t irreducibility_pairs = 10;
    std::uint64_t irreducibility_n_mc = 500;
    double irreducibility_radius_fraction = 0.1;
};

struct CoupleBlock {
    CouplingConfig config;
    std::vector<double> d_list = {0.02, 0.01, 0.005};
    std::size_t n_mc = 200;
    /// Chain steps from rest before the base states are taken.
    std::size_t warmup = 20;
};

struct UfpBlock {
    std::vector<std::size_t> n_list = {5, 10, 20, 30, 40, 50, 60};
    std::size_t n_mc = 48;
    std::size_t pairs = 2;
    double gap = 0.005;
};

struct LdpBlock {
    /// "nse" or "oracle"
    std::string backend = "nse";
    QOptions q;
    std::size_t initial_states = 2;
    int dictionary_coordinates = 1;
    std::vector<double> dictionary_scales = {0.5};
    double dictionary_radius = 0.004;
    /// Potential for estimate-q and ufp: index into the dictionary.
    std::size_t potential = 1;
    /// Length of the stationary run whose occupation measure is sigma.
    std::size_t occupation_length = 1000;
    UfpBlock ufp;
};

struct OracleBlock {
    std::string chain = "five_state.chain";
    std::size_t particles = 512;
    std::size_t n = 200;
    std::size_t fk_samples = 20000;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "kickns_out";
    int threads = 0;
    DomainSpec domain;
    NoiseOptions noise;
    int noise_modes = 16;
    double amplitude_scale = 0.1;
    double amplitude_exponent = 2.0;
    SolverConfig solver;
    int basis_modes = 16;
    ChainBlock chain;
    CoupleBlock couple;
    LdpBlock ldp;
    OracleBlock oracle;
    /// Directory of the config file; relative paths resolve against it.
    std::string base_dir = ".";

    /// JSON form of every setting that affects results (no output
    /// directory, no thread count).
    nlohmann::json canonical() const;
    /// FNV-1a 64 of canonical().dump(), as 16 hex digits.
    std::string hash() const;
};

/// Schema violation: the offending key path is in key_path().
using kickns::ConfigError;

/// Parses a config document; unknown keys and type errors throw ConfigError
/// naming the key path. A missing seed is an error unless allow_missing_seed.
ExperimentConfig parse_config(const nlohmann::json& doc, bool allow_missing_seed = false);
ExperimentConfig load_config(const std::string& path, bool allow_missing_seed = false);

}  // namespace kickns::app
