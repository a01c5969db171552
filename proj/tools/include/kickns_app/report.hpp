#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace kickns::app {

/// Shortest round-trip decimal form of a double.
std::string fmt(double x);

/// Writes the artifacts of one run into a directory. Every text artifact
/// starts with a `# config_hash=` line, and finish() writes manifest.json
/// listing them.
class Report {
public:
    Report(std::filesystem::path dir, std::string config_hash, std::string subcommand, std::uint64_t seed);

    const std::filesystem::path& dir() const noexcept { return dir_; }

    /// Tab-separated table with a header row.
    void table(const std::string& name, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
    /// Two-column plot data.
    void series(const std::string& name, const std::string& x_label, const std::string& y_label,
                const std::vector<std::pair<double, double>>& points);
    /// Structured summary (summary.json); the config hash is added.
    void summary(nlohmann::json s);
    /// Registers a file written by the caller into dir().
    void artifact(const std::string& name);

    void finish();

private:
    std::filesystem::path path_of(const std::string& name);

    std::filesystem::path dir_;
    std::string hash_;
    std::string subcommand_;
    std::uint64_t seed_;
    std::vector<std::string> artifacts_;
};

}  // namespace kickns::app
