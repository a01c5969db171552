#include "kickns_app/report.hpp"

#include <kickns/error.hpp>
#include <kickns/version.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <fstream>

namespace kickns::app {

std::string fmt(double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

Report::Report(std::filesystem::path dir, std::string config_hash, std::string subcommand, std::uint64_t seed)
    : dir_(std::move(dir)), hash_(std::move(config_hash)), subcommand_(std::move(subcommand)), seed_(seed) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_))
        throw InputError("report", "cannot create output directory " + dir_.string());
}

std::filesystem::path Report::path_of(const std::string& name) {
    artifact(name);
    return dir_ / name;
}

void Report::artifact(const std::string& name) {
    if (std::find(artifacts_.begin(), artifacts_.end(), name) == artifacts_.end()) artifacts_.push_back(name);
}

void Report::table(const std::string& name, const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path_of(name), std::ios::binary);
    if (!out) throw InputError("report", "cannot write " + (dir_ / name).string());
    out << "# config_hash=" << hash_ << '\n';
    auto line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "\t" : "") << cells[i];
        out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
}

void Report::series(const std::string& name, const std::string& x_label, const std::string& y_label,
                    const std::vector<std::pair<double, double>>& points) {
    std::ofstream out(path_of(name), std::ios::binary);
    if (!out) throw InputError("report", "cannot write " + (dir_ / name).string());
    out << "# config_hash=" << hash_ << '\n' << "# " << x_label << ' ' << y_label << '\n';
    for (const auto& [x, y] : points) out << fmt(x) << ' ' << fmt(y) << '\n';
}

void Report::summary(nlohmann::json s) {
    s["config_hash"] = hash_;
    s["subcommand"] = subcommand_;
    std::ofstream out(path_of("summary.json"), std::ios::binary);
    if (!out) throw InputError("report", "cannot write summary.json");
    out << s.dump(2) << '\n';
}

void Report::finish() {
    nlohmann::json m;
    m["config_hash"] = hash_;
    m["subcommand"] = subcommand_;
    m["seed"] = seed_;
    m["versions"] = {{"kickns", version},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"fft", fft_library_version()},
                     {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    nlohmann::json list = nlohmann::json::array();
    for (const auto& a : artifacts_) list.push_back({{"file", a}, {"config_hash", hash_}});
    m["artifacts"] = list;
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    if (!out) throw InputError("report", "cannot write manifest.json");
    out << m.dump(2) << '\n';
}

}  // namespace kickns::app
