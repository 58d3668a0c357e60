#include "spde/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spde {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str(), path);
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& label) {
    ConfigFile cfg;
    cfg.label_ = label;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line.substr(0, line.find('#')));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw std::runtime_error(label + ":" + std::to_string(line_no) +
                                         ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw std::runtime_error(label + ":" + std::to_string(line_no) +
                                         ": empty section name");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(label + ":" + std::to_string(line_no) +
                                     ": expected 'key = value', got '" + t + "'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error(label + ":" + std::to_string(line_no) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (cfg.entries_.count(full))
            throw std::runtime_error(label + ":" + std::to_string(line_no) +
                                     ": duplicate key '" + full + "'");
        cfg.entries_[full] = value;
        cfg.lines_[full] = line_no;
    }
    return cfg;
}

void ConfigFile::bad_value(const std::string& full_key, const std::string& why) const {
    const auto it = lines_.find(full_key);
    const std::string at = it == lines_.end() ? "" : ":" + std::to_string(it->second);
    throw std::runtime_error(label_ + at + ": " + why + " for '" + full_key + "'");
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    return entries_.count(section + "." + key) > 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    const auto it = entries_.find(section + "." + key);
    return it == entries_.end() ? fallback : it->second;
}

std::int64_t ConfigFile::get_int(const std::string& section, const std::string& key,
                                 std::int64_t fallback) const {
    const auto it = entries_.find(section + "." + key);
    if (it == entries_.end()) return fallback;
    std::int64_t v = 0;
    const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (res.ec != std::errc{} || res.ptr != it->second.data() + it->second.size())
        bad_value(it->first, "expected an integer, got '" + it->second + "'");
    return v;
}

std::uint64_t ConfigFile::get_uint(const std::string& section, const std::string& key,
                                   std::uint64_t fallback) const {
    const auto it = entries_.find(section + "." + key);
    if (it == entries_.end()) return fallback;
    std::uint64_t v = 0;
    const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (res.ec != std::errc{} || res.ptr != it->second.data() + it->second.size())
        bad_value(it->first, "expected a nonnegative integer, got '" + it->second + "'");
    return v;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    const auto it = entries_.find(section + "." + key);
    if (it == entries_.end()) return fallback;
    double v = 0.0;
    const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (res.ec != std::errc{} || res.ptr != it->second.data() + it->second.size())
        bad_value(it->first, "expected a number, got '" + it->second + "'");
    return v;
}

ExperimentConfig experiment_from_config(const ConfigFile& config) {
    static const std::map<std::string, int> known = {
        {"problem.name", 0},       {"problem.horizon", 0},
        {"grid.extent", 0},        {"grid.refinements", 0},
        {"richardson.k", 0},       {"richardson.power_step", 0},
        {"run.scheme", 0},         {"run.paths", 0},
        {"run.master_seed", 0},    {"run.time_step", 0},
        {"run.threads", 0},        {"output.directory", 0},
        {"output.basename", 0},
    };
    for (const auto& [key, value] : config.entries())
        if (!known.count(key))
            throw std::runtime_error("config: unknown key '" + key + "'");

    ExperimentConfig cfg;
    cfg.problem = config.get("problem", "name", "");
    if (cfg.problem.empty()) throw std::runtime_error("config: problem.name is required");
    cfg.horizon = config.get_double("problem", "horizon", 0.0);
    cfg.coarse_extent = config.get_int("grid", "extent", cfg.coarse_extent);
    cfg.refinements = static_cast<int>(config.get_int("grid", "refinements", cfg.refinements));
    cfg.level = static_cast<int>(config.get_int("richardson", "k", cfg.level));
    cfg.power_step = static_cast<int>(config.get_int("richardson", "power_step", cfg.power_step));
    cfg.scheme = scheme_from_string(config.get("run", "scheme", "auto"));
    cfg.paths = config.get_int("run", "paths", cfg.paths);
    cfg.master_seed = config.get_uint("run", "master_seed", cfg.master_seed);
    cfg.time_step = config.get_double("run", "time_step", 0.0);
    cfg.threads = static_cast<int>(config.get_int("run", "threads", 0));
    cfg.output_dir = config.get("output", "directory", "");
    cfg.output_basename = config.get("output", "basename", cfg.output_basename);
    return cfg;
}

}  // namespace spde
