#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "spde/harness.hpp"

namespace spde {

/// Flat key = value manifest with [section] headers, '#' comments and blank
/// lines. Parse errors carry the source label and line number.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text,
                                   const std::string& label = "<string>");

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key,
                         std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& section, const std::string& key,
                           std::uint64_t fallback) const;
    double get_double(const std::string& section, const std::string& key,
                      double fallback) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::string label_;
    std::map<std::string, std::string> entries_;  // "section.key" -> value
    std::map<std::string, int> lines_;            // for error context
    [[noreturn]] void bad_value(const std::string& full_key, const std::string& why) const;
};

/// Build an experiment description from a manifest; unknown keys are
/// rejected so typos surface instead of silently using defaults.
ExperimentConfig experiment_from_config(const ConfigFile& config);

}  // namespace spde
