#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spotmatch/error.hpp"
#include "spotmatch/fluid.hpp"
#include "spotmatch/sim.hpp"

namespace spotmatch {

class ConfigError : public DomainError {
public:
    using DomainError::DomainError;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// How the adoption levels of an experiment are chosen.
struct PolicySpec {
    enum class Kind { constant, explicit_vector, search };
    Kind kind = Kind::constant;
    std::vector<double> z;  // one entry for constant, T entries for explicit

    PolicyVector materialize(std::size_t horizon) const;  // not valid for search
};

/// Flat `key = value` settings. Files use one key per line and `#` comments;
/// command-line flags override file values key by key.
class Settings {
public:
    /// Parses config text; `origin` labels error messages.
    static Settings parse(const std::string& text, const std::string& origin = "<config>");
    static Settings load(const std::string& path);

    /// Throws ConfigError for keys outside the known set.
    void set(const std::string& key, const std::string& value);
    void merge(const Settings& other);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& raw(const std::string& key) const;

    double real(const std::string& key) const;
    double real_or(const std::string& key, double fallback) const;
    std::int64_t integer(const std::string& key) const;
    std::int64_t integer_or(const std::string& key, std::int64_t fallback) const;
    std::uint64_t unsigned_or(const std::string& key, std::uint64_t fallback) const;
    std::string text_or(const std::string& key, const std::string& fallback) const;

    /// Comma list, or a `lo:hi:step` grid (inclusive of hi up to rounding).
    std::vector<double> grid(const std::string& key) const;
    std::vector<double> grid_or(const std::string& key, const std::string& fallback) const;

    ModelParams params() const;
    FluidState fluid_state() const;
    PolicySpec policy() const;
    MatchMode match_mode() const;

    const std::map<std::string, std::string>& values() const { return values_; }

    static bool known_key(const std::string& key);

private:
    std::map<std::string, std::string> values_;
};

/// Parses "lo:hi:step" or "x1,x2,...".
std::vector<double> parse_grid(const std::string& spec);

}  // namespace spotmatch
