#include "spotmatch/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace spotmatch {

namespace {

const std::set<std::string>& key_set() {
    static const std::set<std::string> keys = {
        // model
        "alpha", "alpha_prime", "gamma", "gamma_prime", "beta", "beta_prime", "c", "delta",
        // experiment
        "T", "d0", "k0", "v0", "n", "seed", "replications", "match_mode", "z", "rounding",
        // grids and lists
        "z_grid", "d_grid", "v_grid", "n_values", "candidates",
        // per-command knobs
        "a", "b", "d_step", "tol", "d_ceiling", "d_lo", "d_hi", "budget", "threads", "out", "config_dir",
    };
    return keys;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double parse_real(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError("'" + key + "' expects a number, got '" + text + "'");
    return value;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
    return parts;
}

}  // namespace

PolicyVector PolicySpec::materialize(std::size_t horizon) const {
    switch (kind) {
    case Kind::constant:
        return PolicyVector::constant(horizon, z.at(0));
    case Kind::explicit_vector:
        if (z.size() != horizon)
            throw ConfigError("explicit policy has " + std::to_string(z.size()) + " entries but T = " +
                              std::to_string(horizon));
        return PolicyVector(z);
    case Kind::search:
        break;
    }
    throw ConfigError("policy 'search' has no fixed adoption levels");
}

bool Settings::known_key(const std::string& key) { return key_set().count(key) != 0; }

Settings Settings::parse(const std::string& text, const std::string& origin) {
    Settings s;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (s.has(key)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        try {
            s.set(key, trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return s;
}

Settings Settings::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

void Settings::set(const std::string& key, const std::string& value) {
    if (!known_key(key)) throw ConfigError("unknown key '" + key + "'");
    values_[key] = value;
}

void Settings::merge(const Settings& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
}

const std::string& Settings::raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
}

double Settings::real(const std::string& key) const { return parse_real(raw(key), key); }

double Settings::real_or(const std::string& key, double fallback) const {
    return has(key) ? real(key) : fallback;
}

std::int64_t Settings::integer(const std::string& key) const {
    const std::string t = trim(raw(key));
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError("'" + key + "' expects an integer, got '" + raw(key) + "'");
    return value;
}

std::int64_t Settings::integer_or(const std::string& key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
}

std::uint64_t Settings::unsigned_or(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string t = trim(raw(key));
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError("'" + key + "' expects an unsigned integer, got '" + raw(key) + "'");
    return value;
}

std::string Settings::text_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? raw(key) : fallback;
}

std::vector<double> parse_grid(const std::string& spec) {
    if (spec.find(':') != std::string::npos) {
        const auto parts = split(spec, ':');
        if (parts.size() != 3) throw ConfigError("grid '" + spec + "' must be lo:hi:step");
        const double lo = parse_real(parts[0], "grid lo");
        const double hi = parse_real(parts[1], "grid hi");
        const double step = parse_real(parts[2], "grid step");
        if (!(step > 0.0) || !(hi >= lo)) throw ConfigError("grid '" + spec + "' needs lo <= hi and step > 0");
        const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
        if (count > 10'000'000) throw ConfigError("grid '" + spec + "' is too large");
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = lo + static_cast<double>(i) * step;
        return out;
    }
    std::vector<double> out;
    for (const auto& part : split(spec, ',')) out.push_back(parse_real(part, "list entry"));
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

std::vector<double> Settings::grid(const std::string& key) const {
    try {
        return parse_grid(raw(key));
    } catch (const ConfigError& e) {
        throw ConfigError("'" + key + "': " + e.what());
    }
}

std::vector<double> Settings::grid_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? grid(key) : parse_grid(fallback);
}

ModelParams Settings::params() const {
    ModelParams p;
    p.alpha = real("alpha");
    p.alpha_prime = real("alpha_prime");
    p.gamma = real("gamma");
    p.gamma_prime = real("gamma_prime");
    p.beta = real("beta");
    p.beta_prime = real("beta_prime");
    p.c = real("c");
    p.delta = real_or("delta", 1.0);
    p.validate();
    return p;
}

FluidState Settings::fluid_state() const {
    FluidState s{real("d0"), real_or("k0", 0.0), real("v0")};
    s.validate();
    return s;
}

PolicySpec Settings::policy() const {
    PolicySpec spec;
    const std::string z = trim(raw("z"));
    if (z == "search") {
        spec.kind = PolicySpec::Kind::search;
        return spec;
    }
    if (z.find(',') != std::string::npos) {
        spec.kind = PolicySpec::Kind::explicit_vector;
        spec.z = parse_grid(z);
    } else {
        spec.kind = PolicySpec::Kind::constant;
        spec.z = {parse_real(z, "z")};
    }
    for (double x : spec.z)
        if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("'z' entries must lie in [0, 1]");
    return spec;
}

MatchMode Settings::match_mode() const {
    const std::string mode = text_or("match_mode", "aggregated");
    if (mode == "aggregated") return MatchMode::aggregated;
    if (mode == "pairwise") return MatchMode::pairwise;
    throw ConfigError("'match_mode' must be 'aggregated' or 'pairwise'");
}

}  // namespace spotmatch
