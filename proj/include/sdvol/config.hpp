#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sdvol/errors.hpp"
#include "sdvol/scenario.hpp"

namespace sdvol {

// Scenario config files are flat `key = value` text with `[section]` headers.
//
//   model = valuation          # top level: model, sigma, y0, p
//   sigma = 0.5
//   y0 = 0.9
//   [drift]                    # drift / sigma / sigma_f: family, params
//   family = quadratic_bump
//   params = 1.5, 0.1, 2
//   [grid]                     # t0, t_end, dt
//   t_end = 6
//   [monte_carlo]              # n_paths, seed
//   n_paths = 100000
//   seed = 7
//
// `sigma` is either a top-level number or a [sigma] section, never both.
// Unknown sections or keys are parse errors.

namespace config_detail {

inline const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"", {"model", "sigma", "y0", "p"}},
        {"drift", {"family", "params"}},
        {"sigma", {"family", "params"}},
        {"sigma_f", {"family", "params"}},
        {"grid", {"t0", "t_end", "dt"}},
        {"monte_carlo", {"n_paths", "seed"}},
    };
    return keys;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string qualified(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
}

}  // namespace config_detail

/// Parsed but uninterpreted config: qualified key ("grid.dt", "sigma") -> raw value.
class ConfigDocument {
public:
    static ConfigDocument parse(std::string_view text) {
        using namespace config_detail;
        ConfigDocument doc;
        std::string section;
        std::size_t line_no = 0;
        std::istringstream in{std::string(text)};
        std::string raw;
        while (std::getline(in, raw)) {
            ++line_no;
            std::string line = raw;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const std::string where = "line " + std::to_string(line_no) + ": ";
            if (line.front() == '[') {
                if (line.back() != ']') throw ParseError(where + "unterminated section header");
                section = trim(std::string_view(line).substr(1, line.size() - 2));
                if (!allowed_keys().contains(section) || section.empty())
                    throw ParseError(where + "unknown section [" + section + "]");
                doc.sections_.insert(section);
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ParseError(where + "expected key = value");
            const std::string key = trim(std::string_view(line).substr(0, eq));
            const std::string value = trim(std::string_view(line).substr(eq + 1));
            if (key.empty()) throw ParseError(where + "empty key");
            if (!allowed_keys().at(section).contains(key))
                throw ParseError(where + "unknown key '" + qualified(section, key) + "'");
            if (value.empty())
                throw ParseError(where + "empty value for '" + qualified(section, key) + "'");
            const std::string q = qualified(section, key);
            if (doc.values_.contains(q)) throw ParseError(where + "duplicate key '" + q + "'");
            doc.values_[q] = value;
        }
        if (doc.values_.contains("sigma") && doc.sections_.contains("sigma"))
            throw ParseError("sigma given both as a value and as a [sigma] section");
        return doc;
    }

    bool has(const std::string& key) const { return values_.contains(key); }
    bool has_section(const std::string& s) const { return sections_.contains(s); }

    std::optional<std::string> get(const std::string& key) const {
        if (auto it = values_.find(key); it != values_.end()) return it->second;
        return std::nullopt;
    }

    std::string require(const std::string& key) const {
        if (auto v = get(key)) return *v;
        throw ParseError("missing required key '" + key + "'");
    }

    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    /// Sets (or adds) a qualified key, enforcing the same key list as parsing.
    void set(const std::string& key, std::string value) {
        using namespace config_detail;
        const auto dot = key.find('.');
        const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
        const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
        const auto it = allowed_keys().find(section);
        if (it == allowed_keys().end() || !it->second.contains(name))
            throw ParseError("unknown key '" + key + "'");
        if (trim(value).empty()) throw ParseError("empty value for '" + key + "'");
        if (!section.empty()) sections_.insert(section);
        values_[key] = std::move(value);
    }

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> sections_;
};

inline double parse_real(const std::string& key, const std::string& text) {
    const std::string t = config_detail::trim(text);
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
        throw ParseError("key '" + key + "': not a finite number: '" + t + "'");
    return v;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
    const std::string t = config_detail::trim(text);
    errno = 0;
    char* end = nullptr;
    if (t.empty() || t.front() == '-')
        throw ParseError("key '" + key + "': not a non-negative integer: '" + t + "'");
    const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size() || errno == ERANGE)
        throw ParseError("key '" + key + "': not a non-negative integer: '" + t + "'");
    return v;
}

inline std::vector<double> parse_real_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto stop = comma == std::string::npos ? text.size() : comma;
        out.push_back(parse_real(key, text.substr(start, stop - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

/// Shortest text that strtod maps back to exactly `v`.
inline std::string format_real(double v) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

namespace config_detail {

inline FunctionSpec read_function(const ConfigDocument& doc, const std::string& section) {
    const std::string fam_key = section + ".family";
    const std::string par_key = section + ".params";
    const std::string fam_text = doc.require(fam_key);
    const auto fam = family_from_name(fam_text);
    if (!fam) throw ParseError("key '" + fam_key + "': unknown family '" + fam_text + "'");
    auto params = parse_real_list(par_key, doc.require(par_key));
    try {
        return FunctionSpec(*fam, std::move(params));
    } catch (const std::invalid_argument& e) {
        throw ParseError("[" + section + "] " + e.what());
    }
}

inline void write_function(std::ostream& out, const std::string& section, const FunctionSpec& f) {
    out << "\n[" << section << "]\n";
    out << "family = " << family_name(f.family()) << "\n";
    out << "params = ";
    const auto p = f.params();
    for (std::size_t i = 0; i < p.size(); ++i) out << (i ? ", " : "") << format_real(p[i]);
    out << "\n";
}

}  // namespace config_detail

/// Builds a Scenario. Throws ParseError for text problems and ValidationError
/// for an impossible grid.
inline Scenario scenario_from_document(const ConfigDocument& doc) {
    using namespace config_detail;
    Scenario s;
    const std::string model_text = doc.require("model");
    const auto model = model_from_name(model_text);
    if (!model) throw ParseError("key 'model': unknown model '" + model_text + "'");
    s.model = *model;

    if (!doc.has_section("drift")) throw ParseError("missing required section [drift]");
    s.drift = read_function(doc, "drift");

    if (auto v = doc.get("sigma"))
        s.sigma = FunctionSpec::constant(parse_real("sigma", *v));
    else if (doc.has_section("sigma"))
        s.sigma = read_function(doc, "sigma");
    else
        throw ParseError("missing required key 'sigma'");

    if (doc.has_section("sigma_f")) s.sigma_f = read_function(doc, "sigma_f");
    if (s.model == ModelKind::StochasticF && !s.sigma_f)
        throw ParseError("model stochastic_f needs a [sigma_f] section");

    s.y0 = parse_real("y0", doc.require("y0"));

    if (auto v = doc.get("p")) {
        const auto p = parse_unsigned("p", *v);
        if (p < 1 || p > 64) throw ParseError("key 'p': must be an integer in [1, 64]");
        s.power = static_cast<int>(p);
    }
    if (needs_power(s.model) && !s.power)
        throw ParseError("missing required key 'p' for model " + model_text);

    const double t0 = doc.has("grid.t0") ? parse_real("grid.t0", *doc.get("grid.t0")) : 0.0;
    const double t_end = parse_real("grid.t_end", doc.require("grid.t_end"));
    const double dt = doc.has("grid.dt") ? parse_real("grid.dt", *doc.get("grid.dt")) : 1e-3;
    s.grid = TimeGrid::make(t0, t_end, dt);

    if (auto v = doc.get("monte_carlo.n_paths"))
        s.n_paths = static_cast<std::size_t>(parse_unsigned("monte_carlo.n_paths", *v));
    if (auto v = doc.get("monte_carlo.seed")) s.seed = parse_unsigned("monte_carlo.seed", *v);
    return s;
}

inline Scenario parse_scenario(std::string_view text) {
    return scenario_from_document(ConfigDocument::parse(text));
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

/// Canonical text form. parse_scenario(emit_scenario(s)) == s.
inline std::string emit_scenario(const Scenario& s) {
    using config_detail::write_function;
    std::ostringstream out;
    out << "model = " << model_name(s.model) << "\n";
    if (s.sigma.is_constant()) out << "sigma = " << format_real(s.sigma_constant()) << "\n";
    out << "y0 = " << format_real(s.y0) << "\n";
    if (s.power) out << "p = " << *s.power << "\n";
    write_function(out, "drift", s.drift);
    if (!s.sigma.is_constant()) write_function(out, "sigma", s.sigma);
    if (s.sigma_f) write_function(out, "sigma_f", *s.sigma_f);
    out << "\n[grid]\n";
    out << "t0 = " << format_real(s.grid.t0) << "\n";
    out << "t_end = " << format_real(s.grid.t_end) << "\n";
    out << "dt = " << format_real(s.grid.dt) << "\n";
    out << "\n[monte_carlo]\n";
    out << "n_paths = " << s.n_paths << "\n";
    out << "seed = " << s.seed << "\n";
    return out.str();
}

}  // namespace sdvol
