#pragma once

#include "error.hpp"
#include "expr.hpp"
#include "family.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace parajacobi {

using json = nlohmann::json;

struct Grid {
    double x_min = -2.0;
    double x_max = 2.0;
    int points = 11;
};

struct PerturbationSpec {
    std::string xi = "0";
    std::string zeta = "0";
};

struct RunConfig {
    json family;                          // the raw family block, kept for the report
    std::optional<PerturbationSpec> perturbation;
    Grid grid;
    std::vector<double> eta_angles{0.0, 0.3926990816987241, 0.7853981633974483, 1.1780972450961724,
                                   1.5707963267948966, 1.9634954084936207, 2.356194490192345, 2.748893571891069};
    Index n_max = 100000;
    Index j_max = 10000;
    std::map<std::string, double> tolerances{{"classify", 1e-9}, {"puncture", 1e-3}, {"spread", 0.25}};
    std::vector<std::string> commands;
    std::string output_dir = ".";

    double tol(const std::string& key) const { return tolerances.at(key); }
};

namespace detail {

inline std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline IndexFn expr_fn(const json& j, const std::string& key) {
    if (!j.contains(key)) throw Error(ErrorKind::config, "missing parameter '" + key + "'");
    const auto& v = j.at(key);
    if (v.is_number()) {
        const double c = v.get<double>();
        return [c](Index) { return c; };
    }
    if (!v.is_string()) throw Error(ErrorKind::config, "parameter '" + key + "' must be a number or expression string");
    auto e = std::make_shared<Expression>(v.get<std::string>());
    return [e](Index n) { return (*e)(static_cast<double>(n)); };
}

inline double number(const json& j, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_number())
        throw Error(ErrorKind::config, "parameter '" + key + "' must be a number");
    return j.at(key).get<double>();
}

inline std::vector<double> numbers(const json& j, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_array()) throw Error(ErrorKind::config, "parameter '" + key + "' must be an array");
    std::vector<double> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_number()) throw Error(ErrorKind::config, "parameter '" + key + "' must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

} // namespace detail

// {"kind": ..., "params": {...}} to a family.
inline FamilyDescriptor family_from_json(const json& block) {
    if (!block.is_object() || !block.contains("kind")) throw Error(ErrorKind::config, "family block needs a 'kind'");
    const std::string kind = block.at("kind").get<std::string>();
    const json params = block.value("params", json::object());
    if (kind == "yafaev")
        return build_yafaev(detail::number(params, "kappa"), params.value("f", 0.0), params.value("g", 0.0));
    if (kind == "bd_power") return build_bd_power(detail::number(params, "kappa"));
    if (kind == "symmetric_bd") {
        std::optional<double> gm1;
        if (params.contains("gamma_minus1")) gm1 = detail::number(params, "gamma_minus1");
        return build_symmetric_bd(detail::numbers(params, "tilde_alpha"), detail::expr_fn(params, "gamma"), gm1);
    }
    if (kind == "km") {
        KmSpec s{PeriodicData(detail::numbers(params, "alpha"), detail::numbers(params, "beta")),
                 detail::expr_fn(params, "hat_a"), detail::expr_fn(params, "delta"),
                 params.contains("f") ? detail::expr_fn(params, "f") : IndexFn([](Index) { return 0.0; }),
                 params.contains("g") ? detail::expr_fn(params, "g") : IndexFn([](Index) { return 0.0; })};
        return build_km(s);
    }
    if (kind == "custom") {
        PeriodicData pd(detail::numbers(params, "alpha"), detail::numbers(params, "beta"));
        return make_family(detail::expr_fn(params, "a"), detail::expr_fn(params, "b"), detail::expr_fn(params, "gamma"),
                           pd, params.value("label", std::string("custom")));
    }
    throw Error(ErrorKind::config, "unknown family kind '" + kind + "'");
}

inline PerturbedFamily perturbation_from_spec(const FamilyDescriptor& base, const PerturbationSpec& p) {
    auto xi = std::make_shared<Expression>(p.xi);
    auto zeta = std::make_shared<Expression>(p.zeta);
    return perturb_l1(
        base, [xi](Index n) { return (*xi)(static_cast<double>(n)); },
        [zeta](Index n) { return (*zeta)(static_cast<double>(n)); });
}

inline RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1);
        throw Error(ErrorKind::config, "config parse error at line " + std::to_string(line) + ", column " +
                                           std::to_string(col) + ": " + e.what());
    }
    RunConfig c;
    try {
        if (!j.contains("family")) throw Error(ErrorKind::config, "config needs a 'family' block");
        c.family = j.at("family");
        if (j.contains("perturbation")) {
            const auto& p = j.at("perturbation");
            PerturbationSpec s;
            s.xi = p.contains("xi") ? (p.at("xi").is_string() ? p.at("xi").get<std::string>() : p.at("xi").dump()) : "0";
            s.zeta = p.contains("zeta") ? (p.at("zeta").is_string() ? p.at("zeta").get<std::string>() : p.at("zeta").dump())
                                        : "0";
            c.perturbation = s;
        }
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            c.grid.x_min = g.value("x_min", c.grid.x_min);
            c.grid.x_max = g.value("x_max", c.grid.x_max);
            c.grid.points = g.value("points", c.grid.points);
        }
        if (j.contains("eta_angles")) c.eta_angles = detail::numbers(j, "eta_angles");
        c.n_max = j.value("n_max", c.n_max);
        c.j_max = j.value("j_max", c.j_max);
        if (j.contains("tolerances"))
            for (const auto& [k, v] : j.at("tolerances").items()) c.tolerances[k] = v.get<double>();
        if (j.contains("commands")) c.commands = j.at("commands").get<std::vector<std::string>>();
        c.output_dir = j.value("output_dir", c.output_dir);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, std::string("config field error: ") + e.what());
    }
    if (c.grid.points < 1) throw Error(ErrorKind::config, "grid.points must be at least 1");
    if (!(c.grid.x_min <= c.grid.x_max)) throw Error(ErrorKind::config, "grid.x_min must not exceed grid.x_max");
    if (c.n_max < 1000) throw Error(ErrorKind::config, "n_max must be at least 1000");
    if (c.j_max < 1) throw Error(ErrorKind::config, "j_max must be positive");
    if (c.eta_angles.empty()) throw Error(ErrorKind::config, "eta_angles must not be empty");
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "cannot read config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// Evenly spaced grid on [x_min, x_max]. Points closer than `half_width` to x0 are pushed
// out to x0 +- half_width so the count is preserved.
inline std::vector<double> punctured_grid(const Grid& g, std::optional<double> x0, double half_width) {
    std::vector<double> xs;
    for (int k = 0; k < g.points; ++k) {
        double x = g.points == 1 ? g.x_min : g.x_min + (g.x_max - g.x_min) * k / (g.points - 1);
        if (x0 && std::abs(x - *x0) < half_width) x = x < *x0 ? *x0 - half_width : *x0 + half_width;
        xs.push_back(x);
    }
    return xs;
}

} // namespace parajacobi
