#pragma once

// Built-in benchmarks and a JSON description format for user ODE models.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pcshap/basis.hpp"
#include "pcshap/error.hpp"
#include "pcshap/galerkin.hpp"
#include "pcshap/monte_carlo.hpp"
#include "pcshap/orthopoly.hpp"
#include "pcshap/surrogate.hpp"

namespace pcshap {

enum class ModelKind { Static, Ode };

/// A published reference number and the table it comes from.
struct ReferenceValue {
    double value = 0.0;
    std::string table;
};

struct BenchmarkReferences {
    std::map<VariableSubset, ReferenceValue> sobol;
    std::map<VariableSubset, ReferenceValue> worths;
    std::vector<ReferenceValue> total;
    std::vector<ReferenceValue> shapley;
    std::vector<ReferenceValue> borgonovo;

    bool empty() const { return sobol.empty() && worths.empty() && total.empty() && shapley.empty() && borgonovo.empty(); }
};

struct BenchmarkSpec {
    std::string name;
    ModelKind kind = ModelKind::Static;
    InputDistribution variables;
    std::optional<ModelFunction> function;
    std::optional<StochasticOdeModel> ode;
    BenchmarkReferences references;
    // ODE defaults
    double horizon = 0.0;
    double dt = 0.0;
    std::string output_state;

    std::size_t dims() const { return variables.size(); }
};

namespace detail {

inline std::vector<ReferenceValue> tagged(std::initializer_list<double> values, const std::string& table) {
    std::vector<ReferenceValue> out;
    for (double v : values) out.push_back({v, table});
    return out;
}

}  // namespace detail

// --- static benchmarks --------------------------------------------------------

/// sin x1 + 7 sin^2 x2 + 0.1 x3^4 sin x1 on U(-pi, pi)^3.
inline BenchmarkSpec ishigami() {
    constexpr double a = 7.0, b = 0.1;
    constexpr double pi = std::numbers::pi;
    BenchmarkSpec spec;
    spec.name = "ishigami";
    spec.kind = ModelKind::Static;
    for (const char* n : {"x1", "x2", "x3"}) spec.variables.push_back(InputVariable::uniform(-pi, pi, n));
    spec.function = ModelFunction{3, [](std::span<const double> x) {
                                      const double s1 = std::sin(x[0]);
                                      const double s2 = std::sin(x[1]);
                                      return s1 + a * s2 * s2 + b * std::pow(x[2], 4) * s1;
                                  }};
    auto& r = spec.references;
    const std::string sob = "ishigami-sobol", sha = "ishigami-shapley", cmp = "ishigami-comparison";
    r.sobol = {{{0}, {0.3139, sob}},    {{1}, {0.4424, sob}},    {{2}, {0.0, sob}},         {{0, 1}, {0.0, sob}},
               {{0, 2}, {0.2437, sob}}, {{1, 2}, {0.0, sob}},    {{0, 1, 2}, {0.0, sob}}};
    r.total = detail::tagged({0.5576, 0.4424, 0.2437}, sob);
    r.worths = {{{0}, {0.3139, sha}},    {{1}, {0.4424, sha}},    {{2}, {0.0, sha}},      {{0, 1}, {0.7563, sha}},
                {{0, 2}, {0.5576, sha}}, {{1, 2}, {0.4424, sha}}, {{0, 1, 2}, {1.0, sha}}};
    r.shapley = detail::tagged({0.4357, 0.4424, 0.1218}, sha);
    r.borgonovo = detail::tagged({0.2392, 0.4222, 0.1957}, cmp);
    return spec;
}

/// 1.9 x1^2 + 2 x2^2 + 1.05 x3 x1^3 + 0.35 x4 on U(-1, 1)^4.
inline BenchmarkSpec quartic() {
    BenchmarkSpec spec;
    spec.name = "quartic";
    spec.kind = ModelKind::Static;
    for (const char* n : {"x1", "x2", "x3", "x4"}) spec.variables.push_back(InputVariable::uniform(-1.0, 1.0, n));
    spec.function = ModelFunction{4, [](std::span<const double> x) {
                                      return 1.9 * x[0] * x[0] + 2.0 * x[1] * x[1] + 1.05 * x[2] * x[0] * x[0] * x[0] +
                                             0.35 * x[3];
                                  }};
    auto& r = spec.references;
    const std::string sob = "quartic-sobol", sha = "quartic-shapley", cmp = "quartic-comparison";
    for (std::uint64_t m = 1; m < 16; ++m) r.sobol[VariableSubset::from_mask(m)] = {0.0, sob};
    r.sobol[{0}] = {0.4169, sob};
    r.sobol[{1}] = {0.4619, sob};
    r.sobol[{3}] = {0.0530, sob};
    r.sobol[{0, 2}] = {0.0682, sob};
    r.total = detail::tagged({0.4851, 0.4619, 0.0682, 0.0530}, sob);
    r.worths = {{{0}, {0.4169, sha}},       {{1}, {0.4619, sha}},       {{2}, {0.0, sha}},
                {{3}, {0.0530, sha}},       {{0, 1}, {0.8788, sha}},    {{0, 2}, {0.4851, sha}},
                {{0, 3}, {0.4699, sha}},    {{1, 2}, {0.4619, sha}},    {{1, 3}, {0.5149, sha}},
                {{2, 3}, {0.0530, sha}},    {{0, 1, 2}, {0.9470, sha}}, {{0, 1, 3}, {0.9318, sha}},
                {{0, 2, 3}, {0.5381, sha}}, {{1, 2, 3}, {0.5149, sha}}, {{0, 1, 2, 3}, {1.0, sha}}};
    r.shapley = detail::tagged({0.4510, 0.4619, 0.0341, 0.0530}, sha);
    r.borgonovo = detail::tagged({0.2734, 0.3309, 0.0178, 0.0800}, cmp);
    return spec;
}

// --- ODE benchmarks -------------------------------------------------------------

/// SEIR with N = 1 and uncertain (beta, sigma, gamma); time in days.
inline BenchmarkSpec seir() {
    StochasticOdeModel m;
    m.name = "seir";
    m.states = {"S", "E", "I", "R"};
    m.parameters = {{"beta", InputVariable::uniform(2.5, 5.5, "beta")},
                    {"sigma", InputVariable::uniform(0.5, 1.5, "sigma")},
                    {"gamma", InputVariable::uniform(0.5, 1.5, "gamma")}};
    constexpr std::size_t S = 0, E = 1, I = 2, R = 3;
    constexpr double n_pop = 1.0;
    m.terms = {
        {S, -1.0 / n_pop, 0, {S, I}, std::nullopt},
        {E, 1.0 / n_pop, 0, {S, I}, std::nullopt},
        {E, -1.0, 1, {E}, std::nullopt},
        {I, 1.0, 1, {E}, std::nullopt},
        {I, -1.0, 2, {I}, std::nullopt},
        {R, 1.0, 2, {I}, std::nullopt},
    };
    m.initial = {{0.99, std::nullopt}, {0.0, std::nullopt}, {0.01, std::nullopt}, {0.0, std::nullopt}};
    m.validate();

    BenchmarkSpec spec;
    spec.name = "seir";
    spec.kind = ModelKind::Ode;
    spec.variables = m.input_variables();
    spec.ode = std::move(m);
    spec.horizon = 15.0;
    spec.dt = 0.01;
    spec.output_state = "I";
    return spec;
}

/// Basal glucose G_b, basal insulin I_b, insulin clearance p4 and meal decay d.
/// None has a published default, so all four must be supplied.
struct BergmanConstants {
    std::optional<double> G_b;
    std::optional<double> I_b;
    std::optional<double> d;
    std::optional<double> p4;

    static BergmanConstants from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw ConfigError("bergman constants must be a JSON object");
        BergmanConstants c;
        auto take = [&](const char* key, std::optional<double>& dst) {
            if (!j.contains(key)) return;
            if (!j[key].is_number()) throw ConfigError(std::string("bergman constant '") + key + "' must be a number");
            dst = j[key].get<double>();
        };
        take("G_b", c.G_b);
        take("I_b", c.I_b);
        take("d", c.d);
        take("p4", c.p4);
        return c;
    }
};

inline constexpr double kBergmanMeal = 28.98;       // B, mg/dL/min
inline constexpr double kBergmanMealTime = 15.0;    // t_m, min
inline constexpr double kBergmanBolus = 202.96;     // U on 0 <= t < 1, mU/L/min
inline constexpr double kBergmanInitialInsulin = 15.3872;

/// Bergman minimal model with Fisher meal and insulin bolus; time in minutes.
inline BenchmarkSpec bergman(const BergmanConstants& c) {
    std::vector<std::string> missing;
    if (!c.G_b) missing.push_back("G_b");
    if (!c.I_b) missing.push_back("I_b");
    if (!c.d) missing.push_back("d");
    if (!c.p4) missing.push_back("p4");
    if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
        throw ConfigError("bergman model: missing required constants " + list +
                          " (all of G_b, I_b, d, p4 must be supplied, e.g. with --param-file)");
    }
    for (double v : {*c.G_b, *c.I_b, *c.d, *c.p4})
        if (!std::isfinite(v)) throw ConfigError("bergman model: constants must be finite");
    if (*c.d < 0.0 || *c.p4 < 0.0) throw ConfigError("bergman model: d and p4 must be non-negative");

    StochasticOdeModel m;
    m.name = "bergman";
    m.states = {"G", "X", "I"};
    m.parameters = {{"p1", InputVariable::uniform(0.0201, 0.0373, "p1")},
                    {"p2", InputVariable::uniform(0.0198, 0.0368, "p2")},
                    {"p3", InputVariable::uniform(3.525e-5, 6.545e-5, "p3")},
                    {"G0", InputVariable::uniform(83.43, 154.93, "G0")}};
    const double decay = *c.d;
    m.signals = {{"D",
                  [decay](double t) {
                      return t < kBergmanMealTime ? 0.0 : kBergmanMeal * std::exp(-decay * (t - kBergmanMealTime));
                  }},
                 {"U", [](double t) { return (t >= 0.0 && t < 1.0) ? kBergmanBolus : 0.0; }}};
    constexpr std::size_t G = 0, X = 1, I = 2;
    constexpr std::size_t p1 = 0, p2 = 1, p3 = 2;
    m.terms = {
        {G, -1.0, std::nullopt, {X, G}, std::nullopt},
        {G, -1.0, p1, {G}, std::nullopt},
        {G, *c.G_b, p1, {}, std::nullopt},
        {G, 1.0, std::nullopt, {}, 0},
        {X, -1.0, p2, {X}, std::nullopt},
        {X, 1.0, p3, {I}, std::nullopt},
        {X, -*c.I_b, p3, {}, std::nullopt},
        {I, -*c.p4, std::nullopt, {I}, std::nullopt},
        {I, *c.p4 * *c.I_b, std::nullopt, {}, std::nullopt},
        {I, 1.0, std::nullopt, {}, 1},
    };
    m.initial = {{0.0, 3}, {0.0, std::nullopt}, {kBergmanInitialInsulin, std::nullopt}};
    m.validate();

    BenchmarkSpec spec;
    spec.name = "bergman";
    spec.kind = ModelKind::Ode;
    spec.variables = m.input_variables();
    spec.ode = std::move(m);
    spec.horizon = 300.0;
    spec.dt = 0.1;
    spec.output_state = "G";
    return spec;
}

// --- JSON model descriptions ---------------------------------------------------------
//
// {
//   "name": "sir", "kind": "ode",
//   "states": ["S", "I", "R"],
//   "parameters": [{"name": "beta", "distribution": "uniform", "lower": 0.2, "upper": 0.4},
//                  {"name": "gamma", "distribution": "normal", "mean": 0.1, "sd": 0.01}],
//   "constants": {"N": 1.0},
//   "signals": [{"name": "u", "type": "pulse", "amplitude": 1, "start": 0, "end": 1},
//               {"name": "m", "type": "exponential", "amplitude": 2, "start": 5, "decay": 0.1},
//               {"name": "c", "type": "constant", "value": 3}],
//   "initial": {"S": 0.99, "I": 0.01, "R": 0} (a string names a parameter),
//   "terms": [{"state": "S", "coefficient": ["-1", "1/N"], "parameter": "beta", "factors": ["S", "I"]},
//             {"state": "I", "coefficient": 1, "signal": "u"}],
//   "horizon": 15, "dt": 0.01, "output": "I"
// }
//
// A coefficient is a number, a constant name (optionally "-name" or "1/name"),
// or a list of those multiplied together.

namespace detail {

inline double json_number(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_number()) throw ConfigError(where + ": missing numeric field '" + key + "'");
    return j[key].get<double>();
}

inline double coefficient_factor(const nlohmann::json& f, const std::map<std::string, double>& constants,
                                  const std::string& where) {
    if (f.is_number()) return f.get<double>();
    if (!f.is_string()) throw ConfigError(where + ": coefficient entries must be numbers or constant names");
    std::string s = f.get<std::string>();
    double sign = 1.0;
    bool reciprocal = false;
    if (!s.empty() && s[0] == '-') {
        sign = -1.0;
        s.erase(0, 1);
    }
    if (s.rfind("1/", 0) == 0) {
        reciprocal = true;
        s.erase(0, 2);
    }
    double v;
    if (auto it = constants.find(s); it != constants.end()) {
        v = it->second;
    } else {
        std::size_t used = 0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw ConfigError(where + ": unknown constant '" + s + "'");
        }
        if (used != s.size()) throw ConfigError(where + ": unknown constant '" + s + "'");
    }
    if (reciprocal) {
        if (v == 0.0) throw ConfigError(where + ": division by zero constant '" + s + "'");
        v = 1.0 / v;
    }
    return sign * v;
}

inline std::size_t lookup(const std::vector<std::string>& names, const std::string& s, const std::string& what,
                          const std::string& where) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == s) return i;
    throw ConfigError(where + ": unknown " + what + " '" + s + "'");
}

}  // namespace detail

inline BenchmarkSpec model_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object()) throw ConfigError("model description must be a JSON object");
        const std::string name = j.value("name", std::string("custom"));
        const std::string kind = j.value("kind", std::string("ode"));
        if (kind != "ode")
            throw ConfigError("model '" + name + "': only kind \"ode\" can be described in JSON; static functions are built in");

        StochasticOdeModel m;
        m.name = name;
        for (const auto& s : j.at("states")) m.states.push_back(s.get<std::string>());

        std::vector<std::string> param_names;
        for (const auto& p : j.at("parameters")) {
            const std::string pn = p.at("name").get<std::string>();
            const std::string dist = p.value("distribution", std::string("uniform"));
            const std::string where = "parameter '" + pn + "'";
            InputVariable v = dist == "uniform" ? InputVariable::uniform(detail::json_number(p, "lower", where),
                                                                         detail::json_number(p, "upper", where), pn)
                              : dist == "normal"
                                  ? InputVariable::normal(detail::json_number(p, "mean", where),
                                                          detail::json_number(p, "sd", where), pn)
                                  : throw ConfigError(where + ": unknown distribution '" + dist + "'");
            m.parameters.push_back({pn, v});
            param_names.push_back(pn);
        }

        std::map<std::string, double> constants;
        if (j.contains("constants"))
            for (const auto& [k, v] : j["constants"].items()) {
                if (!v.is_number()) throw ConfigError("constant '" + k + "' must be a number");
                constants[k] = v.get<double>();
            }

        std::vector<std::string> signal_names;
        if (j.contains("signals"))
            for (const auto& s : j["signals"]) {
                const std::string sn = s.at("name").get<std::string>();
                const std::string type = s.at("type").get<std::string>();
                const std::string where = "signal '" + sn + "'";
                TimeSignal sig{sn, {}};
                if (type == "constant") {
                    const double v = detail::json_number(s, "value", where);
                    sig.value = [v](double) { return v; };
                } else if (type == "pulse") {
                    const double amp = detail::json_number(s, "amplitude", where);
                    const double t0 = detail::json_number(s, "start", where);
                    const double t1 = detail::json_number(s, "end", where);
                    sig.value = [=](double t) { return (t >= t0 && t < t1) ? amp : 0.0; };
                } else if (type == "exponential") {
                    const double amp = detail::json_number(s, "amplitude", where);
                    const double t0 = detail::json_number(s, "start", where);
                    const double k = detail::json_number(s, "decay", where);
                    sig.value = [=](double t) { return t < t0 ? 0.0 : amp * std::exp(-k * (t - t0)); };
                } else {
                    throw ConfigError(where + ": unknown type '" + type + "'");
                }
                m.signals.push_back(std::move(sig));
                signal_names.push_back(sn);
            }

        m.initial.assign(m.states.size(), InitialValue{});
        const auto& init = j.at("initial");
        for (const auto& [k, v] : init.items()) {
            const auto s = detail::lookup(m.states, k, "state", "initial values");
            if (v.is_number())
                m.initial[s].value = v.get<double>();
            else if (v.is_string())
                m.initial[s].parameter = detail::lookup(param_names, v.get<std::string>(), "parameter", "initial values");
            else
                throw ConfigError("initial value of '" + k + "' must be a number or a parameter name");
        }

        std::size_t t = 0;
        for (const auto& term : j.at("terms")) {
            const std::string where = "term " + std::to_string(++t);
            OdeTerm ot;
            ot.target = detail::lookup(m.states, term.at("state").get<std::string>(), "state", where);
            ot.scale = 1.0;
            if (term.contains("coefficient")) {
                const auto& c = term["coefficient"];
                if (c.is_array())
                    for (const auto& f : c) ot.scale *= detail::coefficient_factor(f, constants, where);
                else
                    ot.scale = detail::coefficient_factor(c, constants, where);
            }
            if (term.contains("parameter"))
                ot.parameter = detail::lookup(param_names, term["parameter"].get<std::string>(), "parameter", where);
            if (term.contains("factors"))
                for (const auto& f : term["factors"])
                    ot.states.push_back(detail::lookup(m.states, f.get<std::string>(), "state", where));
            if (term.contains("signal"))
                ot.signal = detail::lookup(signal_names, term["signal"].get<std::string>(), "signal", where);
            m.terms.push_back(std::move(ot));
        }
        m.validate();

        BenchmarkSpec spec;
        spec.name = name;
        spec.kind = ModelKind::Ode;
        spec.variables = m.input_variables();
        spec.horizon = j.value("horizon", 0.0);
        spec.dt = j.value("dt", 0.0);
        spec.output_state = j.value("output", m.states.front());
        m.state_index(spec.output_state);
        spec.ode = std::move(m);
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed model description: ") + e.what());
    }
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline BenchmarkSpec load_model_file(const std::string& path) { return model_from_json(read_json_file(path)); }

/// Built-in names: ishigami, quartic, seir, bergman (needs constants).
inline BenchmarkSpec builtin_model(const std::string& name, const std::optional<BergmanConstants>& bergman_constants = {}) {
    if (name == "ishigami") return ishigami();
    if (name == "quartic") return quartic();
    if (name == "seir") return seir();
    if (name == "bergman") return bergman(bergman_constants.value_or(BergmanConstants{}));
    throw ConfigError("unknown model '" + name + "' (built-ins: ishigami, quartic, seir, bergman)");
}

}  // namespace pcshap
