#pragma once

// Experiment configuration: a flat key tree.
//
//   # comment
//   [section]            sections may be dotted, e.g. [grid.fixed]
//   key = value          numbers accept pi, + - * / and parentheses
//   key = a, b, c        lists are comma separated
//
// Parsing is strict. Any key outside the schema is an error naming the full
// key path, so a typo never silently falls back to a default.

#include <cctype>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "analysis.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "spectrum.hpp"
#include "trajectory.hpp"

namespace jcep {

namespace detail {

inline std::string trim(std::string_view s)
{
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split_list(std::string_view s)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    int depth = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i < s.size() && s[i] == '(') ++depth;
        if (i < s.size() && s[i] == ')') --depth;
        if (i == s.size() || (s[i] == ',' && depth == 0)) {
            out.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

// Recursive descent over + - * / ( ) with numeric literals and `pi`.
class ExprParser {
public:
    explicit ExprParser(std::string_view s) : s_(s) {}

    double parse()
    {
        const double v = sum();
        skip();
        if (pos_ != s_.size()) fail();
        return v;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail() const { throw ConfigError("cannot parse number '" + std::string(s_) + "'"); }
    void skip()
    {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c)
    {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    double sum()
    {
        double v = product();
        while (true) {
            if (eat('+')) v += product();
            else if (eat('-')) v -= product();
            else return v;
        }
    }
    double product()
    {
        double v = unary();
        while (true) {
            if (eat('*')) v *= unary();
            else if (eat('/')) v /= unary();
            else return v;
        }
    }
    double unary()
    {
        if (eat('-')) return -unary();
        if (eat('+')) return unary();
        return atom();
    }
    double atom()
    {
        if (eat('(')) {
            const double v = sum();
            if (!eat(')')) fail();
            return v;
        }
        skip();
        if (s_.substr(pos_, 2) == "pi") {
            pos_ += 2;
            return pi;
        }
        const std::string rest(s_.substr(pos_));
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(rest, &used);
        } catch (const std::exception&) {
            fail();
        }
        if (used == 0) fail();
        pos_ += used;
        return v;
    }
};

} // namespace detail

inline double parse_number(std::string_view text)
{
    const double v = detail::ExprParser(text).parse();
    if (!std::isfinite(v)) throw ConfigError("non-finite number '" + std::string(text) + "'");
    return v;
}

/// Raw key tree: "section.key" → value, with the source line for messages.
class KeyTree {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    static KeyTree parse(std::istream& in)
    {
        KeyTree t;
        std::string section, line;
        int n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string s = detail::trim(line);
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']') throw ConfigError("line " + std::to_string(n) + ": malformed section header");
                section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
                if (section.empty()) throw ConfigError("line " + std::to_string(n) + ": empty section name");
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
            const std::string key = detail::trim(std::string_view(s).substr(0, eq));
            if (key.empty()) throw ConfigError("line " + std::to_string(n) + ": empty key");
            const std::string path = section.empty() ? key : section + "." + key;
            if (t.entries_.count(path)) throw ConfigError("duplicate key '" + path + "' at line " + std::to_string(n));
            t.entries_[path] = {detail::trim(std::string_view(s).substr(eq + 1)), n};
        }
        return t;
    }

    static KeyTree parse_file(const std::string& path)
    {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        return parse(in);
    }

    const std::map<std::string, Entry>& entries() const { return entries_; }
    bool has(const std::string& path) const { return entries_.count(path) != 0; }
    bool has_section(const std::string& prefix) const
    {
        const auto it = entries_.lower_bound(prefix + ".");
        return it != entries_.end() && it->first.compare(0, prefix.size() + 1, prefix + ".") == 0;
    }

    const std::string& text(const std::string& path) const
    {
        const auto it = entries_.find(path);
        if (it == entries_.end()) throw ConfigError("missing key '" + path + "'");
        return it->second.value;
    }

    double number(const std::string& path) const
    {
        try {
            return parse_number(text(path));
        } catch (const ConfigError& e) {
            throw ConfigError("key '" + path + "': " + e.what());
        }
    }
    double number_or(const std::string& path, double fallback) const { return has(path) ? number(path) : fallback; }

    std::size_t count(const std::string& path) const
    {
        const double v = number(path);
        if (!(v >= 0.0) || v != std::floor(v) || v > 1e15)
            throw ConfigError("key '" + path + "': expected a non-negative integer");
        return static_cast<std::size_t>(v);
    }
    std::size_t count_or(const std::string& path, std::size_t fallback) const
    {
        return has(path) ? count(path) : fallback;
    }

    bool boolean_or(const std::string& path, bool fallback) const
    {
        if (!has(path)) return fallback;
        const std::string& v = text(path);
        if (v == "true" || v == "yes" || v == "1") return true;
        if (v == "false" || v == "no" || v == "0") return false;
        throw ConfigError("key '" + path + "': expected true or false");
    }

    std::vector<std::string> list(const std::string& path) const { return detail::split_list(text(path)); }

    std::vector<double> numbers(const std::string& path) const
    {
        std::vector<double> out;
        for (const auto& item : list(path)) {
            try {
                out.push_back(parse_number(item));
            } catch (const ConfigError& e) {
                throw ConfigError("key '" + path + "': " + e.what());
            }
        }
        return out;
    }

    /// Rejects every key outside `schema`.
    void require_known(const std::set<std::string>& schema) const
    {
        for (const auto& [path, e] : entries_)
            if (!schema.count(path))
                throw ConfigError("unknown key '" + path + "' at line " + std::to_string(e.line));
    }

private:
    std::map<std::string, Entry> entries_;
};

// ---------------------------------------------------------------------------
// Typed configuration
// ---------------------------------------------------------------------------

struct ModelBlock {
    double omega_a = 1.0;
    double alpha = -1.0;
};

struct LoopBlock {
    LoopKind kind = LoopKind::symmetric;
    LoopConstants constants;
    std::string custom_csv;
    Direction custom_direction = Direction::ccw;
    std::vector<Direction> directions{Direction::cw, Direction::ccw};
    std::vector<Label> initial{Label::plus, Label::minus};

    /// The loop traversed in direction d.
    Loop build(Direction d, const ModelBlock& model) const
    {
        Loop l = [&] {
            const LoopConstants& c = constants;
            switch (kind) {
            case LoopKind::symmetric:
                return make_symmetric_loop(c.g0, c.G0, c.Gamma0, model.alpha, c.omega, model.omega_a);
            case LoopKind::chiral_modulated:
                return make_chiral_modulated_loop(c.g0, c.Delta0, c.Gamma0, model.alpha, c.omega, model.omega_a);
            case LoopKind::constant_dissipation:
                return make_constant_dissipation_loop(c.g0, c.G0, c.Delta0, c.gamma0, model.alpha, c.omega,
                                                      model.omega_a);
            default: {
                std::ifstream in(custom_csv);
                if (!in) throw ConfigError("cannot open custom loop table '" + custom_csv + "'");
                ParameterPoint defaults;
                defaults.omega_a = model.omega_a;
                return load_custom_loop_csv(in, defaults, custom_direction);
            }
            }
        }();
        return l.direction() == d ? l : l.reversed();
    }
};

struct GridBlock {
    GridSpec spec;
    std::optional<Point2> reference;
    std::optional<Param> cut_axis;
    double cut_value = 0.0;
    std::size_t cut_samples = 401;
    std::size_t overlay_samples = 1000;
};

struct AnalysisBlock {
    double threshold = default_threshold;
    std::optional<TransferClass> expect;
    std::size_t adiabatic_samples = 2001;
    std::vector<double> stability_thresholds{0.9, 0.95, 0.99};
};

struct OutputBlock {
    std::string directory = "out";
    bool csv = true, json = true, binary = true, scripts = true;
};

struct SweepBlock {
    std::string parameter;  // a loop constant, or "threshold"
    std::vector<double> values;
};

struct ExperimentConfig {
    ModelBlock model;
    std::optional<LoopBlock> loop;
    IntegratorConfig integrator;
    std::optional<GridBlock> grid;
    AnalysisBlock analysis;
    OutputBlock output;
    std::optional<SweepBlock> sweep;
};

namespace detail {

inline const std::vector<std::pair<std::string, double LoopConstants::*>>& loop_constant_fields()
{
    static const std::vector<std::pair<std::string, double LoopConstants::*>> f{
        {"g0", &LoopConstants::g0},         {"G0", &LoopConstants::G0},
        {"Gamma0", &LoopConstants::Gamma0}, {"Delta0", &LoopConstants::Delta0},
        {"gamma0", &LoopConstants::gamma0}, {"omega", &LoopConstants::omega}};
    return f;
}

inline std::set<std::string> required_constants(LoopKind k)
{
    switch (k) {
    case LoopKind::symmetric: return {"g0", "G0", "Gamma0"};
    case LoopKind::chiral_modulated: return {"g0", "Delta0", "Gamma0"};
    case LoopKind::constant_dissipation: return {"g0", "G0", "Delta0", "gamma0"};
    default: return {};
    }
}

template <class E, class F>
E parse_enum(const KeyTree& t, const std::string& path, F&& candidates)
{
    const std::string& v = t.text(path);
    for (const auto& [name, value] : candidates)
        if (v == name) return value;
    throw ConfigError("key '" + path + "': unknown value '" + v + "'");
}

inline std::set<std::string> schema()
{
    std::set<std::string> s{"model.omega_a", "model.alpha",
                            "loop.kind", "loop.omega", "loop.directions", "loop.initial", "loop.custom_csv",
                            "loop.custom_direction",
                            "integrator.scheme", "integrator.steps", "integrator.rtol", "integrator.atol",
                            "integrator.min_step", "integrator.observations", "integrator.rescale",
                            "integrator.fidelity", "integrator.labels", "integrator.normalization",
                            "integrator.ep_crossing",
                            "grid.x", "grid.y", "grid.x_range", "grid.y_range", "grid.nx", "grid.ny",
                            "grid.kappa_tie", "grid.reference", "grid.cut_axis", "grid.cut_value",
                            "grid.cut_samples", "grid.overlay_samples",
                            "analysis.threshold", "analysis.expect", "analysis.adiabatic_samples",
                            "analysis.stability_thresholds",
                            "output.directory", "output.formats",
                            "sweep.parameter", "sweep.values"};
    for (const auto& [name, field] : loop_constant_fields()) s.insert("loop." + name);
    for (const char* p : {"delta", "g", "gamma", "kappa"}) s.insert(std::string("grid.fixed.") + p);
    return s;
}

} // namespace detail

inline ExperimentConfig parse_config(const KeyTree& t)
{
    t.require_known(detail::schema());
    ExperimentConfig c;

    c.model.omega_a = t.number_or("model.omega_a", 1.0);
    c.model.alpha = t.number_or("model.alpha", -1.0);
    if (!(c.model.omega_a > 0.0)) throw ConfigError("key 'model.omega_a': must be positive");

    if (t.has_section("loop")) {
        LoopBlock lb;
        lb.kind = detail::parse_enum<LoopKind>(t, "loop.kind",
                                               std::vector<std::pair<std::string, LoopKind>>{
                                                   {"symmetric", LoopKind::symmetric},
                                                   {"chiral_modulated", LoopKind::chiral_modulated},
                                                   {"constant_dissipation", LoopKind::constant_dissipation},
                                                   {"custom", LoopKind::custom}});
        const auto required = detail::required_constants(lb.kind);
        for (const auto& [name, field] : detail::loop_constant_fields()) {
            const std::string path = "loop." + name;
            if (name == "omega") {
                if (lb.kind == LoopKind::custom && t.has(path))
                    throw ConfigError("key '" + path + "' does not apply to custom loops");
                lb.constants.omega = std::abs(t.number_or(path, pi));
                if (!(lb.constants.omega > 0.0)) throw ConfigError("key '" + path + "': must be non-zero");
                continue;
            }
            if (required.count(name)) {
                if (!t.has(path)) throw ConfigError("missing key '" + path + "' for loop kind " + std::string(to_string(lb.kind)));
                lb.constants.*field = t.number(path);
            } else if (t.has(path)) {
                throw ConfigError("key '" + path + "' does not apply to loop kind " + std::string(to_string(lb.kind)));
            }
        }
        lb.constants.alpha = c.model.alpha;
        lb.constants.omega_a = c.model.omega_a;
        if (lb.kind == LoopKind::custom) {
            lb.custom_csv = t.text("loop.custom_csv");
            if (t.has("loop.custom_direction"))
                lb.custom_direction = detail::parse_enum<Direction>(
                    t, "loop.custom_direction",
                    std::vector<std::pair<std::string, Direction>>{{"cw", Direction::cw}, {"ccw", Direction::ccw}});
        } else if (t.has("loop.custom_csv") || t.has("loop.custom_direction")) {
            throw ConfigError("custom loop keys require loop.kind = custom");
        }
        if (t.has("loop.directions")) {
            lb.directions.clear();
            for (const auto& d : t.list("loop.directions")) {
                if (d == "cw") lb.directions.push_back(Direction::cw);
                else if (d == "ccw") lb.directions.push_back(Direction::ccw);
                else throw ConfigError("key 'loop.directions': unknown direction '" + d + "'");
            }
        }
        if (t.has("loop.initial")) {
            lb.initial.clear();
            for (const auto& s : t.list("loop.initial")) {
                if (s == "plus") lb.initial.push_back(Label::plus);
                else if (s == "minus") lb.initial.push_back(Label::minus);
                else throw ConfigError("key 'loop.initial': expected plus or minus, got '" + s + "'");
            }
        }
        if (lb.directions.empty() || lb.initial.empty()) throw ConfigError("loop directions and initial states must be non-empty");
        c.loop = lb;
    }

    IntegratorConfig& ic = c.integrator;
    if (t.has("integrator.scheme"))
        ic.scheme = detail::parse_enum<Scheme>(t, "integrator.scheme",
                                               std::vector<std::pair<std::string, Scheme>>{{"rk4", Scheme::rk4},
                                                                                           {"dopri5", Scheme::dopri5}});
    ic.steps = t.count_or("integrator.steps", ic.steps);
    ic.rtol = t.number_or("integrator.rtol", ic.rtol);
    ic.atol = t.number_or("integrator.atol", ic.atol);
    ic.min_step = t.number_or("integrator.min_step", ic.min_step);
    ic.observations = t.count_or("integrator.observations", ic.observations);
    ic.rescale = t.boolean_or("integrator.rescale", ic.rescale);
    if (t.has("integrator.fidelity"))
        ic.fidelity = detail::parse_enum<FidelityPolicy>(
            t, "integrator.fidelity",
            std::vector<std::pair<std::string, FidelityPolicy>>{{"overlap", FidelityPolicy::overlap},
                                                                {"population", FidelityPolicy::population}});
    if (t.has("integrator.labels"))
        ic.labels = detail::parse_enum<LabelPolicy>(
            t, "integrator.labels",
            std::vector<std::pair<std::string, LabelPolicy>>{{"continuity", LabelPolicy::continuity},
                                                             {"principal", LabelPolicy::principal}});
    if (t.has("integrator.normalization"))
        ic.normalization = detail::parse_enum<Normalization>(
            t, "integrator.normalization",
            std::vector<std::pair<std::string, Normalization>>{{"biorthogonal", Normalization::biorthogonal},
                                                               {"modulus", Normalization::modulus}});
    if (t.has("integrator.ep_crossing"))
        ic.ep_crossing = detail::parse_enum<EpCrossing>(
            t, "integrator.ep_crossing",
            std::vector<std::pair<std::string, EpCrossing>>{{"keep_sheet", EpCrossing::keep_sheet},
                                                            {"error", EpCrossing::error}});
    try {
        ic.validate();
    } catch (const InvalidParameters& e) {
        throw ConfigError(std::string("integrator: ") + e.what());
    }

    if (t.has_section("grid")) {
        GridBlock gb;
        auto axis = [&](const std::string& path) {
            const auto p = parse_param(t.text(path));
            if (!p || *p == Param::omega_a) throw ConfigError("key '" + path + "': expected delta, g, gamma or kappa");
            return *p;
        };
        ParameterSlice& sl = gb.spec.slice;
        sl.axis_x = axis("grid.x");
        sl.axis_y = axis("grid.y");
        sl.base.omega_a = c.model.omega_a;
        for (Param p : {Param::delta, Param::g, Param::gamma, Param::kappa}) {
            const std::string path = "grid.fixed." + std::string(to_string(p));
            if (!t.has(path)) continue;
            if (p == sl.axis_x || p == sl.axis_y) throw ConfigError("key '" + path + "' fixes a grid axis");
            sl.base.set(p, t.number(path));
        }
        if (t.boolean_or("grid.kappa_tie", false)) {
            if (t.has("grid.fixed.kappa")) throw ConfigError("key 'grid.fixed.kappa' conflicts with grid.kappa_tie");
            sl.kappa_ratio = c.model.alpha;
        }
        const auto xr = t.numbers("grid.x_range"), yr = t.numbers("grid.y_range");
        if (xr.size() != 2) throw ConfigError("key 'grid.x_range': expected two numbers");
        if (yr.size() != 2) throw ConfigError("key 'grid.y_range': expected two numbers");
        gb.spec.x_min = xr[0];
        gb.spec.x_max = xr[1];
        gb.spec.y_min = yr[0];
        gb.spec.y_max = yr[1];
        gb.spec.nx = t.count_or("grid.nx", 401);
        gb.spec.ny = t.count_or("grid.ny", 401);
        try {
            gb.spec.validate();
        } catch (const InvalidParameters& e) {
            throw ConfigError(std::string("grid: ") + e.what());
        }
        if (t.has("grid.reference")) {
            const auto r = t.numbers("grid.reference");
            if (r.size() != 2) throw ConfigError("key 'grid.reference': expected two numbers");
            gb.reference = Point2{r[0], r[1]};
        }
        if (t.has("grid.cut_axis")) {
            const Param p = axis("grid.cut_axis");
            if (p != sl.axis_x && p != sl.axis_y) throw ConfigError("key 'grid.cut_axis': must be one of the grid axes");
            gb.cut_axis = p;
            gb.cut_value = t.number("grid.cut_value");
        } else if (t.has("grid.cut_value")) {
            throw ConfigError("key 'grid.cut_value' requires grid.cut_axis");
        }
        gb.cut_samples = t.count_or("grid.cut_samples", gb.cut_samples);
        gb.overlay_samples = t.count_or("grid.overlay_samples", gb.overlay_samples);
        if (gb.cut_samples < 2 || gb.overlay_samples < 1) throw ConfigError("grid: sample counts too small");
        c.grid = gb;
    }

    c.analysis.threshold = t.number_or("analysis.threshold", c.analysis.threshold);
    if (!(c.analysis.threshold > 0.5 && c.analysis.threshold <= 1.0))
        throw ConfigError("key 'analysis.threshold': must lie in (0.5, 1]");
    if (t.has("analysis.expect")) {
        try {
            c.analysis.expect = parse_transfer_class(t.text("analysis.expect"));
        } catch (const InvalidParameters& e) {
            throw ConfigError(std::string("key 'analysis.expect': ") + e.what());
        }
    }
    c.analysis.adiabatic_samples = t.count_or("analysis.adiabatic_samples", c.analysis.adiabatic_samples);
    if (c.analysis.adiabatic_samples < 16) throw ConfigError("key 'analysis.adiabatic_samples': at least 16");
    if (t.has("analysis.stability_thresholds")) c.analysis.stability_thresholds = t.numbers("analysis.stability_thresholds");
    for (double th : c.analysis.stability_thresholds)
        if (!(th > 0.5 && th <= 1.0)) throw ConfigError("key 'analysis.stability_thresholds': values must lie in (0.5, 1]");

    if (t.has("output.directory")) c.output.directory = t.text("output.directory");
    if (t.has("output.formats")) {
        c.output.csv = c.output.json = c.output.binary = c.output.scripts = false;
        for (const auto& f : t.list("output.formats")) {
            if (f == "csv") c.output.csv = true;
            else if (f == "json") c.output.json = true;
            else if (f == "binary") c.output.binary = true;
            else if (f == "scripts") c.output.scripts = true;
            else throw ConfigError("key 'output.formats': unknown format '" + f + "'");
        }
    }

    if (t.has_section("sweep")) {
        SweepBlock sb;
        sb.parameter = t.text("sweep.parameter");
        sb.values = t.numbers("sweep.values");
        if (sb.values.empty()) throw ConfigError("key 'sweep.values': empty list");
        bool known = sb.parameter == "threshold";
        for (const auto& [name, field] : detail::loop_constant_fields()) known = known || sb.parameter == name;
        if (!known) throw ConfigError("key 'sweep.parameter': unknown parameter '" + sb.parameter + "'");
        if (sb.parameter != "threshold") {
            if (!c.loop) throw ConfigError("sweep over a loop constant needs a loop block");
            if (sb.parameter != "omega" && !detail::required_constants(c.loop->kind).count(sb.parameter))
                throw ConfigError("key 'sweep.parameter': '" + sb.parameter + "' does not apply to this loop kind");
        }
        if (sb.parameter == "threshold")
            for (double v : sb.values)
                if (!(v > 0.5 && v <= 1.0)) throw ConfigError("key 'sweep.values': thresholds must lie in (0.5, 1]");
        c.sweep = sb;
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(KeyTree::parse_file(path)); }

} // namespace jcep
