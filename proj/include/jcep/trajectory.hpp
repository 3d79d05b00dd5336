#pragma once

// Closed (or tabulated) parameter loops and their geometry.
//
//   symmetric             δ = 0,          g = g₀ + G₀cos ωt,  γ = Γ₀sin²(ωt),    T = π/|ω|
//   chiral_modulated      δ = Δ₀sin ωt,   g = g₀,             γ = Γ₀sin²(ωt/2),  T = 2π/|ω|
//   constant_dissipation  δ = Δ₀sin ωt,   g = g₀ + G₀cos ωt,  γ = γ₀,            T = 2π/|ω|
//
// with κ = αγ throughout. Direction is CCW for ω > 0 and CW for ω < 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace jcep {

enum class LoopKind { symmetric, chiral_modulated, constant_dissipation, custom };
enum class Direction { cw, ccw };

inline std::string_view to_string(LoopKind k)
{
    switch (k) {
    case LoopKind::symmetric: return "symmetric";
    case LoopKind::chiral_modulated: return "chiral_modulated";
    case LoopKind::constant_dissipation: return "constant_dissipation";
    case LoopKind::custom: return "custom";
    }
    return "?";
}

inline std::string_view to_string(Direction d) { return d == Direction::cw ? "cw" : "ccw"; }

struct LoopConstants {
    double g0 = 0.0;
    double G0 = 0.0;
    double Gamma0 = 0.0;
    double Delta0 = 0.0;
    double gamma0 = 0.0;
    double alpha = -1.0;
    double omega = pi;
    double omega_a = 1.0;
};

struct CustomSample {
    double t;
    ParameterPoint point;
};

class Loop {
public:
    LoopKind kind() const { return kind_; }
    const LoopConstants& constants() const { return c_; }
    double period() const { return period_; }
    Direction direction() const { return direction_; }

    // Time after which the defining formulas repeat. Differs from period()
    // only for the symmetric loop, whose g(t) has period 2π/|ω|.
    double closure_period() const
    {
        if (kind_ == LoopKind::symmetric) return 2.0 * pi / std::abs(c_.omega);
        return period_;
    }

    bool closed() const
    {
        const ParameterPoint a = evaluate(0.0), b = evaluate(period_);
        const double tol = 1e-12;
        return std::abs(a.delta - b.delta) <= tol && std::abs(a.g - b.g) <= tol
            && std::abs(a.gamma - b.gamma) <= tol && std::abs(a.kappa - b.kappa) <= tol
            && std::abs(a.omega_a - b.omega_a) <= tol;
    }

    // True when 16g² > (γ−κ)² fails somewhere on the loop (symmetric kind).
    bool premise_violated() const { return premise_violated_; }

    ParameterPoint evaluate(double t) const
    {
        ParameterPoint p;
        p.omega_a = c_.omega_a;
        const double w = c_.omega;
        switch (kind_) {
        case LoopKind::symmetric: {
            const double s = std::sin(w * t);
            p.delta = 0.0;
            p.g = c_.g0 + c_.G0 * std::cos(w * t);
            p.gamma = c_.Gamma0 * s * s;
            p.kappa = c_.alpha * p.gamma;
            break;
        }
        case LoopKind::chiral_modulated: {
            const double s = std::sin(w * t / 2.0);
            p.delta = c_.Delta0 * std::sin(w * t);
            p.g = c_.g0;
            p.gamma = c_.Gamma0 * s * s;
            p.kappa = c_.alpha * p.gamma;
            break;
        }
        case LoopKind::constant_dissipation:
            p.delta = c_.Delta0 * std::sin(w * t);
            p.g = c_.g0 + c_.G0 * std::cos(w * t);
            p.gamma = c_.gamma0;
            p.kappa = c_.alpha * c_.gamma0;
            break;
        case LoopKind::custom:
            p = interpolate(direction_ == table_direction_ ? t : -t);
            break;
        }
        return p;
    }

    /// Same point set traversed the other way: evaluate'(t) = evaluate(−t).
    Loop reversed() const
    {
        Loop r = *this;
        r.c_.omega = -c_.omega;
        r.direction_ = direction_ == Direction::cw ? Direction::ccw : Direction::cw;
        return r;
    }

    // Provenance string: kind and constants, independent of direction.
    std::string id() const
    {
        std::ostringstream os;
        os.precision(17);
        os << to_string(kind_);
        switch (kind_) {
        case LoopKind::symmetric:
            os << ":g0=" << c_.g0 << ",G0=" << c_.G0 << ",Gamma0=" << c_.Gamma0;
            break;
        case LoopKind::chiral_modulated:
            os << ":g0=" << c_.g0 << ",Delta0=" << c_.Delta0 << ",Gamma0=" << c_.Gamma0;
            break;
        case LoopKind::constant_dissipation:
            os << ":g0=" << c_.g0 << ",G0=" << c_.G0 << ",Delta0=" << c_.Delta0 << ",gamma0=" << c_.gamma0;
            break;
        case LoopKind::custom:
            os << ":samples=" << table_.size() << ",T=" << period_;
            return os.str();
        }
        os << ",alpha=" << c_.alpha << ",|omega|=" << std::abs(c_.omega) << ",omega_a=" << c_.omega_a;
        return os.str();
    }

private:
    Loop() = default;

    friend Loop make_symmetric_loop(double, double, double, double, double, double);
    friend Loop make_chiral_modulated_loop(double, double, double, double, double, double);
    friend Loop make_constant_dissipation_loop(double, double, double, double, double, double, double);
    friend Loop make_custom_loop(std::vector<CustomSample>, Direction);

    static Loop built_in(LoopKind kind, const LoopConstants& c)
    {
        if (!(c.omega != 0.0) || !std::isfinite(c.omega))
            throw InvalidLoop("loop angular frequency must be finite and non-zero");
        for (double v : {c.g0, c.G0, c.Gamma0, c.Delta0, c.gamma0, c.alpha})
            if (!std::isfinite(v)) throw InvalidLoop("loop constants must be finite");
        if (!(c.omega_a > 0.0) || !std::isfinite(c.omega_a))
            throw InvalidLoop("omega_a must be positive");
        Loop l;
        l.kind_ = kind;
        l.c_ = c;
        l.period_ = (kind == LoopKind::symmetric ? pi : 2.0 * pi) / std::abs(c.omega);
        l.direction_ = c.omega > 0.0 ? Direction::ccw : Direction::cw;
        return l;
    }

    ParameterPoint interpolate(double t) const
    {
        const double t0 = table_.front().t;
        double s = std::fmod(t - t0, period_);
        if (s < 0.0) s += period_;
        s += t0;
        auto it = std::upper_bound(table_.begin(), table_.end(), s,
                                   [](double v, const CustomSample& c) { return v < c.t; });
        if (it == table_.begin()) return table_.front().point;
        if (it == table_.end()) return table_.back().point;
        const CustomSample& b = *it;
        const CustomSample& a = *(it - 1);
        const double w = (s - a.t) / (b.t - a.t);
        auto lerp = [w](double x, double y) { return x + w * (y - x); };
        ParameterPoint p;
        p.omega_a = lerp(a.point.omega_a, b.point.omega_a);
        p.delta = lerp(a.point.delta, b.point.delta);
        p.g = lerp(a.point.g, b.point.g);
        p.gamma = lerp(a.point.gamma, b.point.gamma);
        p.kappa = lerp(a.point.kappa, b.point.kappa);
        return p;
    }

    LoopKind kind_ = LoopKind::custom;
    LoopConstants c_{};
    double period_ = 1.0;
    Direction direction_ = Direction::ccw;
    bool premise_violated_ = false;
    std::vector<CustomSample> table_;
    Direction table_direction_ = Direction::ccw;  // orientation of the table as given
};

inline Loop make_symmetric_loop(double g0, double G0, double Gamma0, double alpha, double omega,
                                double omega_a = 1.0)
{
    LoopConstants c;
    c.g0 = g0;
    c.G0 = G0;
    c.Gamma0 = Gamma0;
    c.alpha = alpha;
    c.omega = omega;
    c.omega_a = omega_a;
    Loop l = Loop::built_in(LoopKind::symmetric, c);
    constexpr int samples = 1024;
    for (int k = 0; k <= samples; ++k) {
        const ParameterPoint p = l.evaluate(l.period() * k / samples);
        const double split = p.gamma - p.kappa;
        if (!(16.0 * p.g * p.g > split * split)) {
            l.premise_violated_ = true;
            break;
        }
    }
    return l;
}

inline Loop make_chiral_modulated_loop(double g0, double Delta0, double Gamma0, double alpha,
                                       double omega, double omega_a = 1.0)
{
    LoopConstants c;
    c.g0 = g0;
    c.Delta0 = Delta0;
    c.Gamma0 = Gamma0;
    c.alpha = alpha;
    c.omega = omega;
    c.omega_a = omega_a;
    return Loop::built_in(LoopKind::chiral_modulated, c);
}

inline Loop make_constant_dissipation_loop(double g0, double G0, double Delta0, double gamma0,
                                           double alpha, double omega, double omega_a = 1.0)
{
    LoopConstants c;
    c.g0 = g0;
    c.G0 = G0;
    c.Delta0 = Delta0;
    c.gamma0 = gamma0;
    c.alpha = alpha;
    c.omega = omega;
    c.omega_a = omega_a;
    return Loop::built_in(LoopKind::constant_dissipation, c);
}

/// Tabulated loop with linear interpolation; the period is the span of the
/// time column and evaluation wraps periodically.
inline Loop make_custom_loop(std::vector<CustomSample> samples, Direction direction = Direction::ccw)
{
    if (samples.size() < 2) throw InvalidLoop("custom loop needs at least two samples");
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (!std::isfinite(samples[k].t)) throw InvalidLoop("custom loop time must be finite");
        samples[k].point.validate();
        if (k > 0 && !(samples[k].t > samples[k - 1].t))
            throw InvalidLoop("custom loop times must be strictly increasing");
    }
    Loop l;
    l.kind_ = LoopKind::custom;
    l.period_ = samples.back().t - samples.front().t;
    l.direction_ = direction;
    l.table_direction_ = direction;
    l.c_.omega = (direction == Direction::ccw ? 2.0 : -2.0) * pi / l.period_;
    l.c_.omega_a = samples.front().point.omega_a;
    l.table_ = std::move(samples);
    return l;
}

/// Reads a custom loop from CSV: a header naming the columns ("t" plus any of
/// omega_a, delta, g, gamma, kappa), then one numeric row per sample.
/// Parameters without a column take their value from `defaults`.
inline Loop load_custom_loop_csv(std::istream& in, const ParameterPoint& defaults = {},
                                 Direction direction = Direction::ccw)
{
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t\r");
            const auto e = cell.find_last_not_of(" \t\r");
            cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
        }
        return cells;
    };

    std::string line;
    if (!std::getline(in, line)) throw InvalidLoop("custom loop CSV is empty");
    const auto header = split(line);
    int t_col = -1;
    std::vector<std::pair<int, Param>> cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "t") {
            t_col = static_cast<int>(i);
        } else if (auto p = parse_param(header[i])) {
            cols.emplace_back(static_cast<int>(i), *p);
        } else {
            throw InvalidLoop("unknown custom loop column '" + header[i] + "'");
        }
    }
    if (t_col < 0) throw InvalidLoop("custom loop CSV needs a 't' column");

    std::vector<CustomSample> samples;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) throw InvalidLoop("ragged custom loop CSV row: " + line);
        CustomSample s{0.0, defaults};
        try {
            s.t = std::stod(cells[static_cast<std::size_t>(t_col)]);
            for (auto [i, p] : cols) s.point.set(p, std::stod(cells[static_cast<std::size_t>(i)]));
        } catch (const std::exception&) {
            throw InvalidLoop("non-numeric custom loop CSV row: " + line);
        }
        samples.push_back(s);
    }
    return make_custom_loop(std::move(samples), direction);
}

// ---------------------------------------------------------------------------
// Encirclement
// ---------------------------------------------------------------------------

struct Encirclement {
    int winding_number = 0;
    double min_distance = 0.0;
    double total_angle = 0.0;  // accumulated signed angle, radians
};

/// Winding of the loop projected onto the (x, y) plane around `reference`,
/// using the usual orientation of that plane (counter-clockwise positive).
/// Samples one closure period.
inline Encirclement encirclement_diagnostic(const Loop& loop, std::array<double, 2> reference,
                                            Param x, Param y, std::size_t samples = 4096)
{
    if (x == y) throw InvalidParameters("encirclement plane axes must differ");
    if (samples < 3) throw InvalidParameters("encirclement needs at least 3 samples");

    const double T = loop.closure_period();
    Encirclement out;
    out.min_distance = std::numeric_limits<double>::infinity();

    auto rel = [&](std::size_t k) {
        const ParameterPoint p = loop.evaluate(T * static_cast<double>(k) / static_cast<double>(samples));
        return std::array<double, 2>{p.get(x) - reference[0], p.get(y) - reference[1]};
    };

    // distance to segment a→b from the origin
    auto seg_dist = [](const std::array<double, 2>& a, const std::array<double, 2>& b) {
        const double dx = b[0] - a[0], dy = b[1] - a[1];
        const double len2 = dx * dx + dy * dy;
        double s = len2 > 0.0 ? -(a[0] * dx + a[1] * dy) / len2 : 0.0;
        s = std::clamp(s, 0.0, 1.0);
        return std::hypot(a[0] + s * dx, a[1] + s * dy);
    };

    auto prev = rel(0);
    for (std::size_t k = 1; k <= samples; ++k) {
        const auto cur = rel(k);
        out.min_distance = std::min(out.min_distance, seg_dist(prev, cur));
        const double cross = prev[0] * cur[1] - prev[1] * cur[0];
        const double dot = prev[0] * cur[0] + prev[1] * cur[1];
        out.total_angle += std::atan2(cross, dot);
        prev = cur;
    }
    if (out.min_distance < 1e-10)
        throw ReferenceOnPath("reference point lies on the projected loop");
    out.winding_number = static_cast<int>(std::lround(out.total_angle / (2.0 * pi)));
    return out;
}

} // namespace jcep
