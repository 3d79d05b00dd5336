#pragma once

// Non-Hermitian Schrödinger evolution i ∂ₜ|Ψ⟩ = H(t)|Ψ⟩ along a loop, with
// branch-continued eigen-labels and biorthogonal fidelities
// F_m = |⟨φ̂_m(t)|Ψ(t)⟩|² evaluated on the unit-normalized state.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "trajectory.hpp"

namespace jcep {

struct StateVector {
    cplx amp_e0{};
    cplx amp_g1{};

    Vec2 as_vec() const { return {amp_e0, amp_g1}; }
    static StateVector from_vec(const Vec2& v) { return {v[0], v[1]}; }
    double norm() const { return std::sqrt(std::norm(amp_e0) + std::norm(amp_g1)); }
};

/// (|e,0⟩ ± |g,1⟩)/√2
inline StateVector initial_bell_state(Label sign)
{
    const double r = 1.0 / std::sqrt(2.0);
    return {cplx{r, 0.0}, cplx{sign == Label::plus ? r : -r, 0.0}};
}

// ---------------------------------------------------------------------------
// Branch continuation
// ---------------------------------------------------------------------------

inline constexpr double ambiguity_tolerance = 1e-6;

namespace detail {

inline std::pair<double, double> assignment_scores(const Eigensystem& prev, const Eigensystem& cur)
{
    const double keep = std::abs(pair(prev.left[0], cur.right[0])) + std::abs(pair(prev.left[1], cur.right[1]));
    const double swap = std::abs(pair(prev.left[0], cur.right[1])) + std::abs(pair(prev.left[1], cur.right[0]));
    return {keep, swap};
}

// Rotate each pair so ⟨left_prev|right_cur⟩ is real and non-negative; the
// covector gets the inverse phase, keeping ⟨left|right⟩ = 1.
inline Eigensystem smooth_phases(const Eigensystem& prev, Eigensystem cur)
{
    for (std::size_t n = 0; n < 2; ++n) {
        const cplx o = pair(prev.left[n], cur.right[n]);
        const double mag = std::abs(o);
        if (mag == 0.0) continue;
        const cplx phase = std::conj(o) / mag;
        cur.right[n][0] *= phase;
        cur.right[n][1] *= phase;
        cur.left[n][0] /= phase;
        cur.left[n][1] /= phase;
    }
    return cur;
}

inline Eigensystem on_sheet(const Eigensystem& raw, int sheet)
{
    return raw.sheet == sheet ? raw : raw.swapped();
}

} // namespace detail

/// Relabels `current_raw` so that the assignment maximizes
/// Σ_n |⟨left_n^prev|right_n^cur⟩|, then smooths eigenvector phases.
/// Throws AmbiguousAssignment when the two assignments score within the
/// relative tolerance of each other.
inline Eigensystem branch_continue(const Eigensystem& previous, const Eigensystem& current_raw,
                                   double tolerance = ambiguity_tolerance)
{
    const auto [keep, swap] = detail::assignment_scores(previous, current_raw);
    if (std::abs(keep - swap) <= tolerance * std::max(keep, swap))
        throw AmbiguousAssignment("label assignment is ambiguous (scores " + std::to_string(keep)
                                  + " vs " + std::to_string(swap) + ")");
    const Eigensystem labeled = swap > keep ? current_raw.swapped() : current_raw;
    return detail::smooth_phases(previous, labeled);
}

enum class EpCrossing { keep_sheet, error };

/// branch_continue, except that an exact tie (the step passes through an
/// EP) keeps the previous sheet of the principal square root.
inline Eigensystem branch_continue_or_keep_sheet(const Eigensystem& previous, const Eigensystem& current_raw,
                                                 EpCrossing policy = EpCrossing::keep_sheet)
{
    try {
        return branch_continue(previous, current_raw);
    } catch (const AmbiguousAssignment&) {
        if (policy == EpCrossing::error) throw;
        return detail::smooth_phases(previous, detail::on_sheet(current_raw, previous.sheet));
    }
}

// ---------------------------------------------------------------------------
// Fidelity
// ---------------------------------------------------------------------------

enum class FidelityPolicy { overlap, population };

struct Fidelities {
    double plus = 0.0;
    double minus = 0.0;
};

/// f_m = |⟨left_m|ψ/‖ψ‖⟩|². With the population policy the pair is divided
/// by its sum.
inline Fidelities fidelity(const StateVector& state, const Eigensystem& es,
                           FidelityPolicy policy = FidelityPolicy::overlap)
{
    const double n = state.norm();
    const Vec2 unit{state.amp_e0 / n, state.amp_g1 / n};
    Fidelities f{std::norm(pair(es.left[0], unit)), std::norm(pair(es.left[1], unit))};
    if (policy == FidelityPolicy::population) {
        const double s = f.plus + f.minus;
        if (s > 0.0) {
            f.plus /= s;
            f.minus /= s;
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Evolution
// ---------------------------------------------------------------------------

enum class Scheme { rk4, dopri5 };

// continuity: labels carried by branch_continue (default).
// principal:  labels follow the principal root at every sample, with the
//             permutation chosen at t = 0 held fixed.
enum class LabelPolicy { continuity, principal };

enum class Normalization { biorthogonal, modulus };

struct IntegratorConfig {
    Scheme scheme = Scheme::rk4;
    std::size_t steps = 20000;          // RK4 steps per loop period
    double rtol = 1e-10;                // dopri5
    double atol = 1e-12;                // dopri5
    double min_step = 1e-12;            // dopri5, relative to the period
    std::size_t observations = 1000;    // output samples per period
    bool rescale = true;
    FidelityPolicy fidelity = FidelityPolicy::overlap;
    LabelPolicy labels = LabelPolicy::continuity;
    Normalization normalization = Normalization::biorthogonal;
    EpCrossing ep_crossing = EpCrossing::keep_sheet;

    void validate() const
    {
        if (observations == 0) throw InvalidParameters("observations must be positive");
        if (scheme == Scheme::rk4 && steps == 0) throw InvalidParameters("steps must be positive");
        if (scheme == Scheme::dopri5 && !(rtol > 0.0 && atol > 0.0 && min_step > 0.0))
            throw InvalidParameters("adaptive tolerances must be positive");
    }
};

inline std::string_view to_string(FidelityPolicy p) { return p == FidelityPolicy::overlap ? "overlap" : "population"; }
inline std::string_view to_string(Scheme s) { return s == Scheme::rk4 ? "rk4" : "dopri5"; }
inline std::string_view to_string(LabelPolicy p) { return p == LabelPolicy::continuity ? "continuity" : "principal"; }
inline std::string_view to_string(Normalization n) { return n == Normalization::biorthogonal ? "biorthogonal" : "modulus"; }
inline std::string_view to_string(EpCrossing e) { return e == EpCrossing::keep_sheet ? "keep_sheet" : "error"; }

struct EvolutionRecord {
    std::vector<double> times;
    std::vector<StateVector> states;     // unit Euclidean norm
    std::vector<double> log_norm;        // ln ‖Ψ_unnormalized(t)‖
    std::vector<double> fidelity_plus;
    std::vector<double> fidelity_minus;
    std::vector<cplx> energies_plus;
    std::vector<cplx> energies_minus;
    std::string policy;
    std::string loop_id;
    Direction direction = Direction::ccw;
    std::optional<Label> initial_label;  // label dominating Ψ(0)

    std::size_t size() const { return times.size(); }
    double final_fidelity(Label l) const
    {
        return l == Label::plus ? fidelity_plus.back() : fidelity_minus.back();
    }
};

namespace detail {

struct Rhs {
    const Loop& loop;
    Vec2 operator()(double t, const Vec2& y) const
    {
        const HamiltonianMatrix h = build_hamiltonian(loop.evaluate(t));
        const Vec2 hy = h.apply(y);
        const cplx mi{0.0, -1.0};
        return {mi * hy[0], mi * hy[1]};
    }
};

inline Vec2 axpy(const Vec2& y, double a, const Vec2& k)
{
    return {y[0] + a * k[0], y[1] + a * k[1]};
}

inline Vec2 rk4_step(const Rhs& f, double t, const Vec2& y, double h)
{
    const Vec2 k1 = f(t, y);
    const Vec2 k2 = f(t + h / 2.0, axpy(y, h / 2.0, k1));
    const Vec2 k3 = f(t + h / 2.0, axpy(y, h / 2.0, k2));
    const Vec2 k4 = f(t + h, axpy(y, h, k3));
    return {y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])};
}

// Dormand–Prince 5(4). Returns the 5th-order solution and the error estimate.
inline std::pair<Vec2, Vec2> dopri5_step(const Rhs& f, double t, const Vec2& y, double h)
{
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;

    auto comb = [&](std::initializer_list<std::pair<double, const Vec2*>> terms) {
        Vec2 out = y;
        for (auto [c, k] : terms) {
            out[0] += h * c * (*k)[0];
            out[1] += h * c * (*k)[1];
        }
        return out;
    };

    const Vec2 k1 = f(t, y);
    const Vec2 k2 = f(t + c2 * h, comb({{a21, &k1}}));
    const Vec2 k3 = f(t + c3 * h, comb({{a31, &k1}, {a32, &k2}}));
    const Vec2 k4 = f(t + c4 * h, comb({{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const Vec2 k5 = f(t + c5 * h, comb({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const Vec2 k6 = f(t + h, comb({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    const Vec2 y5 = comb({{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    const Vec2 k7 = f(t + h, y5);
    Vec2 err{};
    for (std::size_t i = 0; i < 2; ++i)
        err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    return {y5, err};
}

// State with a separately accumulated log-norm.
struct TrackedState {
    Vec2 y;
    double log_scale = 0.0;

    void renormalize_if_needed(bool enabled)
    {
        if (!enabled) return;
        const double n = euclidean_norm(y);
        if (n < 1e-6 || n > 1e6) {
            y[0] /= n;
            y[1] /= n;
            log_scale += std::log(n);
        }
    }
};

inline void advance_rk4(const Rhs& f, TrackedState& s, double t0, double t1, std::size_t substeps, bool rescale)
{
    const double h = (t1 - t0) / static_cast<double>(substeps);
    for (std::size_t k = 0; k < substeps; ++k) {
        const double t = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(substeps);
        s.y = rk4_step(f, t, s.y, h);
        s.renormalize_if_needed(rescale);
    }
}

inline void advance_dopri5(const Rhs& f, TrackedState& s, double t0, double t1, double& h,
                           const IntegratorConfig& cfg, double period)
{
    double t = t0;
    const double floor = cfg.min_step * period;
    while (t < t1) {
        if (h > t1 - t) h = t1 - t;
        if (h < floor && t + h < t1) throw StepUnderflow("adaptive step fell below the configured floor");
        const auto [y5, err] = dopri5_step(f, t, s.y, h);
        double e = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            const double sc = cfg.atol + cfg.rtol * std::max(std::abs(s.y[i]), std::abs(y5[i]));
            e = std::max(e, std::abs(err[i]) / sc);
        }
        if (!std::isfinite(e)) throw StepUnderflow("non-finite error estimate in adaptive step");
        if (e <= 1.0) {
            t = (t1 - t - h <= 0.0) ? t1 : t + h;
            s.y = y5;
            s.renormalize_if_needed(cfg.rescale);
        }
        const double factor = e == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(e, -0.2), 0.2, 5.0);
        h *= factor;
        if (h < floor && t < t1) throw StepUnderflow("adaptive step fell below the configured floor");
    }
}

inline Eigensystem eigensystem_for(const ParameterPoint& p, Normalization n)
{
    if (n == Normalization::modulus) {
        // keep the degeneracy guard of the exact route
        (void)eigensystem(p);
        return modulus_normalized_eigensystem(p);
    }
    return eigensystem(p);
}

// At t = 0 the plus label goes to the eigenvector that carries the larger
// weight of (|e,0⟩ + |g,1⟩)/√2.
inline Eigensystem initial_labels(const Eigensystem& raw)
{
    const Vec2 bell = initial_bell_state(Label::plus).as_vec();
    const double w0 = std::norm(pair(raw.left[0], bell));
    const double w1 = std::norm(pair(raw.left[1], bell));
    return w1 > w0 ? raw.swapped() : raw;
}

} // namespace detail

/// Integrates one traversal [0, T] of `loop` from `psi0`.
inline EvolutionRecord evolve(const Loop& loop, const StateVector& psi0, const IntegratorConfig& cfg = {})
{
    cfg.validate();
    if (!(psi0.norm() > 0.0) || !std::isfinite(psi0.norm()))
        throw InvalidParameters("initial state must be finite and non-zero");

    const double T = loop.period();
    const std::size_t n_obs = cfg.observations;
    const std::size_t substeps = std::max<std::size_t>(1, (cfg.steps + n_obs - 1) / n_obs);
    const detail::Rhs f{loop};

    EvolutionRecord rec;
    rec.loop_id = loop.id();
    rec.direction = loop.direction();
    rec.policy = std::string(to_string(cfg.fidelity)) + "/" + std::string(to_string(cfg.labels)) + "/"
               + std::string(to_string(cfg.normalization));
    rec.times.reserve(n_obs + 1);

    detail::TrackedState s{psi0.as_vec(), 0.0};
    {
        const double n0 = euclidean_norm(s.y);
        s.y[0] /= n0;
        s.y[1] /= n0;
        s.log_scale = std::log(n0);
    }

    Eigensystem labeled;
    double h_adaptive = T / 1000.0;

    for (std::size_t k = 0; k <= n_obs; ++k) {
        const double t = T * static_cast<double>(k) / static_cast<double>(n_obs);
        if (k > 0) {
            const double t_prev = T * static_cast<double>(k - 1) / static_cast<double>(n_obs);
            if (cfg.scheme == Scheme::rk4)
                detail::advance_rk4(f, s, t_prev, t, substeps, cfg.rescale);
            else
                detail::advance_dopri5(f, s, t_prev, t, h_adaptive, cfg, T);
        }

        const Eigensystem raw = detail::eigensystem_for(loop.evaluate(t), cfg.normalization);
        if (k == 0) {
            labeled = detail::initial_labels(raw);
        } else if (cfg.labels == LabelPolicy::principal) {
            labeled = detail::on_sheet(raw, labeled.sheet);
        } else {
            labeled = branch_continue_or_keep_sheet(labeled, raw, cfg.ep_crossing);
        }

        const double n = euclidean_norm(s.y);
        const StateVector unit{s.y[0] / n, s.y[1] / n};
        const Fidelities fid = fidelity(unit, labeled, cfg.fidelity);

        rec.times.push_back(t);
        rec.states.push_back(unit);
        rec.log_norm.push_back(s.log_scale + std::log(n));
        rec.fidelity_plus.push_back(fid.plus);
        rec.fidelity_minus.push_back(fid.minus);
        rec.energies_plus.push_back(labeled.value(Label::plus));
        rec.energies_minus.push_back(labeled.value(Label::minus));
    }

    // The record is tagged with the label that dominates Ψ(0); a tie leaves
    // it unset.
    constexpr double tie_tol = 1e-9;
    const double f0p = rec.fidelity_plus.front(), f0m = rec.fidelity_minus.front();
    if (f0p > f0m + tie_tol)
        rec.initial_label = Label::plus;
    else if (f0m > f0p + tie_tol)
        rec.initial_label = Label::minus;
    return rec;
}

/// Unnormalized state at observation k: states[k]·exp(log_norm[k]).
inline StateVector unnormalized_state(const EvolutionRecord& rec, std::size_t k)
{
    const double scale = std::exp(rec.log_norm[k]);
    return {rec.states[k].amp_e0 * scale, rec.states[k].amp_g1 * scale};
}

} // namespace jcep
