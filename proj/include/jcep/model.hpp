#pragma once

// Single-excitation dissipative Jaynes-Cummings model.
//
// Basis order is (|e,0>, |g,1>). In that basis
//
//     H = [ ω_a + δ − iγ/2        g        ]
//         [       g          ω_a − iκ/2    ]
//
// which is complex symmetric, so the left covector of an eigenpair is the
// plain transpose of its right vector. Eigenvalues are
//
//     E_± = ¼ [ 2(2ω_a + δ) − i(γ + κ) ± 2Δ_E ],
//     Δ_E = (i/2) sqrt((γ − κ + 2iδ)² − 16 g²)      (principal root)
//
// and the raw ± labels of eigensystem() follow that principal root. Labels
// carried along a path are assigned by continuity elsewhere (dynamics.hpp).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace jcep {

using cplx = std::complex<double>;
using Vec2 = std::array<cplx, 2>;

inline constexpr double pi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

enum class Param { omega_a, delta, g, gamma, kappa };

inline std::string_view to_string(Param p)
{
    switch (p) {
    case Param::omega_a: return "omega_a";
    case Param::delta: return "delta";
    case Param::g: return "g";
    case Param::gamma: return "gamma";
    case Param::kappa: return "kappa";
    }
    return "?";
}

inline std::optional<Param> parse_param(std::string_view name)
{
    for (Param p : {Param::omega_a, Param::delta, Param::g, Param::gamma, Param::kappa})
        if (to_string(p) == name) return p;
    return std::nullopt;
}

/// The five real model parameters at one instant, in units of ω_a.
/// κ is independent here; the κ = αγ tie is applied by loop constructors
/// and by ParameterSlice.
struct ParameterPoint {
    double omega_a = 1.0;
    double delta = 0.0;
    double g = 0.0;
    double gamma = 0.0;
    double kappa = 0.0;

    double get(Param p) const
    {
        switch (p) {
        case Param::omega_a: return omega_a;
        case Param::delta: return delta;
        case Param::g: return g;
        case Param::gamma: return gamma;
        case Param::kappa: return kappa;
        }
        return 0.0;
    }

    void set(Param p, double v)
    {
        switch (p) {
        case Param::omega_a: omega_a = v; break;
        case Param::delta: delta = v; break;
        case Param::g: g = v; break;
        case Param::gamma: gamma = v; break;
        case Param::kappa: kappa = v; break;
        }
    }

    bool valid() const
    {
        return std::isfinite(omega_a) && std::isfinite(delta) && std::isfinite(g)
            && std::isfinite(gamma) && std::isfinite(kappa) && omega_a > 0.0;
    }

    void validate() const
    {
        if (!valid())
            throw InvalidParameters("parameter point must be finite with omega_a > 0");
    }

    friend bool operator==(const ParameterPoint&, const ParameterPoint&) = default;
};

// ---------------------------------------------------------------------------
// Hamiltonian
// ---------------------------------------------------------------------------

struct HamiltonianMatrix {
    cplx m00, m01, m10, m11;

    Vec2 apply(const Vec2& v) const
    {
        return {m00 * v[0] + m01 * v[1], m10 * v[0] + m11 * v[1]};
    }

    cplx trace() const { return m00 + m11; }
    cplx determinant() const { return m00 * m11 - m01 * m10; }

    double frobenius_norm() const
    {
        return std::sqrt(std::norm(m00) + std::norm(m01) + std::norm(m10) + std::norm(m11));
    }
};

inline HamiltonianMatrix build_hamiltonian(const ParameterPoint& p)
{
    const cplx i{0.0, 1.0};
    return {p.omega_a + p.delta - i * (p.gamma / 2.0), cplx{p.g, 0.0},
            cplx{p.g, 0.0}, p.omega_a - i * (p.kappa / 2.0)};
}

// Radicand (γ − κ + 2iδ)² − 16g², evaluated as (u − 4g)(u + 4g) so that it
// vanishes exactly on the degeneracy locus whenever u − 4g does.
inline cplx gap_radicand(const ParameterPoint& p)
{
    const cplx u{p.gamma - p.kappa, 2.0 * p.delta};
    const double four_g = 4.0 * p.g;
    return (u - four_g) * (u + four_g);
}

/// Δ_E = E_+ − E_− on the principal branch.
inline cplx eigenvalue_gap(const ParameterPoint& p)
{
    return cplx{0.0, 0.5} * std::sqrt(gap_radicand(p));
}

// ---------------------------------------------------------------------------
// Eigensystem
// ---------------------------------------------------------------------------

enum class Label : int { plus = 0, minus = 1 };

constexpr Label opposite(Label l) { return l == Label::plus ? Label::minus : Label::plus; }
constexpr std::size_t index(Label l) { return static_cast<std::size_t>(l); }

inline std::string_view to_string(Label l) { return l == Label::plus ? "plus" : "minus"; }

/// Unconjugated pairing <left|right> used for biorthogonal products.
inline cplx pair(const Vec2& left, const Vec2& right)
{
    return left[0] * right[0] + left[1] * right[1];
}

inline double euclidean_norm(const Vec2& v) { return std::sqrt(std::norm(v[0]) + std::norm(v[1])); }

/// Eigenvalues with biorthogonally normalized right vectors and left
/// covectors, indexed by Label. `gap` is always value(plus) − value(minus),
/// so it equals the principal Δ_E only while `sheet` is +1. `sheet` records
/// whether the labels coincide with the principal-root labels (+1) or are
/// swapped relative to them (−1).
struct Eigensystem {
    std::array<cplx, 2> values{};
    std::array<Vec2, 2> right{};
    std::array<Vec2, 2> left{};
    cplx gap{};
    int sheet = 1;

    cplx value(Label l) const { return values[index(l)]; }
    const Vec2& right_vector(Label l) const { return right[index(l)]; }
    const Vec2& left_covector(Label l) const { return left[index(l)]; }

    Eigensystem swapped() const
    {
        Eigensystem s = *this;
        std::swap(s.values[0], s.values[1]);
        std::swap(s.right[0], s.right[1]);
        std::swap(s.left[0], s.left[1]);
        s.gap = -gap;
        s.sheet = -sheet;
        return s;
    }
};

namespace detail {

// Eigenvector of a 2x2 matrix for eigenvalue e, from whichever row of
// (H − e) gives the better-conditioned null vector.
inline Vec2 null_vector(const HamiltonianMatrix& h, cplx e)
{
    const Vec2 from_row2{e - h.m11, h.m10};
    const Vec2 from_row1{h.m01, e - h.m00};
    return euclidean_norm(from_row2) >= euclidean_norm(from_row1) ? from_row2 : from_row1;
}

inline cplx eigenvalue_mean(const ParameterPoint& p)
{
    return cplx{(2.0 * p.omega_a + p.delta) / 2.0, -(p.gamma + p.kappa) / 4.0};
}

} // namespace detail

inline constexpr double default_degeneracy_floor = 1e-12;

/// Closed-form eigensystem with exact biorthogonal normalization
/// <left_n|right_m> = δ_nm. The complex normalization factor sqrt(r^T r) is
/// split evenly between the right vector and its transposed covector.
inline Eigensystem eigensystem(const ParameterPoint& p,
                               double degeneracy_floor = default_degeneracy_floor)
{
    p.validate();
    const cplx dE = eigenvalue_gap(p);
    if (std::abs(dE) < degeneracy_floor * p.omega_a)
        throw DegenerateEigensystem("eigenvalue gap |Delta_E| = " + std::to_string(std::abs(dE))
                                    + " is below the degeneracy floor");

    const HamiltonianMatrix h = build_hamiltonian(p);
    const cplx mean = detail::eigenvalue_mean(p);

    Eigensystem es;
    es.values = {mean + dE / 2.0, mean - dE / 2.0};
    es.gap = dE;
    for (std::size_t n = 0; n < 2; ++n) {
        Vec2 v = detail::null_vector(h, es.values[n]);
        const cplx scale = std::sqrt(pair(v, v));
        if (std::abs(scale) == 0.0)
            throw DegenerateEigensystem("self-orthogonal eigenvector");
        v[0] /= scale;
        v[1] /= scale;
        es.right[n] = v;
        es.left[n] = v;
    }
    return es;
}

/// Eigensystem normalized with the moduli S_± = sqrt(|A_±|² + |4g|²) applied
/// to [A_±, 4g]. Not biorthonormal when A_± is complex; kept for comparison.
inline Eigensystem modulus_normalized_eigensystem(const ParameterPoint& p)
{
    p.validate();
    const cplx dE = eigenvalue_gap(p);
    const cplx mean = detail::eigenvalue_mean(p);
    const cplx a0{2.0 * p.delta, -(p.gamma - p.kappa)};

    Eigensystem es;
    es.values = {mean + dE / 2.0, mean - dE / 2.0};
    es.gap = dE;
    const std::array<cplx, 2> a{a0 + 2.0 * dE, a0 - 2.0 * dE};
    for (std::size_t n = 0; n < 2; ++n) {
        const double s = std::sqrt(std::norm(a[n]) + 16.0 * p.g * p.g);
        if (s == 0.0) throw DegenerateEigensystem("zero eigenvector in modulus normalization");
        es.right[n] = {a[n] / s, cplx{4.0 * p.g / s, 0.0}};
        es.left[n] = es.right[n];
    }
    return es;
}

/// max_{n,m} |<left_n|right_m> − δ_nm|.
inline double biorthogonality_defect(const Eigensystem& es)
{
    double worst = 0.0;
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t m = 0; m < 2; ++m) {
            const cplx target = n == m ? cplx{1.0, 0.0} : cplx{0.0, 0.0};
            worst = std::max(worst, std::abs(pair(es.left[n], es.right[m]) - target));
        }
    return worst;
}

/// ‖H r_n − E_n r_n‖₂ maximized over both labels.
inline double eigen_residual(const HamiltonianMatrix& h, const Eigensystem& es)
{
    double worst = 0.0;
    for (std::size_t n = 0; n < 2; ++n) {
        const Vec2 hr = h.apply(es.right[n]);
        const Vec2 diff{hr[0] - es.values[n] * es.right[n][0], hr[1] - es.values[n] * es.right[n][1]};
        worst = std::max(worst, euclidean_norm(diff));
    }
    return worst;
}

/// Both right eigenvectors are Bell states iff δ = 0 and γ = κ.
inline bool bell_endpoint_check(const ParameterPoint& p, double tol)
{
    return std::abs(p.delta) <= tol && std::abs(p.gamma - p.kappa) <= tol;
}

// ---------------------------------------------------------------------------
// Parameter slices and EP search
// ---------------------------------------------------------------------------

/// A 2D plane through parameter space: two free axes over a fixed base
/// point, optionally with κ tied to γ by κ = ratio·γ.
struct ParameterSlice {
    ParameterPoint base;
    Param axis_x = Param::g;
    Param axis_y = Param::gamma;
    std::optional<double> kappa_ratio;

    void validate() const
    {
        if (axis_x == axis_y) throw InvalidParameters("slice axes must differ");
        if (kappa_ratio && (axis_x == Param::kappa || axis_y == Param::kappa))
            throw InvalidParameters("kappa cannot be a free axis while tied to gamma");
    }

    ParameterPoint at(double x, double y) const
    {
        ParameterPoint p = base;
        p.set(axis_x, x);
        p.set(axis_y, y);
        if (kappa_ratio) p.kappa = *kappa_ratio * p.gamma;
        return p;
    }
};

struct SearchBox {
    double x_min = -1.0, x_max = 1.0;
    double y_min = -1.0, y_max = 1.0;

    bool contains(double x, double y) const
    {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }
};

struct EpSearchOptions {
    double tolerance = 1e-10;   // on |Δ_E| / ω_a
    int max_iterations = 60;
    std::size_t scan_points = 201;  // per axis, for reseeding
};

namespace detail {

// One factor of the gap radicand: u − 4·sign·g. The degeneracy set is the
// union of the zero sets of the two factors.
inline cplx radicand_factor(const ParameterPoint& p, int sign)
{
    return cplx{p.gamma - p.kappa - 4.0 * sign * p.g, 2.0 * p.delta};
}

struct RootCandidate {
    double x, y;
    double gap;
};

// Gauss–Newton on one radicand factor with a minimum-norm step, so
// rank-deficient Jacobians (a whole line of roots) are handled. Ends with
// an ulp walk that drives the factor to an exact floating zero when one
// exists nearby.
inline std::optional<RootCandidate> newton_on_factor(const ParameterSlice& slice, double x, double y,
                                                     int sign, const EpSearchOptions& opt)
{
    auto residual = [&](double a, double b) { return radicand_factor(slice.at(a, b), sign); };
    auto gap_at = [&](double a, double b) { return std::abs(eigenvalue_gap(slice.at(a, b))); };
    const double scale = slice.base.omega_a;

    for (int it = 0; it < opt.max_iterations; ++it) {
        const cplx r = residual(x, y);
        if (std::abs(r) == 0.0) break;
        const double hx = 1e-6 * std::max(1.0, std::abs(x));
        const double hy = 1e-6 * std::max(1.0, std::abs(y));
        const cplx dx = (residual(x + hx, y) - residual(x - hx, y)) / (2.0 * hx);
        const cplx dy = (residual(x, y + hy) - residual(x, y - hy)) / (2.0 * hy);
        // J = [[Re dx, Re dy], [Im dx, Im dy]]; step = −Jᵀ (J Jᵀ + μI)⁻¹ r
        const double j00 = dx.real(), j01 = dy.real(), j10 = dx.imag(), j11 = dy.imag();
        double a = j00 * j00 + j01 * j01;
        double b = j00 * j10 + j01 * j11;
        double d = j10 * j10 + j11 * j11;
        const double mu = 1e-14 * (a + d) + std::numeric_limits<double>::min();
        a += mu;
        d += mu;
        const double det = a * d - b * b;
        if (!(det > 0.0)) return std::nullopt;
        const double w0 = (d * r.real() - b * r.imag()) / det;
        const double w1 = (-b * r.real() + a * r.imag()) / det;
        double sx = -(j00 * w0 + j10 * w1);
        double sy = -(j01 * w0 + j11 * w1);

        // damping: halve until the residual does not grow
        double lambda = 1.0;
        const double r0 = std::abs(r);
        while (lambda > 1e-6 && std::abs(residual(x + lambda * sx, y + lambda * sy)) > r0)
            lambda /= 2.0;
        const double nx = x + lambda * sx, ny = y + lambda * sy;
        if (nx == x && ny == y) break;
        x = nx;
        y = ny;
    }

    // ulp walk on each coordinate
    for (int pass = 0; pass < 2; ++pass) {
        for (int axis = 0; axis < 2; ++axis) {
            double best = std::abs(residual(x, y));
            for (double dir : {1.0, -1.0}) {
                double cx = x, cy = y;
                for (int k = 0; k < 64 && best > 0.0; ++k) {
                    if (axis == 0) cx = std::nextafter(cx, dir * std::numeric_limits<double>::infinity());
                    else cy = std::nextafter(cy, dir * std::numeric_limits<double>::infinity());
                    const double rv = std::abs(residual(cx, cy));
                    if (rv < best) {
                        best = rv;
                        x = cx;
                        y = cy;
                    }
                }
            }
        }
    }

    const double gap = gap_at(x, y);
    if (!std::isfinite(gap) || gap >= opt.tolerance * scale) return std::nullopt;
    return RootCandidate{x, y, gap};
}

} // namespace detail

/// Locates a parameter point of the slice where Δ_E = 0 inside `box`,
/// starting from `seed` (x, y). Returns the root closest to the seed.
/// Throws NoEPFound when no degeneracy lies inside the box and NonConverged
/// when the scan shows a near-zero gap that Newton cannot polish below the
/// tolerance.
inline ParameterPoint find_ep(const ParameterSlice& slice, std::array<double, 2> seed,
                              const SearchBox& box, const EpSearchOptions& opt = {})
{
    slice.validate();
    slice.base.validate();

    auto solve_from = [&](double x0, double y0) -> std::optional<detail::RootCandidate> {
        std::optional<detail::RootCandidate> best;
        for (int sign : {1, -1}) {
            auto c = detail::newton_on_factor(slice, x0, y0, sign, opt);
            if (!c || !box.contains(c->x, c->y)) continue;
            const double dist = std::hypot(c->x - x0, c->y - y0);
            if (!best || dist < std::hypot(best->x - x0, best->y - y0)) best = c;
        }
        return best;
    };

    if (auto c = solve_from(seed[0], seed[1])) return slice.at(c->x, c->y);

    // Reseed from the box's minimum-gap grid node.
    const std::size_t n = std::max<std::size_t>(opt.scan_points, 2);
    double best_gap = std::numeric_limits<double>::infinity();
    double bx = seed[0], by = seed[1];
    for (std::size_t j = 0; j < n; ++j) {
        const double y = box.y_min + (box.y_max - box.y_min) * static_cast<double>(j) / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = box.x_min + (box.x_max - box.x_min) * static_cast<double>(i) / static_cast<double>(n - 1);
            const double gap = std::abs(eigenvalue_gap(slice.at(x, y)));
            if (gap < best_gap) {
                best_gap = gap;
                bx = x;
                by = y;
            }
        }
    }
    if (auto c = solve_from(bx, by)) return slice.at(c->x, c->y);

    // A sampled gap this small means a root is inside but was not polished.
    if (best_gap < 1e-12 * slice.base.omega_a)
        throw NonConverged("EP search stalled at gap " + std::to_string(best_gap));
    throw NoEPFound("no degeneracy inside the search box (min sampled gap "
                    + std::to_string(best_gap) + ")");
}

} // namespace jcep
