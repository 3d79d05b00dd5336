#pragma once

// Eigenvalue surfaces over 2D parameter slices, their degeneracy level sets
// (D line: Im E_+ = Im E_−, L line: Re E_+ = Re E_−), minimum-gap search and
// loop overlays.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string_view>
#include <thread>
#include <vector>

#include "dynamics.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "trajectory.hpp"

namespace jcep {

struct GridSpec {
    ParameterSlice slice;
    double x_min = 0.0, x_max = 1.0;
    double y_min = 0.0, y_max = 1.0;
    std::size_t nx = 401, ny = 401;

    void validate() const
    {
        slice.validate();
        slice.base.validate();
        if (nx < 2 || ny < 2) throw InvalidParameters("grid needs at least 2 samples per axis");
        if (!(x_max > x_min) || !(y_max > y_min) || !std::isfinite(x_min) || !std::isfinite(x_max)
            || !std::isfinite(y_min) || !std::isfinite(y_max))
            throw InvalidParameters("grid ranges must be finite and non-degenerate");
    }

    double x(std::size_t i) const
    {
        return x_min + (x_max - x_min) * static_cast<double>(i) / static_cast<double>(nx - 1);
    }
    double y(std::size_t j) const
    {
        return y_min + (y_max - y_min) * static_cast<double>(j) / static_cast<double>(ny - 1);
    }
    ParameterPoint point(std::size_t i, std::size_t j) const { return slice.at(x(i), y(j)); }
};

/// Dense nx × ny field, stored row by row (y outer, x inner).
class Grid2 {
public:
    Grid2() = default;
    Grid2(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny), data_(nx * ny, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data_[j * nx_ + i]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[j * nx_ + i]; }
    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

private:
    std::size_t nx_ = 0, ny_ = 0;
    std::vector<double> data_;
};

struct SurfaceSample {
    GridSpec grid;
    Grid2 reE_plus, imE_plus, reE_minus, imE_minus;
    Grid2 gap_abs;

    cplx value(Label l, std::size_t i, std::size_t j) const
    {
        return l == Label::plus ? cplx{reE_plus(i, j), imE_plus(i, j)} : cplx{reE_minus(i, j), imE_minus(i, j)};
    }
};

namespace detail {

inline Eigensystem order_by_real_part(const Eigensystem& raw)
{
    const cplx a = raw.values[0], b = raw.values[1];
    const bool plus_is_first = a.real() > b.real() || (a.real() == b.real() && a.imag() >= b.imag());
    return plus_is_first ? raw : raw.swapped();
}

} // namespace detail

/// Eigenvalues at every node, labeled continuously: node (0,0) is labeled
/// by ascending Re E (plus = larger), each row continues from the node to its
/// left and a row's first node from the one below it. Degenerate nodes keep
/// gap 0 with coalesced values and do not break the continuation.
inline SurfaceSample sample_surface(const GridSpec& grid, unsigned workers = 1)
{
    grid.validate();
    const std::size_t nx = grid.nx, ny = grid.ny;

    std::vector<std::optional<Eigensystem>> raw(nx * ny);
    std::vector<cplx> mean(nx * ny);
    auto fill_rows = [&](std::size_t j0, std::size_t j1) {
        for (std::size_t j = j0; j < j1; ++j)
            for (std::size_t i = 0; i < nx; ++i) {
                const ParameterPoint p = grid.point(i, j);
                mean[j * nx + i] = detail::eigenvalue_mean(p);
                try {
                    raw[j * nx + i] = eigensystem(p);
                } catch (const DegenerateEigensystem&) {
                }
            }
    };
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(ny)));
    if (workers == 1) {
        fill_rows(0, ny);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (ny + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t j0 = w * chunk, j1 = std::min(ny, j0 + chunk);
            if (j0 < j1) pool.emplace_back(fill_rows, j0, j1);
        }
        for (auto& t : pool) t.join();
    }

    SurfaceSample s{grid, Grid2(nx, ny), Grid2(nx, ny), Grid2(nx, ny), Grid2(nx, ny), Grid2(nx, ny)};
    std::vector<std::optional<Eigensystem>> labeled(nx * ny);
    std::vector<std::optional<std::size_t>> anchor(nx * ny);  // last labeled node on the path

    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t k = j * nx + i;
            std::optional<std::size_t> from;
            if (i > 0) from = anchor[k - 1];
            else if (j > 0) from = anchor[k - nx];

            if (raw[k]) {
                labeled[k] = from ? branch_continue_or_keep_sheet(*labeled[*from], *raw[k])
                                  : detail::order_by_real_part(*raw[k]);
                anchor[k] = k;
            } else {
                anchor[k] = from;
            }

            cplx ep, em;
            if (labeled[k]) {
                ep = labeled[k]->value(Label::plus);
                em = labeled[k]->value(Label::minus);
            } else {
                ep = em = mean[k];
            }
            s.reE_plus(i, j) = ep.real();
            s.imE_plus(i, j) = ep.imag();
            s.reE_minus(i, j) = em.real();
            s.imE_minus(i, j) = em.imag();
            s.gap_abs(i, j) = std::abs(ep - em);
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Level sets
// ---------------------------------------------------------------------------

enum class LevelKind { d_line, l_line };

inline std::string_view to_string(LevelKind k) { return k == LevelKind::d_line ? "D_LINE" : "L_LINE"; }

using Point2 = std::array<double, 2>;
using Polyline = std::vector<Point2>;

struct LevelSet {
    LevelKind kind = LevelKind::d_line;
    std::vector<Polyline> segments;

    std::size_t vertex_count() const
    {
        std::size_t n = 0;
        for (const auto& s : segments) n += s.size();
        return n;
    }
};

namespace detail {

inline double level_value(LevelKind kind, cplx ep, cplx em)
{
    return kind == LevelKind::d_line ? ep.imag() - em.imag() : ep.real() - em.real();
}

// Level function at a point between two labeled nodes: the model's raw pair
// is matched to the interpolated labeled pair.
inline double level_at(const GridSpec& grid, LevelKind kind, double x, double y, cplx ref_p, cplx ref_m)
{
    const ParameterPoint p = grid.slice.at(x, y);
    const cplx d = eigenvalue_gap(p) / 2.0;
    const cplx mean = eigenvalue_mean(p);
    const cplx a = mean + d, b = mean - d;
    const bool keep = std::abs(a - ref_p) + std::abs(b - ref_m) <= std::abs(b - ref_p) + std::abs(a - ref_m);
    return keep ? level_value(kind, a, b) : level_value(kind, b, a);
}

struct EdgeEnd {
    std::size_t i, j;
};

// Bracketed regula falsi (Illinois) on the edge a→b. Returns nullopt when
// the sign change is a jump rather than a zero.
inline std::optional<Point2> refine_on_edge(const SurfaceSample& s, LevelKind kind, EdgeEnd a, EdgeEnd b,
                                            double tolerance)
{
    const GridSpec& g = s.grid;
    const double xa = g.x(a.i), ya = g.y(a.j), xb = g.x(b.i), yb = g.y(b.j);
    const cplx pa = s.value(Label::plus, a.i, a.j), ma = s.value(Label::minus, a.i, a.j);
    const cplx pb = s.value(Label::plus, b.i, b.j), mb = s.value(Label::minus, b.i, b.j);

    auto eval = [&](double u) {
        return level_at(g, kind, xa + u * (xb - xa), ya + u * (yb - ya), pa + u * (pb - pa), ma + u * (mb - ma));
    };
    auto at = [&](double u) { return Point2{xa + u * (xb - xa), ya + u * (yb - ya)}; };

    double u0 = 0.0, u1 = 1.0;
    double f0 = eval(u0), f1 = eval(u1);
    if (f0 == 0.0) return at(0.0);
    if (f1 == 0.0) return at(1.0);
    if ((f0 > 0.0) == (f1 > 0.0)) return std::nullopt;

    double u = 0.5, fu = 0.0;
    int side = 0;
    for (int it = 0; it < 200; ++it) {
        u = (u0 * f1 - u1 * f0) / (f1 - f0);
        fu = eval(u);
        if (fu == 0.0 || u1 - u0 < 1e-15) break;
        if ((fu > 0.0) == (f1 > 0.0)) {
            u1 = u;
            f1 = fu;
            if (side == -1) f0 /= 2.0;
            side = -1;
        } else {
            u0 = u;
            f0 = fu;
            if (side == 1) f1 /= 2.0;
            side = 1;
        }
        if (std::abs(fu) < 1e-15 * g.slice.base.omega_a) break;
    }
    if (!(std::abs(fu) < tolerance * g.slice.base.omega_a)) return std::nullopt;
    return at(u);
}

} // namespace detail

/// Zero contour of Im(E_+ − E_−) (D line) or Re(E_+ − E_−) (L line) by
/// marching squares, each edge crossing refined on the model itself.
/// Crossings that do not refine below `tolerance` (label jumps) are dropped.
inline LevelSet degeneracy_lines(const SurfaceSample& s, LevelKind kind, double tolerance = 1e-6)
{
    const GridSpec& g = s.grid;
    const std::size_t nx = g.nx, ny = g.ny;
    Grid2 f(nx, ny);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i)
            f(i, j) = detail::level_value(kind, s.value(Label::plus, i, j), s.value(Label::minus, i, j));

    // Edge ids: horizontal (i,j)→(i+1,j) is 2k, vertical (i,j)→(i,j+1) is 2k+1.
    std::map<std::size_t, std::optional<Point2>> vertex;
    auto edge_vertex = [&](std::size_t id) -> const std::optional<Point2>& {
        auto it = vertex.find(id);
        if (it != vertex.end()) return it->second;
        const std::size_t k = id / 2, i = k % nx, j = k / nx;
        const detail::EdgeEnd a{i, j};
        const detail::EdgeEnd b = (id % 2 == 0) ? detail::EdgeEnd{i + 1, j} : detail::EdgeEnd{i, j + 1};
        return vertex.emplace(id, detail::refine_on_edge(s, kind, a, b, tolerance)).first->second;
    };

    std::map<std::size_t, std::vector<std::size_t>> adjacency;
    auto link = [&](std::size_t e1, std::size_t e2) {
        if (!edge_vertex(e1) || !edge_vertex(e2)) return;
        adjacency[e1].push_back(e2);
        adjacency[e2].push_back(e1);
    };

    for (std::size_t j = 0; j + 1 < ny; ++j) {
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            const bool bl = f(i, j) >= 0.0, br = f(i + 1, j) >= 0.0;
            const bool tl = f(i, j + 1) >= 0.0, tr = f(i + 1, j + 1) >= 0.0;
            const int config = (bl ? 1 : 0) | (br ? 2 : 0) | (tr ? 4 : 0) | (tl ? 8 : 0);
            if (config == 0 || config == 15) continue;
            const std::size_t bottom = 2 * (j * nx + i);
            const std::size_t top = 2 * ((j + 1) * nx + i);
            const std::size_t left = 2 * (j * nx + i) + 1;
            const std::size_t right = 2 * (j * nx + i + 1) + 1;
            switch (config) {
            case 1: case 14: link(left, bottom); break;
            case 2: case 13: link(bottom, right); break;
            case 3: case 12: link(left, right); break;
            case 4: case 11: link(right, top); break;
            case 6: case 9: link(bottom, top); break;
            case 7: case 8: link(left, top); break;
            case 5: case 10: {
                const double centre = (f(i, j) + f(i + 1, j) + f(i, j + 1) + f(i + 1, j + 1)) / 4.0;
                const bool centre_in = centre >= 0.0;
                // config 5: bl and tr inside
                if ((config == 5) == centre_in) {
                    link(left, top);
                    link(bottom, right);
                } else {
                    link(left, bottom);
                    link(right, top);
                }
                break;
            }
            default: break;
            }
        }
    }

    LevelSet out;
    out.kind = kind;
    std::map<std::size_t, bool> used;
    auto walk = [&](std::size_t start) {
        Polyline line;
        std::size_t prev = std::numeric_limits<std::size_t>::max(), cur = start;
        while (true) {
            used[cur] = true;
            line.push_back(*edge_vertex(cur));
            std::size_t next = std::numeric_limits<std::size_t>::max();
            for (std::size_t n : adjacency[cur])
                if (n != prev && !used[n]) {
                    next = n;
                    break;
                }
            if (next == std::numeric_limits<std::size_t>::max()) {
                // close cycles
                for (std::size_t n : adjacency[cur])
                    if (n == start && line.size() > 2) line.push_back(*edge_vertex(start));
                break;
            }
            prev = cur;
            cur = next;
        }
        out.segments.push_back(std::move(line));
    };
    for (const auto& [e, nbrs] : adjacency)
        if (nbrs.size() == 1 && !used[e]) walk(e);
    for (const auto& [e, nbrs] : adjacency)
        if (!used[e]) walk(e);

    if (out.segments.empty())
        throw EmptyLevelSet(std::string("no ") + std::string(to_string(kind)) + " crossing on the grid");
    return out;
}

/// Smallest distance between any two vertices of two level sets.
inline double level_set_distance(const LevelSet& a, const LevelSet& b)
{
    double best = std::numeric_limits<double>::infinity();
    for (const auto& sa : a.segments)
        for (const auto& pa : sa)
            for (const auto& sb : b.segments)
                for (const auto& pb : sb) best = std::min(best, std::hypot(pa[0] - pb[0], pa[1] - pb[1]));
    return best;
}

// ---------------------------------------------------------------------------
// Minimum gap
// ---------------------------------------------------------------------------

inline constexpr double ep_threshold = 1e-10;

struct MinGap {
    double x = 0.0, y = 0.0;
    double gap = 0.0;
    bool is_ep = false;
};

/// Grid argmin of |Δ_E| (first in row order on ties), refined by parabolic
/// fits of |Δ_E|⁴ along each axis on the model itself. A refined point is
/// only accepted when its gap is smaller.
inline MinGap locate_min_gap(const SurfaceSample& s)
{
    const GridSpec& g = s.grid;
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i)
            if (s.gap_abs(i, j) < best) {
                best = s.gap_abs(i, j);
                bi = i;
                bj = j;
            }

    auto model_gap = [&](double x, double y) { return std::abs(eigenvalue_gap(g.slice.at(x, y))); };

    MinGap out{g.x(bi), g.y(bj), model_gap(g.x(bi), g.y(bj)), false};
    auto vertex = [](double fm, double f0, double fp) {
        const double den = fm - 2.0 * f0 + fp;
        if (!(den > 0.0)) return 0.0;
        return std::clamp(0.5 * (fm - fp) / den, -1.0, 1.0);
    };
    auto quartic = [&](double x, double y) { return std::pow(model_gap(x, y), 4); };
    auto in_box = [&](double x, double y) { return x >= g.x_min && x <= g.x_max && y >= g.y_min && y <= g.y_max; };

    // Repeated parabolic steps with a shrinking stencil, starting at the
    // grid spacing and staying inside the grid box.
    double hx = (g.x_max - g.x_min) / static_cast<double>(g.nx - 1);
    double hy = (g.y_max - g.y_min) / static_cast<double>(g.ny - 1);
    const double hx_min = 1e-17 * std::max(1.0, std::max(std::abs(g.x_min), std::abs(g.x_max)));
    const double hy_min = 1e-17 * std::max(1.0, std::max(std::abs(g.y_min), std::abs(g.y_max)));
    for (int it = 0; it < 200 && out.gap > 0.0 && (hx > hx_min || hy > hy_min); ++it) {
        const double f0 = quartic(out.x, out.y);
        double ox = 0.0, oy = 0.0;
        if (in_box(out.x - hx, out.y) && in_box(out.x + hx, out.y))
            ox = vertex(quartic(out.x - hx, out.y), f0, quartic(out.x + hx, out.y));
        if (in_box(out.x, out.y - hy) && in_box(out.x, out.y + hy))
            oy = vertex(quartic(out.x, out.y - hy), f0, quartic(out.x, out.y + hy));
        const double rx = out.x + ox * hx, ry = out.y + oy * hy;
        const double rg = model_gap(rx, ry);
        if (rg < out.gap) {
            out = {rx, ry, rg, false};
            if (std::abs(ox) < 0.5) hx *= 0.5;
            if (std::abs(oy) < 0.5) hy *= 0.5;
        } else {
            hx *= 0.25;
            hy *= 0.25;
        }
    }
    out.is_ep = out.gap < ep_threshold * g.slice.base.omega_a;
    return out;
}

// ---------------------------------------------------------------------------
// Loop overlays and 1D cuts
// ---------------------------------------------------------------------------

struct ProjectedPoint {
    double t;
    double x, y;
    cplx e_plus, e_minus;
};

/// Samples one period of `loop` in the grid's plane with branch-continued
/// eigenvalues. Throws PlaneMismatch when the loop moves a parameter the
/// grid holds fixed.
inline std::vector<ProjectedPoint> project_loop(const GridSpec& grid, const Loop& loop, std::size_t n_samples)
{
    grid.validate();
    if (n_samples < 1) throw InvalidParameters("project_loop needs at least one sample");
    constexpr double tol = 1e-12;
    const ParameterSlice& sl = grid.slice;

    std::vector<ProjectedPoint> out;
    out.reserve(n_samples + 1);
    Eigensystem labeled;
    for (std::size_t k = 0; k <= n_samples; ++k) {
        const double t = loop.period() * static_cast<double>(k) / static_cast<double>(n_samples);
        const ParameterPoint p = loop.evaluate(t);
        const ParameterPoint expect = sl.at(p.get(sl.axis_x), p.get(sl.axis_y));
        for (Param q : {Param::omega_a, Param::delta, Param::g, Param::gamma, Param::kappa})
            if (std::abs(p.get(q) - expect.get(q)) > tol)
                throw PlaneMismatch("loop varies '" + std::string(to_string(q)) + "', which the grid holds fixed");

        const Eigensystem raw = eigensystem(p);
        labeled = k == 0 ? detail::initial_labels(raw) : branch_continue_or_keep_sheet(labeled, raw);
        out.push_back({t, p.get(sl.axis_x), p.get(sl.axis_y), labeled.value(Label::plus), labeled.value(Label::minus)});
    }
    return out;
}

struct CutPoint {
    double coordinate;
    cplx e_plus, e_minus;
};

/// Eigenvalues along the slice's x axis at fixed y (or along y at fixed x),
/// labeled by ascending Re E at the first point and by continuity after.
inline std::vector<CutPoint> sample_cut(const ParameterSlice& slice, bool along_x, double fixed, double from,
                                        double to, std::size_t n)
{
    slice.validate();
    if (n < 2) throw InvalidParameters("cut needs at least 2 samples");
    std::vector<CutPoint> out;
    std::optional<Eigensystem> labeled;
    for (std::size_t k = 0; k < n; ++k) {
        const double c = from + (to - from) * static_cast<double>(k) / static_cast<double>(n - 1);
        const ParameterPoint p = along_x ? slice.at(c, fixed) : slice.at(fixed, c);
        try {
            const Eigensystem raw = eigensystem(p);
            labeled = labeled ? branch_continue_or_keep_sheet(*labeled, raw) : detail::order_by_real_part(raw);
            out.push_back({c, labeled->value(Label::plus), labeled->value(Label::minus)});
        } catch (const DegenerateEigensystem&) {
            const cplx m = detail::eigenvalue_mean(p);
            out.push_back({c, m, m});
        }
    }
    return out;
}

} // namespace jcep
