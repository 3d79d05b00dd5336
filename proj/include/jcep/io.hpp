#pragma once

// Artifact writers. CSV numbers use 17 significant digits; JSON goes through
// nlohmann::ordered_json, which emits the shortest round-trip form with a
// stable key order. Newlines are always '\n'.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "spectrum.hpp"
#include "trajectory.hpp"

namespace jcep {

using ojson = nlohmann::ordered_json;

inline std::string fmt17(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline void write_record_csv(std::ostream& out, const EvolutionRecord& rec)
{
    out << "t,re_amp_e0,im_amp_e0,re_amp_g1,im_amp_g1,log_norm,F_plus,F_minus,reE_plus,imE_plus,reE_minus,imE_minus\n";
    for (std::size_t k = 0; k < rec.size(); ++k) {
        const StateVector& s = rec.states[k];
        out << fmt17(rec.times[k]) << ',' << fmt17(s.amp_e0.real()) << ',' << fmt17(s.amp_e0.imag()) << ','
            << fmt17(s.amp_g1.real()) << ',' << fmt17(s.amp_g1.imag()) << ',' << fmt17(rec.log_norm[k]) << ','
            << fmt17(rec.fidelity_plus[k]) << ',' << fmt17(rec.fidelity_minus[k]) << ','
            << fmt17(rec.energies_plus[k].real()) << ',' << fmt17(rec.energies_plus[k].imag()) << ','
            << fmt17(rec.energies_minus[k].real()) << ',' << fmt17(rec.energies_minus[k].imag()) << '\n';
    }
}

inline void write_surface_csv(std::ostream& out, const SurfaceSample& s)
{
    const GridSpec& g = s.grid;
    out << to_string(g.slice.axis_x) << ',' << to_string(g.slice.axis_y)
        << ",reE_plus,imE_plus,reE_minus,imE_minus,gap\n";
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i)
            out << fmt17(g.x(i)) << ',' << fmt17(g.y(j)) << ',' << fmt17(s.reE_plus(i, j)) << ','
                << fmt17(s.imE_plus(i, j)) << ',' << fmt17(s.reE_minus(i, j)) << ',' << fmt17(s.imE_minus(i, j))
                << ',' << fmt17(s.gap_abs(i, j)) << '\n';
}

inline void write_level_set_csv(std::ostream& out, const LevelSet& ls, const GridSpec& g)
{
    out << "polyline," << to_string(g.slice.axis_x) << ',' << to_string(g.slice.axis_y) << '\n';
    for (std::size_t n = 0; n < ls.segments.size(); ++n)
        for (const auto& p : ls.segments[n]) out << n << ',' << fmt17(p[0]) << ',' << fmt17(p[1]) << '\n';
}

inline void write_projection_csv(std::ostream& out, const std::vector<ProjectedPoint>& pts, const GridSpec& g)
{
    out << "t," << to_string(g.slice.axis_x) << ',' << to_string(g.slice.axis_y)
        << ",reE_plus,imE_plus,reE_minus,imE_minus\n";
    for (const auto& p : pts)
        out << fmt17(p.t) << ',' << fmt17(p.x) << ',' << fmt17(p.y) << ',' << fmt17(p.e_plus.real()) << ','
            << fmt17(p.e_plus.imag()) << ',' << fmt17(p.e_minus.real()) << ',' << fmt17(p.e_minus.imag()) << '\n';
}

inline void write_cut_csv(std::ostream& out, const std::vector<CutPoint>& pts, Param along)
{
    out << to_string(along) << ",reE_plus,imE_plus,reE_minus,imE_minus\n";
    for (const auto& p : pts)
        out << fmt17(p.coordinate) << ',' << fmt17(p.e_plus.real()) << ',' << fmt17(p.e_plus.imag()) << ','
            << fmt17(p.e_minus.real()) << ',' << fmt17(p.e_minus.imag()) << '\n';
}

// ---------------------------------------------------------------------------
// JSON fragments
// ---------------------------------------------------------------------------

inline ojson to_json(const ParameterPoint& p)
{
    return ojson{{"omega_a", p.omega_a}, {"delta", p.delta}, {"g", p.g}, {"gamma", p.gamma}, {"kappa", p.kappa}};
}

inline ojson to_json(const GridSpec& g)
{
    ojson fixed = ojson::object();
    for (Param p : {Param::omega_a, Param::delta, Param::g, Param::gamma, Param::kappa}) {
        if (p == g.slice.axis_x || p == g.slice.axis_y) continue;
        if (p == Param::kappa && g.slice.kappa_ratio) continue;
        fixed[std::string(to_string(p))] = g.slice.base.get(p);
    }
    ojson j{{"axis_x", to_string(g.slice.axis_x)},
            {"axis_y", to_string(g.slice.axis_y)},
            {"x_range", {g.x_min, g.x_max}},
            {"y_range", {g.y_min, g.y_max}},
            {"nx", g.nx},
            {"ny", g.ny},
            {"fixed", fixed}};
    j["kappa_ratio"] = g.slice.kappa_ratio ? ojson(*g.slice.kappa_ratio) : ojson(nullptr);
    return j;
}

inline ojson to_json(const Loop& l)
{
    const LoopConstants& c = l.constants();
    ojson j{{"id", l.id()}, {"kind", to_string(l.kind())}, {"direction", to_string(l.direction())},
            {"period", l.period()}};
    switch (l.kind()) {
    case LoopKind::symmetric:
        j["constants"] = {{"g0", c.g0}, {"G0", c.G0}, {"Gamma0", c.Gamma0}, {"alpha", c.alpha}, {"omega", c.omega}};
        j["closure_period"] = l.closure_period();
        j["closed"] = l.closed();
        j["premise_violated"] = l.premise_violated();
        break;
    case LoopKind::chiral_modulated:
        j["constants"] = {{"g0", c.g0}, {"Delta0", c.Delta0}, {"Gamma0", c.Gamma0}, {"alpha", c.alpha}, {"omega", c.omega}};
        break;
    case LoopKind::constant_dissipation:
        j["constants"] = {{"g0", c.g0}, {"G0", c.G0}, {"Delta0", c.Delta0}, {"gamma0", c.gamma0}, {"alpha", c.alpha},
                          {"omega", c.omega}};
        break;
    default: break;
    }
    return j;
}

inline ojson to_json(const TransferVerdict& v)
{
    const EndpointFidelities& f = v.endpoint_fidelities;
    return ojson{{"initial", to_string(v.initial)},
                 {"cw_map", to_string(v.cw_map)},
                 {"ccw_map", to_string(v.ccw_map)},
                 {"class", to_string(v.transfer_class)},
                 {"threshold", v.threshold},
                 {"endpoint_fidelities",
                  {{"cw_plus", f.cw_plus}, {"cw_minus", f.cw_minus}, {"ccw_plus", f.ccw_plus}, {"ccw_minus", f.ccw_minus}}}};
}

inline ojson to_json(const AdiabaticityMetrics& m)
{
    return ojson{{"min_gap", m.min_gap}, {"max_coupling_rate", m.max_coupling_rate},
                 {"imag_gap_integral", m.imag_gap_integral}};
}

inline ojson to_json(const MinGap& m, const GridSpec& g)
{
    return ojson{{std::string(to_string(g.slice.axis_x)), m.x},
                 {std::string(to_string(g.slice.axis_y)), m.y},
                 {"gap", m.gap},
                 {"is_ep", m.is_ep}};
}

inline void write_json(std::ostream& out, const ojson& j) { out << j.dump(2) << '\n'; }

// ---------------------------------------------------------------------------
// Binary grid container
//
//   8 bytes  magic "JCEPGRID"
//   4 bytes  format version (little endian uint32, currently 1)
//   8 bytes  header length n (little endian uint64)
//   n bytes  JSON header: grid description + field order
//   5 float64 matrices, little endian, row by row (y outer, x inner):
//   reE_plus, imE_plus, reE_minus, imE_minus, gap
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr char grid_magic[8] = {'J', 'C', 'E', 'P', 'G', 'R', 'I', 'D'};

template <class T>
void put_le(std::ostream& out, T v)
{
    unsigned char b[sizeof(T)];
    for (std::size_t k = 0; k < sizeof(T); ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& in)
{
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw Error("truncated grid container");
    T v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(b[k]) << (8 * k);
    return v;
}

inline void put_double(std::ostream& out, double d)
{
    std::uint64_t u;
    std::memcpy(&u, &d, sizeof u);
    put_le(out, u);
}

inline double get_double(std::istream& in)
{
    const auto u = get_le<std::uint64_t>(in);
    double d;
    std::memcpy(&d, &u, sizeof d);
    return d;
}

} // namespace detail

inline void write_surface_binary(std::ostream& out, const SurfaceSample& s)
{
    ojson header = to_json(s.grid);
    header["fields"] = {"reE_plus", "imE_plus", "reE_minus", "imE_minus", "gap"};
    header["layout"] = "row-major, y outer";
    const std::string h = header.dump();
    out.write(detail::grid_magic, 8);
    detail::put_le<std::uint32_t>(out, 1);
    detail::put_le<std::uint64_t>(out, h.size());
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const Grid2* m : {&s.reE_plus, &s.imE_plus, &s.reE_minus, &s.imE_minus, &s.gap_abs})
        for (double d : m->data()) detail::put_double(out, d);
}

struct BinaryGrid {
    ojson header;
    std::size_t nx = 0, ny = 0;
    std::vector<std::vector<double>> fields;  // same order as header["fields"]
};

inline BinaryGrid read_surface_binary(std::istream& in)
{
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, detail::grid_magic, 8) != 0) throw Error("not a grid container");
    if (detail::get_le<std::uint32_t>(in) != 1) throw Error("unsupported grid container version");
    const auto n = detail::get_le<std::uint64_t>(in);
    std::string h(n, '\0');
    if (!in.read(h.data(), static_cast<std::streamsize>(n))) throw Error("truncated grid header");
    BinaryGrid g;
    g.header = ojson::parse(h);
    g.nx = g.header.at("nx").get<std::size_t>();
    g.ny = g.header.at("ny").get<std::size_t>();
    for (std::size_t f = 0; f < g.header.at("fields").size(); ++f) {
        std::vector<double> v(g.nx * g.ny);
        for (double& d : v) d = detail::get_double(in);
        g.fields.push_back(std::move(v));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Plot scripts (matplotlib), written next to the data they read.
// ---------------------------------------------------------------------------

inline const char* spectrum_plot_script()
{
    return R"(import json, os, sys
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
report = json.load(open(os.path.join(here, "spectrum.json")))
grid = report["grid"]
ax_x, ax_y = grid["axis_x"], grid["axis_y"]
data = np.genfromtxt(os.path.join(here, "surface.csv"), delimiter=",", names=True)
nx, ny = grid["nx"], grid["ny"]
X = data[ax_x].reshape(ny, nx)
Y = data[ax_y].reshape(ny, nx)

fig = plt.figure(figsize=(11, 9))
for k, (field, title) in enumerate([("reE", "Re E"), ("imE", "Im E")]):
    ax = fig.add_subplot(2, 2, k + 1, projection="3d")
    ax.plot_surface(X, Y, data[field + "_plus"].reshape(ny, nx), color="tab:blue", alpha=0.6)
    ax.plot_surface(X, Y, data[field + "_minus"].reshape(ny, nx), color="tab:red", alpha=0.6)
    ax.set_xlabel(ax_x); ax.set_ylabel(ax_y); ax.set_title(title)
    ov = os.path.join(here, "overlay.csv")
    if os.path.exists(ov):
        o = np.genfromtxt(ov, delimiter=",", names=True)
        ax.plot(o[ax_x], o[ax_y], o[field + "_plus"], "b-", lw=2)
        ax.plot(o[ax_x], o[ax_y], o[field + "_minus"], "r--", lw=2)

ax = fig.add_subplot(2, 2, 3)
ax.set_title("level sets and minimum gap")
for name, style in [("d_line.csv", "k-"), ("l_line.csv", "g-")]:
    p = os.path.join(here, name)
    if os.path.exists(p):
        d = np.genfromtxt(p, delimiter=",", names=True)
        for n in np.unique(d["polyline"]):
            m = d["polyline"] == n
            ax.plot(d[ax_x][m], d[ax_y][m], style, lw=1)
mg = report["min_gap"]
ax.plot([mg[ax_x]], [mg[ax_y]], "o", color="magenta")
if report.get("reference") is not None:
    r = report["reference"]["point"]
    ax.plot([r[0]], [r[1]], "kx")
ax.set_xlabel(ax_x); ax.set_ylabel(ax_y)

cut = os.path.join(here, "cut.csv")
if os.path.exists(cut):
    c = np.genfromtxt(cut, delimiter=",", names=True)
    ax = fig.add_subplot(2, 2, 4)
    col = c.dtype.names[0]
    ax.plot(c[col], c["reE_plus"], "b-", c[col], c["reE_minus"], "r--")
    ax.plot(c[col], c["imE_plus"], "b:", c[col], c["imE_minus"], "r-.")
    ax.set_xlabel(col); ax.set_title("cut")

fig.tight_layout()
fig.savefig(os.path.join(here, "spectrum.png"), dpi=150)
)";
}

inline const char* evolve_plot_script()
{
    return R"(import glob, os
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
files = sorted(glob.glob(os.path.join(here, "record_*.csv")))
fig, axes = plt.subplots(len(files), 1, figsize=(7, 2.6 * max(1, len(files))), squeeze=False)
for ax, f in zip(axes[:, 0], files):
    d = np.genfromtxt(f, delimiter=",", names=True)
    ax.plot(d["t"], d["F_plus"], "b-", label="F+")
    ax.plot(d["t"], d["F_minus"], "r--", label="F-")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(os.path.basename(f)[len("record_"):-4])
    ax.set_xlabel("t"); ax.legend(loc="center right")
fig.tight_layout()
fig.savefig(os.path.join(here, "fidelity.png"), dpi=150)
)";
}

} // namespace jcep
