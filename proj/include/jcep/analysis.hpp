#pragma once

// Verdicts over evolution records: transfer maps per direction, the
// symmetric/chiral class, and adiabaticity diagnostics along a loop.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string_view>

#include "dynamics.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "trajectory.hpp"

namespace jcep {

enum class TransferMap { identity, swap, indeterminate };
enum class TransferClass { symmetric_swap, symmetric_identity, chiral, indeterminate };

inline std::string_view to_string(TransferMap m)
{
    switch (m) {
    case TransferMap::identity: return "IDENTITY";
    case TransferMap::swap: return "SWAP";
    default: return "INDETERMINATE";
    }
}

inline std::string_view to_string(TransferClass c)
{
    switch (c) {
    case TransferClass::symmetric_swap: return "SYMMETRIC_SWAP";
    case TransferClass::symmetric_identity: return "SYMMETRIC_IDENTITY";
    case TransferClass::chiral: return "CHIRAL";
    default: return "INDETERMINATE";
    }
}

inline TransferClass parse_transfer_class(std::string_view s)
{
    for (TransferClass c : {TransferClass::symmetric_swap, TransferClass::symmetric_identity, TransferClass::chiral,
                            TransferClass::indeterminate})
        if (s == to_string(c)) return c;
    throw InvalidParameters("unknown transfer class '" + std::string(s) + "'");
}

struct EndpointFidelities {
    double cw_plus = 0.0, cw_minus = 0.0;
    double ccw_plus = 0.0, ccw_minus = 0.0;
};

struct TransferVerdict {
    TransferMap cw_map = TransferMap::indeterminate;
    TransferMap ccw_map = TransferMap::indeterminate;
    TransferClass transfer_class = TransferClass::indeterminate;
    EndpointFidelities endpoint_fidelities;
    double threshold = 0.99;
    Label initial = Label::plus;
};

inline constexpr double default_threshold = 0.99;

inline TransferMap transfer_map(const EvolutionRecord& rec, Label initial, double threshold)
{
    const bool same = rec.final_fidelity(initial) >= threshold;
    const bool other = rec.final_fidelity(opposite(initial)) >= threshold;
    if (same == other) return TransferMap::indeterminate;
    return other ? TransferMap::swap : TransferMap::identity;
}

inline TransferClass transfer_class(TransferMap cw, TransferMap ccw)
{
    if (cw == TransferMap::indeterminate || ccw == TransferMap::indeterminate) return TransferClass::indeterminate;
    if (cw != ccw) return TransferClass::chiral;
    return cw == TransferMap::swap ? TransferClass::symmetric_swap : TransferClass::symmetric_identity;
}

/// Both records must start from the same labeled eigenstate on the same
/// loop, traversed in opposite directions.
inline TransferVerdict classify_transfer(const EvolutionRecord& rec_cw, const EvolutionRecord& rec_ccw,
                                         double threshold = default_threshold)
{
    if (!(threshold > 0.5 && threshold <= 1.0)) throw InvalidParameters("threshold must lie in (0.5, 1]");
    if (rec_cw.size() == 0 || rec_ccw.size() == 0) throw MismatchedRecords("empty evolution record");
    if (!rec_cw.initial_label || !rec_ccw.initial_label)
        throw MismatchedRecords("records must start from a labeled eigenstate");
    if (*rec_cw.initial_label != *rec_ccw.initial_label) throw MismatchedRecords("records start from different states");
    if (rec_cw.loop_id != rec_ccw.loop_id)
        throw MismatchedRecords("records come from different loops: " + rec_cw.loop_id + " vs " + rec_ccw.loop_id);
    if (rec_cw.direction != Direction::cw || rec_ccw.direction != Direction::ccw)
        throw MismatchedRecords("expected one CW and one CCW record");

    TransferVerdict v;
    v.threshold = threshold;
    v.initial = *rec_cw.initial_label;
    v.cw_map = transfer_map(rec_cw, v.initial, threshold);
    v.ccw_map = transfer_map(rec_ccw, v.initial, threshold);
    v.transfer_class = transfer_class(v.cw_map, v.ccw_map);
    v.endpoint_fidelities = {rec_cw.final_fidelity(Label::plus), rec_cw.final_fidelity(Label::minus),
                             rec_ccw.final_fidelity(Label::plus), rec_ccw.final_fidelity(Label::minus)};
    return v;
}

struct AdiabaticityMetrics {
    double min_gap = 0.0;
    double max_coupling_rate = 0.0;
    double imag_gap_integral = 0.0;
};

/// Samples one period at n points (n ≥ 16). The coupling rate is
/// |⟨φ̂_∓| d/dt φ_±⟩| by central differences of the continued eigenvectors
/// (one-sided at the ends).
inline AdiabaticityMetrics adiabaticity_metrics(const Loop& loop, std::size_t n_samples)
{
    if (n_samples < 16) throw InvalidParameters("adiabaticity metrics need at least 16 samples");
    const double T = loop.period();
    const std::size_t n = n_samples;
    const double dt = T / static_cast<double>(n - 1);

    std::vector<Eigensystem> es;
    es.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Eigensystem raw = eigensystem(loop.evaluate(dt * static_cast<double>(k)));
        es.push_back(k == 0 ? detail::initial_labels(raw) : branch_continue_or_keep_sheet(es.back(), raw));
    }

    AdiabaticityMetrics m;
    m.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        m.min_gap = std::min(m.min_gap, std::abs(es[k].gap));
        const std::size_t a = k == 0 ? 0 : k - 1;
        const std::size_t b = k + 1 == n ? k : k + 1;
        const double span = dt * static_cast<double>(b - a);
        for (Label l : {Label::plus, Label::minus}) {
            const Vec2& ra = es[a].right_vector(l);
            const Vec2& rb = es[b].right_vector(l);
            const Vec2 d{(rb[0] - ra[0]) / span, (rb[1] - ra[1]) / span};
            m.max_coupling_rate = std::max(m.max_coupling_rate, std::abs(pair(es[k].left_covector(opposite(l)), d)));
        }
        if (k > 0)
            m.imag_gap_integral += 0.5 * dt * (std::abs(es[k - 1].gap.imag()) + std::abs(es[k].gap.imag()));
    }
    return m;
}

} // namespace jcep
