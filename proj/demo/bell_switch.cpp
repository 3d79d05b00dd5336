// Runs the symmetric and the modulated-dissipation loops in both directions
// from the plus Bell state and prints the final fidelities.

#include <cstdio>

#include "jcep/jcep.hpp"

using namespace jcep;

static void report(const char* name, const Loop& loop)
{
    const Loop cw = loop.direction() == Direction::cw ? loop : loop.reversed();
    const Loop ccw = cw.reversed();
    const auto a = evolve(cw, initial_bell_state(Label::plus));
    const auto b = evolve(ccw, initial_bell_state(Label::plus));
    const auto v = classify_transfer(a, b);
    std::printf("%-22s T=%.4f  CW: F+=%.6f F-=%.6f  CCW: F+=%.6f F-=%.6f  -> %s\n", name, loop.period(),
                v.endpoint_fidelities.cw_plus, v.endpoint_fidelities.cw_minus, v.endpoint_fidelities.ccw_plus,
                v.endpoint_fidelities.ccw_minus, std::string(to_string(v.transfer_class)).c_str());
}

int main()
{
    report("symmetric", make_symmetric_loop(0.01, 0.2, 0.2, -1.0, pi));
    report("modulated dissipation", make_chiral_modulated_loop(0.1, 0.04, 0.1, -1.0, pi));
    report("constant dissipation", make_constant_dissipation_loop(0.2, 0.2, 0.2, 0.1, -1.0, pi));

    ParameterSlice plane{ParameterPoint{}, Param::g, Param::gamma, -1.0};
    const ParameterPoint ep = find_ep(plane, {0.02, 0.03}, SearchBox{-0.25, 0.25, 0.0, 0.25});
    std::printf("EP on the (g, gamma) plane near (0.02, 0.03): g=%.3g gamma=%.3g\n", ep.g, ep.gamma);
}
