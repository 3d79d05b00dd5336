#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "jcep/dynamics.hpp"

using namespace jcep;

namespace {

ParameterPoint point(double delta, double g, double gamma, double kappa)
{
    ParameterPoint p;
    p.delta = delta;
    p.g = g;
    p.gamma = gamma;
    p.kappa = kappa;
    return p;
}

Loop constant_loop(const ParameterPoint& p, double period)
{
    return make_custom_loop({{0.0, p}, {period, p}});
}

Eigen::Vector2cd exact_evolution(const ParameterPoint& p, const StateVector& psi0, double t)
{
    const HamiltonianMatrix h = build_hamiltonian(p);
    Eigen::Matrix2cd m;
    m << h.m00, h.m01, h.m10, h.m11;
    const Eigen::Matrix2cd u = (cplx(0.0, -t) * m).exp();
    return u * Eigen::Vector2cd(psi0.amp_e0, psi0.amp_g1);
}

} // namespace

TEST(Evolve, ConstantHamiltonianMatchesMatrixExponential)
{
    const ParameterPoint p = point(0.05, 0.12, 0.08, -0.03);
    const StateVector psi0{cplx(0.6, 0.0), cplx(0.0, 0.8)};
    const double T = 3.0;
    for (Scheme s : {Scheme::rk4, Scheme::dopri5}) {
        IntegratorConfig cfg;
        cfg.scheme = s;
        cfg.observations = 30;
        const EvolutionRecord rec = evolve(constant_loop(p, T), psi0, cfg);
        ASSERT_EQ(rec.size(), 31u);
        for (std::size_t k : {std::size_t{0}, std::size_t{7}, std::size_t{30}}) {
            const Eigen::Vector2cd exact = exact_evolution(p, psi0, rec.times[k]);
            const StateVector got = unnormalized_state(rec, k);
            EXPECT_NEAR(std::abs(got.amp_e0 - exact(0)), 0.0, 1e-9) << to_string(s) << " k=" << k;
            EXPECT_NEAR(std::abs(got.amp_g1 - exact(1)), 0.0, 1e-9) << to_string(s) << " k=" << k;
        }
    }
}

TEST(Evolve, HermitianConservesNormAndFidelitySum)
{
    const Loop l = make_symmetric_loop(0.1, 0.0, 0.0, -1.0, pi);
    IntegratorConfig cfg;
    cfg.rescale = false;
    const EvolutionRecord rec = evolve(l, StateVector{cplx(0.6, 0.0), cplx(0.0, 0.8)}, cfg);
    for (std::size_t k = 0; k < rec.size(); ++k) {
        EXPECT_NEAR(rec.log_norm[k], 0.0, 1e-10);
        EXPECT_NEAR(rec.fidelity_plus[k] + rec.fidelity_minus[k], 1.0, 1e-10);
    }
}

TEST(Evolve, RescalingDoesNotChangeTheState)
{
    // both modes lossy so the raw norm leaves the rescale window
    const ParameterPoint p = point(0.0, 0.1, 30.0, 30.0);
    IntegratorConfig a, b;
    b.rescale = false;
    const Loop l = constant_loop(p, 2.0);
    const EvolutionRecord ra = evolve(l, initial_bell_state(Label::plus), a);
    const EvolutionRecord rb = evolve(l, initial_bell_state(Label::plus), b);
    EXPECT_LT(rb.log_norm.back(), std::log(1e-6));
    EXPECT_NEAR(ra.log_norm.back(), rb.log_norm.back(), 1e-9);
    EXPECT_NEAR(std::abs(ra.states.back().amp_e0 - rb.states.back().amp_e0), 0.0, 1e-9);
}

TEST(Evolve, SchemesAgreeOnModulatedLoop)
{
    const Loop l = make_chiral_modulated_loop(0.1, 0.04, 0.1, -1.0, pi);
    IntegratorConfig rk, dp;
    dp.scheme = Scheme::dopri5;
    const auto a = evolve(l, initial_bell_state(Label::plus), rk);
    const auto b = evolve(l, initial_bell_state(Label::plus), dp);
    EXPECT_NEAR(a.fidelity_plus.back(), b.fidelity_plus.back(), 1e-8);
    EXPECT_NEAR(a.fidelity_minus.back(), b.fidelity_minus.back(), 1e-8);
}

TEST(Evolve, ObservationTimesAreUniform)
{
    IntegratorConfig cfg;
    cfg.observations = 8;
    cfg.steps = 80;
    const auto rec = evolve(make_chiral_modulated_loop(0.1, 0.04, 0.1, -1.0, pi), initial_bell_state(Label::minus), cfg);
    for (std::size_t k = 0; k <= 8; ++k) EXPECT_DOUBLE_EQ(rec.times[k], 2.0 * k / 8.0);
    ASSERT_TRUE(rec.initial_label);
    EXPECT_EQ(*rec.initial_label, Label::minus);
}

TEST(Evolve, StepUnderflowIsReported)
{
    IntegratorConfig cfg;
    cfg.scheme = Scheme::dopri5;
    cfg.rtol = 1e-16;
    cfg.atol = 1e-18;
    cfg.min_step = 0.01;
    cfg.observations = 10;
    EXPECT_THROW(evolve(make_chiral_modulated_loop(0.1, 0.04, 0.1, -1.0, pi), initial_bell_state(Label::plus), cfg),
                 StepUnderflow);
}

TEST(Evolve, RejectsZeroState)
{
    EXPECT_THROW(evolve(make_chiral_modulated_loop(0.1, 0.04, 0.1, -1.0, pi), StateVector{}), InvalidParameters);
}

TEST(BellStates, Normalized)
{
    for (Label l : {Label::plus, Label::minus}) EXPECT_NEAR(initial_bell_state(l).norm(), 1.0, 1e-15);
    const Vec2 p = initial_bell_state(Label::plus).as_vec(), m = initial_bell_state(Label::minus).as_vec();
    EXPECT_NEAR(std::abs(p[0] * std::conj(m[0]) + p[1] * std::conj(m[1])), 0.0, 1e-16);
}

TEST(BranchContinue, FollowsSmallSteps)
{
    const Eigensystem a = eigensystem(point(0.0, 0.1, 0.05, -0.05));
    const Eigensystem b = eigensystem(point(0.0, 0.1001, 0.05, -0.05));
    const Eigensystem c = branch_continue(a, b.swapped());
    EXPECT_NEAR(std::abs(c.value(Label::plus) - a.value(Label::plus)), 0.0, 1e-3);
    EXPECT_NEAR(std::abs(c.value(Label::plus) - b.value(Label::plus)), 0.0, 1e-15);
}

TEST(BranchContinue, PhasesAreSmooth)
{
    const Eigensystem a = eigensystem(point(0.01, 0.1, 0.05, -0.05));
    Eigensystem b = eigensystem(point(0.0101, 0.1, 0.05, -0.05));
    for (auto& v : b.right) v = {-v[0], -v[1]};
    for (auto& v : b.left) v = {-v[0], -v[1]};
    const Eigensystem c = branch_continue(a, b);
    for (Label l : {Label::plus, Label::minus}) {
        const cplx ov = pair(a.left_covector(l), c.right_vector(l));
        EXPECT_GT(ov.real(), 0.99);
        EXPECT_NEAR(ov.imag(), 0.0, 1e-3);
        EXPECT_NEAR(std::abs(pair(c.left_covector(l), c.right_vector(l)) - 1.0), 0.0, 1e-12);
    }
}

TEST(BranchContinue, TieIsAmbiguous)
{
    // Across γ = 2|g| on the δ = 0, κ = −γ plane the two scores coincide.
    const Eigensystem a = eigensystem(point(0.0, 0.1, 0.19, -0.19));
    const Eigensystem b = eigensystem(point(0.0, 0.1, 0.21, -0.21));
    EXPECT_THROW(branch_continue(a, b), AmbiguousAssignment);
    const Eigensystem kept = branch_continue_or_keep_sheet(a, b);
    EXPECT_EQ(kept.sheet, a.sheet);
    EXPECT_THROW(branch_continue_or_keep_sheet(a, b, EpCrossing::error), AmbiguousAssignment);
}

TEST(Fidelity, PopulationPolicySumsToOne)
{
    const Eigensystem es = eigensystem(point(0.02, 0.1, 0.3, -0.1));
    const StateVector s{cplx(0.3, 0.1), cplx(-0.2, 0.9)};
    const double n = s.norm();
    const StateVector u{s.amp_e0 / n, s.amp_g1 / n};
    const Fidelities f = fidelity(u, es, FidelityPolicy::population);
    EXPECT_NEAR(f.plus + f.minus, 1.0, 1e-14);
}

TEST(Fidelity, EigenstateHasUnitFidelity)
{
    const Eigensystem es = eigensystem(point(0.0, 0.1, 0.0, 0.0));
    const Vec2 r = es.right_vector(Label::minus);
    const Fidelities f = fidelity(StateVector::from_vec(r), es, FidelityPolicy::overlap);
    EXPECT_NEAR(f.minus, 1.0, 1e-14);
    EXPECT_NEAR(f.plus, 0.0, 1e-14);
}

TEST(IntegratorConfig, Validation)
{
    IntegratorConfig c;
    c.observations = 0;
    EXPECT_THROW(c.validate(), InvalidParameters);
    c = {};
    c.scheme = Scheme::dopri5;
    c.rtol = 0.0;
    EXPECT_THROW(c.validate(), InvalidParameters);
}
