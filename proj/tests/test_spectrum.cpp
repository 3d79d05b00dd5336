#include <gtest/gtest.h>

#include "jcep/spectrum.hpp"

using namespace jcep;

namespace {

GridSpec fig1_grid(std::size_t n = 101)
{
    return GridSpec{ParameterSlice{ParameterPoint{}, Param::g, Param::gamma, -1.0}, -0.25, 0.25, 0.0, 0.25, n, n};
}

GridSpec fig3_grid(std::size_t n = 101)
{
    ParameterPoint base;
    base.g = 0.1;
    return GridSpec{ParameterSlice{base, Param::gamma, Param::delta, -1.0}, 0.0, 0.1, -0.05, 0.05, n, n};
}

} // namespace

TEST(Surface, ShapesAndGapConsistency)
{
    const SurfaceSample s = sample_surface(fig3_grid(41));
    EXPECT_EQ(s.gap_abs.nx(), 41u);
    EXPECT_EQ(s.reE_plus.data().size(), 41u * 41u);
    for (std::size_t j = 0; j < 41; ++j)
        for (std::size_t i = 0; i < 41; ++i) {
            EXPECT_GE(s.gap_abs(i, j), 0.0);
            EXPECT_NEAR(s.gap_abs(i, j), std::abs(s.value(Label::plus, i, j) - s.value(Label::minus, i, j)), 1e-15);
            EXPECT_NEAR(s.gap_abs(i, j), std::abs(eigenvalue_gap(s.grid.point(i, j))), 1e-14);
        }
}

TEST(Surface, ParallelMatchesSerial)
{
    const SurfaceSample a = sample_surface(fig1_grid(61), 1);
    const SurfaceSample b = sample_surface(fig1_grid(61), 4);
    EXPECT_EQ(a.reE_plus.data(), b.reE_plus.data());
    EXPECT_EQ(a.imE_minus.data(), b.imE_minus.data());
    EXPECT_EQ(a.gap_abs.data(), b.gap_abs.data());
}

TEST(Surface, SeedCornerOrderedByRealPart)
{
    const SurfaceSample s = sample_surface(fig3_grid(11));
    EXPECT_GE(s.reE_plus(0, 0), s.reE_minus(0, 0));
}

TEST(Surface, ExceptionalPlaneIsRealOrImaginarySplit)
{
    // δ = 0, κ = −γ: Δ_E² is real, so the two levels share Re E or Im E
    const SurfaceSample s = sample_surface(fig1_grid(81));
    for (std::size_t j = 0; j < 81; ++j)
        for (std::size_t i = 0; i < 81; ++i) {
            const double dre = std::abs(s.reE_plus(i, j) - s.reE_minus(i, j));
            const double dim = std::abs(s.imE_plus(i, j) - s.imE_minus(i, j));
            EXPECT_LT(std::min(dre, dim), 1e-12) << i << "," << j;
        }
}

TEST(Surface, DegenerateNodeHasZeroGap)
{
    ParameterPoint base;
    base.gamma = 0.2;
    const GridSpec g{ParameterSlice{base, Param::g, Param::delta, std::nullopt}, 0.0, 0.1, -0.1, 0.1, 3, 3};
    const SurfaceSample s = sample_surface(g);
    EXPECT_EQ(s.gap_abs(1, 1), 0.0);
    EXPECT_EQ(s.value(Label::plus, 1, 1), s.value(Label::minus, 1, 1));
    const MinGap m = locate_min_gap(s);
    EXPECT_TRUE(m.is_ep);
    EXPECT_DOUBLE_EQ(m.x, 0.05);
    EXPECT_DOUBLE_EQ(m.y, 0.0);
}

TEST(Surface, RowsAreContinuousAwayFromDegeneracies)
{
    const SurfaceSample s = sample_surface(fig3_grid(101));
    const double h = 0.1 / 100.0;
    for (std::size_t j = 0; j < 101; ++j)
        for (std::size_t i = 1; i + 1 < 101; ++i) {
            if (s.gap_abs(i, j) < 1e-6 || s.gap_abs(i + 1, j) < 1e-6) continue;
            for (Label l : {Label::plus, Label::minus}) {
                const double step = std::abs(s.value(l, i + 1, j) - s.value(l, i, j));
                const double slope = std::abs(s.value(l, i, j) - s.value(l, i - 1, j)) / h;
                // curvature allowance, rows are quadratic near gamma = 0
                EXPECT_LE(step, 2.0 * slope * h + 10.0 * h * h) << i << "," << j;
            }
        }
}

TEST(LevelSets, VerticesSatisfyDefiningEquation)
{
    const SurfaceSample s = sample_surface(fig3_grid(101));
    const LevelSet d = degeneracy_lines(s, LevelKind::d_line);
    ASSERT_GT(d.vertex_count(), 0u);
    for (const auto& line : d.segments)
        for (const auto& v : line) EXPECT_LT(std::abs(eigenvalue_gap(s.grid.slice.at(v[0], v[1])).imag()), 1e-6);
}

TEST(LevelSets, ModulatedPlaneHasNoRealCrossing)
{
    // Re Δ_E = 0 needs γ−κ = 2γ ≥ 4g = 0.4, outside γ ≤ 0.1
    const SurfaceSample s = sample_surface(fig3_grid(61));
    EXPECT_THROW(degeneracy_lines(s, LevelKind::l_line), EmptyLevelSet);
}

TEST(LevelSets, ExceptionalPlaneLines)
{
    // real parts coincide on the whole wedge |g| <= gamma/2, the signed
    // difference touches zero there without changing sign
    const SurfaceSample s = sample_surface(fig1_grid(101));
    const LevelSet d = degeneracy_lines(s, LevelKind::d_line);
    EXPECT_GT(d.vertex_count(), 0u);
    for (const auto& line : d.segments)
        for (const auto& v : line) EXPECT_LT(std::abs(eigenvalue_gap(s.grid.slice.at(v[0], v[1])).imag()), 1e-6);
    EXPECT_THROW(degeneracy_lines(s, LevelKind::l_line), EmptyLevelSet);
}

TEST(LevelSets, HermitianSliceHasNoImaginaryCrossing)
{
    const GridSpec g{ParameterSlice{ParameterPoint{}, Param::g, Param::delta, std::nullopt}, 0.05, 0.5, -0.2, 0.2, 41, 41};
    EXPECT_THROW(degeneracy_lines(sample_surface(g), LevelKind::d_line), EmptyLevelSet);
}

TEST(MinGap, ExceptionalPointAtOrigin)
{
    const MinGap m = locate_min_gap(sample_surface(fig1_grid(101)));
    EXPECT_TRUE(m.is_ep);
    EXPECT_EQ(m.x, 0.0);
    EXPECT_EQ(m.y, 0.0);
}

TEST(MinGap, ModulatedPlaneHasNoEp)
{
    const MinGap m = locate_min_gap(sample_surface(fig3_grid(101)));
    EXPECT_FALSE(m.is_ep);
    EXPECT_GT(m.gap, 1e-3);
}

TEST(MinGap, RefinementFindsOffGridEp)
{
    // constant dissipation plane: EPs at g = ±(γ−κ)/4 = ±0.05, δ = 0, off the nodes
    ParameterPoint base;
    base.gamma = 0.1;
    base.kappa = -0.1;
    const GridSpec g{ParameterSlice{base, Param::g, Param::delta, std::nullopt}, -0.1, 0.5, -0.3, 0.3, 81, 81};
    const MinGap m = locate_min_gap(sample_surface(g));
    EXPECT_NEAR(std::abs(m.x), 0.05, 1e-9);
    EXPECT_NEAR(m.y, 0.0, 1e-9);
    EXPECT_LT(m.gap, 1e-4);
    EXPECT_DOUBLE_EQ(std::abs(eigenvalue_gap(g.slice.at(0.0, 0.0))), 0.1);
}

TEST(ProjectLoop, MatchesPlaneAndContinuesLabels)
{
    const Loop l = make_symmetric_loop(0.01, 0.2, 0.2, -1.0, pi);
    const auto pts = project_loop(fig1_grid(), l, 200);
    ASSERT_EQ(pts.size(), 201u);
    EXPECT_DOUBLE_EQ(pts.front().x, 0.21);
    EXPECT_EQ(pts.front().y, 0.0);
    EXPECT_NEAR(pts[100].y, 0.2, 1e-15);
}

TEST(ProjectLoop, RejectsLoopLeavingThePlane)
{
    const Loop l = make_chiral_modulated_loop(0.1, 0.04, 0.1, -1.0, pi);
    EXPECT_THROW(project_loop(fig1_grid(), l, 50), PlaneMismatch);
    EXPECT_NO_THROW(project_loop(fig3_grid(), l, 50));
}

TEST(ProjectLoop, ConstantLoopRepeatsOnePoint)
{
    ParameterPoint p;
    p.g = 0.1;
    p.gamma = 0.02;
    p.kappa = -0.02;
    const Loop l = make_custom_loop({{0.0, p}, {1.0, p}});
    const auto pts = project_loop(fig1_grid(), l, 10);
    for (const auto& q : pts) {
        EXPECT_EQ(q.x, 0.1);
        EXPECT_EQ(q.y, 0.02);
        EXPECT_EQ(q.e_plus, pts.front().e_plus);
    }
}

TEST(Cut, SingleSliceAlongDelta)
{
    ParameterPoint base;
    base.g = 0.1;
    const ParameterSlice sl{base, Param::gamma, Param::delta, -1.0};
    const auto pts = sample_cut(sl, false, 0.0005, -0.05, 0.05, 101);
    ASSERT_EQ(pts.size(), 101u);
    for (const auto& q : pts) EXPECT_GT(std::abs(q.e_plus - q.e_minus), 0.19);
}

TEST(GridSpec, Validation)
{
    GridSpec g = fig1_grid();
    g.nx = 1;
    EXPECT_THROW(g.validate(), InvalidParameters);
    g = fig1_grid();
    g.x_max = g.x_min;
    EXPECT_THROW(g.validate(), InvalidParameters);
}
