#include <gtest/gtest.h>

#include <numeric>

#include "mhtrack/fusion.hpp"
#include "support.hpp"

using namespace mhtrack;
using namespace mhtrack::testing;

namespace
{
    const LayerSpec test_layer{"t", 1, 1, 0.1};

    void expect_simplex(const FusionWeights& w)
    {
        EXPECT_NEAR(std::accumulate(w.m.begin(), w.m.end(), 0.0), 1.0, 1e-12);
        for (double v : w.m)
            EXPECT_GE(v, 0.0);
    }
}

TEST(Energy, ZeroFiltersGiveZero)
{
    std::mt19937_64 rng(1);
    const BranchModel m = make_branch(test_layer, 1, gaussian_label(6, 6, 0, 0, 1.0), SpatialMap(6, 6, 1.0), 0.1);
    const std::vector<SpatialMap> z{random_map(rng, 6, 6)};
    EXPECT_EQ(branch_energy(m, z), 0.0);
}

TEST(Energy, ResponseEqualToLabelGivesMinusLabelEnergy)
{
    // impulse filter: the response is the sample itself
    const SpatialMap y = gaussian_label(6, 6, 2, 3, 1.0);
    BranchModel m = make_branch(test_layer, 1, y, SpatialMap(6, 6, 1.0), 0.1);
    SpatialMap delta(6, 6);
    delta(0, 0) = 1.0;
    m.filters[0] = dft2(delta);
    const std::vector<SpatialMap> z{y};
    EXPECT_NEAR(branch_energy(m, z), -squared_norm(y), 1e-12);
}

TEST(Energy, CompletesTheSquare)
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial)
    {
        const SpatialMap y = gaussian_label(7, 5, 1, 1, 1.5);
        BranchModel m = make_branch(test_layer, 2, y, SpatialMap(7, 5, 1.0), 0.1);
        m.filters = {dft2(random_map(rng, 7, 5)), dft2(random_map(rng, 7, 5))};
        const std::vector<SpatialMap> z{random_map(rng, 7, 5), random_map(rng, 7, 5)};
        const SpatialMap c = brute_correlate(idft2(m.filters[0]), z[0]);
        const SpatialMap c2 = brute_correlate(idft2(m.filters[1]), z[1]);
        double resid = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i)
            resid += (c[i] + c2[i] - y[i]) * (c[i] + c2[i] - y[i]);
        EXPECT_NEAR(branch_energy(m, z) + squared_norm(y), resid, 1e-9);
        const LayerSpectra zs = to_spectra(z);
        EXPECT_NEAR(branch_energy(m, zs), branch_energy(m, z), 1e-9);
    }
}

TEST(Weights, EqualEnergiesAreUniform)
{
    for (int l = 1; l <= 5; ++l)
    {
        const std::vector<double> e(l, 3.7);
        const FusionWeights w = solve_weights(e);
        for (double v : w.m)
            EXPECT_NEAR(v, 1.0 / l, 1e-12);
    }
}

TEST(Weights, TwoBranchClosedForm)
{
    const std::vector<double> e{0.0, 1.0};
    const FusionWeights w = solve_weights(e, 1.0);
    EXPECT_NEAR(w.m[0], 0.75, 1e-9);
    EXPECT_NEAR(w.m[1], 0.25, 1e-9);
    const std::vector<double> far{0.0, 100.0};
    const FusionWeights c = solve_weights(far, 1.0);
    EXPECT_EQ(c.m[0], 1.0);
    EXPECT_EQ(c.m[1], 0.0);
}

TEST(Weights, MatchesGridSearch)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 30; ++trial)
    {
        const int l = 2 + trial % 2;
        std::vector<double> e(l);
        for (double& v : e)
            v = u(rng);
        const double reg = 0.5 + 0.1 * (trial % 5);
        const FusionWeights w = solve_weights(e, reg);
        const std::vector<double> g = grid_search_weights(e, reg, 1e-3);
        for (int i = 0; i < l; ++i)
            EXPECT_NEAR(w.m[i], g[i], 2e-3);
        expect_simplex(w);
    }
}

TEST(Weights, MonotoneAndTranslationInvariant)
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 100; ++trial)
    {
        std::vector<double> e(1 + trial % 6);
        for (double& v : e)
            v = u(rng);
        const FusionWeights w = solve_weights(e);
        expect_simplex(w);
        for (std::size_t i = 0; i < e.size(); ++i)
            for (std::size_t j = 0; j < e.size(); ++j)
                if (e[i] <= e[j])
                    EXPECT_GE(w.m[i], w.m[j]);
        std::vector<double> shifted = e;
        for (double& v : shifted)
            v += 17.25;
        const FusionWeights ws = solve_weights(shifted);
        for (std::size_t i = 0; i < e.size(); ++i)
            EXPECT_NEAR(ws.m[i], w.m[i], 1e-9);
    }
}

TEST(Weights, Errors)
{
    EXPECT_THROW(solve_weights(std::vector<double>{}), ParameterError);
    EXPECT_THROW(solve_weights(std::vector<double>{1.0}, 0.0), ParameterError);
    EXPECT_THROW(solve_weights(std::vector<double>{std::nan("")}), NumericError);
}

TEST(Fuse, SingleMapIdentity)
{
    std::mt19937_64 rng(5);
    const std::vector<SpatialMap> maps{random_map(rng, 7, 6)};
    EXPECT_EQ(fuse_scores(maps, {{1.0}}, 7, 6), maps[0]);
}

TEST(Fuse, ConvexCombinationOfIdenticalMaps)
{
    std::mt19937_64 rng(6);
    const SpatialMap a = random_map(rng, 8, 8);
    const std::vector<SpatialMap> maps{a, a};
    EXPECT_LE(max_abs_diff(fuse_scores(maps, {{0.5, 0.5}}, 8, 8), a), 1e-15);
}

TEST(Fuse, UpsamplesSinusoidExactly)
{
    const int w = 8, h = 8, ow = 32, oh = 24;
    SpatialMap m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m(x, y) = std::sin(2.0 * std::numbers::pi * (1.0 * x / w + 3.0 * y / h));
    const std::vector<SpatialMap> maps{m};
    const SpatialMap up = fuse_scores(maps, {{1.0}}, ow, oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            EXPECT_NEAR(up(x, y), std::sin(2.0 * std::numbers::pi * (1.0 * x / ow + 3.0 * y / oh)), 1e-8);
}

TEST(Fuse, LinearInWeightsAndPermutationEquivariant)
{
    std::mt19937_64 rng(7);
    const std::vector<SpatialMap> maps{random_map(rng, 4, 4), random_map(rng, 8, 8)};
    const SpatialMap a = fuse_scores(maps, {{1.0, 0.0}}, 8, 8);
    const SpatialMap b = fuse_scores(maps, {{0.0, 1.0}}, 8, 8);
    const SpatialMap mix = fuse_scores(maps, {{0.3, 0.7}}, 8, 8);
    for (std::size_t i = 0; i < mix.size(); ++i)
        EXPECT_NEAR(mix[i], 0.3 * a[i] + 0.7 * b[i], 1e-12);
    const std::vector<SpatialMap> swapped{maps[1], maps[0]};
    EXPECT_LE(max_abs_diff(fuse_scores(swapped, {{0.7, 0.3}}, 8, 8), mix), 1e-12);
}

TEST(Fuse, SmallerOutputIsParameterError)
{
    const std::vector<SpatialMap> maps{SpatialMap(8, 8)};
    EXPECT_THROW(fuse_scores(maps, {{1.0}}, 4, 8), ParameterError);
}

TEST(Localize, ImpulseIsExact)
{
    SpatialMap m(9, 9);
    m(3, 5) = 1.0;
    const Peak p = localize(m);
    EXPECT_EQ(p.position, (Point2{3.0, 5.0}));
    EXPECT_EQ(p.value, 1.0);
}

TEST(Localize, SubcellGaussian)
{
    const SpatialMap m = gaussian_label(16, 16, 3.3, 4.0, 1.5);
    const Peak p = localize(m);
    EXPECT_NEAR(p.position.x, 3.3, 0.1);
    EXPECT_NEAR(p.position.y, 4.0, 1e-12);
}

TEST(Localize, CyclicShiftEquivariance)
{
    std::mt19937_64 rng(8);
    const SpatialMap m = random_map(rng, 10, 9);
    const Peak a = localize(m), b = localize(circshift(m, 1, 2));
    // displacement modulo the map size
    EXPECT_NEAR(std::fmod(b.position.x - a.position.x + 10.0, 10.0), 1.0, 1e-12);
    EXPECT_NEAR(std::fmod(b.position.y - a.position.y + 9.0, 9.0), 2.0, 1e-12);
}

TEST(Localize, TiesPreferLowestRowThenColumn)
{
    SpatialMap m(6, 6);
    m(4, 1) = 1.0;
    m(2, 3) = 1.0;
    m(1, 1) = 1.0;
    EXPECT_EQ(localize(m).position, (Point2{1.0, 1.0}));
}

TEST(Localize, AllNanIsNumericError)
{
    EXPECT_THROW(localize(SpatialMap(3, 3, std::nan(""))), NumericError);
}

TEST(Localize, InterpolatedValueIsPeakHeight)
{
    // a band-limited bump: the interpolated maximum exceeds every sample
    SpatialMap m(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            m(x, y) = std::cos(2.0 * std::numbers::pi * (x - 5.5) / 16.0) + std::cos(2.0 * std::numbers::pi * (y - 7.0) / 16.0);
    const Peak p = localize_interpolated(m);
    EXPECT_NEAR(p.value, 2.0, 1e-3);
    EXPECT_GT(p.value, localize(m).value);
}
