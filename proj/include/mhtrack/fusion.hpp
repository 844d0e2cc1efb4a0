#ifndef MHTRACK_FUSION_HPP_
#define MHTRACK_FUSION_HPP_

#include <span>
#include <vector>

#include "mhtrack/cf_branch.hpp"
#include "mhtrack/image.hpp"

namespace mhtrack
{
    /// Per-branch weights on the probability simplex.
    struct FusionWeights
    {
        std::vector<double> m;
    };

    /// E_l = C'C - 2 C'y with C the branch response on `sample` and y its label.
    /// Equivalently ||C - y||^2 - ||y||^2.
    double branch_energy(const BranchModel& model, std::span<const SpectrumMap> sample);
    double branch_energy(const BranchModel& model, std::span<const SpatialMap> sample);

    /// argmin over the simplex of m'E + reg * m'm. The KKT conditions give
    /// m_l = max(0, (mu - E_l) / (2 reg)); mu is found by scanning the sorted
    /// energies for the breakpoint where the active set sums to one.
    FusionWeights solve_weights(std::span<const double> energies, double reg = 1.0);

    /// Resamples every map to out_w x out_h by trigonometric interpolation, then
    /// returns sum_l m_l * map_l. `offsets` (optional, one per map, in output cells)
    /// shifts each resampled map cyclically, for grids whose cell centers are not
    /// aligned.
    SpatialMap fuse_scores(std::span<const SpatialMap> maps, const FusionWeights& weights, int out_w, int out_h,
                           std::span<const Point2> offsets = {});

    struct Peak
    {
        Point2 position;  // sub-cell
        double value = 0.0;
    };

    /// Integer argmax (ties: lowest row, then lowest column), refined by a separable
    /// 3-point quadratic fit on cyclic neighbours, clamped to +-0.5 cell.
    Peak localize(const SpatialMap& score);

    /// localize(), with the value replaced by the trigonometric interpolant of the
    /// map evaluated at the refined sub-cell peak.
    Peak localize_interpolated(const SpatialMap& score);
}

#endif
