#ifndef MHTRACK_SCALE_HPP_
#define MHTRACK_SCALE_HPP_

#include <functional>
#include <vector>

#include "mhtrack/cf_branch.hpp"

namespace mhtrack
{
    struct Size2
    {
        double w = 0.0;
        double h = 0.0;
        bool operator==(const Size2&) const = default;
    };

    struct ScaleConfig
    {
        double alpha = 1.03;
        int n_max = 5;        // candidates n in [-n_max, n_max]
        int layer = 1;        // index of the branch used for scale (the medium layer)
        double damping = 1.0; // applied size ratio is alpha^(damping * best_n)
    };

    void validate(const ScaleConfig& config);

    /// alpha^n * (w, h) for n = -n_max .. n_max, ascending n.
    std::vector<Size2> scale_candidates(Size2 target, const ScaleConfig& config);

    /// Scale-branch spectra of the region around the current center for a candidate target size.
    using ScaleFeatureFn = std::function<LayerSpectra(Size2 candidate)>;

    struct ScaleResult
    {
        int best_n = 0;
        double best_score = 0.0;
        std::vector<double> scores;  // label agreement per candidate, ascending n
        Size2 new_size;
    };

    /// Normalized agreement between a response and the training label, maximized over
    /// cyclic alignments: max_s <y, r shifted by s> / (|r| |y|), in [-1, 1].
    /// The raw response peak of a linear filter changes to first order under a small
    /// rescaling, so its maximum drifts off the true scale; the label fit does not.
    double label_agreement(const SpatialMap& response, const SpatialMap& label);

    /// Label agreement of the scale branch's response for every candidate; the best n
    /// wins (ties: smaller |n|, then negative n). Candidates run on `workers` threads.
    ScaleResult scale_search(const ScaleFeatureFn& features, Size2 target, const BranchModel& branch,
                             const ScaleConfig& config, int workers = 1);
}

#endif
