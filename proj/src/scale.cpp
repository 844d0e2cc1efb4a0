#include "mhtrack/scale.hpp"

#include <algorithm>
#include <cmath>

#include "mhtrack/fusion.hpp"
#include "mhtrack/parallel.hpp"

namespace mhtrack
{
    double label_agreement(const SpatialMap& response, const SpatialMap& label)
    {
        require_same_shape(response, label, "label_agreement");
        const double norms = std::sqrt(squared_norm(response) * squared_norm(label));
        if (!(norms > 0.0))
            return 0.0;
        return localize_interpolated(cyclic_correlate(label, response)).value / norms;
    }

    void validate(const ScaleConfig& config)
    {
        if (!(config.alpha > 1.0))
            throw ParameterError("scale step alpha must exceed 1");
        if (config.n_max < 0)
            throw ParameterError("scale range must be nonnegative");
        if (!(config.damping > 0.0 && config.damping <= 1.0))
            throw ParameterError("scale damping must lie in (0, 1]");
    }

    std::vector<Size2> scale_candidates(Size2 target, const ScaleConfig& config)
    {
        validate(config);
        if (!(target.w > 0.0) || !(target.h > 0.0))
            throw ParameterError("scale_candidates: target size must be positive");
        std::vector<Size2> out;
        for (int n = -config.n_max; n <= config.n_max; ++n)
        {
            const double f = std::pow(config.alpha, n);
            out.push_back({target.w * f, target.h * f});
        }
        return out;
    }

    ScaleResult scale_search(const ScaleFeatureFn& features, Size2 target, const BranchModel& branch,
                             const ScaleConfig& config, int workers)
    {
        const std::vector<Size2> candidates = scale_candidates(target, config);
        ScaleResult result;
        result.scores.assign(candidates.size(), 0.0);
        parallel_for(static_cast<int>(candidates.size()), workers, [&](int i) {
            const LayerSpectra x = features(candidates[i]);
            result.scores[i] = label_agreement(detect_spectra(x, branch), branch.label);
        });

        // Preference order 0, -1, 1, -2, 2, ... so that ties keep the earlier candidate.
        const int mid = config.n_max;
        int best = 0;
        double best_score = result.scores[mid];
        for (int k = 1; k <= config.n_max; ++k)
            for (int n : {-k, k})
                if (result.scores[mid + n] > best_score)
                {
                    best_score = result.scores[mid + n];
                    best = n;
                }
        result.best_n = best;
        result.best_score = best_score;
        const double ratio = std::pow(config.alpha, config.damping * best);
        result.new_size = {target.w * ratio, target.h * ratio};
        return result;
    }
}
