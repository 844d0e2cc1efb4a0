#include "mhtrack/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mhtrack
{
    double branch_energy(const BranchModel& model, std::span<const SpectrumMap> sample)
    {
        const SpatialMap c = detect_spectra(sample, model);
        return squared_norm(c) - 2.0 * dot(c, model.label);
    }

    double branch_energy(const BranchModel& model, std::span<const SpatialMap> sample)
    {
        const SpatialMap c = detect(sample, model);
        return squared_norm(c) - 2.0 * dot(c, model.label);
    }

    FusionWeights solve_weights(std::span<const double> energies, double reg)
    {
        if (energies.empty())
            throw ParameterError("solve_weights: no branches");
        if (!(reg > 0.0))
            throw ParameterError("solve_weights: reg must be positive");
        for (double e : energies)
            if (!std::isfinite(e))
                throw NumericError("solve_weights: non-finite branch energy");

        const std::size_t n = energies.size();
        std::vector<double> sorted(energies.begin(), energies.end());
        std::sort(sorted.begin(), sorted.end());

        // With the k lowest energies active: sum_l (mu - E_l) = 2 reg  =>  mu = (2 reg + sum E) / k.
        double mu = 0.0, prefix = 0.0;
        for (std::size_t k = 1; k <= n; ++k)
        {
            prefix += sorted[k - 1];
            const double candidate = (2.0 * reg + prefix) / static_cast<double>(k);
            if (k == n || candidate <= sorted[k])
            {
                mu = candidate;
                break;
            }
        }

        FusionWeights w;
        w.m.resize(n);
        for (std::size_t l = 0; l < n; ++l)
            w.m[l] = std::max(0.0, (mu - energies[l]) / (2.0 * reg));
        const double total = std::accumulate(w.m.begin(), w.m.end(), 0.0);
        for (double& v : w.m)
            v /= total;
        return w;
    }

    SpatialMap fuse_scores(std::span<const SpatialMap> maps, const FusionWeights& weights, int out_w, int out_h,
                           std::span<const Point2> offsets)
    {
        if (maps.empty())
            throw ParameterError("fuse_scores: no score maps");
        if (weights.m.size() != maps.size())
            throw DimensionError("fuse_scores: weight count does not match map count");
        if (!offsets.empty() && offsets.size() != maps.size())
            throw DimensionError("fuse_scores: offset count does not match map count");
        double total = 0.0;
        for (double m : weights.m)
        {
            if (!(m >= 0.0))
                throw ParameterError("fuse_scores: negative weight");
            total += m;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw ParameterError("fuse_scores: weights do not sum to one");

        SpatialMap out(out_w, out_h, 0.0);
        for (std::size_t l = 0; l < maps.size(); ++l)
        {
            if (maps[l].width() > out_w || maps[l].height() > out_h)
                throw ParameterError("fuse_scores: output grid smaller than an input map");
            if (weights.m[l] == 0.0)
                continue;
            SpatialMap up = resample_fourier(maps[l], out_w, out_h);
            if (!offsets.empty() && (offsets[l].x != 0.0 || offsets[l].y != 0.0))
                up = shift_fourier(up, offsets[l].x, offsets[l].y);
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] += weights.m[l] * up[i];
        }
        return out;
    }

    Peak localize(const SpatialMap& score)
    {
        if (score.empty())
            throw DimensionError("localize: empty score map");
        int bx = -1, by = -1;
        double best = 0.0;
        for (int y = 0; y < score.height(); ++y)
            for (int x = 0; x < score.width(); ++x)
            {
                const double v = score(x, y);
                if (std::isnan(v))
                    continue;
                if (bx < 0 || v > best)
                {
                    best = v;
                    bx = x;
                    by = y;
                }
            }
        if (bx < 0)
            throw NumericError("localize: score map is entirely NaN");

        auto refine = [](double left, double mid, double right) {
            const double den = left - 2.0 * mid + right;
            if (!(den < 0.0) || !std::isfinite(left) || !std::isfinite(right))
                return 0.0;
            return std::clamp(0.5 * (left - right) / den, -0.5, 0.5);
        };
        const double dx = score.width() >= 3
            ? refine(score.wrapped(bx - 1, by), best, score.wrapped(bx + 1, by)) : 0.0;
        const double dy = score.height() >= 3
            ? refine(score.wrapped(bx, by - 1), best, score.wrapped(bx, by + 1)) : 0.0;
        return {{bx + dx, by + dy}, best};
    }

    Peak localize_interpolated(const SpatialMap& score)
    {
        Peak p = localize(score);
        const int kx = static_cast<int>(std::floor(p.position.x + 0.5));
        const int ky = static_cast<int>(std::floor(p.position.y + 0.5));
        const SpatialMap moved = shift_fourier(score, kx - p.position.x, ky - p.position.y);
        p.value = moved.wrapped(kx, ky);
        return p;
    }
}
