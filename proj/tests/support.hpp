#ifndef MHTRACK_TESTS_SUPPORT_HPP_
#define MHTRACK_TESTS_SUPPORT_HPP_

// Independent oracles shared by the unit tests and the acceptance binary.
// Nothing here goes through the library's transforms.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mhtrack/bench.hpp"
#include "mhtrack/cf_branch.hpp"
#include "mhtrack/fusion.hpp"
#include "mhtrack/signal.hpp"

namespace mhtrack::testing
{
    inline SpatialMap random_map(std::mt19937_64& rng, int w, int h, double lo = -1.0, double hi = 1.0)
    {
        std::uniform_real_distribution<double> u(lo, hi);
        SpatialMap m(w, h);
        for (double& v : m.values())
            v = u(rng);
        return m;
    }

    inline SpectrumMap naive_dft(const SpatialMap& m)
    {
        const int w = m.width(), h = m.height();
        SpectrumMap out(w, h);
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u)
            {
                Complex acc{};
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                    {
                        const double ph = -2.0 * std::numbers::pi * (static_cast<double>(u) * x / w + static_cast<double>(v) * y / h);
                        acc += m(x, y) * Complex(std::cos(ph), std::sin(ph));
                    }
                out(u, v) = acc;
            }
        return out;
    }

    /// out[s] = sum_t a[t] b[(t + s) mod N], by double loop.
    inline SpatialMap brute_correlate(const SpatialMap& a, const SpatialMap& b)
    {
        const int w = a.width(), h = a.height();
        SpatialMap out(w, h);
        for (int sy = 0; sy < h; ++sy)
            for (int sx = 0; sx < w; ++sx)
            {
                double acc = 0.0;
                for (int ty = 0; ty < h; ++ty)
                    for (int tx = 0; tx < w; ++tx)
                        acc += a(tx, ty) * b.wrapped(tx + sx, ty + sy);
                out(sx, sy) = acc;
            }
        return out;
    }

    /// Dense matrix A with (A f)[s] = sum_t f[t] x[(t + s) mod N]: the response of filter f on x.
    inline Eigen::MatrixXd correlation_matrix(const SpatialMap& x)
    {
        const int w = x.width(), h = x.height(), n = w * h;
        Eigen::MatrixXd a(n, n);
        for (int sy = 0; sy < h; ++sy)
            for (int sx = 0; sx < w; ++sx)
                for (int ty = 0; ty < h; ++ty)
                    for (int tx = 0; tx < w; ++tx)
                        a(sy * w + sx, ty * w + tx) = x.wrapped(tx + sx, ty + sy);
        return a;
    }

    inline Eigen::VectorXd to_vector(const SpatialMap& m)
    {
        Eigen::VectorXd v(static_cast<Eigen::Index>(m.size()));
        for (std::size_t i = 0; i < m.size(); ++i)
            v(static_cast<Eigen::Index>(i)) = m[i];
        return v;
    }

    struct DenseInstance
    {
        int w = 0, h = 0, depth = 0;
        std::vector<std::vector<SpatialMap>> samples;  // [k][d]
        std::vector<double> weights;
        SpatialMap label, reg;
        double lambda = 0.0;
    };

    /// Minimizer of sum_k w_k ||sum_d A_kd f_d - y||^2 + lambda sum_d ||r . f_d||^2,
    /// assembled densely and solved by LDLT. Returns the spatial filters.
    inline std::vector<SpatialMap> dense_solve(const DenseInstance& in)
    {
        const int n = in.w * in.h, dim = n * in.depth;
        Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
        const Eigen::VectorXd y = to_vector(in.label);
        for (std::size_t k = 0; k < in.samples.size(); ++k)
        {
            Eigen::MatrixXd a(n, dim);
            for (int d = 0; d < in.depth; ++d)
                a.block(0, d * n, n, n) = correlation_matrix(in.samples[k][d]);
            lhs += in.weights[k] * a.transpose() * a;
            rhs += in.weights[k] * a.transpose() * y;
        }
        for (int d = 0; d < in.depth; ++d)
            for (int i = 0; i < n; ++i)
                lhs(d * n + i, d * n + i) += in.lambda * in.reg[i] * in.reg[i];
        const Eigen::VectorXd f = lhs.ldlt().solve(rhs);
        std::vector<SpatialMap> out;
        for (int d = 0; d < in.depth; ++d)
        {
            SpatialMap m(in.w, in.h);
            for (int i = 0; i < n; ++i)
                m[i] = f(d * n + i);
            out.push_back(m);
        }
        return out;
    }

    /// Exhaustive search over the simplex on a grid of the given step (L <= 4).
    inline std::vector<double> grid_search_weights(const std::vector<double>& e, double reg, double step)
    {
        const int steps = static_cast<int>(std::lround(1.0 / step));
        const int l = static_cast<int>(e.size());
        std::vector<double> best(l, 0.0), m(l, 0.0);
        double best_val = 1e300;
        auto term = [&](int i, double v) { return v * e[i] + reg * v * v; };
        // recursive enumeration of compositions of `steps`, carrying the partial objective
        auto rec = [&](auto&& self, int i, int left, double partial) -> void {
            if (i == l - 1)
            {
                m[i] = left * step;
                const double v = partial + term(i, m[i]);
                if (v < best_val)
                {
                    best_val = v;
                    best = m;
                }
                return;
            }
            for (int k = 0; k <= left; ++k)
            {
                m[i] = k * step;
                self(self, i + 1, left - k, partial + term(i, m[i]));
            }
        };
        rec(rec, 0, steps, 0.0);
        return best;
    }

    inline double max_abs_diff(const SpatialMap& a, const SpatialMap& b)
    {
        double d = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            d = std::max(d, std::abs(a[i] - b[i]));
        return d;
    }

    inline double max_abs(const SpatialMap& a)
    {
        double d = 0.0;
        for (double v : a.values())
            d = std::max(d, std::abs(v));
        return d;
    }

    /// Scripted tracker for protocol tests: follows the ground truth except on the
    /// listed frames, where it reports a far-away box.
    class ScriptedTracker : public VotTracker
    {
    public:
        ScriptedTracker(const std::vector<Box>* truth, std::vector<int> fail_frames, std::vector<int>* init_log)
            : truth_(truth), fail_(std::move(fail_frames)), log_(init_log) {}

        // truth boxes are distinct, so the restart frame is recovered from the box
        void initialize(const Image&, const Box& box) override
        {
            frame_ = static_cast<int>(std::find(truth_->begin(), truth_->end(), box) - truth_->begin());
            if (log_)
                log_->push_back(frame_);
        }

        Box update(const Image&) override
        {
            ++frame_;
            const Box t = (*truth_)[frame_];
            for (int f : fail_)
                if (f == frame_)
                    return {t.x + 1000.0, t.y + 1000.0, t.w, t.h};
            return t;
        }

    private:
        const std::vector<Box>* truth_;
        std::vector<int> fail_;
        std::vector<int>* log_;
        int frame_ = 0;
    };

    /// In-memory sequence of blank frames with the given truth.
    inline Sequence blank_sequence(const std::vector<Box>& truth, int w = 64, int h = 64)
    {
        Sequence s;
        s.name = "blank";
        s.truth = truth;
        s.frames.assign(truth.size(), Image(w, h, 0.5f));
        return s;
    }
}

#endif
