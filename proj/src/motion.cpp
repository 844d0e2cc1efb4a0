#include "mhtrack/motion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace mhtrack
{
    namespace
    {
        void require_finite(const KalmanState& s, const char* where)
        {
            if (!s.x_hat.allFinite() || !s.P.allFinite())
                throw NumericError(std::string(where) + ": non-finite Kalman state");
        }

        Mat4 symmetrized(const Mat4& p) { return 0.5 * (p + p.transpose()); }
    }

    KalmanConfig KalmanConfig::constant_velocity(double q, double r)
    {
        if (q < 0.0 || r < 0.0)
            throw ParameterError("Kalman noise levels must be nonnegative");
        KalmanConfig c;
        c.F << 1, 0, 1, 0,
               0, 1, 0, 1,
               0, 0, 1, 0,
               0, 0, 0, 1;
        c.H << 1, 0, 0, 0,
               0, 1, 0, 0;
        c.Q = q * Vec4(0.25, 0.25, 1.0, 1.0).asDiagonal();
        c.R = r * Mat2::Identity();
        return c;
    }

    KalmanState km_init(Point2 center, double p_pos, double p_vel)
    {
        KalmanState s;
        s.x_hat << center.x, center.y, 0.0, 0.0;
        s.P = Vec4(p_pos, p_pos, p_vel, p_vel).asDiagonal();
        return s;
    }

    KalmanState km_predict(const KalmanState& state, const KalmanConfig& config)
    {
        require_finite(state, "km_predict");
        KalmanState out;
        out.x_hat = config.F * state.x_hat;  // control term B u is zero
        out.P = symmetrized(config.F * state.P * config.F.transpose() + config.Q);
        return out;
    }

    KalmanState km_update(const KalmanState& state, const Vec2& z, const KalmanConfig& config, Innovation* innovation)
    {
        require_finite(state, "km_update");
        if (!z.allFinite())
            throw NumericError("km_update: non-finite measurement");
        const Vec2 residual = z - config.H * state.x_hat;
        const Mat2 S = config.H * state.P * config.H.transpose() + config.R;
        const Eigen::FullPivLU<Mat2> lu(S);
        if (!lu.isInvertible() || std::abs(S.determinant()) < 1e-300)
            throw ConditioningError("km_update: singular innovation covariance");
        const Eigen::Matrix<double, 4, 2> K = state.P * config.H.transpose() * lu.inverse();

        KalmanState out;
        out.x_hat = state.x_hat + K * residual;
        out.P = symmetrized((Mat4::Identity() - K * config.H) * state.P);
        if (innovation)
            *innovation = {residual, S};
        require_finite(out, "km_update");
        return out;
    }

    Point2 predict_search_center(const KalmanState& state, const KalmanConfig& config, FrameBounds bounds)
    {
        const KalmanState p = km_predict(state, config);
        return {std::clamp(p.x_hat(0), 0.0, bounds.width), std::clamp(p.x_hat(1), 0.0, bounds.height)};
    }

    SpatialMap motion_map(int width, int height, Point2 center, MotionMapKind kind, double spread)
    {
        if (kind == MotionMapKind::gaussian)
        {
            if (!(spread > 0.0))
                throw ParameterError("motion_map: gaussian spread must be positive");
            SpatialMap out(width, height);
            const double inv = 1.0 / (2.0 * spread * spread);
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x)
                {
                    const double dx = x - center.x, dy = y - center.y;
                    out(x, y) = std::exp(-(dx * dx + dy * dy) * inv);
                }
            return out;
        }

        // Translated Hann profile per axis; equals cosine_window when centered.
        auto profile = [](int n, double c) {
            std::vector<double> p(static_cast<std::size_t>(n), 1.0);
            if (n < 2)
                return p;
            const double half = 0.5 * (n - 1);
            for (int i = 0; i < n; ++i)
            {
                const double d = i - c;
                p[i] = std::abs(d) >= half ? 0.0 : 0.5 * (1.0 + std::cos(std::numbers::pi * d / half));
            }
            return p;
        };
        const double cx0 = 0.5 * (width - 1), cy0 = 0.5 * (height - 1);
        if (center.x == cx0 && center.y == cy0)
            return cosine_window(width, height);
        const std::vector<double> px = profile(width, center.x);
        const std::vector<double> py = profile(height, center.y);
        SpatialMap out(width, height);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                out(x, y) = px[x] * py[y];
        return out;
    }
}
