#ifndef MHTRACK_MOTION_HPP_
#define MHTRACK_MOTION_HPP_

// Constant-velocity Kalman filter over the target center, state [x y dx dy].

#include <Eigen/Core>

#include "mhtrack/image.hpp"

namespace mhtrack
{
    using Vec2 = Eigen::Vector2d;
    using Vec4 = Eigen::Vector4d;
    using Mat2 = Eigen::Matrix2d;
    using Mat4 = Eigen::Matrix4d;
    using Mat24 = Eigen::Matrix<double, 2, 4>;

    struct KalmanState
    {
        Vec4 x_hat = Vec4::Zero();
        Mat4 P = Mat4::Identity();

        Point2 position() const { return {x_hat(0), x_hat(1)}; }
        Point2 velocity() const { return {x_hat(2), x_hat(3)}; }
    };

    struct KalmanConfig
    {
        Mat4 F;
        Mat24 H;
        Mat4 Q;
        Mat2 R;

        /// Q = q * diag(0.25, 0.25, 1, 1), R = r * I.
        static KalmanConfig constant_velocity(double q = 1e-3, double r = 4.0);
    };

    /// x_hat = [center, 0, 0], P = diag(p_pos, p_pos, p_vel, p_vel).
    KalmanState km_init(Point2 center, double p_pos = 1.0, double p_vel = 100.0);

    KalmanState km_predict(const KalmanState& state, const KalmanConfig& config);

    /// Innovation z - H x_hat of the last update, with its covariance S.
    struct Innovation
    {
        Vec2 residual = Vec2::Zero();
        Mat2 S = Mat2::Identity();
    };

    KalmanState km_update(const KalmanState& state, const Vec2& z, const KalmanConfig& config,
                          Innovation* innovation = nullptr);

    struct FrameBounds
    {
        double width = 0.0;
        double height = 0.0;
    };

    /// Predicted position clamped to [0, width] x [0, height]; the state is not modified.
    Point2 predict_search_center(const KalmanState& state, const KalmanConfig& config, FrameBounds bounds);

    enum class MotionMapKind { cosine, gaussian };

    /// Window peaking at `center` (layer-cell coordinates), values in [0, 1].
    /// The cosine kind is the separable Hann window translated so that its peak sits
    /// at `center` (zero outside its support); the gaussian kind is a Gaussian of
    /// standard deviation `spread` cells.
    SpatialMap motion_map(int width, int height, Point2 center, MotionMapKind kind, double spread = 0.0);
}

#endif
