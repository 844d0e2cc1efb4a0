#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "mhtrack/motion.hpp"
#include "mhtrack/signal.hpp"

using namespace mhtrack;

namespace
{
    KalmanState state_of(double x, double y, double dx, double dy)
    {
        KalmanState s = km_init({x, y});
        s.x_hat << x, y, dx, dy;
        return s;
    }

    void argmax(const SpatialMap& m, int& bx, int& by)
    {
        bx = by = 0;
        for (int y = 0; y < m.height(); ++y)
            for (int x = 0; x < m.width(); ++x)
                if (m(x, y) > m(bx, by))
                {
                    bx = x;
                    by = y;
                }
    }
}

TEST(Kalman, TransitionIsConstantVelocity)
{
    const KalmanConfig c = KalmanConfig::constant_velocity();
    Mat4 f;
    f << 1, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 0, 1;
    EXPECT_EQ(c.F, f);
    EXPECT_EQ(c.Q, Mat4(1e-3 * Vec4(0.25, 0.25, 1, 1).asDiagonal()));
    EXPECT_EQ(c.R, Mat2(4.0 * Mat2::Identity()));
}

TEST(Kalman, InitHasZeroVelocity)
{
    const KalmanState s = km_init({12.0, 34.0});
    EXPECT_EQ(s.velocity(), (Point2{0.0, 0.0}));
    EXPECT_EQ(s.position(), (Point2{12.0, 34.0}));
    EXPECT_EQ(s.P, Mat4(Vec4(1, 1, 100, 100).asDiagonal()));
}

TEST(Kalman, PredictZeroVelocityKeepsPosition)
{
    const KalmanState p = km_predict(state_of(5, 7, 0, 0), KalmanConfig::constant_velocity());
    EXPECT_EQ(p.position(), (Point2{5.0, 7.0}));
}

TEST(Kalman, PredictOneStep)
{
    const KalmanState p = km_predict(state_of(0, 0, 2, -1), KalmanConfig::constant_velocity());
    EXPECT_EQ(p.position(), (Point2{2.0, -1.0}));
}

TEST(Kalman, PredictGrowsTraceOnFilterCovariances)
{
    // holds for every covariance the filter itself produces from km_init
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    const KalmanConfig c = KalmanConfig::constant_velocity(0.3, 1.0);
    KalmanState s = km_init({0.0, 0.0});
    for (int t = 0; t < 500; ++t)
    {
        const KalmanState p = km_predict(s, c);
        EXPECT_GE(p.P.trace(), s.P.trace() - 1e-12) << t;
        s = km_update(p, Vec2(u(rng), u(rng)), c);
    }
}

TEST(Kalman, PredictCanShrinkTraceForAnticorrelatedCovariance)
{
    // tr(F P F^T) - tr(P) = 2 tr(P_pv) + tr(P_vv): not sign-definite for arbitrary PSD P
    KalmanState s = state_of(0, 0, 0, 0);
    s.P.setZero();
    s.P.topLeftCorner<2, 2>() = 4.0 * Mat2::Identity();
    s.P.bottomRightCorner<2, 2>() = Mat2::Identity();
    s.P.topRightCorner<2, 2>() = -1.9 * Mat2::Identity();
    s.P.bottomLeftCorner<2, 2>() = -1.9 * Mat2::Identity();
    ASSERT_GE(Eigen::SelfAdjointEigenSolver<Mat4>(s.P).eigenvalues().minCoeff(), 0.0);
    EXPECT_LT(km_predict(s, KalmanConfig::constant_velocity()).P.trace(), s.P.trace());
}

TEST(Kalman, NonFiniteStateIsNumericError)
{
    KalmanState s = km_init({0, 0});
    s.x_hat(2) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(km_predict(s, KalmanConfig::constant_velocity()), NumericError);
}

TEST(Kalman, UpdateAtPredictionKeepsPosition)
{
    const KalmanConfig c = KalmanConfig::constant_velocity();
    const KalmanState p = km_predict(state_of(3, 4, 1, 1), c);
    Innovation inn;
    const KalmanState u = km_update(p, Vec2(4, 5), c, &inn);
    EXPECT_NEAR(u.x_hat(0), 4.0, 1e-12);
    EXPECT_NEAR(u.x_hat(1), 5.0, 1e-12);
    EXPECT_EQ(inn.residual, Vec2::Zero());
    // standard innovation covariance
    EXPECT_TRUE(inn.S.isApprox(c.H * p.P * c.H.transpose() + c.R));
}

TEST(Kalman, HugeMeasurementNoiseIgnoresMeasurement)
{
    KalmanConfig c = KalmanConfig::constant_velocity();
    c.R = 1e12 * Mat2::Identity();
    const KalmanState p = km_predict(state_of(3, 4, 1, 1), c);
    const KalmanState u = km_update(p, Vec2(50, -50), c);
    EXPECT_LT((u.x_hat - p.x_hat).norm(), 1e-6);
}

TEST(Kalman, ZeroMeasurementNoiseTakesMeasurement)
{
    KalmanConfig c = KalmanConfig::constant_velocity();
    c.R = Mat2::Zero();
    const KalmanState p = km_predict(state_of(3, 4, 1, 1), c);
    const KalmanState u = km_update(p, Vec2(10, -2), c);
    EXPECT_NEAR(u.x_hat(0), 10.0, 1e-8);
    EXPECT_NEAR(u.x_hat(1), -2.0, 1e-8);
}

TEST(Kalman, SingularInnovationIsConditioningError)
{
    KalmanConfig c = KalmanConfig::constant_velocity();
    c.R = Mat2::Zero();
    KalmanState s = state_of(0, 0, 0, 0);
    s.P = Mat4::Zero();
    EXPECT_THROW(km_update(s, Vec2(1, 1), c), ConditioningError);
}

TEST(Kalman, ConstantVelocityMonteCarlo)
{
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> noise(0.0, 2.0);
    const KalmanConfig c = KalmanConfig::constant_velocity();
    KalmanState s = km_init({0.0, 0.0});
    double est = 0.0, meas = 0.0;
    for (int t = 1; t <= 200; ++t)
    {
        const Vec2 truth(3.0 * t, 0.0);
        const Vec2 z = truth + Vec2(noise(rng), noise(rng));
        s = km_update(km_predict(s, c), z, c);
        est += (s.x_hat.head<2>() - truth).squaredNorm();
        meas += (z - truth).squaredNorm();
    }
    EXPECT_LT(est, meas);
    EXPECT_NEAR(s.x_hat(2), 3.0, 0.2);
    EXPECT_NEAR(s.x_hat(3), 0.0, 0.2);
}

TEST(Kalman, CovarianceStaysSymmetricPsd)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    const KalmanConfig c = KalmanConfig::constant_velocity();
    KalmanState s = km_init({0.0, 0.0});
    for (int i = 0; i < 10000; ++i)
    {
        s = km_update(km_predict(s, c), Vec2(u(rng), u(rng)), c);
        ASSERT_LE((s.P - s.P.transpose()).cwiseAbs().maxCoeff(), 1e-9);
        if (i % 100 == 0)
            ASSERT_GE(Eigen::SelfAdjointEigenSolver<Mat4>(s.P).eigenvalues().minCoeff(), -1e-9);
    }
}

TEST(SearchCenter, PredictsWithoutMutatingAndClamps)
{
    const KalmanConfig c = KalmanConfig::constant_velocity();
    const KalmanState s = state_of(50, 50, 0, 0);
    EXPECT_EQ(predict_search_center(s, c, {100, 100}), (Point2{50.0, 50.0}));
    EXPECT_EQ(predict_search_center(state_of(5, 5, -10, 0), c, {100, 100}).x, 0.0);
    const KalmanState m = state_of(10, 10, 4, 3);
    EXPECT_EQ(predict_search_center(m, c, {100, 100}), (Point2{14.0, 13.0}));
    EXPECT_EQ(m.position(), (Point2{10.0, 10.0}));
}

TEST(MotionMap, CenteredCosineEqualsCosineWindow)
{
    EXPECT_EQ(motion_map(9, 7, {4.0, 3.0}, MotionMapKind::cosine), cosine_window(9, 7));
    EXPECT_EQ(motion_map(8, 6, {3.5, 2.5}, MotionMapKind::cosine), cosine_window(8, 6));
}

TEST(MotionMap, WideGaussianIsFlat)
{
    const SpatialMap m = motion_map(12, 10, {5.0, 5.0}, MotionMapKind::gaussian, 1e6);
    for (double v : m.values())
        EXPECT_LT(1.0 - v, 1e-3);
}

TEST(MotionMap, ShiftMovesArgmax)
{
    for (MotionMapKind kind : {MotionMapKind::cosine, MotionMapKind::gaussian})
    {
        int x0, y0, x1, y1;
        argmax(motion_map(15, 11, {7.0, 5.0}, kind, 2.0), x0, y0);
        argmax(motion_map(15, 11, {9.0, 5.0}, kind, 2.0), x1, y1);
        EXPECT_EQ(x1 - x0, 2);
        EXPECT_EQ(y1, y0);
        const SpatialMap off = motion_map(15, 11, {9.3, 4.2}, kind, 2.0);
        for (double v : off.values())
        {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(MotionMap, NonPositiveSpreadIsParameterError)
{
    EXPECT_THROW(motion_map(8, 8, {4, 4}, MotionMapKind::gaussian, 0.0), ParameterError);
}
