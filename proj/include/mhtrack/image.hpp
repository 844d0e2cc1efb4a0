#ifndef MHTRACK_IMAGE_HPP_
#define MHTRACK_IMAGE_HPP_

#include <filesystem>

#include "mhtrack/signal.hpp"

namespace mhtrack
{
    /// Grayscale frame, intensities nominally in [0, 1].
    using Image = Map2D<float>;

    struct Point2
    {
        double x = 0.0;
        double y = 0.0;
        bool operator==(const Point2&) const = default;
    };

    /// Axis-aligned box in 0-based pixel coordinates; covers [x, x + w) x [y, y + h).
    struct Box
    {
        double x = 0.0;
        double y = 0.0;
        double w = 0.0;
        double h = 0.0;

        Point2 center() const { return {x + 0.5 * w, y + 0.5 * h}; }
        static Box from_center(Point2 c, double w, double h) { return {c.x - 0.5 * w, c.y - 0.5 * h, w, h}; }
        bool operator==(const Box&) const = default;
    };

    /// Bilinear sample at continuous pixel coordinates (pixel k has its center at k + 0.5),
    /// replicating edge pixels outside the frame.
    double sample_bilinear(const Image& img, double x, double y);

    /// Resample the src_w x src_h region centered at `center` onto an out_w x out_h grid.
    Image extract_patch(const Image& frame, Point2 center, double src_w, double src_h, int out_w, int out_h);

    /// Load any OpenCV-readable image as grayscale in [0, 1].
    Image load_image(const std::filesystem::path& path);

    /// Write an 8-bit grayscale image (values clamped to [0, 1]).
    void save_image(const std::filesystem::path& path, const Image& img);
}

#endif
