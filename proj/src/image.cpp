#include "mhtrack/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace mhtrack
{
    double sample_bilinear(const Image& img, double x, double y)
    {
        const double fx = std::clamp(x - 0.5, 0.0, static_cast<double>(img.width() - 1));
        const double fy = std::clamp(y - 0.5, 0.0, static_cast<double>(img.height() - 1));
        const int x0 = static_cast<int>(fx);
        const int y0 = static_cast<int>(fy);
        const int x1 = std::min(x0 + 1, img.width() - 1);
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double ax = fx - x0;
        const double ay = fy - y0;
        const double top = (1.0 - ax) * img(x0, y0) + ax * img(x1, y0);
        const double bottom = (1.0 - ax) * img(x0, y1) + ax * img(x1, y1);
        return (1.0 - ay) * top + ay * bottom;
    }

    Image extract_patch(const Image& frame, Point2 center, double src_w, double src_h, int out_w, int out_h)
    {
        if (!(src_w > 0.0) || !(src_h > 0.0))
            throw ParameterError("extract_patch: source region must have positive size");
        if (center.x + 0.5 * src_w <= 0.0 || center.x - 0.5 * src_w >= frame.width()
            || center.y + 0.5 * src_h <= 0.0 || center.y - 0.5 * src_h >= frame.height())
            throw BoundaryError("extract_patch: region lies fully outside the frame");

        Image out(out_w, out_h);
        const double sx = src_w / out_w;
        const double sy = src_h / out_h;
        const double x0 = center.x - 0.5 * src_w;
        const double y0 = center.y - 0.5 * src_h;
        for (int j = 0; j < out_h; ++j)
        {
            const double y = y0 + (j + 0.5) * sy;
            for (int i = 0; i < out_w; ++i)
                out(i, j) = static_cast<float>(sample_bilinear(frame, x0 + (i + 0.5) * sx, y));
        }
        return out;
    }

    Image load_image(const std::filesystem::path& path)
    {
        const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
        if (raw.empty())
            throw InputError("cannot read image " + path.string());
        cv::Mat gray;
        if (raw.channels() == 3)
            cv::cvtColor(raw, gray, cv::COLOR_BGR2GRAY);
        else if (raw.channels() == 4)
            cv::cvtColor(raw, gray, cv::COLOR_BGRA2GRAY);
        else
            gray = raw;
        const double scale = gray.depth() == CV_16U ? 1.0 / 65535.0 : gray.depth() == CV_8U ? 1.0 / 255.0 : 1.0;
        cv::Mat f;
        gray.convertTo(f, CV_32F, scale);
        Image out(f.cols, f.rows);
        for (int y = 0; y < f.rows; ++y)
        {
            const float* row = f.ptr<float>(y);
            std::copy(row, row + f.cols, out.data() + static_cast<std::size_t>(y) * f.cols);
        }
        return out;
    }

    void save_image(const std::filesystem::path& path, const Image& img)
    {
        cv::Mat m(img.height(), img.width(), CV_8UC1);
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                m.at<uchar>(y, x) = static_cast<uchar>(std::lround(std::clamp(img(x, y), 0.0f, 1.0f) * 255.0f));
        if (!cv::imwrite(path.string(), m))
            throw InputError("cannot write image " + path.string());
    }
}
