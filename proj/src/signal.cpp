#include "mhtrack/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <opencv2/core.hpp>

namespace mhtrack
{
    namespace
    {
        cv::Mat wrap(SpectrumMap& m)
        {
            return cv::Mat(m.height(), m.width(), CV_64FC2, static_cast<void*>(m.data()));
        }

        cv::Mat wrap(const SpectrumMap& m)
        {
            return cv::Mat(m.height(), m.width(), CV_64FC2, const_cast<Complex*>(m.data()));
        }

        cv::Mat wrap(const SpatialMap& m)
        {
            return cv::Mat(m.height(), m.width(), CV_64FC1, const_cast<double*>(m.data()));
        }

        void require_nonempty(int w, int h)
        {
            if (w <= 0 || h <= 0)
                throw DimensionError("transform of an empty map");
        }

        int signed_frequency(int k, int n) { return 2 * k <= n ? k : k - n; }

        // Target bins (and weights) of input frequency k when zero-padding from n to m bins.
        // An even-length Nyquist bin is split evenly between +n/2 and -n/2.
        int pad_targets(int k, int n, int m, int (&idx)[2], double (&w)[2])
        {
            if (n % 2 == 0 && 2 * k == n)
            {
                idx[0] = n / 2;
                idx[1] = m - n / 2;
                w[0] = w[1] = 0.5;
                if (idx[0] == idx[1])
                {
                    w[0] = 1.0;
                    return 1;
                }
                return 2;
            }
            const int f = signed_frequency(k, n);
            idx[0] = f >= 0 ? f : m + f;
            w[0] = 1.0;
            return 1;
        }
    }

    void require_same_shape(int w0, int h0, int w1, int h1, const char* what)
    {
        if (w0 != w1 || h0 != h1)
            throw DimensionError(std::string(what) + ": dimension mismatch ("
                + std::to_string(w0) + "x" + std::to_string(h0) + " vs "
                + std::to_string(w1) + "x" + std::to_string(h1) + ")");
    }

    SpectrumMap dft2(const SpatialMap& map)
    {
        require_nonempty(map.width(), map.height());
        SpectrumMap out(map.width(), map.height());
        cv::Mat dst = wrap(out);
        cv::dft(wrap(map), dst, cv::DFT_COMPLEX_OUTPUT);
        CV_Assert(dst.data == reinterpret_cast<uchar*>(out.data()));
        return out;
    }

    SpectrumMap dft2(const SpectrumMap& map)
    {
        require_nonempty(map.width(), map.height());
        SpectrumMap out(map.width(), map.height());
        cv::Mat dst = wrap(out);
        cv::dft(wrap(map), dst, 0);
        CV_Assert(dst.data == reinterpret_cast<uchar*>(out.data()));
        return out;
    }

    SpectrumMap idft2_complex(const SpectrumMap& spec)
    {
        require_nonempty(spec.width(), spec.height());
        SpectrumMap out(spec.width(), spec.height());
        cv::Mat dst = wrap(out);
        cv::dft(wrap(spec), dst, cv::DFT_INVERSE | cv::DFT_SCALE);
        CV_Assert(dst.data == reinterpret_cast<uchar*>(out.data()));
        return out;
    }

    SpatialMap idft2(const SpectrumMap& spec, double imag_tolerance)
    {
        const SpectrumMap full = idft2_complex(spec);
        double max_real = 0.0, max_imag = 0.0;
        for (const Complex& c : full.values())
        {
            max_real = std::max(max_real, std::abs(c.real()));
            max_imag = std::max(max_imag, std::abs(c.imag()));
        }
        if (!(max_imag <= imag_tolerance * std::max(1.0, max_real)))
            throw SymmetryError("inverse transform has imaginary residue "
                + std::to_string(max_imag) + "; spectrum is not conjugate-symmetric");
        SpatialMap out(spec.width(), spec.height());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = full[i].real();
        return out;
    }

    bool is_conjugate_symmetric(const SpectrumMap& spec, double tolerance)
    {
        double scale = 1.0;
        for (const Complex& c : spec.values())
            scale = std::max(scale, std::abs(c));
        const int w = spec.width(), h = spec.height();
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u)
                if (std::abs(spec(u, v) - std::conj(spec((w - u) % w, (h - v) % h))) > tolerance * scale)
                    return false;
        return true;
    }

    SpectrumMap symmetrize(const SpectrumMap& spec)
    {
        const int w = spec.width(), h = spec.height();
        SpectrumMap out(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out(x, y) = 0.5 * (spec(x, y) + std::conj(spec((w - x) % w, (h - y) % h)));
        return out;
    }

    SpatialMap cyclic_correlate(const SpatialMap& a, const SpatialMap& b)
    {
        require_same_shape(a, b, "cyclic_correlate");
        const SpectrumMap fa = dft2(a);
        SpectrumMap fb = dft2(b);
        for (std::size_t i = 0; i < fb.size(); ++i)
            fb[i] *= std::conj(fa[i]);
        return idft2(fb);
    }

    SpatialMap shift_fourier(const SpatialMap& in, double dx, double dy)
    {
        SpectrumMap spec = dft2(in);
        const int w = in.width(), h = in.height();
        const double two_pi = 2.0 * std::numbers::pi;
        for (int v = 0; v < h; ++v)
        {
            const double fy = signed_frequency(v, h);
            for (int u = 0; u < w; ++u)
            {
                const double fx = signed_frequency(u, w);
                const double phase = -two_pi * (fx * dx / w + fy * dy / h);
                spec(u, v) *= Complex(std::cos(phase), std::sin(phase));
            }
        }
        const SpectrumMap back = idft2_complex(spec);
        SpatialMap out(w, h);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = back[i].real();
        return out;
    }

    SpatialMap resample_fourier(const SpatialMap& in, int out_width, int out_height)
    {
        if (out_width < in.width() || out_height < in.height())
            throw ParameterError("resample_fourier: output grid smaller than input");
        if (out_width == in.width() && out_height == in.height())
            return in;

        const SpectrumMap spec = dft2(in);
        SpectrumMap padded(out_width, out_height, Complex{});
        const int w = in.width(), h = in.height();
        for (int v = 0; v < h; ++v)
        {
            int iy[2];
            double wy[2];
            const int ny = pad_targets(v, h, out_height, iy, wy);
            for (int u = 0; u < w; ++u)
            {
                int ix[2];
                double wx[2];
                const int nx = pad_targets(u, w, out_width, ix, wx);
                for (int a = 0; a < ny; ++a)
                    for (int b = 0; b < nx; ++b)
                        padded(ix[b], iy[a]) += spec(u, v) * (wx[b] * wy[a]);
            }
        }
        const double gain = static_cast<double>(out_width) * out_height / (static_cast<double>(w) * h);
        const SpectrumMap back = idft2_complex(padded);
        SpatialMap out(out_width, out_height);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = back[i].real() * gain;
        return out;
    }

    SpatialMap multiply(const SpatialMap& a, const SpatialMap& b)
    {
        require_same_shape(a, b, "multiply");
        SpatialMap out(a.width(), a.height());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = a[i] * b[i];
        return out;
    }

    double dot(const SpatialMap& a, const SpatialMap& b)
    {
        require_same_shape(a, b, "dot");
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            s += a[i] * b[i];
        return s;
    }

    double squared_norm(const SpatialMap& a)
    {
        double s = 0.0;
        for (double v : a.values())
            s += v * v;
        return s;
    }

    SpatialMap gaussian_label(int width, int height, double center_x, double center_y, double sigma)
    {
        if (!(sigma > 0.0))
            throw ParameterError("gaussian_label: sigma must be positive");
        if (width <= 0 || height <= 0)
            throw DimensionError("gaussian_label: empty grid");
        if (center_x < 0.0 || center_x >= width || center_y < 0.0 || center_y >= height)
            throw ParameterError("gaussian_label: center outside the grid");

        auto cyclic = [](double d, int n) { return d - n * std::round(d / n); };
        SpatialMap out(width, height);
        const double inv = 1.0 / (2.0 * sigma * sigma);
        for (int y = 0; y < height; ++y)
        {
            const double dy = cyclic(y - center_y, height);
            for (int x = 0; x < width; ++x)
            {
                const double dx = cyclic(x - center_x, width);
                out(x, y) = std::exp(-(dx * dx + dy * dy) * inv);
            }
        }
        return out;
    }

    std::vector<double> hann(int n)
    {
        if (n < 2)
            throw ParameterError("hann: length must be at least 2");
        std::vector<double> p(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            p[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / (n - 1)));
        // exact endpoints and center
        p.front() = p.back() = 0.0;
        if (n % 2 == 1)
            p[n / 2] = 1.0;
        return p;
    }

    SpatialMap cosine_window(int width, int height)
    {
        if (width < 1 || height < 1 || (width < 2 && height < 2))
            throw ParameterError("cosine_window: size must be at least 2 along some axis");
        const std::vector<double> px = width >= 2 ? hann(width) : std::vector<double>{1.0};
        const std::vector<double> py = height >= 2 ? hann(height) : std::vector<double>{1.0};
        SpatialMap out(width, height);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                out(x, y) = px[x] * py[y];
        return out;
    }
}
