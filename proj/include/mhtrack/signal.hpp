#ifndef MHTRACK_SIGNAL_HPP_
#define MHTRACK_SIGNAL_HPP_

// Two-dimensional maps, discrete Fourier transforms, cyclic correlation,
// and the window/label constructors.
//
// Storage is row-major: value (x, y) lives at index y * width + x.
//
// Transform normalization: dft2 is unnormalized, idft2 carries 1/(W*H).
//
// Correlation convention, used consistently by every module:
//
//     cyclic_correlate(a, b)[s] = sum_t a[t] * b[(t + s) mod N]
//                               = idft2(conj(dft2(a)) * dft2(b))
//
// so the output moves with `b`: shifting b by (u, v) shifts the output by
// (u, v). Correlating an impulse with b reproduces b. The correlation filters
// in cf_branch take the role of `a` and the features the role of `b`.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "mhtrack/errors.hpp"

namespace mhtrack
{
    using Complex = std::complex<double>;

    template <typename T>
    class Map2D
    {
    public:
        Map2D() = default;

        Map2D(int width, int height, T fill = T{})
            : width_(width), height_(height)
        {
            if (width <= 0 || height <= 0)
                throw DimensionError("map dimensions must be positive, got "
                    + std::to_string(width) + "x" + std::to_string(height));
            values_.assign(static_cast<std::size_t>(width) * height, fill);
        }

        Map2D(int width, int height, std::vector<T> values)
            : width_(width), height_(height), values_(std::move(values))
        {
            if (width <= 0 || height <= 0)
                throw DimensionError("map dimensions must be positive");
            if (values_.size() != static_cast<std::size_t>(width) * height)
                throw DimensionError("value count does not match map dimensions");
        }

        int width() const noexcept { return width_; }
        int height() const noexcept { return height_; }
        std::size_t size() const noexcept { return values_.size(); }
        bool empty() const noexcept { return values_.empty(); }

        T& operator()(int x, int y) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
        const T& operator()(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }

        /// Cyclic access: coordinates are reduced modulo the map size.
        const T& wrapped(int x, int y) const
        {
            x %= width_;
            y %= height_;
            if (x < 0) x += width_;
            if (y < 0) y += height_;
            return (*this)(x, y);
        }

        T& operator[](std::size_t i) { return values_[i]; }
        const T& operator[](std::size_t i) const { return values_[i]; }

        std::span<T> values() noexcept { return values_; }
        std::span<const T> values() const noexcept { return values_; }
        T* data() noexcept { return values_.data(); }
        const T* data() const noexcept { return values_.data(); }

        bool same_shape(const Map2D& o) const noexcept { return width_ == o.width_ && height_ == o.height_; }

        bool operator==(const Map2D&) const = default;

    private:
        int width_ = 0;
        int height_ = 0;
        std::vector<T> values_;
    };

    using SpatialMap = Map2D<double>;
    using SpectrumMap = Map2D<Complex>;

    void require_same_shape(int w0, int h0, int w1, int h1, const char* what);

    template <typename A, typename B>
    void require_same_shape(const Map2D<A>& a, const Map2D<B>& b, const char* what)
    {
        require_same_shape(a.width(), a.height(), b.width(), b.height(), what);
    }

    // ---- transforms ---------------------------------------------------------

    SpectrumMap dft2(const SpatialMap& map);
    SpectrumMap dft2(const SpectrumMap& map);

    /// Inverse transform with 1/(W*H) normalization, keeping the complex result.
    SpectrumMap idft2_complex(const SpectrumMap& spec);

    /// Inverse transform demanding a real result. Throws SymmetryError when the
    /// imaginary residue exceeds `imag_tolerance` relative to max(1, max |real|).
    SpatialMap idft2(const SpectrumMap& spec, double imag_tolerance = 1e-8);

    /// True when S[u,v] == conj(S[-u,-v]) within `tolerance` (relative to the
    /// largest magnitude, floored at 1).
    bool is_conjugate_symmetric(const SpectrumMap& spec, double tolerance = 1e-8);

    // ---- correlation and pointwise helpers ----------------------------------

    /// Closest conjugate-symmetric spectrum: (S[u,v] + conj(S[-u,-v])) / 2.
    SpectrumMap symmetrize(const SpectrumMap& spec);

    SpatialMap cyclic_correlate(const SpatialMap& a, const SpatialMap& b);

    /// Cyclic shift by integer cells: out(x + dx, y + dy) = in(x, y).
    template <typename T>
    Map2D<T> circshift(const Map2D<T>& in, int dx, int dy)
    {
        Map2D<T> out(in.width(), in.height());
        for (int y = 0; y < in.height(); ++y)
            for (int x = 0; x < in.width(); ++x)
                out(x, y) = in.wrapped(x - dx, y - dy);
        return out;
    }

    /// Cyclic shift by a real number of cells (band-limited, via phase ramp).
    SpatialMap shift_fourier(const SpatialMap& in, double dx, double dy);

    /// Trigonometric interpolation of a periodic map onto a finer grid by
    /// zero-padding its spectrum. Output sample j sits at input coordinate
    /// j * in_size / out_size. Requires out dims >= in dims.
    SpatialMap resample_fourier(const SpatialMap& in, int out_width, int out_height);

    SpatialMap multiply(const SpatialMap& a, const SpatialMap& b);
    double dot(const SpatialMap& a, const SpatialMap& b);
    double squared_norm(const SpatialMap& a);

    // ---- windows and labels -------------------------------------------------

    /// exp(-d^2 / (2 sigma^2)) with d the cyclic distance to (center_x, center_y).
    SpatialMap gaussian_label(int width, int height, double center_x, double center_y, double sigma);

    /// Separable Hann window: 0 on the borders, 1 at the center of odd sizes.
    /// A unit-length axis is flat, so a W x 1 map is the one-dimensional profile.
    SpatialMap cosine_window(int width, int height);

    /// One-dimensional Hann profile of length n >= 2.
    std::vector<double> hann(int n);
}

#endif
