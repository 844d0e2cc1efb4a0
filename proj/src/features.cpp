#include "mhtrack/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

namespace mhtrack
{
    static_assert(std::endian::native == std::endian::little, "feature files assume a little-endian host");

    void validate(const LayerSpec& spec)
    {
        if (spec.cell_size < 1)
            throw ParameterError("layer '" + spec.name + "': cell_size must be >= 1");
        if (spec.channels_out < 1)
            throw ParameterError("layer '" + spec.name + "': channels_out must be >= 1");
        if (!(spec.label_sigma_factor > 0.0))
            throw ParameterError("layer '" + spec.name + "': label_sigma_factor must be positive");
    }

    std::vector<LayerSpec> handcrafted_layers()
    {
        return {
            {"shallow", 2, 8, 1.0 / 12.0},
            {"medium", 4, 8, 1.0 / 12.0},
            {"deep", 8, 8, 1.0 / 3.0},
        };
    }

    std::vector<LayerSpec> resnet_layers()
    {
        return {
            {"conv1x", 2, 64, 1.0 / 12.0},
            {"res3d", 8, 256, 1.0 / 12.0},
            {"res4f", 16, 256, 1.0 / 3.0},
        };
    }

    bool FeatureStack::operator==(const FeatureStack& o) const
    {
        if (layers.size() != o.layers.size())
            return false;
        for (std::size_t l = 0; l < layers.size(); ++l)
            if (!(layers[l].spec == o.layers[l].spec) || layers[l].channels != o.layers[l].channels)
                return false;
        return true;
    }

    int handcrafted_channel_count(int orientation_bins) { return 2 + orientation_bins; }

    FeatureStack extract_handcrafted(const Image& patch, std::span<const LayerSpec> specs, int orientation_bins)
    {
        if (orientation_bins < 1)
            throw ParameterError("orientation_bins must be >= 1");
        if (patch.empty())
            throw SizeError("extract_handcrafted: empty patch");

        const int w = patch.width(), h = patch.height();
        std::vector<double> mag(patch.size()), ang(patch.size());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
            {
                const double gx = 0.5 * (patch.wrapped(x + 1, y) - patch.wrapped(x - 1, y));
                const double gy = 0.5 * (patch.wrapped(x, y + 1) - patch.wrapped(x, y - 1));
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                mag[i] = std::hypot(gx, gy);
                double a = std::atan2(gy, gx);
                if (a < 0.0) a += std::numbers::pi;
                if (a >= std::numbers::pi) a -= std::numbers::pi;
                ang[i] = a;
            }

        FeatureStack stack;
        for (const LayerSpec& spec : specs)
        {
            validate(spec);
            const int cs = spec.cell_size;
            const int gw = w / cs, gh = h / cs;
            if (gw < 1 || gh < 1)
                throw SizeError("extract_handcrafted: patch " + std::to_string(w) + "x" + std::to_string(h)
                    + " smaller than one cell of layer '" + spec.name + "'");

            FeatureLayer layer{spec, {}};
            const int depth = handcrafted_channel_count(orientation_bins);
            layer.channels.assign(depth, SpatialMap(gw, gh, 0.0));
            const double norm = 1.0 / (cs * cs);
            for (int cy = 0; cy < gh; ++cy)
                for (int cx = 0; cx < gw; ++cx)
                {
                    double intensity = 0.0, magnitude = 0.0;
                    for (int y = cy * cs; y < (cy + 1) * cs; ++y)
                        for (int x = cx * cs; x < (cx + 1) * cs; ++x)
                        {
                            const std::size_t i = static_cast<std::size_t>(y) * w + x;
                            intensity += patch[i];
                            magnitude += mag[i];
                            int bin = static_cast<int>(ang[i] / std::numbers::pi * orientation_bins);
                            bin = std::clamp(bin, 0, orientation_bins - 1);
                            layer.channels[2 + bin](cx, cy) += mag[i] * norm;
                        }
                    layer.channels[0](cx, cy) = intensity * norm;
                    layer.channels[1](cx, cy) = magnitude * norm;
                }
            stack.layers.push_back(std::move(layer));
        }
        return stack;
    }

    // ---- feature files -------------------------------------------------------

    namespace
    {
        void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

        std::uint32_t get_u32(std::istream& is, const std::string& layer, const char* field)
        {
            std::uint32_t v = 0;
            if (!is.read(reinterpret_cast<char*>(&v), 4))
                throw IngestionError(layer, std::string("truncated file while reading ") + field);
            return v;
        }
    }

    void write_external_features(const std::filesystem::path& path, const FeatureStack& stack)
    {
        std::ofstream os(path, std::ios::binary);
        if (!os)
            throw InputError("cannot open " + path.string() + " for writing");
        os.write("MHFT", 4);
        put_u32(os, feature_file_version);
        put_u32(os, static_cast<std::uint32_t>(stack.layers.size()));
        for (const FeatureLayer& layer : stack.layers)
        {
            put_u32(os, static_cast<std::uint32_t>(layer.spec.name.size()));
            os.write(layer.spec.name.data(), static_cast<std::streamsize>(layer.spec.name.size()));
            put_u32(os, static_cast<std::uint32_t>(layer.depth()));
            put_u32(os, static_cast<std::uint32_t>(layer.width()));
            put_u32(os, static_cast<std::uint32_t>(layer.height()));
            std::vector<float> buf;
            for (const SpatialMap& ch : layer.channels)
                for (double v : ch.values())
                    buf.push_back(static_cast<float>(v));
            os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
        }
        if (!os)
            throw InputError("write failed for " + path.string());
    }

    FeatureStack ingest_external_features(const std::filesystem::path& path, std::span<const LayerSpec> specs)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw InputError("cannot open feature file " + path.string());
        char magic[4] = {};
        if (!is.read(magic, 4) || std::memcmp(magic, "MHFT", 4) != 0)
            throw IngestionError("<header>", "bad magic in " + path.string());
        const std::uint32_t version = get_u32(is, "<header>", "version");
        if (version != feature_file_version)
            throw IngestionError("<header>", "unsupported version " + std::to_string(version));
        const std::uint32_t count = get_u32(is, "<header>", "layer count");
        if (count != specs.size())
            throw IngestionError("<header>", "file has " + std::to_string(count) + " layers, configuration expects "
                + std::to_string(specs.size()));

        FeatureStack stack;
        for (std::uint32_t l = 0; l < count; ++l)
        {
            const LayerSpec& spec = specs[l];
            const std::uint32_t name_len = get_u32(is, spec.name, "name length");
            if (name_len > 4096)
                throw IngestionError(spec.name, "implausible name length");
            std::string name(name_len, '\0');
            if (!is.read(name.data(), name_len))
                throw IngestionError(spec.name, "truncated layer name");
            if (name != spec.name)
                throw IngestionError(name, "expected layer '" + spec.name + "' at position " + std::to_string(l));
            const std::uint32_t channels = get_u32(is, name, "channels");
            const std::uint32_t width = get_u32(is, name, "width");
            const std::uint32_t height = get_u32(is, name, "height");
            if (channels == 0 || width == 0 || height == 0)
                throw IngestionError(name, "zero-sized layer");
            if (channels < static_cast<std::uint32_t>(spec.channels_out))
                throw IngestionError(name, std::to_string(channels) + " channels, fewer than channels_out "
                    + std::to_string(spec.channels_out));

            FeatureLayer layer{spec, {}};
            std::vector<float> buf(static_cast<std::size_t>(width) * height);
            for (std::uint32_t c = 0; c < channels; ++c)
            {
                if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float))))
                    throw IngestionError(name, "truncated channel data");
                SpatialMap ch(static_cast<int>(width), static_cast<int>(height));
                for (std::size_t i = 0; i < buf.size(); ++i)
                {
                    if (!std::isfinite(buf[i]))
                        throw IngestionError(name, "non-finite value in channel " + std::to_string(c));
                    ch[i] = buf[i];
                }
                layer.channels.push_back(std::move(ch));
            }
            stack.layers.push_back(std::move(layer));
        }
        if (is.peek() != std::char_traits<char>::eof())
            throw IngestionError("<trailer>", "unexpected bytes after the last layer");
        return stack;
    }

    // ---- PCA -------------------------------------------------------------------

    PcaBasis pca_fit(const FeatureStack& stack, std::span<const LayerSpec> specs)
    {
        if (stack.layers.size() != specs.size())
            throw DimensionError("pca_fit: stack has " + std::to_string(stack.layers.size())
                + " layers, expected " + std::to_string(specs.size()));
        PcaBasis basis;
        for (std::size_t l = 0; l < specs.size(); ++l)
        {
            const FeatureLayer& layer = stack.layers[l];
            const LayerSpec& spec = specs[l];
            const int c = layer.depth();
            if (spec.channels_out > c)
                throw ParameterError("pca_fit: layer '" + spec.name + "' asks for " + std::to_string(spec.channels_out)
                    + " components from " + std::to_string(c) + " channels");
            const std::size_t n = layer.channels.front().size();

            Eigen::VectorXd mean = Eigen::VectorXd::Zero(c);
            for (int i = 0; i < c; ++i)
                mean(i) = std::accumulate(layer.channels[i].values().begin(), layer.channels[i].values().end(), 0.0) / n;
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(c, c);
            for (int i = 0; i < c; ++i)
                for (int j = i; j < c; ++j)
                {
                    double s = 0.0;
                    const auto& a = layer.channels[i];
                    const auto& b = layer.channels[j];
                    for (std::size_t k = 0; k < n; ++k)
                        s += (a[k] - mean(i)) * (b[k] - mean(j));
                    cov(i, j) = cov(j, i) = s / n;
                }

            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
            if (eig.info() != Eigen::Success)
                throw NumericError("pca_fit: eigendecomposition failed for layer '" + spec.name + "'");
            const Eigen::VectorXd& values = eig.eigenvalues();
            Eigen::MatrixXd vectors = eig.eigenvectors();

            std::vector<int> dominant(c);
            for (int k = 0; k < c; ++k)
            {
                Eigen::Index arg = 0;
                vectors.col(k).cwiseAbs().maxCoeff(&arg);
                dominant[k] = static_cast<int>(arg);
                if (vectors(arg, k) < 0.0)
                    vectors.col(k) = -vectors.col(k);
            }
            const double tie = 1e-12 * std::max(1.0, values.cwiseAbs().maxCoeff());
            std::vector<int> order(c);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                if (std::abs(values(a) - values(b)) > tie)
                    return values(a) > values(b);
                return dominant[a] < dominant[b];
            });

            LayerBasis lb;
            lb.name = spec.name;
            lb.input_channels = c;
            lb.output_channels = spec.channels_out;
            lb.mean.assign(mean.data(), mean.data() + c);
            lb.projection.resize(static_cast<std::size_t>(c) * spec.channels_out);
            for (int j = 0; j < spec.channels_out; ++j)
                for (int i = 0; i < c; ++i)
                    lb.projection[static_cast<std::size_t>(i) * spec.channels_out + j] = vectors(i, order[j]);
            basis.layers.push_back(std::move(lb));
        }
        return basis;
    }

    FeatureLayer pca_project_layer(const FeatureLayer& in, const LayerBasis& b)
    {
        if (in.spec.name != b.name || in.depth() != b.input_channels)
            throw DimensionError("pca_project: basis for layer '" + b.name + "' (" + std::to_string(b.input_channels)
                + " channels) does not match layer '" + in.spec.name + "' (" + std::to_string(in.depth()) + ")");
        FeatureLayer layer{in.spec, {}};
        layer.channels.assign(b.output_channels, SpatialMap(in.width(), in.height(), 0.0));
        const std::size_t n = in.channels.front().size();
        for (int i = 0; i < b.input_channels; ++i)
        {
            const SpatialMap& src = in.channels[i];
            for (int j = 0; j < b.output_channels; ++j)
            {
                const double p = b.at(i, j);
                SpatialMap& dst = layer.channels[j];
                for (std::size_t k = 0; k < n; ++k)
                    dst[k] += p * (src[k] - b.mean[i]);
            }
        }
        return layer;
    }

    FeatureStack pca_project(const FeatureStack& stack, const PcaBasis& basis)
    {
        if (stack.layers.size() != basis.layers.size())
            throw DimensionError("pca_project: basis has " + std::to_string(basis.layers.size())
                + " layers, stack has " + std::to_string(stack.layers.size()));
        FeatureStack out;
        for (std::size_t l = 0; l < stack.layers.size(); ++l)
            out.layers.push_back(pca_project_layer(stack.layers[l], basis.layers[l]));
        return out;
    }

    FeatureStack pca_reconstruct(const FeatureStack& projected, const PcaBasis& basis)
    {
        if (projected.layers.size() != basis.layers.size())
            throw DimensionError("pca_reconstruct: layer count mismatch");
        FeatureStack out;
        for (std::size_t l = 0; l < projected.layers.size(); ++l)
        {
            const FeatureLayer& in = projected.layers[l];
            const LayerBasis& b = basis.layers[l];
            if (in.depth() != b.output_channels)
                throw DimensionError("pca_reconstruct: channel mismatch in layer '" + b.name + "'");
            FeatureLayer layer{in.spec, {}};
            const std::size_t n = in.channels.front().size();
            for (int i = 0; i < b.input_channels; ++i)
            {
                SpatialMap ch(in.width(), in.height(), b.mean[i]);
                for (int j = 0; j < b.output_channels; ++j)
                {
                    const double p = b.at(i, j);
                    for (std::size_t k = 0; k < n; ++k)
                        ch[k] += p * in.channels[j][k];
                }
                layer.channels.push_back(std::move(ch));
            }
            out.layers.push_back(std::move(layer));
        }
        return out;
    }

    FeatureStack apply_window(const FeatureStack& stack, std::span<const SpatialMap> window_per_layer)
    {
        if (window_per_layer.size() != stack.layers.size())
            throw DimensionError("apply_window: need one window per layer");
        FeatureStack out = stack;
        for (std::size_t l = 0; l < out.layers.size(); ++l)
        {
            const SpatialMap& win = window_per_layer[l];
            for (SpatialMap& ch : out.layers[l].channels)
            {
                require_same_shape(ch, win, "apply_window");
                for (std::size_t k = 0; k < ch.size(); ++k)
                    ch[k] *= win[k];
            }
        }
        return out;
    }

    // ---- sources ---------------------------------------------------------------

    FeatureLayer FeatureSource::extract_layer(int layer, int frame_index, const Image& frame, Point2 center,
                                              double src_w, double src_h, int canonical_w, int canonical_h) const
    {
        FeatureStack all = extract(frame_index, frame, center, src_w, src_h, canonical_w, canonical_h);
        if (layer < 0 || layer >= static_cast<int>(all.layers.size()))
            throw DimensionError("extract_layer: no layer " + std::to_string(layer));
        return std::move(all.layers[layer]);
    }

    HandcraftedSource::HandcraftedSource(std::vector<LayerSpec> specs, int orientation_bins)
        : specs_(std::move(specs)), bins_(orientation_bins)
    {
    }

    FeatureStack HandcraftedSource::extract(int, const Image& frame, Point2 center, double src_w, double src_h,
                                            int canonical_w, int canonical_h) const
    {
        const Image patch = extract_patch(frame, center, src_w, src_h, canonical_w, canonical_h);
        return extract_handcrafted(patch, specs_, bins_);
    }

    FeatureLayer HandcraftedSource::extract_layer(int layer, int, const Image& frame, Point2 center, double src_w,
                                                  double src_h, int canonical_w, int canonical_h) const
    {
        if (layer < 0 || layer >= static_cast<int>(specs_.size()))
            throw DimensionError("extract_layer: no layer " + std::to_string(layer));
        const Image patch = extract_patch(frame, center, src_w, src_h, canonical_w, canonical_h);
        FeatureStack one = extract_handcrafted(patch, std::span<const LayerSpec>(&specs_[layer], 1), bins_);
        return std::move(one.layers.front());
    }

    ExternalSource::ExternalSource(std::filesystem::path directory, std::vector<LayerSpec> specs)
        : dir_(std::move(directory)), specs_(std::move(specs))
    {
        if (!std::filesystem::is_directory(dir_))
            throw InputError("external feature directory not found: " + dir_.string());
    }

    std::filesystem::path ExternalSource::frame_file(const std::filesystem::path& dir, int frame_index)
    {
        char name[32];
        std::snprintf(name, sizeof(name), "%04d.mhft", frame_index + 1);
        return dir / name;
    }

    std::shared_ptr<const FeatureStack> ExternalSource::load(int frame_index) const
    {
        std::lock_guard lock(mutex_);
        if (cached_index_ != frame_index || !cached_)
        {
            cached_ = std::make_shared<const FeatureStack>(ingest_external_features(frame_file(dir_, frame_index), specs_));
            cached_index_ = frame_index;
        }
        return cached_;
    }

    int ExternalSource::channels(const LayerSpec& spec) const
    {
        const auto stack = load(0);
        for (const FeatureLayer& l : stack->layers)
            if (l.spec.name == spec.name)
                return l.depth();
        throw InputError("external features have no layer '" + spec.name + "'");
    }

    FeatureStack ExternalSource::extract(int frame_index, const Image& frame, Point2 center, double src_w, double src_h,
                                         int canonical_w, int canonical_h) const
    {
        const auto full = load(frame_index);
        FeatureStack out;
        for (const FeatureLayer& src : full->layers)
        {
            const double stride_x = static_cast<double>(frame.width()) / src.width();
            const double stride_y = static_cast<double>(frame.height()) / src.height();
            const int gw = canonical_w / src.spec.cell_size;
            const int gh = canonical_h / src.spec.cell_size;
            if (gw < 1 || gh < 1)
                throw SizeError("canonical patch smaller than one cell of layer '" + src.spec.name + "'");
            FeatureLayer layer{src.spec, {}};
            // Sample positions are shared by every channel.
            std::vector<double> xs(gw), ys(gh);
            for (int i = 0; i < gw; ++i)
                xs[i] = (center.x + ((i + 0.5) / gw - 0.5) * src_w) / stride_x;
            for (int j = 0; j < gh; ++j)
                ys[j] = (center.y + ((j + 0.5) / gh - 0.5) * src_h) / stride_y;
            for (const SpatialMap& ch : src.channels)
            {
                Image as_image(ch.width(), ch.height());
                for (std::size_t k = 0; k < ch.size(); ++k)
                    as_image[k] = static_cast<float>(ch[k]);
                SpatialMap sampled(gw, gh);
                for (int j = 0; j < gh; ++j)
                    for (int i = 0; i < gw; ++i)
                        sampled(i, j) = sample_bilinear(as_image, xs[i], ys[j]);
                layer.channels.push_back(std::move(sampled));
            }
            out.layers.push_back(std::move(layer));
        }
        return out;
    }
}
