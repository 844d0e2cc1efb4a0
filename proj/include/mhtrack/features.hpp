#ifndef MHTRACK_FEATURES_HPP_
#define MHTRACK_FEATURES_HPP_

#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "mhtrack/image.hpp"

namespace mhtrack
{
    /// One feature hierarchy, i.e. one tracking branch.
    struct LayerSpec
    {
        std::string name;
        int cell_size = 4;              // pixels per feature cell
        int channels_out = 8;           // dimensionality after PCA
        double label_sigma_factor = 1.0 / 12.0;  // label sigma as a fraction of the target size

        bool operator==(const LayerSpec&) const = default;
    };

    void validate(const LayerSpec& spec);

    /// Three branches of increasing stride for the hand-crafted channels.
    std::vector<LayerSpec> handcrafted_layers();

    /// Conv1x / Res3d / Res4f layer selection for ingested ResNet activations,
    /// PCA-reduced to 64, 256 and 256 channels.
    std::vector<LayerSpec> resnet_layers();

    struct FeatureLayer
    {
        LayerSpec spec;
        std::vector<SpatialMap> channels;

        int width() const { return channels.empty() ? 0 : channels.front().width(); }
        int height() const { return channels.empty() ? 0 : channels.front().height(); }
        int depth() const { return static_cast<int>(channels.size()); }
    };

    struct FeatureStack
    {
        std::vector<FeatureLayer> layers;

        bool operator==(const FeatureStack& o) const;
    };

    /// Per-cell channels for every layer: mean intensity, mean gradient magnitude,
    /// and an `orientation_bins`-bin unsigned orientation histogram weighted by
    /// gradient magnitude. Gradients use cyclic central differences, so cyclic
    /// shifts by multiples of the cell size shift the output by whole cells.
    FeatureStack extract_handcrafted(const Image& patch, std::span<const LayerSpec> specs, int orientation_bins = 9);

    int handcrafted_channel_count(int orientation_bins);

    // Feature file (little-endian): "MHFT", u32 version, u32 layer count, then per
    // layer u32 name length, name bytes, u32 channels, u32 width, u32 height and
    // channels*width*height float32 values, channel-major then row-major.
    inline constexpr std::uint32_t feature_file_version = 1;

    void write_external_features(const std::filesystem::path& path, const FeatureStack& stack);

    /// Reads a feature file and checks it against `specs` (same layer names in the same
    /// order, at least channels_out channels each). Throws IngestionError naming the layer.
    FeatureStack ingest_external_features(const std::filesystem::path& path, std::span<const LayerSpec> specs);

    // ---- PCA ---------------------------------------------------------------

    struct LayerBasis
    {
        std::string name;
        int input_channels = 0;
        int output_channels = 0;
        std::vector<double> projection;  // input_channels x output_channels, row-major
        std::vector<double> mean;        // per input channel

        double at(int in, int out) const { return projection[static_cast<std::size_t>(in) * output_channels + out]; }
    };

    struct PcaBasis
    {
        std::vector<LayerBasis> layers;
    };

    /// Top principal directions of the cell vectors of each layer. Components are
    /// ordered by descending eigenvalue; equal eigenvalues are ordered by the index of
    /// the dominant original channel, and each column's dominant entry is positive.
    PcaBasis pca_fit(const FeatureStack& stack, std::span<const LayerSpec> specs);

    /// Mean-subtracted projection onto the basis.
    FeatureStack pca_project(const FeatureStack& stack, const PcaBasis& basis);
    FeatureLayer pca_project_layer(const FeatureLayer& layer, const LayerBasis& basis);

    /// Maps projected channels back to the input space (inverse of pca_project on its range).
    FeatureStack pca_reconstruct(const FeatureStack& projected, const PcaBasis& basis);

    /// Multiplies each layer's channels elementwise by the layer's window.
    FeatureStack apply_window(const FeatureStack& stack, std::span<const SpatialMap> window_per_layer);

    // ---- sources used by the tracker ---------------------------------------

    /// Where a region's features come from. `extract` returns raw (pre-PCA) features on
    /// the canonical grid of each layer: canonical_w / cell_size by canonical_h / cell_size.
    class FeatureSource
    {
    public:
        virtual ~FeatureSource() = default;
        virtual FeatureStack extract(int frame_index, const Image& frame, Point2 center,
                                     double src_w, double src_h, int canonical_w, int canonical_h) const = 0;

        /// Features of a single layer; the default extracts everything and keeps one.
        virtual FeatureLayer extract_layer(int layer, int frame_index, const Image& frame, Point2 center,
                                           double src_w, double src_h, int canonical_w, int canonical_h) const;

        virtual int channels(const LayerSpec& spec) const = 0;
    };

    class HandcraftedSource : public FeatureSource
    {
    public:
        HandcraftedSource(std::vector<LayerSpec> specs, int orientation_bins = 9);
        FeatureStack extract(int frame_index, const Image& frame, Point2 center,
                             double src_w, double src_h, int canonical_w, int canonical_h) const override;
        FeatureLayer extract_layer(int layer, int frame_index, const Image& frame, Point2 center,
                                   double src_w, double src_h, int canonical_w, int canonical_h) const override;
        int channels(const LayerSpec&) const override { return handcrafted_channel_count(bins_); }

    private:
        std::vector<LayerSpec> specs_;
        int bins_;
    };

    /// Precomputed whole-frame activations, one feature file per frame named
    /// `%04d.mhft` (1-based, like the image files). A layer's stride in pixels is
    /// frame width / map width; region features are bilinearly sampled at cell centers.
    class ExternalSource : public FeatureSource
    {
    public:
        ExternalSource(std::filesystem::path directory, std::vector<LayerSpec> specs);
        FeatureStack extract(int frame_index, const Image& frame, Point2 center,
                             double src_w, double src_h, int canonical_w, int canonical_h) const override;
        int channels(const LayerSpec& spec) const override;

        static std::filesystem::path frame_file(const std::filesystem::path& dir, int frame_index);

    private:
        std::shared_ptr<const FeatureStack> load(int frame_index) const;

        std::filesystem::path dir_;
        std::vector<LayerSpec> specs_;
        mutable std::mutex mutex_;
        mutable int cached_index_ = -1;
        mutable std::shared_ptr<const FeatureStack> cached_;
    };
}

#endif
