#ifndef MHTRACK_TRACKER_HPP_
#define MHTRACK_TRACKER_HPP_

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mhtrack/cf_branch.hpp"
#include "mhtrack/features.hpp"
#include "mhtrack/fusion.hpp"
#include "mhtrack/motion.hpp"
#include "mhtrack/scale.hpp"

namespace mhtrack
{
    enum class EnergySource { latest, memory };

    struct TrackerConfig
    {
        std::vector<LayerSpec> layers = handcrafted_layers();
        std::vector<double> lambdas = {1e-2, 1e-2, 1e-2};
        int orientation_bins = 9;
        // rescale each projected layer to unit mean power per element before windowing
        bool normalize_features = true;
        std::string features = "handcrafted";  // or "external:<directory>"

        int memory_capacity = 50;
        double learning_rate = 0.012;
        int update_interval = 6;
        int cg_init_iters = 150;
        int cg_update_iters = 5;
        CgFormula cg_formula = CgFormula::fletcher_reeves;
        RegWindowParams reg;

        double search_area_scale = 4.0;  // search area over target area
        int canonical_min = 224;
        int canonical_max = 250;

        bool scale_enabled = true;
        ScaleConfig scale;

        bool motion_enabled = true;
        MotionMapKind motion_kind = MotionMapKind::cosine;
        double motion_spread = 0.25;     // gaussian kind: sigma as a fraction of the layer grid
        std::vector<bool> motion_layers = {true, true, true};
        double kalman_q = 1e-3;
        double kalman_r = 4.0;
        double kalman_p0_pos = 1.0;
        double kalman_p0_vel = 100.0;

        double fusion_reg = 1.0;
        EnergySource fusion_energy = EnergySource::latest;
        bool fusion_energy_every_frame = true;
        double fusion_smoothing = 0.0;   // m <- (1 - s) m_new + s m_prev

        // Frames whose fused peak falls below this fraction of the running peak
        // level are treated as unreliable: no sample is stored and the Kalman
        // filter coasts on its prediction.
        double confidence_ratio = 0.4;
        double confidence_decay = 0.9;

        int workers = 1;
    };

    /// Throws InputError describing the first invalid field.
    void validate(const TrackerConfig& config);

    // ---- configuration file ----------------------------------------------------
    //
    // Flat "key = value" lines; '#' starts a comment. List values are comma
    // separated. Every key can also be given on the command line as --key value.

    std::vector<std::string> config_keys();
    void apply_setting(TrackerConfig& config, const std::string& key, const std::string& value);
    TrackerConfig load_config(const std::filesystem::path& path, TrackerConfig base = {});
    TrackerConfig parse_config(const std::string& text, TrackerConfig base = {}, const std::string& origin = "<config>");
    std::string format_config(const TrackerConfig& config);

    // ---- pipeline ----------------------------------------------------------------

    /// Grid geometry shared by all frames: the canonical patch edge in pixels and
    /// each layer's grid.
    struct Geometry
    {
        int canonical = 0;
        std::vector<int> grid;  // cells per side, per layer
        int finest = 0;         // index of the layer with the finest grid
    };

    struct TrackerState
    {
        TrackerConfig config;
        std::shared_ptr<const FeatureSource> source;
        Geometry geometry;
        PcaBasis basis;
        std::vector<SpatialMap> windows;  // per-layer cosine window
        std::vector<BranchModel> branches;
        SampleMemory memory;
        std::shared_ptr<const TrainingSample> last_sample;
        KalmanConfig kalman_config;
        KalmanState kalman;
        Box box;
        int frame_index = 0;
        FusionWeights weights;
        std::vector<double> energies;
        double peak_level = 0.0;
        bool lost = false;
    };

    struct BranchDiagnostics
    {
        Point2 peak;        // in the branch's own cells
        double peak_value = 0.0;
        double energy = 0.0;
        double cg_relative_residual = 0.0;
        int cg_iterations = 0;
    };

    struct Diagnostics
    {
        int frame_index = 0;
        Point2 search_center;
        std::vector<BranchDiagnostics> branches;
        FusionWeights weights;
        double fused_peak = 0.0;
        bool confident = true;
        bool trained = false;
        int scale_n = 0;
        Vec2 innovation = Vec2::Zero();
        bool lost = false;
    };

    struct StepResult
    {
        Box box;
        Diagnostics diagnostics;
    };

    /// Feature source named by config.features.
    std::shared_ptr<const FeatureSource> make_feature_source(const TrackerConfig& config);

    /// First-frame training. Throws InputError on a degenerate box (w or h < 4) or a
    /// box outside the frame.
    TrackerState init(const Image& frame, const Box& box, const TrackerConfig& config,
                      std::shared_ptr<const FeatureSource> source = nullptr);

    /// Processes the next frame: motion prediction, detection, fusion, scale,
    /// Kalman correction, sample storage and the sparse filter update.
    StepResult step(TrackerState& state, const Image& frame);

    /// Projected, normalized and windowed spectra of one layer's raw features.
    LayerSpectra layer_spectra(const TrackerState& state, const FeatureLayer& raw, int layer);

    /// Scale search on the configured scale branch around `center`, starting from the
    /// current box size. Does not change the state.
    ScaleResult scale_search_at(const TrackerState& state, const Image& frame, Point2 center);

    /// Fused response of the current model to a region, without changing the state.
    /// Returns the localized peak in frame pixels.
    Point2 detect_at(const TrackerState& state, const Image& frame, Point2 center);

    std::vector<Box> run_sequence(const std::function<Image(int)>& frame_at, int frame_count, const Box& init_box,
                                  const TrackerConfig& config, std::vector<Diagnostics>* diagnostics = nullptr);
    std::vector<Box> run_sequence(std::span<const Image> frames, const Box& init_box, const TrackerConfig& config,
                                  std::vector<Diagnostics>* diagnostics = nullptr);
}

#endif
