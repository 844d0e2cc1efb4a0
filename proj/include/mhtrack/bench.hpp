#ifndef MHTRACK_BENCH_HPP_
#define MHTRACK_BENCH_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mhtrack/image.hpp"
#include "mhtrack/tracker.hpp"

namespace mhtrack
{
    /// Frames on disk or in memory, one ground-truth box per frame.
    struct Sequence
    {
        std::string name;
        std::vector<std::filesystem::path> frame_paths;
        std::vector<Image> frames;
        std::vector<Box> truth;
        std::vector<std::string> attributes;

        int size() const { return static_cast<int>(frames.empty() ? frame_paths.size() : frames.size()); }
        Image frame(int i) const;
    };

    /// OTB layout: <dir>/img/*.jpg|png sorted numerically and <dir>/groundtruth_rect.txt
    /// with 1-based "x,y,w,h" lines (comma, tab or space separated). An optional
    /// <dir>/attributes.txt lists attribute tags.
    Sequence load_sequence(const std::filesystem::path& dir);

    /// Parses ground-truth text; `origin` names the file in error messages.
    std::vector<Box> parse_groundtruth(const std::string& text, const std::string& origin = "groundtruth_rect.txt");

    /// Reads a trajectory file: one 0-based "x,y,w,h" line per frame.
    std::vector<Box> load_trajectory(const std::filesystem::path& path);
    void write_trajectory(const std::filesystem::path& path, std::span<const Box> boxes);
    std::string format_trajectory(std::span<const Box> boxes);

    double iou(const Box& a, const Box& b);
    double center_distance(const Box& a, const Box& b);

    // ---- OTB metrics -----------------------------------------------------------

    inline constexpr int precision_max_threshold = 50;  // pixels, step 1
    inline constexpr int success_samples = 21;          // IoU thresholds 0, 0.05, ..., 1

    double success_threshold(int i);

    struct CurveReport
    {
        std::vector<double> precision;  // index t: fraction of frames with center error <= t px
        std::vector<double> success;    // index i: fraction of frames with IoU >= i / 20
        double auc = 0.0;
        double op = 0.0;                // success at IoU 0.5
        double precision20 = 0.0;
        double mean_iou = 0.0;
        int frames = 0;
    };

    struct MetricReport
    {
        CurveReport overall;
        double accuracy = 0.0;    // VOT, when evaluated
        double robustness = 0.0;  // VOT failures, when evaluated
        std::map<std::string, CurveReport> per_attribute;
        std::map<std::string, CurveReport> per_sequence;
    };

    /// Curves for one trajectory against its ground truth.
    CurveReport otb_curves(std::span<const Box> trajectory, std::span<const Box> truth);
    MetricReport otb_metrics(std::span<const Box> trajectory, std::span<const Box> truth);

    /// Mean of several per-sequence curves (each sequence counts once).
    CurveReport average_curves(std::span<const CurveReport> curves);

    // ---- VOT restart protocol --------------------------------------------------

    class VotTracker
    {
    public:
        virtual ~VotTracker() = default;
        virtual void initialize(const Image& frame, const Box& box) = 0;
        virtual Box update(const Image& frame) = 0;
    };

    using TrackerFactory = std::function<std::unique_ptr<VotTracker>()>;

    inline constexpr int vot_skip_frames = 5;
    inline constexpr int vot_burn_in = 10;

    struct VotResult
    {
        double accuracy = 0.0;
        int robustness = 0;              // number of failures
        std::vector<int> failures;       // frames with IoU = 0
        std::vector<int> reinit_frames;  // frames where the tracker was restarted
        int accuracy_frames = 0;
    };

    /// A frame with IoU 0 is a failure; the tracker is recreated and initialized from
    /// the ground truth `vot_skip_frames + 1` frames later. Accuracy averages IoU over
    /// tracked frames, skipping the `vot_burn_in` frames after each restart.
    VotResult vot_evaluate(const TrackerFactory& factory, const Sequence& sequence);

    /// The multi-branch tracker behind the VotTracker interface.
    TrackerFactory tracker_factory(const TrackerConfig& config);

    // ---- reports -----------------------------------------------------------------

    std::string metrics_json(const MetricReport& report);
    std::string precision_csv(const MetricReport& report);
    std::string success_csv(const MetricReport& report);
    void write_text(const std::filesystem::path& path, const std::string& text);

    // ---- synthetic sequences -------------------------------------------------------

    struct Scenario
    {
        std::string name = "static";
        int width = 320;
        int height = 240;
        int frames = 30;
        std::uint64_t seed = 1;
        Box start{140.0, 100.0, 40.0, 40.0};
        Point2 velocity{0.0, 0.0};   // pixels per frame
        double scale_rate = 1.0;     // size factor per frame
        int occlusion_start = -1;    // first occluded frame, -1 for none
        int occlusion_duration = 0;
        double occlusion_coverage = 0.0;  // hidden fraction of the target height; the occluder is a
                                          // static block over that part of the path
        double gain_start = 1.0;     // illumination gain ramps linearly over the sequence
        double gain_end = 1.0;
        double noise = 0.05;         // per-pixel Gaussian noise sigma
        int texture_cells = 8;       // target texture is texture_cells^2 random blocks
        std::vector<std::string> attributes;
    };

    /// Named presets: static, constant_velocity, scale, occlusion, illumination.
    Scenario scenario_preset(const std::string& name, std::uint64_t seed = 1);
    std::vector<std::string> scenario_names();

    /// Renders the scenario. Throws ScenarioError if the scripted box leaves the frame.
    Sequence synth_sequence(const Scenario& scenario);

    /// Ground truth boxes of the scenario without rendering.
    std::vector<Box> scenario_truth(const Scenario& scenario);

    /// Writes <dir>/img/%04d.png, groundtruth_rect.txt (1-based) and attributes.txt.
    void save_sequence(const std::filesystem::path& dir, const Sequence& sequence);

    // ---- command line -------------------------------------------------------------

    /// Subcommands run, bench, synth and eval. Returns 0 on success, 1 on input
    /// errors (including unknown flags) and 2 on internal errors.
    int cli_main(const std::vector<std::string>& args);
}

#endif
