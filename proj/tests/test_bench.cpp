#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mhtrack/bench.hpp"
#include "support.hpp"

using namespace mhtrack;
using namespace mhtrack::testing;
namespace fs = std::filesystem;

namespace
{
    fs::path fresh_dir(const std::string& name)
    {
        const fs::path d = fs::temp_directory_path() / ("mhtrack_bench_" + name);
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }

    void write_file(const fs::path& p, const std::string& text)
    {
        std::ofstream os(p);
        os << text;
    }

    std::string read_file(const fs::path& p)
    {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path tiny_sequence_dir(const std::string& name, int frames, int boxes)
    {
        const fs::path d = fresh_dir(name);
        fs::create_directories(d / "img");
        for (int i = 1; i <= frames; ++i)
        {
            char file[16];
            std::snprintf(file, sizeof file, "%04d.png", i);
            save_image(d / "img" / file, Image(16, 12, 0.1f * i));
        }
        std::string gt;
        for (int i = 0; i < boxes; ++i)
            gt += "10,20,30,40\n";
        write_file(d / "groundtruth_rect.txt", gt);
        return d;
    }

    std::vector<Box> moving_truth(int n)
    {
        std::vector<Box> t;
        for (int i = 0; i < n; ++i)
            t.push_back({10.0 + i, 10.0, 20.0, 20.0});
        return t;
    }

    /// Keeps reporting its initial box.
    class FrozenTracker : public VotTracker
    {
    public:
        void initialize(const Image&, const Box& box) override { box_ = box; }
        Box update(const Image&) override { return box_; }

    private:
        Box box_;
    };
}

TEST(LoadSequence, ThreeFramesThreeBoxes)
{
    const fs::path d = tiny_sequence_dir("three", 3, 3);
    const Sequence s = load_sequence(d);
    EXPECT_EQ(s.size(), 3);
    EXPECT_EQ(s.truth[0], (Box{9.0, 19.0, 30.0, 40.0}));
    EXPECT_NEAR(s.frame(2)(0, 0), 0.3f, 1.0f / 255.0f);
    fs::remove_all(d);
}

TEST(LoadSequence, CountMismatchAndMissingFiles)
{
    const fs::path d = tiny_sequence_dir("mismatch", 3, 2);
    EXPECT_THROW(load_sequence(d), InputError);
    fs::remove(d / "groundtruth_rect.txt");
    EXPECT_THROW(load_sequence(d), InputError);
    EXPECT_THROW(load_sequence(d / "nowhere"), InputError);
    fs::remove_all(d);
}

TEST(LoadSequence, NumericFrameOrder)
{
    const fs::path d = fresh_dir("order");
    fs::create_directories(d / "img");
    for (int i : {1, 2, 10})
        save_image(d / "img" / (std::to_string(i) + ".png"), Image(4, 4, 0.02f * i));
    write_file(d / "groundtruth_rect.txt", "1,1,2,2\n1,1,2,2\n1,1,2,2\n");
    const Sequence s = load_sequence(d);
    ASSERT_EQ(s.frame_paths.size(), 3u);
    EXPECT_EQ(s.frame_paths[2].filename(), "10.png");
    fs::remove_all(d);
}

TEST(Groundtruth, SeparatorsAndLineNumbers)
{
    const std::vector<Box> b = parse_groundtruth("10,20,30,40\n1\t2\t3\t4\n5 6 7 8\n");
    ASSERT_EQ(b.size(), 3u);
    EXPECT_EQ(b[0], (Box{9, 19, 30, 40}));
    EXPECT_EQ(b[1], (Box{0, 1, 3, 4}));
    EXPECT_EQ(b[2], (Box{4, 5, 7, 8}));
    try
    {
        parse_groundtruth("1,2,3,4\n1,2,x,4\n");
        FAIL();
    }
    catch (const ParseError& e)
    {
        EXPECT_EQ(e.line(), 2);
    }
}

TEST(Trajectory, FourDecimalsRoundTrip)
{
    const std::vector<Box> t{{1.0, 2.5, 3.25, 4.125}, {0.00004, 0.0, 1.0, 1.0}};
    EXPECT_EQ(format_trajectory(t), "1.0000,2.5000,3.2500,4.1250\n0.0000,0.0000,1.0000,1.0000\n");
    const fs::path d = fresh_dir("traj");
    write_trajectory(d / "t.txt", t);
    const std::vector<Box> back = load_trajectory(d / "t.txt");
    EXPECT_EQ(back[0], t[0]);
    fs::remove_all(d);
}

TEST(Iou, Examples)
{
    const Box a{0, 0, 2, 2};
    EXPECT_EQ(iou(a, a), 1.0);
    EXPECT_EQ(iou(a, {5, 5, 2, 2}), 0.0);
    EXPECT_EQ(iou(a, {2, 0, 2, 2}), 0.0);
    EXPECT_NEAR(iou(a, {1, 0, 2, 2}), 2.0 / 6.0, 1e-15);
    EXPECT_NEAR(center_distance(a, {3, 4, 2, 2}), 5.0, 1e-15);
}

TEST(Otb, PerfectTracker)
{
    const std::vector<Box> t = moving_truth(10);
    const MetricReport r = otb_metrics(t, t);
    EXPECT_EQ(r.overall.precision20, 1.0);
    EXPECT_EQ(r.overall.auc, 1.0);
    EXPECT_EQ(r.overall.success.back(), 1.0);
}

TEST(Otb, TotalFailure)
{
    const std::vector<Box> t = moving_truth(10);
    std::vector<Box> far = t;
    for (Box& b : far)
        b.x += 200.0;
    const MetricReport r = otb_metrics(far, t);
    EXPECT_EQ(r.overall.precision20, 0.0);
    EXPECT_EQ(r.overall.op, 0.0);
}

TEST(Otb, TwoFrameFixture)
{
    const std::vector<Box> truth{{10, 10, 20, 20}, {10, 10, 20, 20}};
    const std::vector<Box> traj{{10, 10, 20, 20}, {200, 200, 20, 20}};
    const MetricReport r = otb_metrics(traj, truth);
    EXPECT_EQ(r.overall.precision20, 0.5);
    EXPECT_EQ(r.overall.op, 0.5);
}

TEST(Otb, CurveShapesAndAuc)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 15.0);
    const std::vector<Box> truth = moving_truth(60);
    std::vector<Box> traj = truth;
    for (Box& b : traj)
    {
        b.x += n(rng);
        b.y += n(rng);
    }
    const CurveReport c = otb_curves(traj, truth);
    ASSERT_EQ(c.precision.size(), 51u);
    ASSERT_EQ(c.success.size(), 21u);
    for (std::size_t i = 1; i < c.precision.size(); ++i)
        EXPECT_GE(c.precision[i], c.precision[i - 1]);
    for (std::size_t i = 1; i < c.success.size(); ++i)
        EXPECT_LE(c.success[i], c.success[i - 1]);
    double mean = 0.0;
    for (double v : c.success)
        mean += v;
    EXPECT_EQ(c.auc, mean / 21.0);
    EXPECT_EQ(c.op, c.success[10]);
    EXPECT_EQ(c.precision20, c.precision[20]);
    EXPECT_GE(c.auc, 0.0);
    EXPECT_LE(c.auc, 1.0);
    EXPECT_THROW(otb_curves(std::span<const Box>(traj.data(), 3), truth), InputError);
}

TEST(Otb, AverageCurvesWeighsSequencesEqually)
{
    const std::vector<Box> t = moving_truth(4);
    std::vector<Box> bad = t;
    for (Box& b : bad)
        b.x += 500;
    const std::vector<CurveReport> curves{otb_curves(t, t), otb_curves(std::span<const Box>(bad.data(), 2),
                                                                       std::span<const Box>(t.data(), 2))};
    const CurveReport avg = average_curves(curves);
    // IoU >= 0 counts every frame, so the failing sequence still scores 1/21
    EXPECT_NEAR(avg.auc, (1.0 + 1.0 / 21.0) / 2.0, 1e-15);
    EXPECT_EQ(avg.precision20, 0.5);
}

TEST(Vot, PerfectTracker)
{
    const Sequence seq = blank_sequence(moving_truth(50));
    const VotResult r = vot_evaluate([&] { return std::make_unique<ScriptedTracker>(&seq.truth, std::vector<int>{}, nullptr); }, seq);
    EXPECT_EQ(r.robustness, 0);
    EXPECT_EQ(r.accuracy, 1.0);
}

TEST(Vot, FrozenTrackerFails)
{
    const Sequence seq = blank_sequence(moving_truth(80));
    const VotResult r = vot_evaluate([] { return std::make_unique<FrozenTracker>(); }, seq);
    EXPECT_GE(r.robustness, 1);
}

TEST(Vot, ScriptedFailureRestartsSixFramesLater)
{
    const Sequence seq = blank_sequence(moving_truth(100));
    std::vector<int> inits;
    auto factory = [&] { return std::make_unique<ScriptedTracker>(&seq.truth, std::vector<int>{30}, &inits); };
    const VotResult r = vot_evaluate(factory, seq);
    EXPECT_EQ(r.robustness, 1);
    EXPECT_EQ(r.failures, std::vector<int>{30});
    EXPECT_EQ(r.reinit_frames, std::vector<int>{36});
    EXPECT_EQ(inits, (std::vector<int>{0, 36}));
    // frames 1..29 and 47..99 count; the burn-in after the restart covers 37..46
    EXPECT_EQ(r.accuracy_frames, 29 + 53);
    EXPECT_EQ(r.accuracy, 1.0);

    const VotResult again = vot_evaluate(factory, seq);
    EXPECT_EQ(again.failures, r.failures);
    EXPECT_EQ(again.accuracy, r.accuracy);
}

TEST(Reports, JsonAndCsv)
{
    const std::vector<Box> t = moving_truth(5);
    MetricReport r = otb_metrics(t, t);
    r.per_attribute["occlusion"] = r.overall;
    const auto j = nlohmann::json::parse(metrics_json(r));
    EXPECT_EQ(j["overall"]["auc"], 1.0);
    EXPECT_TRUE(j.contains("per_attribute"));
    const std::string p = precision_csv(r), s = success_csv(r);
    EXPECT_EQ(std::count(p.begin(), p.end(), '\n'), 52);
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 22);
}

TEST(Synth, ZeroVelocityBoxesAreIdentical)
{
    Scenario s = scenario_preset("static");
    const std::vector<Box> t = scenario_truth(s);
    for (const Box& b : t)
        EXPECT_EQ(b, t[0]);
}

TEST(Synth, ScaleRateCompounds)
{
    Scenario s = scenario_preset("scale");
    s.frames = 11;
    const std::vector<Box> t = scenario_truth(s);
    EXPECT_NEAR(t[10].w / t[0].w, std::pow(1.03, 10), 1e-12);
    EXPECT_NEAR(std::pow(1.03, 10), 1.3439, 1e-4);
}

TEST(Synth, OcclusionHidesTheTarget)
{
    Scenario s = scenario_preset("occlusion", 4);
    s.noise = 0.0;
    const Sequence seq = synth_sequence(s);
    for (int t = 40; t < 50; ++t)
    {
        const Box& b = seq.truth[t];
        for (int y = static_cast<int>(std::ceil(b.y)); y + 1 <= b.y + b.h; ++y)
            for (int x = static_cast<int>(std::ceil(b.x)); x + 1 <= b.x + b.w; ++x)
                ASSERT_EQ(seq.frames[t](x, y), 0.4f) << t;
    }
    // outside the window the texture is visible
    const Box& b = seq.truth[39];
    bool textured = false;
    for (int y = static_cast<int>(std::ceil(b.y)); y + 1 <= b.y + b.h; ++y)
        textured |= seq.frames[39](static_cast<int>(b.x) + 5, y) != 0.4f;
    EXPECT_TRUE(textured);
}

TEST(Synth, DeterministicAndSeedDependent)
{
    const Sequence a = synth_sequence(scenario_preset("illumination", 9));
    const Sequence b = synth_sequence(scenario_preset("illumination", 9));
    const Sequence c = synth_sequence(scenario_preset("illumination", 10));
    EXPECT_EQ(a.frames, b.frames);
    EXPECT_EQ(a.truth, b.truth);
    EXPECT_NE(a.frames[0], c.frames[0]);
}

TEST(Synth, LeavingTheFrameIsScenarioError)
{
    Scenario s = scenario_preset("constant_velocity");
    s.frames = 1000;
    EXPECT_THROW(scenario_truth(s), ScenarioError);
    EXPECT_THROW(scenario_preset("nonexistent"), ScenarioError);
    for (const std::string& name : scenario_names())
        EXPECT_NO_THROW(scenario_truth(scenario_preset(name)));
}

TEST(Synth, SaveAndLoadRoundTrip)
{
    const Sequence seq = synth_sequence(scenario_preset("static", 2));
    const fs::path d = fresh_dir("saved");
    save_sequence(d, seq);
    const Sequence back = load_sequence(d);
    ASSERT_EQ(back.size(), seq.size());
    for (int i = 0; i < seq.size(); ++i)
    {
        EXPECT_NEAR(back.truth[i].x, seq.truth[i].x, 1e-4);
        EXPECT_NEAR(back.truth[i].w, seq.truth[i].w, 1e-4);
    }
    EXPECT_EQ(back.attributes, seq.attributes);
    EXPECT_NEAR(back.frame(3)(17, 40), seq.frames[3](17, 40), 0.5f / 255.0f + 1e-6f);
    fs::remove_all(d);
}

TEST(Cli, SynthRunEval)
{
    const fs::path d = fresh_dir("cli");
    ASSERT_EQ(cli_main({"synth", "--scenario", "static", "--seed", "5", "--out", (d / "seq").string()}), 0);
    EXPECT_TRUE(fs::exists(d / "seq" / "img" / "0001.png"));

    write_file(d / "cfg.txt", "# short run\nscale_enabled = false\ncg_init_iters = 50\n");
    ASSERT_EQ(cli_main({"run", "--seq", (d / "seq").string(), "--config", (d / "cfg.txt").string(),
                        "--out", (d / "out").string()}), 0);
    for (const char* f : {"trajectory.txt", "metrics.json", "precision.csv", "success.csv", "config.txt"})
        EXPECT_TRUE(fs::exists(d / "out" / f)) << f;
    EXPECT_NE(read_file(d / "out" / "config.txt").find("scale_enabled = false"), std::string::npos);
    const auto j = nlohmann::json::parse(read_file(d / "out" / "metrics.json"));
    EXPECT_GT(j["overall"]["auc"].get<double>(), 0.8);

    ASSERT_EQ(cli_main({"eval", "--traj", (d / "out" / "trajectory.txt").string(), "--seq", (d / "seq").string(),
                        "--out", (d / "eval").string()}), 0);
    const auto e = nlohmann::json::parse(read_file(d / "eval" / "metrics.json"));
    EXPECT_EQ(e["overall"]["auc"], j["overall"]["auc"]);
    EXPECT_EQ(e["overall"]["precision_at_20"], j["overall"]["precision_at_20"]);
    EXPECT_EQ(e["overall"]["success_curve"], j["overall"]["success_curve"]);
    fs::remove_all(d);
}

TEST(Cli, ErrorsExitWithOne)
{
    ::testing::internal::CaptureStderr();
    EXPECT_EQ(cli_main({"run", "--bogus"}), 1);
    const std::string err = ::testing::internal::GetCapturedStderr();
    EXPECT_NE(err.find("Usage"), std::string::npos);
    EXPECT_EQ(cli_main({"run", "--seq", "/nonexistent/seq", "--out", "/tmp/mhtrack_none"}), 1);
    EXPECT_EQ(cli_main({"synth", "--scenario", "nope", "--out", "/tmp/mhtrack_none"}), 1);
    EXPECT_EQ(cli_main({}), 1);
}
