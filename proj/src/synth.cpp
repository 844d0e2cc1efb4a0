#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>

#include "mhtrack/bench.hpp"

namespace mhtrack
{
    namespace
    {
        double overlap(double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); }

        double coverage(const Box& b, int px, int py)
        {
            return overlap(px, px + 1.0, b.x, b.x + b.w) * overlap(py, py + 1.0, b.y, b.y + b.h);
        }

        // Mean texture value over the part of pixel (px, py) inside the box. Area
        // sampling keeps the texture moving continuously under sub-pixel scaling.
        double texture_mean(const Box& b, const std::vector<double>& texture, int cells, int px, int py, double area)
        {
            const double cw = b.w / cells, ch = b.h / cells;
            const int i0 = std::clamp(static_cast<int>(std::floor((px - b.x) / cw)), 0, cells - 1);
            const int i1 = std::clamp(static_cast<int>(std::floor((px + 1.0 - b.x) / cw)), 0, cells - 1);
            const int j0 = std::clamp(static_cast<int>(std::floor((py - b.y) / ch)), 0, cells - 1);
            const int j1 = std::clamp(static_cast<int>(std::floor((py + 1.0 - b.y) / ch)), 0, cells - 1);
            double acc = 0.0;
            for (int j = j0; j <= j1; ++j)
            {
                const double oy = overlap(py, py + 1.0, b.y + j * ch, b.y + (j + 1) * ch);
                for (int i = i0; i <= i1; ++i)
                    acc += oy * overlap(px, px + 1.0, b.x + i * cw, b.x + (i + 1) * cw) * texture[static_cast<std::size_t>(j) * cells + i];
            }
            return acc / area;
        }

        struct Background
        {
            double fx[3], fy[3], phase[3], amp[3];
        };

        Background make_background(std::mt19937_64& rng)
        {
            std::uniform_real_distribution<double> freq(0.004, 0.02), ph(0.0, 2.0 * std::numbers::pi), amp(0.03, 0.06);
            Background bg{};
            for (int k = 0; k < 3; ++k)
            {
                bg.fx[k] = freq(rng);
                bg.fy[k] = freq(rng);
                bg.phase[k] = ph(rng);
                bg.amp[k] = amp(rng);
            }
            return bg;
        }

        double background_at(const Background& bg, double x, double y)
        {
            double v = 0.4;
            for (int k = 0; k < 3; ++k)
                v += bg.amp[k] * std::sin(2.0 * std::numbers::pi * (bg.fx[k] * x + bg.fy[k] * y) + bg.phase[k]);
            return v;
        }
    }

    std::vector<std::string> scenario_names() { return {"static", "constant_velocity", "scale", "occlusion", "illumination"}; }

    Scenario scenario_preset(const std::string& name, std::uint64_t seed)
    {
        Scenario s;
        s.name = name;
        s.seed = seed;
        if (name == "static")
        {
            s.width = 320;
            s.height = 240;
            s.frames = 30;
            s.start = Box::from_center({160.0, 120.0}, 40.0, 40.0);
        }
        else if (name == "constant_velocity")
        {
            s.width = 480;
            s.height = 360;
            s.frames = 100;
            s.start = Box::from_center({100.0, 90.0}, 40.0, 40.0);
            s.velocity = {2.4, 1.8};
            s.attributes = {"motion"};
        }
        else if (name == "scale")
        {
            s.width = 320;
            s.height = 240;
            s.frames = 40;
            s.start = Box::from_center({160.0, 120.0}, 30.0, 30.0);
            s.scale_rate = 1.03;
            s.attributes = {"scale-variation"};
        }
        else if (name == "occlusion")
        {
            s.width = 480;
            s.height = 240;
            s.frames = 70;
            s.start = Box::from_center({60.0, 120.0}, 40.0, 40.0);
            s.velocity = {5.0, 0.0};
            s.occlusion_start = 40;
            s.occlusion_duration = 10;
            s.occlusion_coverage = 1.0;
            s.attributes = {"occlusion", "fast-motion"};
        }
        else if (name == "illumination")
        {
            s.width = 320;
            s.height = 240;
            s.frames = 60;
            s.start = Box::from_center({100.0, 100.0}, 40.0, 40.0);
            s.velocity = {1.0, 0.5};
            s.gain_start = 1.0;
            s.gain_end = 0.5;
            s.attributes = {"illumination-variation"};
        }
        else
            throw ScenarioError("unknown scenario '" + name + "'");
        return s;
    }

    std::vector<Box> scenario_truth(const Scenario& s)
    {
        if (s.width < 1 || s.height < 1 || s.frames < 1)
            throw ScenarioError("scenario needs a positive frame size and frame count");
        if (!(s.start.w > 0.0 && s.start.h > 0.0) || !(s.scale_rate > 0.0))
            throw ScenarioError("scenario needs a positive target size and scale rate");
        std::vector<Box> truth;
        const Point2 c0 = s.start.center();
        for (int t = 0; t < s.frames; ++t)
        {
            const double k = std::pow(s.scale_rate, t);
            const Box b = Box::from_center({c0.x + s.velocity.x * t, c0.y + s.velocity.y * t}, s.start.w * k, s.start.h * k);
            if (b.x < 0.0 || b.y < 0.0 || b.x + b.w > s.width || b.y + b.h > s.height)
            {
                char msg[160];
                std::snprintf(msg, sizeof msg, "target leaves the %dx%d frame at frame %d", s.width, s.height, t);
                throw ScenarioError(msg);
            }
            truth.push_back(b);
        }
        return truth;
    }

    Sequence synth_sequence(const Scenario& s)
    {
        if (s.texture_cells < 1)
            throw ScenarioError("texture_cells must be >= 1");
        if (s.noise < 0.0)
            throw ScenarioError("noise must be >= 0");
        Sequence seq;
        seq.name = s.name;
        seq.attributes = s.attributes;
        seq.truth = scenario_truth(s);

        std::mt19937_64 rng(s.seed);
        const Background bg = make_background(rng);
        std::uniform_real_distribution<double> level(0.0, 1.0);
        std::vector<double> texture(static_cast<std::size_t>(s.texture_cells) * s.texture_cells);
        for (double& v : texture)
            v = level(rng);
        constexpr double occluder_level = 0.4;

        // A static block in front of the path: it spans the top `coverage` fraction of
        // every box during the occlusion window, so the target passes behind it.
        std::optional<Box> occluder;
        const double cover = std::clamp(s.occlusion_coverage, 0.0, 1.0);
        const int occ_end = std::min(s.frames, s.occlusion_start + s.occlusion_duration);
        if (s.occlusion_start >= 0 && s.occlusion_duration > 0 && cover > 0.0 && s.occlusion_start < s.frames)
        {
            double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
            for (int t = s.occlusion_start; t < occ_end; ++t)
            {
                const Box& b = seq.truth[t];
                x0 = std::min(x0, b.x);
                y0 = std::min(y0, b.y);
                x1 = std::max(x1, b.x + b.w);
                y1 = std::max(y1, b.y + b.h * cover);
            }
            occluder = Box{x0, y0, x1 - x0, y1 - y0};
        }

        for (int t = 0; t < s.frames; ++t)
        {
            const Box& target = seq.truth[t];
            const bool occluded = occluder && t >= s.occlusion_start && t < occ_end;
            const Box block = occluded ? *occluder : Box{};
            const double gain = s.frames > 1 ? s.gain_start + (s.gain_end - s.gain_start) * t / (s.frames - 1.0) : s.gain_start;

            std::mt19937_64 noise_rng(s.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(t) + 1);
            std::normal_distribution<double> noise(0.0, s.noise > 0.0 ? s.noise : 1.0);

            Image frame(s.width, s.height);
            for (int y = 0; y < s.height; ++y)
            {
                for (int x = 0; x < s.width; ++x)
                {
                    double v = background_at(bg, x + 0.5, y + 0.5);
                    const double ct = coverage(target, x, y);
                    const double co = occluded ? coverage(block, x, y) : 0.0;
                    if (ct > 0.0 || co > 0.0)
                    {
                        // exact area compositing of two axis-aligned boxes within the pixel
                        const double both = occluded ? overlap(x, x + 1.0, std::max(target.x, block.x), std::min(target.x + target.w, block.x + block.w)) *
                                                           overlap(y, y + 1.0, std::max(target.y, block.y), std::min(target.y + target.h, block.y + block.h))
                                                     : 0.0;
                        const double tex = ct > both ? texture_mean(target, texture, s.texture_cells, x, y, ct) : 0.0;
                        v = v * (1.0 - (ct + co - both)) + tex * (ct - both) + occluder_level * co;
                    }
                    v *= gain;
                    if (s.noise > 0.0)
                        v += noise(noise_rng);
                    frame(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
            }
            seq.frames.push_back(std::move(frame));
        }
        return seq;
    }

    void save_sequence(const std::filesystem::path& dir, const Sequence& seq)
    {
        std::filesystem::create_directories(dir / "img");
        char name[32];
        for (int i = 0; i < seq.size(); ++i)
        {
            std::snprintf(name, sizeof name, "%04d.png", i + 1);
            save_image(dir / "img" / name, seq.frame(i));
        }
        std::string gt;
        char line[160];
        for (const Box& b : seq.truth)
        {
            std::snprintf(line, sizeof line, "%.4f,%.4f,%.4f,%.4f\n", b.x + 1.0, b.y + 1.0, b.w, b.h);
            gt += line;
        }
        write_text(dir / "groundtruth_rect.txt", gt);
        std::string attrs;
        for (const std::string& a : seq.attributes)
            attrs += a + "\n";
        write_text(dir / "attributes.txt", attrs);
    }
}
