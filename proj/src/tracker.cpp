#include "mhtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mhtrack/parallel.hpp"

namespace mhtrack
{
    namespace
    {
        double search_side(double w, double h, double area_scale) { return std::sqrt(area_scale * w * h); }

        double grid_center(int cells) { return 0.5 * (cells - 1); }

        Geometry make_geometry(const TrackerConfig& cfg, double side)
        {
            int step = 1;
            for (const LayerSpec& l : cfg.layers)
                step = std::lcm(step, l.cell_size);
            const double clamped = std::clamp(side, static_cast<double>(cfg.canonical_min),
                                              static_cast<double>(cfg.canonical_max));
            int edge = static_cast<int>(std::floor(clamped / step)) * step;
            if (edge < cfg.canonical_min)
                edge = static_cast<int>(std::ceil(static_cast<double>(cfg.canonical_min) / step)) * step;
            Geometry g;
            g.canonical = edge;
            for (const LayerSpec& l : cfg.layers)
                g.grid.push_back(edge / l.cell_size);
            g.finest = static_cast<int>(std::max_element(g.grid.begin(), g.grid.end()) - g.grid.begin());
            return g;
        }

        // Search windows are centered on the patch, so the motion map is centered too.
        std::vector<SpatialMap> make_windows(const TrackerConfig& cfg, const Geometry& g)
        {
            std::vector<SpatialMap> out;
            for (std::size_t l = 0; l < cfg.layers.size(); ++l)
            {
                const int n = g.grid[l];
                SpatialMap w = cosine_window(n, n);
                if (cfg.motion_enabled && cfg.motion_layers[l])
                {
                    const double c = grid_center(n);
                    w = multiply(w, motion_map(n, n, {c, c}, cfg.motion_kind, cfg.motion_spread * n));
                }
                out.push_back(std::move(w));
            }
            return out;
        }

        TrainingSample region_sample(const TrackerState& s, const Image& frame, Point2 center, Size2 target)
        {
            const double side = search_side(target.w, target.h, s.config.search_area_scale);
            const int e = s.geometry.canonical;
            const FeatureStack raw = s.source->extract(s.frame_index, frame, center, side, side, e, e);
            if (raw.layers.size() != s.branches.size())
                throw DimensionError("feature source returned the wrong number of layers");
            TrainingSample sample;
            sample.layers.resize(raw.layers.size());
            parallel_for(static_cast<int>(raw.layers.size()), s.config.workers,
                         [&](int l) { sample.layers[l] = layer_spectra(s, raw.layers[l], l); });
            return sample;
        }

        double label_energy(const BranchModel& b) { return std::max(squared_norm(b.label), 1e-300); }

        std::vector<double> compute_energies(const TrackerState& s)
        {
            std::vector<double> e(s.branches.size(), 0.0);
            parallel_for(static_cast<int>(s.branches.size()), s.config.workers, [&](int l) {
                const BranchModel& b = s.branches[l];
                double energy = 0.0;
                if (s.config.fusion_energy == EnergySource::memory && !s.memory.empty())
                {
                    for (const WeightedSlice& slice : s.memory.layer_slice(l))
                        energy += slice.weight * branch_energy(b, slice.spectra());
                }
                else
                    energy = branch_energy(b, s.last_sample->layers[l]);
                e[l] = energy / label_energy(b);
            });
            return e;
        }

        struct Fused
        {
            std::vector<SpatialMap> scores;
            SpatialMap fused;
            Peak peak;
        };

        Fused fuse_responses(const TrackerState& s, const TrainingSample& z, const FusionWeights& weights)
        {
            Fused f;
            f.scores.resize(s.branches.size());
            parallel_for(static_cast<int>(s.branches.size()), s.config.workers,
                         [&](int l) { f.scores[l] = detect_spectra(z.layers[l], s.branches[l]); });

            // Cell j of a grid with cell size c is centered at canonical pixel (j + 0.5) c.
            // After upsampling to the finest grid, a coarse map is off by (ratio - 1) / 2 cells.
            const int fine_cell = s.config.layers[s.geometry.finest].cell_size;
            std::vector<Point2> offsets;
            for (const LayerSpec& l : s.config.layers)
            {
                const double d = 0.5 * (static_cast<double>(l.cell_size) / fine_cell - 1.0);
                offsets.push_back({d, d});
            }
            const int n = s.geometry.grid[s.geometry.finest];
            f.fused = fuse_scores(f.scores, weights, n, n, offsets);
            f.peak = localize(f.fused);
            return f;
        }

        Point2 peak_to_frame(const TrackerState& s, Point2 peak, Point2 center, double side)
        {
            const int n = s.geometry.grid[s.geometry.finest];
            const double cell = s.config.layers[s.geometry.finest].cell_size;
            const double to_frame = side / s.geometry.canonical;
            double dx = peak.x - grid_center(n), dy = peak.y - grid_center(n);
            // responses are periodic: map displacements into [-n/2, n/2)
            dx -= n * std::floor(dx / n + 0.5);
            dy -= n * std::floor(dy / n + 0.5);
            return {center.x + dx * cell * to_frame, center.y + dy * cell * to_frame};
        }

        void train(TrackerState& s, int iterations, std::vector<BranchDiagnostics>* diag)
        {
            parallel_for(static_cast<int>(s.branches.size()), s.config.workers, [&](int l) {
                BranchModel& b = s.branches[l];
                const NormalEqSystem system = build_normal_equations(s.memory.layer_slice(l), b);
                CgReport report;
                b.filters = solve_cg(system, b.filters, iterations, s.config.cg_formula, &report);
                if (diag)
                {
                    (*diag)[l].cg_iterations = report.iterations;
                    (*diag)[l].cg_relative_residual = report.relative_residual;
                }
            });
        }

        bool outside_frame(const Box& b, const Image& frame)
        {
            return b.x + b.w <= 0.0 || b.y + b.h <= 0.0 || b.x >= frame.width() || b.y >= frame.height();
        }
    }

    LayerSpectra layer_spectra(const TrackerState& s, const FeatureLayer& raw, int l)
    {
        FeatureLayer proj = pca_project_layer(raw, s.basis.layers[l]);
        const SpatialMap& win = s.windows[l];
        double scale = 1.0;
        if (s.config.normalize_features)
        {
            double energy = 0.0;
            for (const SpatialMap& ch : proj.channels)
                energy += squared_norm(ch);
            const double elements = static_cast<double>(win.size()) * proj.channels.size();
            if (energy > 0.0)
                scale = std::sqrt(elements / energy);
        }
        LayerSpectra out;
        out.reserve(proj.channels.size());
        for (SpatialMap& ch : proj.channels)
        {
            require_same_shape(ch, win, "feature window");
            for (std::size_t i = 0; i < ch.size(); ++i)
                ch[i] *= scale * win[i];
            out.push_back(dft2(ch));
        }
        return out;
    }

    std::shared_ptr<const FeatureSource> make_feature_source(const TrackerConfig& config)
    {
        const std::string prefix = "external:";
        if (config.features == "handcrafted")
            return std::make_shared<HandcraftedSource>(config.layers, config.orientation_bins);
        if (config.features.rfind(prefix, 0) == 0)
            return std::make_shared<ExternalSource>(config.features.substr(prefix.size()), config.layers);
        throw InputError("unknown feature source '" + config.features + "' (expected handcrafted or external:<dir>)");
    }

    TrackerState init(const Image& frame, const Box& box, const TrackerConfig& config,
                      std::shared_ptr<const FeatureSource> source)
    {
        validate(config);
        if (!(box.w >= 4.0) || !(box.h >= 4.0))
            throw InputError("degenerate initial box: width and height must be at least 4 px");
        const Point2 c = box.center();
        if (!(c.x >= 0.0 && c.y >= 0.0 && c.x <= frame.width() && c.y <= frame.height()))
            throw InputError("initial box center lies outside the frame");

        TrackerState s;
        s.config = config;
        s.source = source ? std::move(source) : make_feature_source(config);
        s.memory = SampleMemory(config.memory_capacity);
        s.box = box;
        s.frame_index = 0;

        const double side = search_side(box.w, box.h, config.search_area_scale);
        s.geometry = make_geometry(config, side);
        s.windows = make_windows(config, s.geometry);

        const int e = s.geometry.canonical;
        const FeatureStack raw = s.source->extract(0, frame, c, side, side, e, e);
        if (raw.layers.size() != config.layers.size())
            throw DimensionError("feature source returned the wrong number of layers");
        s.basis = pca_fit(raw, config.layers);

        const double target_w = box.w * e / side, target_h = box.h * e / side;
        for (std::size_t l = 0; l < config.layers.size(); ++l)
        {
            const LayerSpec& spec = config.layers[l];
            const int n = s.geometry.grid[l];
            const double tw = target_w / spec.cell_size, th = target_h / spec.cell_size;
            const double sigma = spec.label_sigma_factor * std::sqrt(tw * th);
            SpatialMap label = gaussian_label(n, n, grid_center(n), grid_center(n), sigma);
            SpatialMap reg = make_reg_window(n, n, tw, th, config.reg);
            s.branches.push_back(make_branch(spec, spec.channels_out, std::move(label), std::move(reg), config.lambdas[l]));
        }

        TrainingSample first;
        first.layers.resize(raw.layers.size());
        for (std::size_t l = 0; l < raw.layers.size(); ++l)
            first.layers[l] = layer_spectra(s, raw.layers[l], static_cast<int>(l));
        s.last_sample = std::make_shared<const TrainingSample>(std::move(first));
        s.memory.insert(s.last_sample, config.learning_rate);
        train(s, config.cg_init_iters, nullptr);

        s.kalman_config = KalmanConfig::constant_velocity(config.kalman_q, config.kalman_r);
        s.kalman = km_init(c, config.kalman_p0_pos, config.kalman_p0_vel);

        s.energies = compute_energies(s);
        s.weights = solve_weights(s.energies, config.fusion_reg);
        s.peak_level = fuse_responses(s, *s.last_sample, s.weights).peak.value;
        return s;
    }

    ScaleResult scale_search_at(const TrackerState& s, const Image& frame, Point2 center)
    {
        const TrackerConfig& cfg = s.config;
        const int layer = cfg.scale.layer;
        const int e = s.geometry.canonical;
        const ScaleFeatureFn features = [&](Size2 cand) {
            const double side = search_side(cand.w, cand.h, cfg.search_area_scale);
            const FeatureLayer raw = s.source->extract_layer(layer, s.frame_index, frame, center, side, side, e, e);
            return layer_spectra(s, raw, layer);
        };
        return scale_search(features, {s.box.w, s.box.h}, s.branches[layer], cfg.scale, cfg.workers);
    }

    Point2 detect_at(const TrackerState& s, const Image& frame, Point2 center)
    {
        const double side = search_side(s.box.w, s.box.h, s.config.search_area_scale);
        const TrainingSample z = region_sample(s, frame, center, {s.box.w, s.box.h});
        const Fused f = fuse_responses(s, z, s.weights);
        return peak_to_frame(s, f.peak.position, center, side);
    }

    StepResult step(TrackerState& s, const Image& frame)
    {
        if (s.branches.empty())
            throw StateError("step: tracker is not initialized");
        const TrackerConfig& cfg = s.config;
        const KalmanState kalman_before = s.kalman;
        ++s.frame_index;

        Diagnostics diag;
        diag.frame_index = s.frame_index;
        diag.branches.resize(s.branches.size());

        const FrameBounds bounds{static_cast<double>(frame.width()), static_cast<double>(frame.height())};
        const Point2 center = cfg.motion_enabled ? predict_search_center(s.kalman, s.kalman_config, bounds)
                                                 : s.box.center();
        s.kalman = km_predict(s.kalman, s.kalman_config);
        diag.search_center = center;

        const Size2 size{s.box.w, s.box.h};
        const double side = search_side(size.w, size.h, cfg.search_area_scale);
        const TrainingSample z = region_sample(s, frame, center, size);

        if (cfg.fusion_energy_every_frame || s.frame_index % cfg.update_interval == 0)
            s.energies = compute_energies(s);
        FusionWeights w = solve_weights(s.energies, cfg.fusion_reg);
        if (cfg.fusion_smoothing > 0.0 && s.weights.m.size() == w.m.size())
        {
            for (std::size_t l = 0; l < w.m.size(); ++l)
                w.m[l] = (1.0 - cfg.fusion_smoothing) * w.m[l] + cfg.fusion_smoothing * s.weights.m[l];
            const double total = std::accumulate(w.m.begin(), w.m.end(), 0.0);
            for (double& v : w.m)
                v /= total;
        }

        const Fused fused = fuse_responses(s, z, w);
        for (std::size_t l = 0; l < s.branches.size(); ++l)
        {
            const Peak p = localize(fused.scores[l]);
            diag.branches[l].peak = p.position;
            diag.branches[l].peak_value = p.value;
            diag.branches[l].energy = s.energies[l];
        }
        diag.weights = w;
        diag.fused_peak = fused.peak.value;

        Point2 located = peak_to_frame(s, fused.peak.position, center, side);
        const Box candidate = Box::from_center(located, size.w, size.h);
        if (outside_frame(candidate, frame))
        {
            // tracking lost: freeze everything, restarts are the caller's decision
            s.kalman = kalman_before;
            s.lost = true;
            diag.lost = true;
            diag.confident = false;
            return {s.box, diag};
        }
        s.lost = false;
        s.weights = w;

        const bool confident = !(cfg.confidence_ratio > 0.0) || fused.peak.value >= cfg.confidence_ratio * s.peak_level;
        diag.confident = confident;
        if (confident)
            s.peak_level = cfg.confidence_decay * s.peak_level + (1.0 - cfg.confidence_decay) * fused.peak.value;

        Size2 new_size = size;
        if (cfg.scale_enabled && confident)
        {
            const ScaleResult r = scale_search_at(s, frame, located);
            diag.scale_n = r.best_n;
            new_size = r.new_size;
        }

        if (confident)
        {
            Innovation innovation;
            s.kalman = km_update(s.kalman, Vec2(located.x, located.y), s.kalman_config, &innovation);
            diag.innovation = innovation.residual;
        }

        located.x = std::clamp(located.x, 0.0, bounds.width);
        located.y = std::clamp(located.y, 0.0, bounds.height);
        s.box = Box::from_center(located, new_size.w, new_size.h);

        if (confident)
        {
            s.last_sample = std::make_shared<const TrainingSample>(region_sample(s, frame, located, new_size));
            s.memory.insert(s.last_sample, cfg.learning_rate);
        }
        if (s.frame_index % cfg.update_interval == 0)
        {
            train(s, cfg.cg_update_iters, &diag.branches);
            diag.trained = true;
        }
        return {s.box, diag};
    }

    std::vector<Box> run_sequence(const std::function<Image(int)>& frame_at, int frame_count, const Box& init_box,
                                  const TrackerConfig& config, std::vector<Diagnostics>* diagnostics)
    {
        if (frame_count < 1)
            throw InputError("run_sequence: no frames");
        std::vector<Box> trajectory{init_box};
        TrackerState state = init(frame_at(0), init_box, config);
        for (int i = 1; i < frame_count; ++i)
        {
            StepResult r = step(state, frame_at(i));
            trajectory.push_back(r.box);
            if (diagnostics)
                diagnostics->push_back(std::move(r.diagnostics));
        }
        return trajectory;
    }

    std::vector<Box> run_sequence(std::span<const Image> frames, const Box& init_box, const TrackerConfig& config,
                                  std::vector<Diagnostics>* diagnostics)
    {
        return run_sequence([&](int i) { return frames[i]; }, static_cast<int>(frames.size()), init_box, config,
                            diagnostics);
    }
}
