#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "mhtrack/bench.hpp"

namespace mhtrack
{
    namespace fs = std::filesystem;

    namespace
    {
        struct TrackerFlags
        {
            std::string config_file;
            std::string features;
            bool no_motion = false;
            int workers = 0;
            std::map<std::string, std::string> overrides;

            void attach(CLI::App* cmd)
            {
                cmd->add_option("--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);
                cmd->add_option("--features", features, "handcrafted or external:<dir>");
                cmd->add_flag("--no-motion", no_motion, "disable the Kalman motion module (ablation)");
                cmd->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
                for (const std::string& key : config_keys())
                {
                    if (key == "features" || key == "workers")
                        continue;
                    cmd->add_option("--" + key, overrides[key], "config key " + key);
                }
            }

            TrackerConfig resolve(CLI::App* cmd) const
            {
                TrackerConfig cfg;
                if (!config_file.empty())
                    cfg = load_config(config_file);
                for (const auto& [key, value] : overrides)
                    if (cmd->count("--" + key) > 0)
                        apply_setting(cfg, key, value);
                if (!features.empty())
                    cfg.features = features;
                if (no_motion)
                    cfg.motion_enabled = false;
                if (workers > 0)
                    cfg.workers = workers;
                validate(cfg);
                return cfg;
            }
        };

        std::vector<Box> track(const Sequence& seq, const TrackerConfig& cfg)
        {
            if (seq.truth.empty())
                throw InputError("sequence " + seq.name + " has no initial box");
            return run_sequence([&](int i) { return seq.frame(i); }, seq.size(), seq.truth.front(), cfg);
        }

        void write_reports(const fs::path& out, const MetricReport& report)
        {
            write_text(out / "metrics.json", metrics_json(report));
            write_text(out / "precision.csv", precision_csv(report));
            write_text(out / "success.csv", success_csv(report));
        }

        std::vector<fs::path> sequence_dirs(const fs::path& root)
        {
            if (fs::is_directory(root / "img"))
                return {root};
            std::vector<fs::path> dirs;
            if (fs::is_directory(root))
                for (const auto& e : fs::directory_iterator(root))
                    if (e.is_directory() && fs::is_directory(e.path() / "img"))
                        dirs.push_back(e.path());
            std::sort(dirs.begin(), dirs.end());
            if (dirs.empty())
                throw InputError("no sequences found under " + root.string());
            return dirs;
        }
    }

    int cli_main(const std::vector<std::string>& args)
    {
        CLI::App app{"Multi-branch correlation-filter tracker"};
        app.require_subcommand(1);

        std::string seq_dir, out_dir, traj_file, scenario = "static";
        std::uint64_t seed = 1;
        bool with_vot = false;

        CLI::App* run = app.add_subcommand("run", "track one sequence and write trajectory and metrics");
        run->add_option("--seq", seq_dir, "sequence directory (img/ + groundtruth_rect.txt)")->required();
        run->add_option("--out", out_dir, "output directory")->required();
        TrackerFlags run_flags;
        run_flags.attach(run);

        CLI::App* bench = app.add_subcommand("bench", "track every sequence under a directory and aggregate metrics");
        bench->add_option("--seq", seq_dir, "directory of sequences")->required();
        bench->add_option("--out", out_dir, "output directory")->required();
        bench->add_flag("--vot", with_vot, "also run the restart protocol");
        TrackerFlags bench_flags;
        bench_flags.attach(bench);

        CLI::App* synth = app.add_subcommand("synth", "render a synthetic scenario to disk");
        synth->add_option("--scenario", scenario, "static, constant_velocity, scale, occlusion or illumination");
        synth->add_option("--seed", seed, "texture and noise seed");
        synth->add_option("--out", out_dir, "output directory")->required();

        CLI::App* eval = app.add_subcommand("eval", "metrics from a saved trajectory and ground truth");
        eval->add_option("--traj", traj_file, "trajectory file, one 0-based x,y,w,h per line")->required()->check(CLI::ExistingFile);
        eval->add_option("--seq", seq_dir, "sequence directory holding groundtruth_rect.txt")->required();
        eval->add_option("--out", out_dir, "output directory")->required();

        std::vector<std::string> reversed(args.rbegin(), args.rend());
        try
        {
            app.parse(reversed);
        }
        catch (const CLI::CallForHelp& e)
        {
            return app.exit(e);
        }
        catch (const CLI::CallForAllHelp& e)
        {
            return app.exit(e);
        }
        catch (const CLI::ParseError& e)
        {
            std::cerr << "error: " << e.what() << "\n\n" << app.help();
            return 1;
        }

        try
        {
            if (run->parsed())
            {
                const TrackerConfig cfg = run_flags.resolve(run);
                const Sequence seq = load_sequence(seq_dir);
                const std::vector<Box> traj = track(seq, cfg);
                write_trajectory(fs::path(out_dir) / "trajectory.txt", traj);
                MetricReport report = otb_metrics(traj, seq.truth);
                report.per_sequence[seq.name] = report.overall;
                for (const std::string& a : seq.attributes)
                    report.per_attribute[a] = report.overall;
                write_reports(out_dir, report);
                write_text(fs::path(out_dir) / "config.txt", format_config(cfg));
            }
            else if (bench->parsed())
            {
                const TrackerConfig cfg = bench_flags.resolve(bench);
                MetricReport report;
                std::vector<CurveReport> all;
                std::map<std::string, std::vector<CurveReport>> by_attr;
                double acc = 0.0, rob = 0.0;
                const std::vector<fs::path> dirs = sequence_dirs(seq_dir);
                for (const fs::path& dir : dirs)
                {
                    const Sequence seq = load_sequence(dir);
                    const std::vector<Box> traj = track(seq, cfg);
                    write_trajectory(fs::path(out_dir) / "trajectories" / (seq.name + ".txt"), traj);
                    const CurveReport c = otb_curves(traj, seq.truth);
                    report.per_sequence[seq.name] = c;
                    all.push_back(c);
                    for (const std::string& a : seq.attributes)
                        by_attr[a].push_back(c);
                    if (with_vot)
                    {
                        const VotResult v = vot_evaluate(tracker_factory(cfg), seq);
                        acc += v.accuracy / dirs.size();
                        rob += static_cast<double>(v.robustness) / dirs.size();
                    }
                    std::cerr << seq.name << ": AUC " << c.auc << ", precision@20 " << c.precision20 << "\n";
                }
                report.overall = average_curves(all);
                for (const auto& [a, curves] : by_attr)
                    report.per_attribute[a] = average_curves(curves);
                report.accuracy = acc;
                report.robustness = rob;
                write_reports(out_dir, report);
                write_text(fs::path(out_dir) / "config.txt", format_config(cfg));
            }
            else if (synth->parsed())
            {
                const Sequence seq = synth_sequence(scenario_preset(scenario, seed));
                save_sequence(out_dir, seq);
            }
            else if (eval->parsed())
            {
                fs::path gt = seq_dir;
                if (fs::is_directory(gt))
                    gt /= "groundtruth_rect.txt";
                std::ifstream in(gt);
                if (!in)
                    throw InputError("cannot open ground truth " + gt.string());
                std::stringstream ss;
                ss << in.rdbuf();
                const std::vector<Box> truth = parse_groundtruth(ss.str(), gt.string());
                const std::vector<Box> traj = load_trajectory(traj_file);
                write_reports(out_dir, otb_metrics(traj, truth));
            }
        }
        catch (const InputError& e)
        {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
        catch (const std::exception& e)
        {
            std::cerr << "internal error: " << e.what() << "\n";
            return 2;
        }
        return 0;
    }
}
