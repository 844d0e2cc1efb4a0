#include "mhtrack/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace mhtrack
{
    namespace fs = std::filesystem;

    Image Sequence::frame(int i) const
    {
        if (i < 0 || i >= size())
            throw InputError("frame index " + std::to_string(i) + " out of range");
        if (!frames.empty())
            return frames[i];
        return load_image(frame_paths[i]);
    }

    namespace
    {
        std::string read_file(const fs::path& path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
                throw InputError("cannot open " + path.string());
            std::stringstream ss;
            ss << in.rdbuf();
            return ss.str();
        }

        bool numeric_stem(const fs::path& p, long long& value)
        {
            const std::string stem = p.stem().string();
            if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); }))
                return false;
            value = std::stoll(stem);
            return true;
        }

        std::vector<Box> parse_boxes(const std::string& text, const std::string& origin, double offset)
        {
            std::vector<Box> boxes;
            std::istringstream in(text);
            std::string line;
            int number = 0;
            while (std::getline(in, line))
            {
                ++number;
                for (char& c : line)
                    if (c == ',' || c == '\t' || c == ';' || c == '\r')
                        c = ' ';
                std::istringstream fields(line);
                std::vector<double> v;
                std::string tok;
                while (fields >> tok)
                {
                    std::size_t used = 0;
                    double x = 0.0;
                    try
                    {
                        x = std::stod(tok, &used);
                    }
                    catch (const std::exception&)
                    {
                        used = 0;
                    }
                    if (used != tok.size() || !std::isfinite(x))
                        throw ParseError(origin, number, "not a number: '" + tok + "'");
                    v.push_back(x);
                }
                if (v.empty())
                    continue;
                if (v.size() != 4)
                    throw ParseError(origin, number, "expected 4 values x,y,w,h, got " + std::to_string(v.size()));
                if (v[2] < 0.0 || v[3] < 0.0)
                    throw ParseError(origin, number, "negative box size");
                boxes.push_back({v[0] - offset, v[1] - offset, v[2], v[3]});
            }
            return boxes;
        }
    }

    std::vector<Box> parse_groundtruth(const std::string& text, const std::string& origin)
    {
        return parse_boxes(text, origin, 1.0);
    }

    Sequence load_sequence(const fs::path& dir)
    {
        if (!fs::is_directory(dir))
            throw InputError("sequence directory not found: " + dir.string());
        const fs::path img = dir / "img";
        if (!fs::is_directory(img))
            throw InputError("missing image folder: " + img.string());
        const fs::path gt = dir / "groundtruth_rect.txt";
        if (!fs::is_regular_file(gt))
            throw InputError("missing ground truth: " + gt.string());

        std::vector<std::pair<long long, fs::path>> found;
        for (const auto& entry : fs::directory_iterator(img))
        {
            std::string ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
            long long n = 0;
            if (entry.is_regular_file() && (ext == ".jpg" || ext == ".jpeg" || ext == ".png") &&
                numeric_stem(entry.path(), n))
                found.emplace_back(n, entry.path());
        }
        std::sort(found.begin(), found.end());
        if (found.empty())
            throw InputError("no frames in " + img.string());

        Sequence seq;
        seq.name = dir.filename().string();
        if (seq.name.empty())
            seq.name = dir.parent_path().filename().string();
        for (auto& [n, p] : found)
            seq.frame_paths.push_back(std::move(p));
        seq.truth = parse_groundtruth(read_file(gt), gt.string());
        if (seq.truth.size() != seq.frame_paths.size())
            throw InputError("frame/ground-truth count mismatch in " + dir.string() + ": " +
                             std::to_string(seq.frame_paths.size()) + " frames, " + std::to_string(seq.truth.size()) +
                             " boxes");
        const fs::path attr = dir / "attributes.txt";
        if (fs::is_regular_file(attr))
        {
            std::string text = read_file(attr);
            std::replace(text.begin(), text.end(), ',', ' ');
            std::istringstream in(text);
            std::string tag;
            while (in >> tag)
                seq.attributes.push_back(tag);
        }
        return seq;
    }

    std::vector<Box> load_trajectory(const fs::path& path)
    {
        return parse_boxes(read_file(path), path.string(), 0.0);
    }

    std::string format_trajectory(std::span<const Box> boxes)
    {
        std::string out;
        char line[160];
        for (const Box& b : boxes)
        {
            std::snprintf(line, sizeof line, "%.4f,%.4f,%.4f,%.4f\n", b.x, b.y, b.w, b.h);
            out += line;
        }
        return out;
    }

    void write_text(const fs::path& path, const std::string& text)
    {
        if (path.has_parent_path())
            fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw InputError("cannot write " + path.string());
        out << text;
    }

    void write_trajectory(const fs::path& path, std::span<const Box> boxes) { write_text(path, format_trajectory(boxes)); }

    double iou(const Box& a, const Box& b)
    {
        const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
        const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
        if (iw <= 0.0 || ih <= 0.0)
            return 0.0;
        const double inter = iw * ih;
        const double uni = a.w * a.h + b.w * b.h - inter;
        return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
    }

    double center_distance(const Box& a, const Box& b)
    {
        const Point2 ca = a.center(), cb = b.center();
        return std::hypot(ca.x - cb.x, ca.y - cb.y);
    }

    double success_threshold(int i) { return i / static_cast<double>(success_samples - 1); }

    CurveReport otb_curves(std::span<const Box> trajectory, std::span<const Box> truth)
    {
        if (trajectory.size() != truth.size())
            throw InputError("trajectory has " + std::to_string(trajectory.size()) + " boxes but ground truth has " +
                             std::to_string(truth.size()));
        if (truth.empty())
            throw InputError("empty trajectory");
        const std::size_t n = truth.size();
        std::vector<double> dist(n), overlap(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            dist[i] = center_distance(trajectory[i], truth[i]);
            overlap[i] = iou(trajectory[i], truth[i]);
        }
        CurveReport r;
        r.frames = static_cast<int>(n);
        for (int t = 0; t <= precision_max_threshold; ++t)
        {
            const auto hits = std::count_if(dist.begin(), dist.end(), [t](double d) { return d <= t; });
            r.precision.push_back(static_cast<double>(hits) / n);
        }
        for (int i = 0; i < success_samples; ++i)
        {
            const double s = success_threshold(i);
            const auto hits = std::count_if(overlap.begin(), overlap.end(), [s](double o) { return o >= s; });
            r.success.push_back(static_cast<double>(hits) / n);
        }
        r.auc = std::accumulate(r.success.begin(), r.success.end(), 0.0) / success_samples;
        r.op = r.success[(success_samples - 1) / 2];
        r.precision20 = r.precision[20];
        r.mean_iou = std::accumulate(overlap.begin(), overlap.end(), 0.0) / n;
        return r;
    }

    MetricReport otb_metrics(std::span<const Box> trajectory, std::span<const Box> truth)
    {
        MetricReport m;
        m.overall = otb_curves(trajectory, truth);
        return m;
    }

    CurveReport average_curves(std::span<const CurveReport> curves)
    {
        CurveReport r;
        if (curves.empty())
            return r;
        r.precision.assign(precision_max_threshold + 1, 0.0);
        r.success.assign(success_samples, 0.0);
        const double k = static_cast<double>(curves.size());
        for (const CurveReport& c : curves)
        {
            for (std::size_t i = 0; i < r.precision.size(); ++i)
                r.precision[i] += c.precision[i] / k;
            for (std::size_t i = 0; i < r.success.size(); ++i)
                r.success[i] += c.success[i] / k;
            r.mean_iou += c.mean_iou / k;
            r.frames += c.frames;
        }
        r.auc = std::accumulate(r.success.begin(), r.success.end(), 0.0) / success_samples;
        r.op = r.success[(success_samples - 1) / 2];
        r.precision20 = r.precision[20];
        return r;
    }

    VotResult vot_evaluate(const TrackerFactory& factory, const Sequence& sequence)
    {
        const int n = sequence.size();
        if (n < 1 || static_cast<int>(sequence.truth.size()) != n)
            throw InputError("vot_evaluate: sequence needs one ground-truth box per frame");
        VotResult r;
        double total = 0.0;
        int f = 0;
        while (f < n)
        {
            std::unique_ptr<VotTracker> tracker = factory();
            tracker->initialize(sequence.frame(f), sequence.truth[f]);
            const int start = f;
            if (start > 0)
                r.reinit_frames.push_back(start);
            bool failed = false;
            for (f = start + 1; f < n; ++f)
            {
                const Box b = tracker->update(sequence.frame(f));
                const double o = iou(b, sequence.truth[f]);
                if (o <= 0.0)
                {
                    r.failures.push_back(f);
                    ++r.robustness;
                    failed = true;
                    break;
                }
                if (start == 0 || f - start > vot_burn_in)
                {
                    total += o;
                    ++r.accuracy_frames;
                }
            }
            if (!failed)
                break;
            f += vot_skip_frames + 1;
        }
        r.accuracy = r.accuracy_frames > 0 ? total / r.accuracy_frames : 0.0;
        return r;
    }

    namespace
    {
        class MultiBranchTracker : public VotTracker
        {
        public:
            MultiBranchTracker(TrackerConfig config, std::shared_ptr<const FeatureSource> source)
                : config_(std::move(config)), source_(std::move(source)) {}

            void initialize(const Image& frame, const Box& box) override
            {
                state_ = init(frame, box, config_, source_);
            }

            Box update(const Image& frame) override
            {
                if (!state_)
                    throw StateError("tracker used before initialize");
                return step(*state_, frame).box;
            }

        private:
            TrackerConfig config_;
            std::shared_ptr<const FeatureSource> source_;
            std::optional<TrackerState> state_;
        };

        nlohmann::ordered_json curve_json(const CurveReport& c)
        {
            nlohmann::ordered_json j;
            j["frames"] = c.frames;
            j["precision_at_20"] = c.precision20;
            j["auc"] = c.auc;
            j["op_at_0.5"] = c.op;
            j["mean_iou"] = c.mean_iou;
            j["precision_curve"] = c.precision;
            j["success_curve"] = c.success;
            return j;
        }

        std::string curve_rows(const MetricReport& m, bool precision)
        {
            std::vector<std::pair<std::string, const CurveReport*>> cols{{"overall", &m.overall}};
            for (const auto& [k, v] : m.per_sequence)
                cols.emplace_back("seq:" + k, &v);
            for (const auto& [k, v] : m.per_attribute)
                cols.emplace_back("attr:" + k, &v);
            std::ostringstream os;
            os << (precision ? "threshold_px" : "iou_threshold");
            for (const auto& c : cols)
                os << "," << c.first;
            os << "\n";
            const int rows = precision ? precision_max_threshold + 1 : success_samples;
            char buf[64];
            for (int i = 0; i < rows; ++i)
            {
                if (precision)
                    os << i;
                else
                {
                    std::snprintf(buf, sizeof buf, "%.2f", success_threshold(i));
                    os << buf;
                }
                for (const auto& c : cols)
                {
                    const std::vector<double>& v = precision ? c.second->precision : c.second->success;
                    std::snprintf(buf, sizeof buf, ",%.6f", i < static_cast<int>(v.size()) ? v[i] : 0.0);
                    os << buf;
                }
                os << "\n";
            }
            return os.str();
        }
    }

    TrackerFactory tracker_factory(const TrackerConfig& config)
    {
        // one feature source shared by every restart, so external feature caches survive
        auto source = make_feature_source(config);
        return [config, source]() -> std::unique_ptr<VotTracker> {
            return std::make_unique<MultiBranchTracker>(config, source);
        };
    }

    std::string metrics_json(const MetricReport& m)
    {
        nlohmann::ordered_json j;
        j["overall"] = curve_json(m.overall);
        j["vot"] = {{"accuracy", m.accuracy}, {"robustness", m.robustness}};
        nlohmann::ordered_json seqs = nlohmann::ordered_json::object();
        for (const auto& [k, v] : m.per_sequence)
            seqs[k] = curve_json(v);
        j["sequences"] = seqs;
        nlohmann::ordered_json attrs = nlohmann::ordered_json::object();
        for (const auto& [k, v] : m.per_attribute)
            attrs[k] = curve_json(v);
        j["per_attribute"] = attrs;
        return j.dump(2) + "\n";
    }

    std::string precision_csv(const MetricReport& m) { return curve_rows(m, true); }
    std::string success_csv(const MetricReport& m) { return curve_rows(m, false); }
}
