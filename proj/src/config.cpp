#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mhtrack/tracker.hpp"

namespace mhtrack
{
    namespace
    {
        std::string trim(const std::string& s)
        {
            const auto b = s.find_first_not_of(" \t\r\n");
            if (b == std::string::npos)
                return {};
            const auto e = s.find_last_not_of(" \t\r\n");
            return s.substr(b, e - b + 1);
        }

        std::vector<std::string> split_list(const std::string& value)
        {
            std::vector<std::string> out;
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ','))
                out.push_back(trim(item));
            return out;
        }

        double to_double(const std::string& key, const std::string& v)
        {
            double out = 0.0;
            const std::string t = trim(v);
            // a/b fractions are allowed so label factors can be written as 1/12
            const auto slash = t.find('/');
            if (slash != std::string::npos)
                return to_double(key, t.substr(0, slash)) / to_double(key, t.substr(slash + 1));
            const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
            if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
                throw InputError("config key '" + key + "': expected a number, got '" + v + "'");
            return out;
        }

        int to_int(const std::string& key, const std::string& v)
        {
            int out = 0;
            const std::string t = trim(v);
            const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
            if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
                throw InputError("config key '" + key + "': expected an integer, got '" + v + "'");
            return out;
        }

        bool to_bool(const std::string& key, const std::string& v)
        {
            const std::string t = trim(v);
            if (t == "true" || t == "1" || t == "on" || t == "yes")
                return true;
            if (t == "false" || t == "0" || t == "off" || t == "no")
                return false;
            throw InputError("config key '" + key + "': expected true/false, got '" + v + "'");
        }

        template <class T, class Conv>
        std::vector<T> to_list(const std::string& key, const std::string& v, std::size_t expected, Conv conv)
        {
            std::vector<T> out;
            for (const std::string& item : split_list(v))
                out.push_back(conv(key, item));
            if (out.size() != expected)
                throw InputError("config key '" + key + "': expected " + std::to_string(expected) +
                                 " values (one per layer), got " + std::to_string(out.size()));
            return out;
        }

        std::string fmt(double v)
        {
            std::ostringstream os;
            os.precision(17);
            os << v;
            return os.str();
        }

        template <class T, class F>
        std::string join(const std::vector<T>& v, F f)
        {
            std::string out;
            for (std::size_t i = 0; i < v.size(); ++i)
                out += (i ? "," : "") + f(v[i]);
            return out;
        }

        void set_layers(TrackerConfig& c, const std::string& v)
        {
            const std::string t = trim(v);
            std::vector<LayerSpec> layers;
            if (t == "handcrafted")
                layers = handcrafted_layers();
            else if (t == "resnet")
                layers = resnet_layers();
            else
            {
                for (const std::string& name : split_list(t))
                {
                    if (name.empty())
                        throw InputError("config key 'layers': empty layer name");
                    LayerSpec spec;
                    spec.name = name;
                    layers.push_back(spec);
                }
            }
            if (layers.empty())
                throw InputError("config key 'layers': no layers given");
            // keep per-layer values where the old list had an entry at that index
            const std::size_t n = layers.size();
            c.lambdas.resize(n, c.lambdas.empty() ? 1e-2 : c.lambdas.back());
            c.motion_layers.resize(n, true);
            c.layers = std::move(layers);
        }

        using Setter = std::function<void(TrackerConfig&, const std::string&, const std::string&)>;

        const std::vector<std::pair<std::string, Setter>>& setters()
        {
            static const std::vector<std::pair<std::string, Setter>> table = {
                {"layers", [](TrackerConfig& c, const std::string&, const std::string& v) { set_layers(c, v); }},
                {"cell_sizes",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) {
                     const auto vals = to_list<int>(k, v, c.layers.size(), to_int);
                     for (std::size_t i = 0; i < vals.size(); ++i)
                         c.layers[i].cell_size = vals[i];
                 }},
                {"channels_out",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) {
                     const auto vals = to_list<int>(k, v, c.layers.size(), to_int);
                     for (std::size_t i = 0; i < vals.size(); ++i)
                         c.layers[i].channels_out = vals[i];
                 }},
                {"label_sigma_factors",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) {
                     const auto vals = to_list<double>(k, v, c.layers.size(), to_double);
                     for (std::size_t i = 0; i < vals.size(); ++i)
                         c.layers[i].label_sigma_factor = vals[i];
                 }},
                {"lambdas",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) {
                     c.lambdas = to_list<double>(k, v, c.layers.size(), to_double);
                 }},
                {"orientation_bins",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.orientation_bins = to_int(k, v); }},
                {"normalize_features",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.normalize_features = to_bool(k, v); }},
                {"features", [](TrackerConfig& c, const std::string&, const std::string& v) { c.features = trim(v); }},
                {"memory_capacity",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.memory_capacity = to_int(k, v); }},
                {"learning_rate",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.learning_rate = to_double(k, v); }},
                {"update_interval",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.update_interval = to_int(k, v); }},
                {"cg_init_iters",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.cg_init_iters = to_int(k, v); }},
                {"cg_update_iters",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.cg_update_iters = to_int(k, v); }},
                {"cg_formula",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) {
                     const std::string t = trim(v);
                     if (t == "fletcher_reeves")
                         c.cg_formula = CgFormula::fletcher_reeves;
                     else if (t == "polak_ribiere")
                         c.cg_formula = CgFormula::polak_ribiere;
                     else
                         throw InputError("config key '" + k + "': expected fletcher_reeves or polak_ribiere");
                 }},
                {"reg_min", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.reg.min_value = to_double(k, v); }},
                {"reg_eta", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.reg.eta = to_double(k, v); }},
                {"reg_max", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.reg.max_value = to_double(k, v); }},
                {"search_area_scale",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.search_area_scale = to_double(k, v); }},
                {"canonical_min",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.canonical_min = to_int(k, v); }},
                {"canonical_max",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.canonical_max = to_int(k, v); }},
                {"scale_enabled",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.scale_enabled = to_bool(k, v); }},
                {"scale_step", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.scale.alpha = to_double(k, v); }},
                {"scale_n_max", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.scale.n_max = to_int(k, v); }},
                {"scale_layer", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.scale.layer = to_int(k, v); }},
                {"scale_damping",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.scale.damping = to_double(k, v); }},
                {"motion", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.motion_enabled = to_bool(k, v); }},
                {"motion_kind",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) {
                     const std::string t = trim(v);
                     if (t == "cosine")
                         c.motion_kind = MotionMapKind::cosine;
                     else if (t == "gaussian")
                         c.motion_kind = MotionMapKind::gaussian;
                     else
                         throw InputError("config key '" + k + "': expected cosine or gaussian");
                 }},
                {"motion_spread",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.motion_spread = to_double(k, v); }},
                {"motion_layers",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) {
                     c.motion_layers = to_list<bool>(k, v, c.layers.size(), to_bool);
                 }},
                {"kalman_q", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.kalman_q = to_double(k, v); }},
                {"kalman_r", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.kalman_r = to_double(k, v); }},
                {"kalman_p0_pos",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.kalman_p0_pos = to_double(k, v); }},
                {"kalman_p0_vel",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.kalman_p0_vel = to_double(k, v); }},
                {"fusion_reg", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.fusion_reg = to_double(k, v); }},
                {"fusion_energy",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) {
                     const std::string t = trim(v);
                     if (t == "latest")
                         c.fusion_energy = EnergySource::latest;
                     else if (t == "memory")
                         c.fusion_energy = EnergySource::memory;
                     else
                         throw InputError("config key '" + k + "': expected latest or memory");
                 }},
                {"fusion_energy_every_frame",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) {
                     c.fusion_energy_every_frame = to_bool(k, v);
                 }},
                {"fusion_smoothing",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.fusion_smoothing = to_double(k, v); }},
                {"confidence_ratio",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.confidence_ratio = to_double(k, v); }},
                {"confidence_decay",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) { c.confidence_decay = to_double(k, v); }},
                {"workers", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.workers = to_int(k, v); }},
            };
            return table;
        }

        void require(bool ok, const std::string& what)
        {
            if (!ok)
                throw InputError("invalid configuration: " + what);
        }
    }

    void validate(const TrackerConfig& c)
    {
        require(!c.layers.empty(), "at least one layer is required");
        for (const LayerSpec& l : c.layers)
        {
            require(l.cell_size >= 1, "cell_size must be >= 1 (layer " + l.name + ")");
            require(l.channels_out >= 1, "channels_out must be >= 1 (layer " + l.name + ")");
            require(l.label_sigma_factor > 0.0, "label_sigma_factor must be > 0 (layer " + l.name + ")");
        }
        const std::size_t n = c.layers.size();
        require(c.lambdas.size() == n, "one lambda per layer");
        for (double l : c.lambdas)
            require(l > 0.0 && std::isfinite(l), "lambdas must be positive");
        require(c.motion_layers.size() == n, "one motion_layers flag per layer");
        require(c.orientation_bins >= 1, "orientation_bins must be >= 1");
        require(c.memory_capacity >= 1, "memory_capacity must be >= 1");
        require(c.learning_rate > 0.0 && c.learning_rate < 1.0, "learning_rate must lie in (0, 1)");
        require(c.update_interval >= 1, "update_interval must be >= 1");
        require(c.cg_init_iters >= 1 && c.cg_update_iters >= 1, "CG iteration counts must be >= 1");
        require(c.reg.min_value > 0.0 && c.reg.max_value >= c.reg.min_value && c.reg.eta >= 0.0,
                "reg window needs 0 < reg_min <= reg_max and reg_eta >= 0");
        require(c.search_area_scale > 0.0, "search_area_scale must be > 0");
        require(c.canonical_min >= 1 && c.canonical_max >= c.canonical_min, "need 1 <= canonical_min <= canonical_max");
        require(c.scale.alpha > 1.0, "scale_step must be > 1");
        require(c.scale.n_max >= 0, "scale_n_max must be >= 0");
        require(c.scale.layer >= 0 && c.scale.layer < static_cast<int>(n), "scale_layer must index a layer");
        require(c.scale.damping > 0.0 && c.scale.damping <= 1.0, "scale_damping must lie in (0, 1]");
        require(c.motion_spread > 0.0, "motion_spread must be > 0");
        require(c.kalman_q >= 0.0 && c.kalman_r > 0.0, "kalman_q must be >= 0 and kalman_r > 0");
        require(c.kalman_p0_pos >= 0.0 && c.kalman_p0_vel >= 0.0, "initial Kalman variances must be >= 0");
        require(c.fusion_reg > 0.0, "fusion_reg must be > 0");
        require(c.fusion_smoothing >= 0.0 && c.fusion_smoothing < 1.0, "fusion_smoothing must lie in [0, 1)");
        require(c.confidence_ratio >= 0.0 && c.confidence_ratio < 1.0, "confidence_ratio must lie in [0, 1)");
        require(c.confidence_decay >= 0.0 && c.confidence_decay < 1.0, "confidence_decay must lie in [0, 1)");
        require(c.workers >= 1, "workers must be >= 1");
        require(!c.features.empty(), "features must be set");
    }

    std::vector<std::string> config_keys()
    {
        std::vector<std::string> keys;
        for (const auto& [k, _] : setters())
            keys.push_back(k);
        return keys;
    }

    void apply_setting(TrackerConfig& config, const std::string& key, const std::string& value)
    {
        for (const auto& [k, set] : setters())
        {
            if (k == key)
            {
                set(config, key, value);
                return;
            }
        }
        throw InputError("unknown config key '" + key + "'");
    }

    TrackerConfig parse_config(const std::string& text, TrackerConfig base, const std::string& origin)
    {
        std::istringstream in(text);
        std::string line;
        int number = 0;
        while (std::getline(in, line))
        {
            ++number;
            const auto hash = line.find('#');
            if (hash != std::string::npos)
                line.erase(hash);
            line = trim(line);
            if (line.empty())
                continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ParseError(origin, number, "expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            try
            {
                apply_setting(base, key, line.substr(eq + 1));
            }
            catch (const ParseError&)
            {
                throw;
            }
            catch (const InputError& e)
            {
                throw ParseError(origin, number, e.what());
            }
        }
        return base;
    }

    TrackerConfig load_config(const std::filesystem::path& path, TrackerConfig base)
    {
        std::ifstream in(path);
        if (!in)
            throw InputError("cannot open config file " + path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_config(ss.str(), std::move(base), path.string());
    }

    std::string format_config(const TrackerConfig& c)
    {
        const auto names = [](const LayerSpec& l) { return l.name; };
        const auto cells = [](const LayerSpec& l) { return std::to_string(l.cell_size); };
        const auto dims = [](const LayerSpec& l) { return std::to_string(l.channels_out); };
        const auto sigmas = [](const LayerSpec& l) { return fmt(l.label_sigma_factor); };
        const auto flag = [](bool b) { return std::string(b ? "true" : "false"); };

        std::ostringstream os;
        os << "layers = " << join(c.layers, names) << "\n"
           << "cell_sizes = " << join(c.layers, cells) << "\n"
           << "channels_out = " << join(c.layers, dims) << "\n"
           << "label_sigma_factors = " << join(c.layers, sigmas) << "\n"
           << "lambdas = " << join(c.lambdas, fmt) << "\n"
           << "orientation_bins = " << c.orientation_bins << "\n"
           << "normalize_features = " << flag(c.normalize_features) << "\n"
           << "features = " << c.features << "\n"
           << "memory_capacity = " << c.memory_capacity << "\n"
           << "learning_rate = " << fmt(c.learning_rate) << "\n"
           << "update_interval = " << c.update_interval << "\n"
           << "cg_init_iters = " << c.cg_init_iters << "\n"
           << "cg_update_iters = " << c.cg_update_iters << "\n"
           << "cg_formula = " << (c.cg_formula == CgFormula::fletcher_reeves ? "fletcher_reeves" : "polak_ribiere") << "\n"
           << "reg_min = " << fmt(c.reg.min_value) << "\n"
           << "reg_eta = " << fmt(c.reg.eta) << "\n"
           << "reg_max = " << fmt(c.reg.max_value) << "\n"
           << "search_area_scale = " << fmt(c.search_area_scale) << "\n"
           << "canonical_min = " << c.canonical_min << "\n"
           << "canonical_max = " << c.canonical_max << "\n"
           << "scale_enabled = " << flag(c.scale_enabled) << "\n"
           << "scale_step = " << fmt(c.scale.alpha) << "\n"
           << "scale_n_max = " << c.scale.n_max << "\n"
           << "scale_layer = " << c.scale.layer << "\n"
           << "scale_damping = " << fmt(c.scale.damping) << "\n"
           << "motion = " << flag(c.motion_enabled) << "\n"
           << "motion_kind = " << (c.motion_kind == MotionMapKind::cosine ? "cosine" : "gaussian") << "\n"
           << "motion_spread = " << fmt(c.motion_spread) << "\n"
           << "motion_layers = " << join(c.motion_layers, flag) << "\n"
           << "kalman_q = " << fmt(c.kalman_q) << "\n"
           << "kalman_r = " << fmt(c.kalman_r) << "\n"
           << "kalman_p0_pos = " << fmt(c.kalman_p0_pos) << "\n"
           << "kalman_p0_vel = " << fmt(c.kalman_p0_vel) << "\n"
           << "fusion_reg = " << fmt(c.fusion_reg) << "\n"
           << "fusion_energy = " << (c.fusion_energy == EnergySource::latest ? "latest" : "memory") << "\n"
           << "fusion_energy_every_frame = " << flag(c.fusion_energy_every_frame) << "\n"
           << "fusion_smoothing = " << fmt(c.fusion_smoothing) << "\n"
           << "confidence_ratio = " << fmt(c.confidence_ratio) << "\n"
           << "confidence_decay = " << fmt(c.confidence_decay) << "\n"
           << "workers = " << c.workers << "\n";
        return os.str();
    }
}
