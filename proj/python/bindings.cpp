#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mhtrack/bench.hpp"
#include "mhtrack/fusion.hpp"
#include "mhtrack/tracker.hpp"

namespace py = pybind11;
using namespace mhtrack;

namespace
{
    using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

    Image to_image(const FloatArray& a)
    {
        if (a.ndim() != 2)
            throw InputError("frames must be 2-D grayscale arrays");
        const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
        return Image(w, h, std::vector<float>(a.data(), a.data() + a.size()));
    }

    FloatArray to_array(const Image& img)
    {
        FloatArray out({img.height(), img.width()});
        std::copy(img.values().begin(), img.values().end(), out.mutable_data());
        return out;
    }

    py::tuple box_tuple(const Box& b) { return py::make_tuple(b.x, b.y, b.w, b.h); }

    Box to_box(const std::array<double, 4>& b) { return {b[0], b[1], b[2], b[3]}; }

    py::dict curve_dict(const CurveReport& c)
    {
        py::dict d;
        d["frames"] = c.frames;
        d["auc"] = c.auc;
        d["op"] = c.op;
        d["precision20"] = c.precision20;
        d["mean_iou"] = c.mean_iou;
        d["precision"] = c.precision;
        d["success"] = c.success;
        return d;
    }

    // Stateful tracker handle for frame-by-frame use from Python.
    class PyTracker
    {
    public:
        explicit PyTracker(const std::string& config_text) : config_(parse_config(config_text)) { validate(config_); }

        void initialize(const FloatArray& frame, const std::array<double, 4>& box)
        {
            state_ = init(to_image(frame), to_box(box), config_);
        }

        py::tuple update(const FloatArray& frame)
        {
            const Image img = to_image(frame);
            StepResult r;
            {
                py::gil_scoped_release release;
                r = step(state_, img);
            }
            return box_tuple(r.box);
        }

        std::string config() const { return format_config(config_); }

    private:
        TrackerConfig config_;
        TrackerState state_;
    };
}

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Multi-branch correlation filter tracker";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InputError>(m, "InputError", base.ptr());

    m.def("default_config", [] { return format_config(TrackerConfig{}); },
          "Default tracker configuration as key = value text.");

    py::class_<PyTracker>(m, "Tracker")
        .def(py::init<const std::string&>(), py::arg("config") = "")
        .def("init", &PyTracker::initialize, py::arg("frame"), py::arg("box"))
        .def("update", &PyTracker::update, py::arg("frame"))
        .def_property_readonly("config", &PyTracker::config);

    m.def(
        "run_sequence",
        [](const std::vector<FloatArray>& frames, const std::array<double, 4>& box, const std::string& config) {
            std::vector<Image> imgs;
            imgs.reserve(frames.size());
            for (const FloatArray& f : frames)
                imgs.push_back(to_image(f));
            const TrackerConfig cfg = parse_config(config);
            std::vector<Box> traj;
            {
                py::gil_scoped_release release;
                traj = run_sequence(imgs, to_box(box), cfg);
            }
            py::list out;
            for (const Box& b : traj)
                out.append(box_tuple(b));
            return out;
        },
        py::arg("frames"), py::arg("box"), py::arg("config") = "");

    m.def(
        "synth",
        [](const std::string& name, std::uint64_t seed) {
            const Sequence s = synth_sequence(scenario_preset(name, seed));
            py::list frames, truth;
            for (const Image& f : s.frames)
                frames.append(to_array(f));
            for (const Box& b : s.truth)
                truth.append(box_tuple(b));
            return py::make_tuple(frames, truth);
        },
        py::arg("scenario"), py::arg("seed") = 1);

    m.def("iou", [](const std::array<double, 4>& a, const std::array<double, 4>& b) { return iou(to_box(a), to_box(b)); });

    m.def(
        "otb_metrics",
        [](const std::vector<std::array<double, 4>>& traj, const std::vector<std::array<double, 4>>& truth) {
            std::vector<Box> t, g;
            for (const auto& b : traj)
                t.push_back(to_box(b));
            for (const auto& b : truth)
                g.push_back(to_box(b));
            return curve_dict(otb_metrics(t, g).overall);
        },
        py::arg("trajectory"), py::arg("truth"));

    m.def(
        "solve_weights", [](const std::vector<double>& energies, double reg) { return solve_weights(energies, reg).m; },
        py::arg("energies"), py::arg("reg") = 1.0);

    m.def("cli", &cli_main, py::arg("args"), "Runs the command-line interface; returns the exit code.");
}
