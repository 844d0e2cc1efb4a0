#include "mhtrack/cf_branch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mhtrack
{
    LayerSpectra to_spectra(std::span<const SpatialMap> channels)
    {
        LayerSpectra out;
        out.reserve(channels.size());
        for (const SpatialMap& c : channels)
            out.push_back(dft2(c));
        return out;
    }

    BranchModel make_branch(LayerSpec layer, int depth, SpatialMap label, SpatialMap reg_window, double lambda)
    {
        if (depth < 1)
            throw ParameterError("make_branch: depth must be >= 1");
        if (!(lambda >= 0.0))
            throw ParameterError("make_branch: lambda must be nonnegative");
        require_same_shape(label, reg_window, "make_branch");
        for (double v : reg_window.values())
            if (!(v > 0.0) || !std::isfinite(v))
                throw ParameterError("make_branch: regularization window must be strictly positive");
        BranchModel m;
        m.layer = std::move(layer);
        m.filters.assign(depth, SpectrumMap(label.width(), label.height(), Complex{}));
        m.label = std::move(label);
        m.reg_window = std::move(reg_window);
        m.lambda = lambda;
        return m;
    }

    SpatialMap make_reg_window(int width, int height, double target_w_cells, double target_h_cells,
                               const RegWindowParams& params)
    {
        if (!(target_w_cells > 0.0) || !(target_h_cells > 0.0))
            throw ParameterError("make_reg_window: target size must be positive");
        if (!(params.min_value > 0.0) || params.max_value < params.min_value || params.eta < 0.0)
            throw ParameterError("make_reg_window: need 0 < min <= max and eta >= 0");
        SpatialMap out(width, height);
        const double cx = 0.5 * (width - 1), cy = 0.5 * (height - 1);
        const double hw = 0.5 * target_w_cells, hh = 0.5 * target_h_cells;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
            {
                const double dx = (x - cx) / hw, dy = (y - cy) / hh;
                out(x, y) = std::clamp(params.min_value + params.eta * (dx * dx + dy * dy), params.min_value,
                                       params.max_value);
            }
        return out;
    }

    SpatialMap closed_form_single(const SpatialMap& x, const SpatialMap& y, double lambda)
    {
        require_same_shape(x, y, "closed_form_single");
        if (!(lambda >= 0.0))
            throw ParameterError("closed_form_single: lambda must be nonnegative");
        const SpectrumMap xf = dft2(x);
        SpectrumMap a = dft2(y);
        for (std::size_t i = 0; i < a.size(); ++i)
        {
            const double den = std::norm(xf[i]) + lambda;
            if (den == 0.0)
                throw SingularityError("closed_form_single: zero autocorrelation bin with lambda = 0");
            a[i] /= den;
        }
        return idft2(a);
    }

    SpectrumMap filter_from_dual(const SpatialMap& alpha, const SpatialMap& x)
    {
        require_same_shape(alpha, x, "filter_from_dual");
        const SpectrumMap af = dft2(alpha);
        SpectrumMap f = dft2(x);
        for (std::size_t i = 0; i < f.size(); ++i)
            f[i] *= std::conj(af[i]);
        return f;
    }

    SpatialMap detect_spectra(std::span<const SpectrumMap> z, const BranchModel& model)
    {
        if (static_cast<int>(z.size()) != model.depth())
            throw DimensionError("detect: " + std::to_string(z.size()) + " channels, model has "
                + std::to_string(model.depth()));
        SpectrumMap acc(model.width(), model.height(), Complex{});
        for (std::size_t d = 0; d < z.size(); ++d)
        {
            require_same_shape(z[d], model.filters[d], "detect");
            const SpectrumMap& f = model.filters[d];
            const SpectrumMap& zd = z[d];
            for (std::size_t i = 0; i < acc.size(); ++i)
                acc[i] += std::conj(f[i]) * zd[i];
        }
        return idft2(acc);
    }

    SpatialMap detect(std::span<const SpatialMap> z, const BranchModel& model)
    {
        const LayerSpectra spectra = to_spectra(z);
        return detect_spectra(spectra, model);
    }

    // ---- sample memory ---------------------------------------------------------

    SampleMemory::SampleMemory(int capacity) : capacity_(capacity)
    {
        if (capacity < 1)
            throw ParameterError("SampleMemory: capacity must be >= 1");
    }

    namespace
    {
        void require_matching(const TrainingSample& a, const TrainingSample& b)
        {
            if (a.layers.size() != b.layers.size())
                throw DimensionError("memory_insert: layer count mismatch");
            for (std::size_t l = 0; l < a.layers.size(); ++l)
            {
                if (a.layers[l].size() != b.layers[l].size())
                    throw DimensionError("memory_insert: channel count mismatch in layer " + std::to_string(l));
                for (std::size_t d = 0; d < a.layers[l].size(); ++d)
                    require_same_shape(a.layers[l][d], b.layers[l][d], "memory_insert");
            }
        }

        TrainingSample blend(const TrainingSample& a, double wa, const TrainingSample& b, double wb)
        {
            const double s = wa + wb;
            const double ca = s > 0.0 ? wa / s : 0.5;
            const double cb = s > 0.0 ? wb / s : 0.5;
            TrainingSample out = a;
            for (std::size_t l = 0; l < out.layers.size(); ++l)
                for (std::size_t d = 0; d < out.layers[l].size(); ++d)
                {
                    SpectrumMap& dst = out.layers[l][d];
                    const SpectrumMap& src = b.layers[l][d];
                    for (std::size_t i = 0; i < dst.size(); ++i)
                        dst[i] = ca * dst[i] + cb * src[i];
                }
            return out;
        }
    }

    void SampleMemory::insert(TrainingSample sample, double learning_rate)
    {
        insert(std::make_shared<const TrainingSample>(std::move(sample)), learning_rate);
    }

    void SampleMemory::insert(std::shared_ptr<const TrainingSample> sample, double learning_rate)
    {
        if (!(learning_rate > 0.0 && learning_rate < 1.0))
            throw ParameterError("memory_insert: learning rate must lie in (0, 1)");
        if (!sample)
            throw StateError("memory_insert: null sample");
        if (!entries_.empty())
            require_matching(*entries_.front(), *sample);

        const double w_new = entries_.empty() ? 1.0 : learning_rate;
        for (double& w : weights_)
            w *= 1.0 - learning_rate;
        entries_.push_back(std::move(sample));
        weights_.push_back(w_new);

        if (size() > capacity_)
        {
            std::vector<int> order(entries_.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return weights_[a] < weights_[b]; });
            const int keep = std::min(order[0], order[1]);
            const int drop = std::max(order[0], order[1]);
            entries_[keep] = std::make_shared<const TrainingSample>(
                blend(*entries_[keep], weights_[keep], *entries_[drop], weights_[drop]));
            weights_[keep] += weights_[drop];
            entries_.erase(entries_.begin() + drop);
            weights_.erase(weights_.begin() + drop);
        }

        const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
        for (double& w : weights_)
            w /= total;
    }

    std::vector<WeightedSlice> SampleMemory::layer_slice(int layer) const
    {
        std::vector<WeightedSlice> out;
        out.reserve(entries_.size());
        for (std::size_t i = 0; i < entries_.size(); ++i)
        {
            if (layer < 0 || layer >= static_cast<int>(entries_[i]->layers.size()))
                throw DimensionError("layer_slice: no layer " + std::to_string(layer));
            out.push_back({entries_[i], layer, weights_[i]});
        }
        return out;
    }

    SampleMemory memory_insert(SampleMemory memory, TrainingSample sample, double learning_rate)
    {
        memory.insert(std::move(sample), learning_rate);
        return memory;
    }

    // ---- training ----------------------------------------------------------------

    namespace
    {
        void check_slice(std::span<const WeightedSlice> memory, const BranchModel& model)
        {
            for (const WeightedSlice& s : memory)
            {
                if (static_cast<int>(s.spectra().size()) != model.depth())
                    throw DimensionError("sample channel count does not match branch '" + model.layer.name + "'");
                for (const SpectrumMap& x : s.spectra())
                    require_same_shape(x, model.label, "branch sample");
            }
        }

        SpatialMap real_inverse(const SpectrumMap& s)
        {
            const SpectrumMap c = idft2_complex(s);
            SpatialMap out(s.width(), s.height());
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = c[i].real();
            return out;
        }
    }

    double branch_objective(const BranchModel& model, std::span<const WeightedSlice> memory)
    {
        if (memory.empty())
            throw StateError("branch_objective: empty memory");
        check_slice(memory, model);
        double energy = 0.0;
        for (const WeightedSlice& s : memory)
        {
            SpectrumMap acc(model.width(), model.height(), Complex{});
            for (int d = 0; d < model.depth(); ++d)
                for (std::size_t i = 0; i < acc.size(); ++i)
                    acc[i] += std::conj(model.filters[d][i]) * s.spectra()[d][i];
            const SpatialMap response = real_inverse(acc);
            double data = 0.0;
            for (std::size_t i = 0; i < response.size(); ++i)
            {
                const double e = response[i] - model.label[i];
                data += e * e;
            }
            energy += s.weight * data;
        }
        double reg = 0.0;
        for (const SpectrumMap& f : model.filters)
        {
            const SpatialMap fs = real_inverse(f);
            for (std::size_t i = 0; i < fs.size(); ++i)
            {
                const double v = model.reg_window[i] * fs[i];
                reg += v * v;
            }
        }
        return energy + model.lambda * reg;
    }

    NormalEqSystem::NormalEqSystem(std::vector<WeightedSlice> samples, const BranchModel& model)
        : samples_(std::move(samples)),
          reg_sq_(model.reg_window),
          lambda_(model.lambda),
          width_(model.width()),
          height_(model.height()),
          depth_(model.depth())
    {
        if (samples_.empty())
            throw StateError("build_normal_equations: empty memory");
        check_slice(samples_, model);
        for (double& v : reg_sq_.values())
            v *= v;

        const SpectrumMap yf = dft2(model.label);
        rhs_ = zeros();
        for (const WeightedSlice& s : samples_)
            for (int d = 0; d < depth_; ++d)
            {
                const SpectrumMap& x = s.spectra()[d];
                for (std::size_t i = 0; i < x.size(); ++i)
                    rhs_[d][i] += s.weight * x[i] * std::conj(yf[i]);
            }

        // the penalty term is a circular convolution in frequency; its diagonal is mean(r^2)
        double reg_mean = 0.0;
        for (double v : reg_sq_.values())
            reg_mean += v;
        reg_mean /= static_cast<double>(reg_sq_.size());
        diag_ = Filters(depth_, SpectrumMap(width_, height_, Complex(lambda_ * reg_mean, 0.0)));
        for (const WeightedSlice& s : samples_)
            for (int d = 0; d < depth_; ++d)
            {
                const SpectrumMap& x = s.spectra()[d];
                for (std::size_t i = 0; i < x.size(); ++i)
                    diag_[d][i] += s.weight * std::norm(x[i]);
            }
    }

    Filters NormalEqSystem::zeros() const
    {
        return Filters(depth_, SpectrumMap(width_, height_, Complex{}));
    }

    Filters NormalEqSystem::apply(const Filters& f) const
    {
        if (static_cast<int>(f.size()) != depth_)
            throw DimensionError("NormalEqSystem::apply: channel count mismatch");
        Filters out = zeros();
        const std::size_t n = static_cast<std::size_t>(width_) * height_;
        for (const WeightedSlice& s : samples_)
        {
            const LayerSpectra& x = s.spectra();
            for (std::size_t i = 0; i < n; ++i)
            {
                Complex proj{};
                for (int e = 0; e < depth_; ++e)
                    proj += f[e][i] * std::conj(x[e][i]);
                proj *= s.weight;
                for (int d = 0; d < depth_; ++d)
                    out[d][i] += x[d][i] * proj;
            }
        }
        if (lambda_ > 0.0)
            for (int d = 0; d < depth_; ++d)
            {
                SpectrumMap spatial = idft2_complex(f[d]);
                for (std::size_t i = 0; i < n; ++i)
                    spatial[i] *= reg_sq_[i];
                const SpectrumMap back = dft2(spatial);
                for (std::size_t i = 0; i < n; ++i)
                    out[d][i] += lambda_ * back[i];
            }
        return out;
    }

    double NormalEqSystem::inner(const Filters& a, const Filters& b)
    {
        double s = 0.0;
        for (std::size_t d = 0; d < a.size(); ++d)
            for (std::size_t i = 0; i < a[d].size(); ++i)
                s += a[d][i].real() * b[d][i].real() + a[d][i].imag() * b[d][i].imag();
        return s;
    }

    NormalEqSystem build_normal_equations(std::span<const WeightedSlice> memory, const BranchModel& model)
    {
        if (memory.empty())
            throw StateError("build_normal_equations: empty memory");
        if (!(model.lambda > 0.0))
            throw ParameterError("build_normal_equations: lambda must be positive");
        return NormalEqSystem(std::vector<WeightedSlice>(memory.begin(), memory.end()), model);
    }

    namespace
    {
        void axpy(Filters& y, double a, const Filters& x)
        {
            for (std::size_t d = 0; d < y.size(); ++d)
                for (std::size_t i = 0; i < y[d].size(); ++i)
                    y[d][i] += a * x[d][i];
        }
    }

    Filters solve_cg(const NormalEqSystem& system, Filters init, int max_iters, CgFormula formula, CgReport* report)
    {
        if (max_iters < 1)
            throw ParameterError("solve_cg: max_iters must be >= 1");
        Filters x = init.empty() ? system.zeros() : std::move(init);
        if (static_cast<int>(x.size()) != system.depth())
            throw DimensionError("solve_cg: initial filters have the wrong channel count");

        const Filters& b = system.rhs();
        Filters r = b;
        axpy(r, -1.0, system.apply(x));

        const double b_norm = std::sqrt(NormalEqSystem::inner(b, b));
        double rr = NormalEqSystem::inner(r, r);
        auto energy = [&](const Filters& xs, const Filters& rs) {
            // 0.5 <x, Ax> - <b, x> = -0.5 <x, b + r>
            return -0.5 * (NormalEqSystem::inner(xs, b) + NormalEqSystem::inner(xs, rs));
        };

        CgReport local;
        CgReport& rep = report ? *report : local;
        rep = CgReport{};
        rep.residual_norms.push_back(std::sqrt(rr));
        rep.energies.push_back(energy(x, r));

        if (b_norm == 0.0)
        {
            // zero right-hand side: the minimizer is the zero filter
            rep.converged = true;
            return system.zeros();
        }
        if (std::sqrt(rr) < cg_tolerance * b_norm)
        {
            rep.converged = true;
            rep.relative_residual = std::sqrt(rr) / b_norm;
            return x;
        }

        const Filters& diag = system.diagonal();
        auto precondition = [&](const Filters& rs) {
            Filters z = rs;
            for (std::size_t d = 0; d < z.size(); ++d)
                for (std::size_t i = 0; i < z[d].size(); ++i)
                    z[d][i] /= diag[d][i].real();
            return z;
        };

        Filters z = precondition(r);
        double rz = NormalEqSystem::inner(r, z);
        Filters p = z;
        for (int it = 1; it <= max_iters; ++it)
        {
            const Filters ap = system.apply(p);
            const double pap = NormalEqSystem::inner(p, ap);
            if (!std::isfinite(pap) || pap <= 0.0)
            {
                if (!std::isfinite(pap))
                    throw DivergenceError("solve_cg: non-finite curvature", it);
                break;  // zero search direction: nothing left to reduce
            }
            const double alpha = rz / pap;
            axpy(x, alpha, p);
            Filters r_prev;
            if (formula == CgFormula::polak_ribiere)
                r_prev = r;
            axpy(r, -alpha, ap);
            const double rr_new = NormalEqSystem::inner(r, r);
            if (!std::isfinite(rr_new))
                throw DivergenceError("solve_cg: non-finite residual", it);

            rep.iterations = it;
            rep.residual_norms.push_back(std::sqrt(rr_new));
            rep.energies.push_back(energy(x, r));
            rep.relative_residual = std::sqrt(rr_new) / b_norm;
            if (rep.relative_residual < cg_tolerance)
            {
                rep.converged = true;
                break;
            }

            z = precondition(r);
            const double rz_new = NormalEqSystem::inner(r, z);
            double beta = 0.0;
            if (formula == CgFormula::fletcher_reeves)
                beta = rz_new / rz;
            else
                beta = (rz_new - NormalEqSystem::inner(z, r_prev)) / rz;
            for (std::size_t d = 0; d < p.size(); ++d)
                for (std::size_t i = 0; i < p[d].size(); ++i)
                    p[d][i] = z[d][i] + beta * p[d][i];
            rz = rz_new;
        }
        // the exact solution is real in space; drop the roundoff that the
        // penalty window amplifies in the conjugate-antisymmetric part
        for (SpectrumMap& f : x)
            f = symmetrize(f);
        return x;
    }
}
