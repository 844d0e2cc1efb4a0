#ifndef MHTRACK_CF_BRANCH_HPP_
#define MHTRACK_CF_BRANCH_HPP_

// One independently trained correlation-filter bank per feature layer.
//
// A branch's response to features z is
//
//     score = sum_d cyclic_correlate(f_d, z_d) = idft2(sum_d conj(F_d) * Z_d)
//
// and training minimizes, over the weighted sample memory,
//
//     sum_k w_k || sum_d f_d (*) x_{k,d} - y ||^2 + lambda * sum_d || r . f_d ||^2
//
// where r is a spatial penalty window (small over the target, growing toward
// the patch borders). Setting the gradient to zero and transforming each
// channel's equation gives, per channel d,
//
//     sum_k w_k X_{k,d} (sum_e F_e conj(X_{k,e})) + lambda DFT(r^2 . IDFT(F_d))
//         = sum_k w_k X_{k,d} conj(Y)
//
// which is solved with conjugate gradients without forming any dense matrix.

#include <memory>
#include <span>
#include <vector>

#include "mhtrack/features.hpp"
#include "mhtrack/signal.hpp"

namespace mhtrack
{
    /// One layer's channels in the Fourier domain.
    using LayerSpectra = std::vector<SpectrumMap>;
    using Filters = std::vector<SpectrumMap>;

    LayerSpectra to_spectra(std::span<const SpatialMap> channels);

    struct BranchModel
    {
        LayerSpec layer;
        Filters filters;        // F(f_d), one per channel
        SpatialMap reg_window;  // r, strictly positive
        SpatialMap label;       // y
        double lambda = 0.0;

        int width() const { return label.width(); }
        int height() const { return label.height(); }
        int depth() const { return static_cast<int>(filters.size()); }
    };

    /// Zero-filter model; validates shapes, lambda >= 0 and a positive window.
    BranchModel make_branch(LayerSpec layer, int depth, SpatialMap label, SpatialMap reg_window, double lambda);

    struct RegWindowParams
    {
        double min_value = 1e-3;
        double eta = 3.0;       // penalty at the target boundary, added to min_value
        double max_value = 1e5;
    };

    /// Quadratic penalty profile centered on the grid center:
    /// min + eta * ((dx / half_w)^2 + (dy / half_h)^2), clamped to [min, max].
    SpatialMap make_reg_window(int width, int height, double target_w_cells, double target_h_cells,
                               const RegWindowParams& params = {});

    /// Dual coefficients of the single-sample, single-channel ridge regression:
    /// alpha = idft2(Y / (|X|^2 + lambda)). Throws SingularityError on a zero
    /// denominator.
    SpatialMap closed_form_single(const SpatialMap& x, const SpatialMap& y, double lambda);

    /// Primal filter spectrum corresponding to dual coefficients `alpha` on sample x.
    SpectrumMap filter_from_dual(const SpatialMap& alpha, const SpatialMap& x);

    SpatialMap detect(std::span<const SpatialMap> z, const BranchModel& model);
    SpatialMap detect_spectra(std::span<const SpectrumMap> z, const BranchModel& model);

    // ---- sample memory ---------------------------------------------------------

    /// One training sample: the windowed, projected spectra of every layer.
    struct TrainingSample
    {
        std::vector<LayerSpectra> layers;
    };

    struct WeightedSlice
    {
        std::shared_ptr<const TrainingSample> sample;
        int layer = 0;
        double weight = 0.0;

        const LayerSpectra& spectra() const { return sample->layers[layer]; }
    };

    /// Weighted training samples shared by all branches. Entries are immutable
    /// snapshots; merging replaces entries instead of modifying them.
    class SampleMemory
    {
    public:
        explicit SampleMemory(int capacity = 50);

        /// New sample enters with weight `learning_rate` (1 when the memory is empty),
        /// existing weights decay by (1 - learning_rate). Over capacity, the two
        /// lightest entries merge into their weighted average. Weights sum to 1.
        void insert(TrainingSample sample, double learning_rate);
        void insert(std::shared_ptr<const TrainingSample> sample, double learning_rate);

        int capacity() const noexcept { return capacity_; }
        int size() const noexcept { return static_cast<int>(entries_.size()); }
        bool empty() const noexcept { return entries_.empty(); }
        double weight(int i) const { return weights_.at(i); }
        const std::vector<double>& weights() const noexcept { return weights_; }
        const TrainingSample& sample(int i) const { return *entries_.at(i); }

        std::vector<WeightedSlice> layer_slice(int layer) const;

    private:
        int capacity_;
        std::vector<std::shared_ptr<const TrainingSample>> entries_;
        std::vector<double> weights_;
    };

    /// Value returned by the functional form of insertion.
    SampleMemory memory_insert(SampleMemory memory, TrainingSample sample, double learning_rate);

    // ---- training ----------------------------------------------------------------

    /// Weighted objective of one branch on the given memory slice.
    double branch_objective(const BranchModel& model, std::span<const WeightedSlice> memory);

    class NormalEqSystem
    {
    public:
        NormalEqSystem(std::vector<WeightedSlice> samples, const BranchModel& model);

        Filters apply(const Filters& f) const;
        const Filters& rhs() const noexcept { return rhs_; }
        int depth() const noexcept { return depth_; }
        int width() const noexcept { return width_; }
        int height() const noexcept { return height_; }

        Filters zeros() const;

        /// Diagonal of the operator in the Fourier basis (real, positive). Used as the preconditioner.
        const Filters& diagonal() const noexcept { return diag_; }

        /// Re sum conj(a) b over all channels and bins.
        static double inner(const Filters& a, const Filters& b);

    private:
        std::vector<WeightedSlice> samples_;
        SpatialMap reg_sq_;
        double lambda_;
        int width_, height_, depth_;
        Filters rhs_;
        Filters diag_;
    };

    NormalEqSystem build_normal_equations(std::span<const WeightedSlice> memory, const BranchModel& model);

    enum class CgFormula { fletcher_reeves, polak_ribiere };

    struct CgReport
    {
        int iterations = 0;
        bool converged = false;
        double relative_residual = 0.0;
        std::vector<double> residual_norms;  // ||b - A x||, starting with the initial guess
        std::vector<double> energies;        // 0.5 <x, A x> - <b, x>, starting with the initial guess
    };

    /// Conjugate gradients, Jacobi-preconditioned in the Fourier basis, warm-started
    /// from `init`. Stops once the unpreconditioned ||r|| / ||b|| < 1e-6.
    /// Throws DivergenceError when the residual becomes non-finite.
    Filters solve_cg(const NormalEqSystem& system, Filters init, int max_iters,
                     CgFormula formula = CgFormula::fletcher_reeves, CgReport* report = nullptr);

    inline constexpr double cg_tolerance = 1e-6;
}

#endif
