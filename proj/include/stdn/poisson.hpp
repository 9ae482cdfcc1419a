#ifndef STDN_POISSON_HPP
#define STDN_POISSON_HPP

#include "stdn/raster.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace stdn {

struct SolverOptions {
    double tolerance = 1e-8; // relative residual ||Au - b|| / ||b||
    int max_iterations = 0;  // 0 -> 10 * unknowns
};

inline SolverOptions inference_solver() { return SolverOptions{1e-8, 0}; }
inline SolverOptions training_solver() { return SolverOptions{1e-10, 0}; }

/// Screened Poisson operator u - alpha * Lap[u] restricted to a region, with
/// zero-flux boundary: the Laplacian at a pixel sums u(neighbour) - u(pixel)
/// over the 4-neighbours that are inside the region. Row sums are exactly 1,
/// the matrix is symmetric positive definite, and it is applied matrix-free.
class PoissonSystem {
public:
    PoissonSystem(const RegionMask& mask, double alpha, SolverOptions options = {});

    int unknowns() const { return static_cast<int>(pixels_.size()); }
    double alpha() const { return alpha_; }
    const RegionMask& mask() const { return mask_; }
    SolverOptions& options() { return options_; }
    const SolverOptions& options() const { return options_; }

    /// Unknown index of a pixel, -1 outside the region.
    int index_of(int y, int x) const {
        return index_[static_cast<std::size_t>(y) * mask_.width() + x];
    }
    std::pair<int, int> pixel_of(int k) const {
        int flat = pixels_[static_cast<std::size_t>(k)];
        return {flat / mask_.width(), flat % mask_.width()};
    }
    double diagonal(int k) const { return diag_[static_cast<std::size_t>(k)]; }
    int degree(int k) const;
    /// In-region neighbour unknown indices of unknown k (off-diagonal -alpha).
    const std::int32_t* neighbours(int k, int& count) const;

    /// y = A x over gathered unknown vectors.
    void apply(const double* x, double* y) const;

    /// Scatters a gathered vector back to a field (zeros outside the region).
    void scatter(const double* x, double* plane) const;
    /// Gathers one field plane into an unknown vector.
    void gather(const double* plane, double* x) const;

private:
    RegionMask mask_;
    double alpha_;
    SolverOptions options_;
    std::vector<std::int32_t> index_;   // H*W, -1 outside
    std::vector<std::int32_t> pixels_;  // unknown -> flat pixel
    std::vector<std::int32_t> offsets_; // CSR row starts, size unknowns+1
    std::vector<std::int32_t> nbr_;     // CSR column indices
    std::vector<double> diag_;          // 1 + alpha * degree

    friend std::vector<double> solve_gathered(const PoissonSystem&, const std::vector<double>&);
};

/// Preconditioned CG solve of A u = rhs per channel. Pixels outside the region
/// are ignored in the rhs and zero in the result. An all-zero rhs returns the
/// zero field without iterating. Throws solver_error when the tolerance is not
/// reached within the iteration cap.
ChannelField solve(const PoissonSystem& sys, const ChannelField& rhs);

/// Gradient transport through the solve. A is symmetric so this is the same
/// solve applied to the output cotangent.
ChannelField solve_adjoint(const PoissonSystem& sys, const ChannelField& out_cotangent);

/// Directional derivative of the solve in the rhs; equals the solve itself by
/// linearity. Kept separate so forward-mode callers say what they mean.
ChannelField solve_jvp(const PoissonSystem& sys, const ChannelField& rhs_perturbation);

/// Low-level single-vector solve on gathered unknowns (used by tests).
std::vector<double> solve_gathered(const PoissonSystem& sys, const std::vector<double>& rhs);

/// Directional derivative cos(theta) du/dx + sin(theta) du/dy, central
/// differences degrading to one-sided where a neighbour leaves the region,
/// zero where no in-region neighbour exists along an axis. Zero outside.
ChannelField oriented_gradient(const ChannelField& u, const RegionMask& mask, double theta);

} // namespace stdn

#endif
