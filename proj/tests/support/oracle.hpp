#ifndef STDN_TESTS_ORACLE_HPP
#define STDN_TESTS_ORACLE_HPP

#include "stdn/raster.hpp"

#include <vector>

namespace stdn::testsupport {

/// Independent dense reference for the screened-Poisson system: assembles the
/// full matrix straight from the stencil definition and solves by Gaussian
/// elimination with partial pivoting. Returns the solution as a field (zero
/// outside the mask). One channel only.
ChannelField dense_solve(const RegionMask& mask, double alpha, const ChannelField& rhs);

/// The assembled dense matrix itself (row/col ordered by raster scan of
/// in-region pixels), for inspecting symmetry and row sums.
std::vector<std::vector<double>> dense_matrix(const RegionMask& mask, double alpha);

/// Random connected-ish mask: starts from a random seed pixel and grows by
/// random accretion until `target` pixels are inside.
RegionMask random_mask(int height, int width, long target, std::uint64_t seed);

} // namespace stdn::testsupport

#endif
