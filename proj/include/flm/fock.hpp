#pragma once

// Truncated number-basis representation used as the brute-force oracle for
// every analytic moment in the library.

#include <complex>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "flm/algebra.hpp"

namespace flm {

using cplx = std::complex<double>;

// Product number basis with levels 0..cutoff-1 in every mode; mode 0 is the
// most significant digit of the flat index.
class FockSpace {
public:
    FockSpace(std::size_t modes, int cutoff);

    std::size_t modes() const noexcept { return modes_; }
    int cutoff() const noexcept { return cutoff_; }
    std::size_t dimension() const noexcept { return dimension_; }

    std::size_t index(const std::vector<int>& occupation) const;
    std::vector<int> occupation(std::size_t index) const;
    // Stride of `mode` in the flat index.
    std::size_t stride(std::size_t mode) const { return strides_.at(mode); }

    friend bool operator==(const FockSpace&, const FockSpace&) = default;

private:
    std::size_t modes_;
    int cutoff_;
    std::size_t dimension_;
    std::vector<std::size_t> strides_;
};

// Truncation bookkeeping: `error_estimate` bounds the moment error for every
// operator of total order <= `certified_order` (infinite order for states
// that live entirely inside the space).
struct TruncationInfo {
    double error_estimate = 0.0;
    int certified_order = std::numeric_limits<int>::max();
};

inline constexpr double kTruncationTolerance = 1e-10;

struct FockPureState {
    FockSpace space;
    Eigen::VectorXcd amplitudes;
    TruncationInfo truncation;

    double norm_squared() const { return amplitudes.squaredNorm(); }
};

class FockDensityMatrix {
public:
    using Sparse = Eigen::SparseMatrix<cplx, Eigen::ColMajor, std::ptrdiff_t>;

    FockDensityMatrix(FockSpace space, Sparse rho, TruncationInfo truncation = {});

    static FockDensityMatrix from_pure(const FockPureState& psi);
    // Entries (row, col, value) over the flat index; duplicates are summed.
    static FockDensityMatrix from_entries(FockSpace space,
                                          const std::vector<Eigen::Triplet<cplx, std::ptrdiff_t>>& entries,
                                          TruncationInfo truncation = {});

    const FockSpace& space() const noexcept { return space_; }
    const Sparse& matrix() const noexcept { return rho_; }
    const TruncationInfo& truncation() const noexcept { return truncation_; }

    cplx trace() const;
    double hermiticity_defect() const;
    // Smallest eigenvalue; dense solve, only for dimension <= max_dense.
    double min_eigenvalue(std::size_t max_dense = 4096) const;

    // Throws InvalidState when Hermiticity (1e-12), trace (1e-10) or
    // positivity (-1e-10) fail. Positivity is skipped above max_dense.
    void validate(std::size_t max_dense = 4096) const;

private:
    FockSpace space_;
    Sparse rho_;
    TruncationInfo truncation_;
};

// tr(rho a^dag^p a^q); throws CutoffTooSmall when the truncation estimate
// for this order is not certified below kTruncationTolerance.
cplx oracle_moment(const FockDensityMatrix& rho, const MultiIndex& p, const MultiIndex& q);
cplx oracle_moment(const FockPureState& psi, const MultiIndex& p, const MultiIndex& q);

// Mode-wise pure-loss channel with amplitude transmissions `transmission`.
FockDensityMatrix attenuate(const FockDensityMatrix& rho, const std::vector<double>& transmission);

// CSV with header and rows (row, col, re, im) over the flat index.
FockDensityMatrix load_density_csv(const std::filesystem::path& path, std::size_t modes, int cutoff);

}  // namespace flm
