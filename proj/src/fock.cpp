#include "flm/fock.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "flm/error.hpp"

namespace flm {

namespace {

// sqrt(n (n-1) ... (n-k+1)); zero when k > n.
double sqrt_falling(int n, int k) {
    if (k > n) return 0.0;
    double r = 1.0;
    for (int j = 0; j < k; ++j) r *= std::sqrt(static_cast<double>(n - j));
    return r;
}

void check_indices(const FockSpace& space, const MultiIndex& p, const MultiIndex& q) {
    require(p.size() == space.modes() && q.size() == space.modes(), ErrorCode::InvalidArgument,
            "moment index length does not match mode count");
}

void check_truncation(const TruncationInfo& t, const MultiIndex& p, const MultiIndex& q) {
    const int order = p.total() + q.total();
    if (order > t.certified_order || t.error_estimate > kTruncationTolerance) {
        fail(ErrorCode::CutoffTooSmall,
             "truncation estimate not certified below 1e-10 for moment order " +
                 std::to_string(order) + " (certified order " + std::to_string(t.certified_order) +
                 ", estimate " + std::to_string(t.error_estimate) + ")");
    }
}

}  // namespace

FockSpace::FockSpace(std::size_t modes, int cutoff) : modes_(modes), cutoff_(cutoff) {
    require(modes >= 1, ErrorCode::InvalidArgument, "Fock space needs at least one mode");
    require(cutoff >= 1, ErrorCode::InvalidArgument, "Fock cutoff must be >= 1");
    strides_.assign(modes, 1);
    dimension_ = 1;
    for (std::size_t i = modes; i-- > 0;) {
        strides_[i] = dimension_;
        dimension_ *= static_cast<std::size_t>(cutoff);
    }
}

std::size_t FockSpace::index(const std::vector<int>& occupation) const {
    require(occupation.size() == modes_, ErrorCode::InvalidArgument, "occupation length mismatch");
    std::size_t idx = 0;
    for (std::size_t i = 0; i < modes_; ++i) {
        require(occupation[i] >= 0 && occupation[i] < cutoff_, ErrorCode::InvalidArgument,
                "occupation outside truncated space");
        idx += static_cast<std::size_t>(occupation[i]) * strides_[i];
    }
    return idx;
}

std::vector<int> FockSpace::occupation(std::size_t index) const {
    std::vector<int> occ(modes_);
    for (std::size_t i = 0; i < modes_; ++i) {
        occ[i] = static_cast<int>(index / strides_[i]);
        index %= strides_[i];
    }
    return occ;
}

FockDensityMatrix::FockDensityMatrix(FockSpace space, Sparse rho, TruncationInfo truncation)
    : space_(std::move(space)), rho_(std::move(rho)), truncation_(truncation) {
    const auto dim = static_cast<std::ptrdiff_t>(space_.dimension());
    require(rho_.rows() == dim && rho_.cols() == dim, ErrorCode::InvalidState,
            "density matrix dimension does not match Fock space");
    rho_.makeCompressed();
}

FockDensityMatrix FockDensityMatrix::from_pure(const FockPureState& psi) {
    std::vector<std::ptrdiff_t> support;
    for (std::ptrdiff_t i = 0; i < psi.amplitudes.size(); ++i) {
        if (psi.amplitudes[i] != cplx{}) support.push_back(i);
    }
    std::vector<Eigen::Triplet<cplx, std::ptrdiff_t>> entries;
    entries.reserve(support.size() * support.size());
    for (auto c : support) {
        for (auto r : support) {
            entries.emplace_back(r, c, psi.amplitudes[r] * std::conj(psi.amplitudes[c]));
        }
    }
    return from_entries(psi.space, entries, psi.truncation);
}

FockDensityMatrix FockDensityMatrix::from_entries(
    FockSpace space, const std::vector<Eigen::Triplet<cplx, std::ptrdiff_t>>& entries,
    TruncationInfo truncation) {
    const auto dim = static_cast<std::ptrdiff_t>(space.dimension());
    Sparse rho(dim, dim);
    rho.setFromTriplets(entries.begin(), entries.end());
    return FockDensityMatrix(std::move(space), std::move(rho), truncation);
}

cplx FockDensityMatrix::trace() const {
    cplx t{};
    for (std::ptrdiff_t k = 0; k < rho_.outerSize(); ++k) {
        for (Sparse::InnerIterator it(rho_, k); it; ++it) {
            if (it.row() == it.col()) t += it.value();
        }
    }
    return t;
}

double FockDensityMatrix::hermiticity_defect() const {
    Sparse diff = Sparse(rho_.adjoint()) - rho_;
    double worst = 0.0;
    for (std::ptrdiff_t k = 0; k < diff.outerSize(); ++k) {
        for (Sparse::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    }
    return worst;
}

double FockDensityMatrix::min_eigenvalue(std::size_t max_dense) const {
    require(space_.dimension() <= max_dense, ErrorCode::InvalidArgument,
            "dimension too large for dense eigenvalue check");
    Eigen::MatrixXcd dense = Eigen::MatrixXcd(rho_);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(dense, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

void FockDensityMatrix::validate(std::size_t max_dense) const {
    const double herm = hermiticity_defect();
    require(herm <= 1e-12, ErrorCode::InvalidState,
            "density matrix not Hermitian (defect " + std::to_string(herm) + ")");
    const cplx tr = trace();
    require(std::abs(tr - 1.0) <= 1e-10, ErrorCode::InvalidState,
            "density matrix trace " + std::to_string(tr.real()) + " differs from 1");
    if (space_.dimension() <= max_dense) {
        const double lmin = min_eigenvalue(max_dense);
        require(lmin >= -1e-10, ErrorCode::InvalidState,
                "density matrix not positive semidefinite (min eigenvalue " +
                    std::to_string(lmin) + ")");
    }
}

cplx oracle_moment(const FockDensityMatrix& rho, const MultiIndex& p, const MultiIndex& q) {
    const FockSpace& space = rho.space();
    check_indices(space, p, q);
    check_truncation(rho.truncation(), p, q);
    // tr(rho X) = sum_{r,c} rho_rc <c|a^dag^p a^q|r>, nonzero only for
    // r = c - p + q; the matching row is looked up per column.
    cplx acc{};
    const auto& m = rho.matrix();
    const std::size_t modes = space.modes();
    std::vector<int> occ(modes, 0);
    for (std::size_t col = 0; col < space.dimension(); ++col) {
        if (col > 0) {
            for (std::size_t i = modes; i-- > 0;) {
                if (++occ[i] < space.cutoff()) break;
                occ[i] = 0;
            }
        }
        double w = 1.0;
        std::ptrdiff_t row = 0;
        for (std::size_t i = 0; i < modes; ++i) {
            const int r = occ[i] - p[i] + q[i];
            if (occ[i] < p[i] || r >= space.cutoff()) {
                w = 0.0;
                break;
            }
            w *= sqrt_falling(occ[i], p[i]) * sqrt_falling(r, q[i]);
            row += static_cast<std::ptrdiff_t>(r) * static_cast<std::ptrdiff_t>(space.stride(i));
        }
        if (w == 0.0) continue;
        const cplx v = m.coeff(row, static_cast<std::ptrdiff_t>(col));
        if (v != cplx{}) acc += w * v;
    }
    return acc;
}

namespace {

// a^k applied to psi (lowering never leaves the truncated space).
Eigen::VectorXcd lower(const FockSpace& space, const Eigen::VectorXcd& psi, const MultiIndex& k) {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.size());
    for (std::size_t idx = 0; idx < space.dimension(); ++idx) {
        if (psi[static_cast<std::ptrdiff_t>(idx)] == cplx{}) continue;
        auto occ = space.occupation(idx);
        double w = 1.0;
        for (std::size_t i = 0; i < space.modes(); ++i) {
            if (occ[i] < k[i]) {
                w = 0.0;
                break;
            }
            w *= sqrt_falling(occ[i], k[i]);
            occ[i] -= k[i];
        }
        if (w != 0.0) out[static_cast<std::ptrdiff_t>(space.index(occ))] += w * psi[static_cast<std::ptrdiff_t>(idx)];
    }
    return out;
}

}  // namespace

cplx oracle_moment(const FockPureState& psi, const MultiIndex& p, const MultiIndex& q) {
    check_indices(psi.space, p, q);
    check_truncation(psi.truncation, p, q);
    // <psi| a^dag^p a^q |psi> = <a^p psi, a^q psi>
    const Eigen::VectorXcd lp = lower(psi.space, psi.amplitudes, p);
    const Eigen::VectorXcd lq = (p == q) ? lp : lower(psi.space, psi.amplitudes, q);
    return lp.dot(lq);
}

FockDensityMatrix attenuate(const FockDensityMatrix& rho, const std::vector<double>& transmission) {
    const FockSpace& space = rho.space();
    require(transmission.size() == space.modes(), ErrorCode::InvalidArgument,
            "one transmission per mode required");
    for (double t : transmission) {
        require(t >= 0.0 && t <= 1.0, ErrorCode::InvalidArgument, "transmission must lie in [0,1]");
    }
    using Triplet = Eigen::Triplet<cplx, std::ptrdiff_t>;
    FockDensityMatrix::Sparse current = rho.matrix();
    for (std::size_t mode = 0; mode < space.modes(); ++mode) {
        const double t = transmission[mode];
        if (t == 1.0) continue;
        const double loss = 1.0 - t * t;
        const auto stride = static_cast<std::ptrdiff_t>(space.stride(mode));
        const int cut = space.cutoff();
        // sqrt(C(n,k)) and powers of t and loss, tabulated once per mode
        std::vector<double> root_binom(static_cast<std::size_t>(cut * cut), 0.0);
        std::vector<double> t_pow(static_cast<std::size_t>(2 * cut), 1.0), loss_pow(static_cast<std::size_t>(cut), 1.0);
        // Pascal's rule in floating point; exact integers overflow past n ~ 66
        for (int n = 0; n < cut; ++n) {
            root_binom[static_cast<std::size_t>(n * cut)] = 1.0;
            for (int k = 1; k <= n; ++k) {
                const double above = root_binom[static_cast<std::size_t>((n - 1) * cut + k - 1)];
                const double left = k < n ? root_binom[static_cast<std::size_t>((n - 1) * cut + k)] : 0.0;
                root_binom[static_cast<std::size_t>(n * cut + k)] = above + left;
            }
        }
        for (double& v : root_binom) v = std::sqrt(v);
        for (std::size_t j = 1; j < t_pow.size(); ++j) t_pow[j] = t_pow[j - 1] * t;
        for (std::size_t j = 1; j < loss_pow.size(); ++j) loss_pow[j] = loss_pow[j - 1] * loss;
        std::vector<Triplet> out;
        out.reserve(static_cast<std::size_t>(current.nonZeros()) * 2);
        for (std::ptrdiff_t col = 0; col < current.outerSize(); ++col) {
            const int nc = static_cast<int>((col / stride) % space.cutoff());
            for (FockDensityMatrix::Sparse::InnerIterator it(current, col); it; ++it) {
                const int nr = static_cast<int>((it.row() / stride) % space.cutoff());
                for (int k = 0; k <= std::min(nr, nc); ++k) {
                    const double w = root_binom[static_cast<std::size_t>(nr * cut + k)] *
                                     root_binom[static_cast<std::size_t>(nc * cut + k)] *
                                     t_pow[static_cast<std::size_t>(nr + nc - 2 * k)] *
                                     loss_pow[static_cast<std::size_t>(k)];
                    if (w == 0.0) continue;
                    out.emplace_back(it.row() - k * stride, col - k * stride, w * it.value());
                }
            }
        }
        FockDensityMatrix::Sparse next(current.rows(), current.cols());
        next.setFromTriplets(out.begin(), out.end());
        next.prune(cplx{0.0, 0.0});
        current = std::move(next);
    }
    return FockDensityMatrix(space, std::move(current), rho.truncation());
}

FockDensityMatrix load_density_csv(const std::filesystem::path& path, std::size_t modes, int cutoff) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::IoError, "cannot open density CSV " + path.string());
    FockSpace space(modes, cutoff);
    std::vector<Eigen::Triplet<cplx, std::ptrdiff_t>> entries;
    std::string line;
    bool header_seen = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        require(fields.size() == 4, ErrorCode::IoError,
                path.string() + ":" + std::to_string(lineno) + ": expected row,col,re,im");
        try {
            const long long r = std::stoll(fields[0]);
            const long long c = std::stoll(fields[1]);
            require(r >= 0 && c >= 0 && static_cast<std::size_t>(r) < space.dimension() &&
                        static_cast<std::size_t>(c) < space.dimension(),
                    ErrorCode::IoError,
                    path.string() + ":" + std::to_string(lineno) + ": index outside Fock space");
            entries.emplace_back(r, c, cplx{std::stod(fields[2]), std::stod(fields[3])});
        } catch (const std::invalid_argument&) {
            fail(ErrorCode::IoError, path.string() + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    auto rho = FockDensityMatrix::from_entries(space, entries);
    rho.validate();
    return rho;
}

}  // namespace flm
