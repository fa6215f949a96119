#pragma once

// Independent reference computations used to freeze expected values.

#include <cstdint>
#include <string>
#include <vector>

#include "flm/algebra.hpp"

namespace oracle {

// Dense integer matrix acting on the monomial basis e_j = a^dag^j |0>,
// j < cutoff: a^dag e_j = e_{j+1}, a e_j = j e_{j-1}. Entries stay integers.
struct IntMatrix {
    int n = 0;
    std::vector<std::int64_t> v;

    explicit IntMatrix(int size = 0) : n(size), v(static_cast<std::size_t>(size) * size, 0) {}
    std::int64_t& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * n + c]; }
    std::int64_t operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * n + c]; }

    static IntMatrix identity(int size);
    static IntMatrix creation(int size);
    static IntMatrix annihilation(int size);
};

IntMatrix operator*(const IntMatrix& a, const IntMatrix& b);
IntMatrix operator+(const IntMatrix& a, const IntMatrix& b);
IntMatrix scaled(const IntMatrix& a, std::int64_t c);
IntMatrix power(const IntMatrix& a, int k);

// Matrix of a single-mode polynomial honoring its ordering tag.
IntMatrix polynomial_matrix(const flm::OperatorPolynomial& poly, int size);

// Equality restricted to the first `columns` basis vectors.
bool equal_on_leading(const IntMatrix& a, const IntMatrix& b, int columns);

}  // namespace oracle

#include "flm/propagation.hpp"

namespace oracle {

// Output matrix by normal-ordering each entry word first and scaling every
// normally ordered term by <T^(n+m)>; independent of the k-sum route.
flm::MatrixOfMoments scaled_output_matrix(const flm::MomentTable& t, const flm::JointChannel& c,
                                          const flm::PartitionSpec& part,
                                          const std::vector<flm::BasisElement>& basis);

// Attenuate the oracle density mode-wise and tabulate its moments.
flm::MomentTable attenuated_table(const flm::StateModel& s, const std::vector<double>& t, int order);
flm::MomentTable attenuated_table(const flm::FockDensityMatrix& rho, const std::vector<double>& t, int order);

double max_abs_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

}  // namespace oracle

namespace oracle {

// <psi| W_A (x) W_B^T |psi> where words[i] spells the operator string on mode i
// ('d' = a^dag, 'a' = a, rightmost acts first). Transposing a mode's word in
// the real Fock basis reverses it and swaps a <-> a^dag; for a pure state this
// equals tr(rho^{T_B} W). Raising past the cutoff drops the component.
flm::cplx word_expectation(const flm::FockPureState& psi, const std::vector<std::string>& words,
                           const std::vector<bool>& transposed);

// PT matrix of moments with entries built from raw operator words (no
// reordering algebra): mode i carries a^dag^q a^p a^dag^r a^s.
Eigen::MatrixXcd pt_matrix_by_words(const flm::FockPureState& psi, const std::vector<flm::BasisElement>& basis,
                                    const std::vector<bool>& transposed);

}  // namespace oracle

#include <array>

namespace oracle {

// Schroedinger-picture depth-2 homodyne network: the pure single-mode signal
// loses amplitude to an environment mode (transmission t), the LO is the
// coherent state lo truncated at lo_cutoff photons, and both enter
//   c1 = (a + i b)/sqrt2, c2 = (i a + b)/sqrt2,
// each split once more with vacuum. Photon-number moments of the four
// detectors from the full output state.
struct NetworkMoments {
    std::array<double, 4> n{};
    std::array<std::array<double, 4>, 4> nn{};
};
NetworkMoments homodyne_network(const flm::FockPureState& psi, double t, flm::cplx lo, int lo_cutoff = 14);

}  // namespace oracle
