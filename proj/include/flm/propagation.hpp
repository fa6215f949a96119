#pragma once

// Matrices of moments, their partial transposes, and the fluctuating-loss
// input-output relations.
//
// Basis element (p,q) stands for the monomial a^dag^p a^q. Matrix entries:
//   M_{(p,q),(r,s)}    = < [a^dag^p a^q]^dag [a^dag^r a^s] >
//                      = < a^dag^q a^p a^dag^r a^s >
//   N_{(p,q),(r,s)}    = < a^dag^(q+r) a^(p+s) >
//   PT: modes in B carry < a^dag^s a^r a^dag^p a^q > instead.
// Every entry is reduced to normal order and read from a MomentTable.

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "flm/algebra.hpp"
#include "flm/channels.hpp"
#include "flm/states.hpp"

namespace flm {

struct BasisElement {
    MultiIndex p;  // creation powers
    MultiIndex q;  // annihilation powers

    int total() const { return p.total() + q.total(); }
    std::string label() const;
    friend bool operator==(const BasisElement&, const BasisElement&) = default;
};

// All (p,q) with |p| + |q| <= cutoff, ordered by (total order, p, q).
std::vector<BasisElement> graded_basis(std::size_t modes, int cutoff);

enum class MatrixKind { M, N, PartialTranspose, OutputM, OutputN, OutputPartialTranspose };

std::string_view to_string(MatrixKind kind);

struct MatrixOfMoments {
    std::vector<BasisElement> basis;
    Eigen::MatrixXcd entries;
    MatrixKind kind = MatrixKind::M;

    std::size_t size() const { return basis.size(); }
    // Position of (p,q) in the basis; InvalidArgument if absent.
    std::size_t index_of(const MultiIndex& p, const MultiIndex& q) const;
    cplx at(const BasisElement& row, const BasisElement& col) const;
    Eigen::MatrixXcd principal_submatrix(const std::vector<std::size_t>& rows) const;
    double hermiticity_defect() const;
    // Columns: row label, column label, re, im (labels use ';' inside).
    void write_csv(std::ostream& out) const;
};

class PartitionSpec {
public:
    // `transposed` is B; A is the complement.
    PartitionSpec(std::size_t modes, std::vector<std::size_t> transposed);

    static PartitionSpec none(std::size_t modes) { return PartitionSpec(modes, {}); }

    std::size_t modes() const noexcept { return modes_; }
    const std::vector<std::size_t>& a() const noexcept { return a_; }
    const std::vector<std::size_t>& b() const noexcept { return b_; }
    bool transposed(std::size_t mode) const { return in_b_.at(mode); }

private:
    std::size_t modes_;
    std::vector<std::size_t> a_, b_;
    std::vector<bool> in_b_;
};

// out(p,q) = <T^(p+q)> in(p,q) for every stored entry.
MomentTable output_moment(const MomentTable& t, const JointChannel& c);

// Normally ordered expansion of the (possibly partially transposed) entry
// word for basis elements (row, col).
OperatorPolynomial entry_polynomial(const BasisElement& row, const BasisElement& col,
                                    const PartitionSpec& part);

MatrixOfMoments build_matrix_M(const MomentTable& t, int cutoff);
MatrixOfMoments build_matrix_M(const MomentTable& t, const std::vector<BasisElement>& basis);

// Entries of M^out through the k-sum with weights <T^(p+q+r+s-2k)(1-T^2)^k>.
MatrixOfMoments output_matrix_single(const MomentTable& t, const TransmittanceModel& c, int cutoff);
MatrixOfMoments output_matrix_multi(const MomentTable& t, const JointChannel& c, int cutoff);
MatrixOfMoments output_matrix_multi(const MomentTable& t, const JointChannel& c,
                                    const std::vector<BasisElement>& basis);

MatrixOfMoments build_matrix_N(const MomentTable& t, int cutoff);
MatrixOfMoments build_matrix_N(const MomentTable& t, const std::vector<BasisElement>& basis);
MatrixOfMoments output_matrix_N(const MomentTable& t, const JointChannel& c, int cutoff);
MatrixOfMoments output_matrix_N(const MomentTable& t, const JointChannel& c,
                                const std::vector<BasisElement>& basis);

// PT entries recomputed from the table on the basis of `m`.
MatrixOfMoments partial_transpose(const MatrixOfMoments& m, const PartitionSpec& part, const MomentTable& t);
MatrixOfMoments build_pt_matrix(const MomentTable& t, const PartitionSpec& part,
                                const std::vector<BasisElement>& basis);
MatrixOfMoments output_pt_matrix(const MomentTable& t, const JointChannel& c, const PartitionSpec& part,
                                 int cutoff);
MatrixOfMoments output_pt_matrix(const MomentTable& t, const JointChannel& c, const PartitionSpec& part,
                                 const std::vector<BasisElement>& basis);

// Highest total moment order needed for `basis`.
int required_order(const std::vector<BasisElement>& basis);

}  // namespace flm
