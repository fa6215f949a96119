#include "flm/propagation.hpp"

#include <algorithm>
#include <ostream>

#include "flm/error.hpp"

namespace flm {

namespace {

std::string semicolon_label(const MultiIndex& m) {
    std::string s = m.to_string();
    std::replace(s.begin(), s.end(), ',', ';');
    return s;
}

cplx evaluate(const OperatorPolynomial& poly, const MomentTable& t) {
    cplx sum = 0.0;
    for (const auto& [key, c] : poly.terms()) sum += static_cast<double>(c) * t(key.first, key.second);
    return sum;
}

void check_modes(const MomentTable& t, std::size_t modes) {
    require(t.modes() == modes, ErrorCode::InvalidArgument, "mode count mismatch between table and channel");
}

void check_basis(const std::vector<BasisElement>& basis, std::size_t modes) {
    require(!basis.empty(), ErrorCode::InvalidArgument, "empty basis");
    for (const auto& b : basis)
        require(b.p.size() == modes && b.q.size() == modes, ErrorCode::InvalidArgument,
                "basis element mode count does not match the table");
}

template <class F>
MatrixOfMoments fill(const std::vector<BasisElement>& basis, MatrixKind kind, F&& entry) {
    const auto n = static_cast<Eigen::Index>(basis.size());
    MatrixOfMoments m{basis, Eigen::MatrixXcd::Zero(n, n), kind};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            m.entries(i, j) = entry(basis[static_cast<std::size_t>(i)], basis[static_cast<std::size_t>(j)]);
    return m;
}

// k-sum of the output relation for a single entry; PT structure via `part`.
cplx output_entry(const MomentTable& t, const JointChannel& c, const PartitionSpec& part,
                  const BasisElement& row, const BasisElement& col) {
    const std::size_t n = t.modes();
    const MultiIndex kmax = elementwise_min(row.p, col.p);
    const MultiIndex total = row.p + row.q + col.p + col.q;
    MultiIndex k(n);
    cplx sum = 0.0;
    for (;;) {
        double coeff = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            coeff *= static_cast<double>(reordering_coefficient(row.p[i], col.p[i], k[i]));
        const double weight = joint_mixed_moment(c, total - k.scaled(2), k);
        if (weight != 0.0) {
            const BasisElement rr{row.p - k, row.q};
            const BasisElement cc{col.p - k, col.q};
            sum += coeff * weight * evaluate(entry_polynomial(rr, cc, part), t);
        }
        std::size_t i = 0;
        for (; i < n; ++i) {
            if (k[i] < kmax[i]) {
                k.set(i, k[i] + 1);
                break;
            }
            k.set(i, 0);
        }
        if (i == n) break;
    }
    return sum;
}

}  // namespace

std::string BasisElement::label() const { return semicolon_label(p) + "|" + semicolon_label(q); }

std::vector<BasisElement> graded_basis(std::size_t modes, int cutoff) {
    require(cutoff >= 0, ErrorCode::InvalidArgument, "basis cutoff must be >= 0");
    std::vector<BasisElement> out;
    for (const auto& [p, q] : index_pairs(modes, cutoff)) out.push_back({p, q});
    return out;
}

std::string_view to_string(MatrixKind kind) {
    switch (kind) {
        case MatrixKind::M: return "M";
        case MatrixKind::N: return "N";
        case MatrixKind::PartialTranspose: return "M_PT";
        case MatrixKind::OutputM: return "M_out";
        case MatrixKind::OutputN: return "N_out";
        case MatrixKind::OutputPartialTranspose: return "M_PT_out";
    }
    return "?";
}

std::size_t MatrixOfMoments::index_of(const MultiIndex& p, const MultiIndex& q) const {
    for (std::size_t i = 0; i < basis.size(); ++i)
        if (basis[i].p == p && basis[i].q == q) return i;
    fail(ErrorCode::InvalidArgument, "basis element " + p.to_string() + "|" + q.to_string() + " not in basis");
}

cplx MatrixOfMoments::at(const BasisElement& row, const BasisElement& col) const {
    return entries(static_cast<Eigen::Index>(index_of(row.p, row.q)),
                   static_cast<Eigen::Index>(index_of(col.p, col.q)));
}

Eigen::MatrixXcd MatrixOfMoments::principal_submatrix(const std::vector<std::size_t>& rows) const {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXcd s(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            require(rows[static_cast<std::size_t>(i)] < basis.size(), ErrorCode::InvalidArgument,
                    "minor row outside basis");
            s(i, j) = entries(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]),
                              static_cast<Eigen::Index>(rows[static_cast<std::size_t>(j)]));
        }
    return s;
}

double MatrixOfMoments::hermiticity_defect() const { return (entries - entries.adjoint()).cwiseAbs().maxCoeff(); }

void MatrixOfMoments::write_csv(std::ostream& out) const {
    out << "row,col,re,im\n";
    for (std::size_t i = 0; i < basis.size(); ++i)
        for (std::size_t j = 0; j < basis.size(); ++j) {
            const cplx v = entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            out << basis[i].label() << ',' << basis[j].label() << ',' << v.real() << ',' << v.imag() << '\n';
        }
}

PartitionSpec::PartitionSpec(std::size_t modes, std::vector<std::size_t> transposed)
    : modes_(modes), in_b_(modes, false) {
    for (auto i : transposed) {
        require(i < modes, ErrorCode::PartitionMismatch, "transposed mode outside range");
        require(!in_b_[i], ErrorCode::PartitionMismatch, "transposed mode listed twice");
        in_b_[i] = true;
    }
    for (std::size_t i = 0; i < modes; ++i) (in_b_[i] ? b_ : a_).push_back(i);
}

MomentTable output_moment(const MomentTable& t, const JointChannel& c) {
    check_modes(t, c.modes());
    MomentTable out(t.modes(), t.max_total_order());
    t.for_each([&](const MultiIndex& p, const MultiIndex& q, cplx v) { out.set(p, q, joint_t_moment(c, p + q) * v); });
    return out;
}

OperatorPolynomial entry_polynomial(const BasisElement& row, const BasisElement& col, const PartitionSpec& part) {
    const std::size_t n = row.p.size();
    require(part.modes() == n, ErrorCode::PartitionMismatch, "partition mode count mismatch");
    MultiIndex c1(n), a1(n), c2(n), a2(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (part.transposed(i)) {
            // a^dag^s a^r a^dag^p a^q
            c1.set(i, col.q[i]);
            a1.set(i, col.p[i]);
            c2.set(i, row.p[i]);
            a2.set(i, row.q[i]);
        } else {
            // a^dag^q a^p a^dag^r a^s
            c1.set(i, row.q[i]);
            a1.set(i, row.p[i]);
            c2.set(i, col.p[i]);
            a2.set(i, col.q[i]);
        }
    }
    return multiply_normal(OperatorMonomial(c1, a1), OperatorMonomial(c2, a2));
}

int required_order(const std::vector<BasisElement>& basis) {
    int best = 0;
    for (const auto& b : basis) best = std::max(best, b.total());
    return 2 * best;
}

MatrixOfMoments build_matrix_M(const MomentTable& t, int cutoff) {
    return build_matrix_M(t, graded_basis(t.modes(), cutoff));
}

MatrixOfMoments build_matrix_M(const MomentTable& t, const std::vector<BasisElement>& basis) {
    check_basis(basis, t.modes());
    const auto part = PartitionSpec::none(t.modes());
    return fill(basis, MatrixKind::M,
                [&](const BasisElement& r, const BasisElement& c) { return evaluate(entry_polynomial(r, c, part), t); });
}

MatrixOfMoments output_matrix_single(const MomentTable& t, const TransmittanceModel& c, int cutoff) {
    require(t.modes() == 1, ErrorCode::InvalidArgument, "output_matrix_single needs a single-mode table");
    return output_matrix_multi(t, JointChannel::single(c), cutoff);
}

MatrixOfMoments output_matrix_multi(const MomentTable& t, const JointChannel& c, int cutoff) {
    return output_matrix_multi(t, c, graded_basis(t.modes(), cutoff));
}

MatrixOfMoments output_matrix_multi(const MomentTable& t, const JointChannel& c,
                                    const std::vector<BasisElement>& basis) {
    MatrixOfMoments m = output_pt_matrix(t, c, PartitionSpec::none(t.modes()), basis);
    m.kind = MatrixKind::OutputM;
    return m;
}

MatrixOfMoments build_matrix_N(const MomentTable& t, int cutoff) {
    return build_matrix_N(t, graded_basis(t.modes(), cutoff));
}

MatrixOfMoments build_matrix_N(const MomentTable& t, const std::vector<BasisElement>& basis) {
    check_basis(basis, t.modes());
    return fill(basis, MatrixKind::N,
                [&](const BasisElement& r, const BasisElement& c) { return t(r.q + c.p, r.p + c.q); });
}

MatrixOfMoments output_matrix_N(const MomentTable& t, const JointChannel& c, int cutoff) {
    return output_matrix_N(t, c, graded_basis(t.modes(), cutoff));
}

MatrixOfMoments output_matrix_N(const MomentTable& t, const JointChannel& c,
                                const std::vector<BasisElement>& basis) {
    check_modes(t, c.modes());
    check_basis(basis, t.modes());
    return fill(basis, MatrixKind::OutputN, [&](const BasisElement& r, const BasisElement& col) {
        return joint_t_moment(c, r.p + r.q + col.p + col.q) * t(r.q + col.p, r.p + col.q);
    });
}

MatrixOfMoments partial_transpose(const MatrixOfMoments& m, const PartitionSpec& part, const MomentTable& t) {
    return build_pt_matrix(t, part, m.basis);
}

MatrixOfMoments build_pt_matrix(const MomentTable& t, const PartitionSpec& part,
                                const std::vector<BasisElement>& basis) {
    check_basis(basis, t.modes());
    require(part.modes() == t.modes(), ErrorCode::PartitionMismatch, "partition mode count mismatch");
    return fill(basis, MatrixKind::PartialTranspose,
                [&](const BasisElement& r, const BasisElement& c) { return evaluate(entry_polynomial(r, c, part), t); });
}

MatrixOfMoments output_pt_matrix(const MomentTable& t, const JointChannel& c, const PartitionSpec& part,
                                 int cutoff) {
    return output_pt_matrix(t, c, part, graded_basis(t.modes(), cutoff));
}

MatrixOfMoments output_pt_matrix(const MomentTable& t, const JointChannel& c, const PartitionSpec& part,
                                 const std::vector<BasisElement>& basis) {
    check_modes(t, c.modes());
    check_basis(basis, t.modes());
    require(part.modes() == t.modes(), ErrorCode::PartitionMismatch, "partition mode count mismatch");
    return fill(basis, MatrixKind::OutputPartialTranspose,
                [&](const BasisElement& r, const BasisElement& col) { return output_entry(t, c, part, r, col); });
}

}  // namespace flm
