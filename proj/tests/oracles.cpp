#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

IntMatrix IntMatrix::identity(int size) {
    IntMatrix m(size);
    for (int i = 0; i < size; ++i) m(i, i) = 1;
    return m;
}

IntMatrix IntMatrix::creation(int size) {
    IntMatrix m(size);
    for (int j = 0; j + 1 < size; ++j) m(j + 1, j) = 1;
    return m;
}

IntMatrix IntMatrix::annihilation(int size) {
    IntMatrix m(size);
    for (int j = 1; j < size; ++j) m(j - 1, j) = j;
    return m;
}

IntMatrix operator*(const IntMatrix& a, const IntMatrix& b) {
    IntMatrix c(a.n);
    for (int i = 0; i < a.n; ++i)
        for (int k = 0; k < a.n; ++k) {
            const auto x = a(i, k);
            if (x == 0) continue;
            for (int j = 0; j < a.n; ++j) c(i, j) += x * b(k, j);
        }
    return c;
}

IntMatrix operator+(const IntMatrix& a, const IntMatrix& b) {
    IntMatrix c(a.n);
    for (std::size_t i = 0; i < a.v.size(); ++i) c.v[i] = a.v[i] + b.v[i];
    return c;
}

IntMatrix scaled(const IntMatrix& a, std::int64_t s) {
    IntMatrix c(a.n);
    for (std::size_t i = 0; i < a.v.size(); ++i) c.v[i] = a.v[i] * s;
    return c;
}

IntMatrix power(const IntMatrix& a, int k) {
    IntMatrix r = IntMatrix::identity(a.n);
    for (int i = 0; i < k; ++i) r = r * a;
    return r;
}

IntMatrix polynomial_matrix(const flm::OperatorPolynomial& poly, int size) {
    const auto cre = IntMatrix::creation(size);
    const auto ann = IntMatrix::annihilation(size);
    IntMatrix total(size);
    for (const auto& [key, c] : poly.terms()) {
        const int nc = key.first[0];
        const int na = key.second[0];
        const IntMatrix term = poly.ordering() == flm::Ordering::Normal ? power(cre, nc) * power(ann, na)
                                                                        : power(ann, na) * power(cre, nc);
        total = total + scaled(term, c);
    }
    return total;
}

bool equal_on_leading(const IntMatrix& a, const IntMatrix& b, int columns) {
    for (int r = 0; r < a.n; ++r)
        for (int c = 0; c < columns; ++c)
            if (a(r, c) != b(r, c)) return false;
    return true;
}

}  // namespace oracle

namespace oracle {

flm::MatrixOfMoments scaled_output_matrix(const flm::MomentTable& t, const flm::JointChannel& c,
                                          const flm::PartitionSpec& part,
                                          const std::vector<flm::BasisElement>& basis) {
    const auto n = static_cast<Eigen::Index>(basis.size());
    flm::MatrixOfMoments m{basis, Eigen::MatrixXcd::Zero(n, n), flm::MatrixKind::OutputPartialTranspose};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto poly = flm::entry_polynomial(basis[static_cast<std::size_t>(i)],
                                                    basis[static_cast<std::size_t>(j)], part);
            flm::cplx v = 0.0;
            for (const auto& [key, coeff] : poly.terms())
                v += static_cast<double>(coeff) * flm::joint_t_moment(c, key.first + key.second) *
                     t(key.first, key.second);
            m.entries(i, j) = v;
        }
    return m;
}

flm::MomentTable attenuated_table(const flm::StateModel& s, const std::vector<double>& t, int order) {
    return attenuated_table(flm::oracle_density(s, order), t, order);
}

flm::MomentTable attenuated_table(const flm::FockDensityMatrix& rho, const std::vector<double>& t, int order) {
    return flm::tabulate(flm::attenuate(rho, t), order);
}

double max_abs_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace oracle

namespace oracle {

namespace {

Eigen::VectorXcd apply_op(const flm::FockSpace& space, const Eigen::VectorXcd& v, std::size_t mode, char op) {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.size());
    const auto stride = static_cast<Eigen::Index>(space.stride(mode));
    const int cut = space.cutoff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] == flm::cplx{}) continue;
        const int n = static_cast<int>((i / stride) % cut);
        if (op == 'a') {
            if (n > 0) out[i - stride] += std::sqrt(static_cast<double>(n)) * v[i];
        } else if (n + 1 < cut) {
            out[i + stride] += std::sqrt(static_cast<double>(n + 1)) * v[i];
        }
    }
    return out;
}

std::string word_of(int q, int p, int r, int s) {
    return std::string(static_cast<std::size_t>(q), 'd') + std::string(static_cast<std::size_t>(p), 'a') +
           std::string(static_cast<std::size_t>(r), 'd') + std::string(static_cast<std::size_t>(s), 'a');
}

}  // namespace

flm::cplx word_expectation(const flm::FockPureState& psi, const std::vector<std::string>& words,
                           const std::vector<bool>& transposed) {
    Eigen::VectorXcd v = psi.amplitudes;
    for (std::size_t mode = 0; mode < words.size(); ++mode) {
        std::string w = words[mode];
        if (transposed[mode]) {
            std::reverse(w.begin(), w.end());
            for (char& ch : w) ch = ch == 'a' ? 'd' : 'a';
        }
        for (auto it = w.rbegin(); it != w.rend(); ++it) v = apply_op(psi.space, v, mode, *it);
    }
    return psi.amplitudes.dot(v);
}

Eigen::MatrixXcd pt_matrix_by_words(const flm::FockPureState& psi, const std::vector<flm::BasisElement>& basis,
                                    const std::vector<bool>& transposed) {
    const auto n = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXcd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& row = basis[static_cast<std::size_t>(i)];
            const auto& col = basis[static_cast<std::size_t>(j)];
            std::vector<std::string> words;
            for (std::size_t k = 0; k < row.p.size(); ++k)
                words.push_back(word_of(row.q[k], row.p[k], col.p[k], col.q[k]));
            m(i, j) = word_expectation(psi, words, transposed);
        }
    return m;
}

}  // namespace oracle

#include <unordered_map>

namespace oracle {

namespace {

// Occupations of four detectors and the environment, 8 bits each.
using Ket = std::unordered_map<std::uint64_t, flm::cplx>;

int occupation(std::uint64_t key, std::size_t j) { return static_cast<int>((key >> (8 * j)) & 0xff); }

Ket create(const Ket& in, const std::array<flm::cplx, 5>& coeff) {
    Ket out;
    out.reserve(in.size() * 2);
    for (const auto& [k, v] : in)
        for (std::size_t j = 0; j < 5; ++j) {
            if (coeff[j] == 0.0) continue;
            out[k + (std::uint64_t{1} << (8 * j))] += coeff[j] * std::sqrt(occupation(k, j) + 1.0) * v;
        }
    return out;
}

void axpy(Ket& y, flm::cplx a, const Ket& x) {
    for (const auto& [k, v] : x) y[k] += a * v;
}

}  // namespace

NetworkMoments homodyne_network(const flm::FockPureState& psi, double t, flm::cplx lo, int lo_cutoff) {
    using flm::cplx;
    const cplx i(0.0, 1.0);
    const double h = 0.5;
    // a^dag and b^dag in terms of detector creation operators
    const std::array<cplx, 5> sig{t * h, t * h, t * h * i, t * h * i, std::sqrt(1.0 - t * t)};
    const std::array<cplx, 5> loc{h * i, h * i, h, h, 0.0};

    Ket vac{{0, 1.0}};
    Ket s, cur = vac;
    const auto n_max = static_cast<int>(psi.amplitudes.size());
    int last = 0;
    for (int n = 0; n < n_max; ++n)
        if (std::abs(psi.amplitudes[n]) > 1e-9) last = n;
    for (int n = 0; n <= last; ++n) {
        if (n > 0) {
            cur = create(cur, sig);
            for (auto& [k, v] : cur) v /= std::sqrt(static_cast<double>(n));
        }
        axpy(s, psi.amplitudes[n], cur);  // a^dag^n / sqrt(n!) |0>
    }
    Ket w;
    cur = s;
    cplx lo_pow = 1.0;
    for (int m = 0; m <= lo_cutoff; ++m) {
        if (m > 0) {
            cur = create(cur, loc);
            for (auto& [k, v] : cur) v /= static_cast<double>(m);
            lo_pow *= lo;
        }
        axpy(w, std::exp(-0.5 * std::norm(lo)) * lo_pow, cur);  // lo^m b^dag^m / m! |0>
    }
    NetworkMoments out;
    for (const auto& [k, v] : w) {
        const double p = std::norm(v);
        for (std::size_t a = 0; a < 4; ++a) {
            out.n[a] += p * occupation(k, a);
            for (std::size_t b = 0; b < 4; ++b) out.nn[a][b] += p * occupation(k, a) * occupation(k, b);
        }
    }
    return out;
}

}  // namespace oracle
