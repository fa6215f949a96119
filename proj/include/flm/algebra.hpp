#pragma once

// Multi-index bookkeeping and exact reordering of bosonic ladder operators.
//
// A monomial is a product over modes of a_i^dag^{c_i} a_i^{n_i}; operators of
// different modes commute, so a monomial is fully described by the two
// multi-indices (creation powers, annihilation powers) plus the per-mode
// ordering. All reordering coefficients are integers and are kept exact.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace flm {

// Highest total operator order (m + n per mode factor) that reordering accepts.
inline constexpr int kMaxTotalOrder = 20;

class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::size_t modes) : entries_(modes, 0) {}
    MultiIndex(std::initializer_list<int> entries);
    explicit MultiIndex(std::vector<int> entries);

    static MultiIndex unit(std::size_t modes, std::size_t mode, int power = 1);

    std::size_t size() const noexcept { return entries_.size(); }
    int operator[](std::size_t i) const { return entries_[i]; }
    void set(std::size_t i, int value);

    int total() const noexcept;
    bool is_zero() const noexcept { return total() == 0; }

    const std::vector<int>& entries() const noexcept { return entries_; }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    friend MultiIndex operator+(const MultiIndex& a, const MultiIndex& b);
    // Throws InvalidArgument if any entry would become negative.
    friend MultiIndex operator-(const MultiIndex& a, const MultiIndex& b);
    friend MultiIndex elementwise_min(const MultiIndex& a, const MultiIndex& b);
    MultiIndex scaled(int factor) const;

    // Entries restricted to `modes` (others zeroed).
    MultiIndex restricted(const std::vector<std::size_t>& modes) const;

    friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;
    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

    std::string to_string() const;

private:
    std::vector<int> entries_;
};

// True when every entry of a is <= the matching entry of b.
bool dominated_by(const MultiIndex& a, const MultiIndex& b);

enum class Ordering { Normal, Antinormal };

struct OperatorMonomial {
    MultiIndex creation;
    MultiIndex annihilation;
    Ordering ordering = Ordering::Normal;

    OperatorMonomial() = default;
    OperatorMonomial(MultiIndex cre, MultiIndex ann, Ordering ord = Ordering::Normal);

    std::size_t modes() const noexcept { return creation.size(); }
    int total_order() const noexcept { return creation.total() + annihilation.total(); }

    static OperatorMonomial identity(std::size_t modes);
};

using Coefficient = std::int64_t;

// Linear combination of monomials that all share one ordering. Keys are
// (creation_powers, annihilation_powers) compared lexicographically, so two
// polynomials are equal iff their term maps are equal.
class OperatorPolynomial {
public:
    using Key = std::pair<MultiIndex, MultiIndex>;
    using TermMap = std::map<Key, Coefficient>;

    explicit OperatorPolynomial(Ordering ordering = Ordering::Normal) : ordering_(ordering) {}

    void add(const MultiIndex& creation, const MultiIndex& annihilation, Coefficient c);
    Coefficient coefficient(const MultiIndex& creation, const MultiIndex& annihilation) const;

    const TermMap& terms() const noexcept { return terms_; }
    std::size_t size() const noexcept { return terms_.size(); }
    Ordering ordering() const noexcept { return ordering_; }

    friend bool operator==(const OperatorPolynomial&, const OperatorPolynomial&) = default;

    std::string to_string() const;

private:
    TermMap terms_;
    Ordering ordering_;
};

// a^m a^dag^n = sum_i m! n! / (i! (m-i)! (n-i)!) a^dag^(n-i) a^(m-i)   (single mode).
OperatorPolynomial reorder_annihilation_first(int m, int n);

// a^dag^m a^n = sum_i (-1)^i m! n! / (i! (m-i)! (n-i)!) a^(n-i) a^dag^(m-i).
// Result carries the antinormal tag; keys store (creation, annihilation) powers.
OperatorPolynomial reorder_creation_first(int m, int n);

// Brings an antinormally ordered polynomial back to normal order term by term.
OperatorPolynomial to_normal_order(const OperatorPolynomial& poly);

// Normal-ordered form of the product a * b of two normal-ordered monomials.
OperatorPolynomial multiply_normal(const OperatorMonomial& a, const OperatorMonomial& b);

// Coefficient m! n! / (i! (m-i)! (n-i)!) with overflow detection.
Coefficient reordering_coefficient(int m, int n, int i);

Coefficient checked_mul(Coefficient a, Coefficient b);
Coefficient checked_add(Coefficient a, Coefficient b);
Coefficient binomial(int n, int k);

}  // namespace flm
