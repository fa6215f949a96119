#include "flm/algebra.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "flm/error.hpp"

namespace flm {

namespace {

void require_same_size(const MultiIndex& a, const MultiIndex& b) {
    require(a.size() == b.size(), ErrorCode::InvalidArgument,
            "multi-index length mismatch: " + a.to_string() + " vs " + b.to_string());
}

void check_powers(int m, int n) {
    require(m >= 0 && n >= 0, ErrorCode::InvalidArgument, "negative operator power");
    if (m + n > kMaxTotalOrder) {
        fail(ErrorCode::UnsupportedOrder, "reordering order " + std::to_string(m + n) +
                                              " exceeds supported limit " +
                                              std::to_string(kMaxTotalOrder));
    }
}

}  // namespace

MultiIndex::MultiIndex(std::initializer_list<int> entries) : MultiIndex(std::vector<int>(entries)) {}

MultiIndex::MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
    for (int e : entries_) {
        require(e >= 0, ErrorCode::InvalidArgument, "multi-index entries must be non-negative");
    }
}

MultiIndex MultiIndex::unit(std::size_t modes, std::size_t mode, int power) {
    require(mode < modes, ErrorCode::InvalidArgument, "mode out of range");
    MultiIndex m(modes);
    m.set(mode, power);
    return m;
}

void MultiIndex::set(std::size_t i, int value) {
    require(value >= 0, ErrorCode::InvalidArgument, "multi-index entries must be non-negative");
    entries_.at(i) = value;
}

int MultiIndex::total() const noexcept {
    return std::accumulate(entries_.begin(), entries_.end(), 0);
}

MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) {
    require_same_size(a, b);
    MultiIndex r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r.entries_[i] = a[i] + b[i];
    return r;
}

MultiIndex operator-(const MultiIndex& a, const MultiIndex& b) {
    require_same_size(a, b);
    MultiIndex r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        require(a[i] >= b[i], ErrorCode::InvalidArgument,
                "multi-index subtraction underflow: " + a.to_string() + " - " + b.to_string());
        r.entries_[i] = a[i] - b[i];
    }
    return r;
}

MultiIndex elementwise_min(const MultiIndex& a, const MultiIndex& b) {
    require_same_size(a, b);
    MultiIndex r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r.entries_[i] = std::min(a[i], b[i]);
    return r;
}

MultiIndex MultiIndex::scaled(int factor) const {
    require(factor >= 0, ErrorCode::InvalidArgument, "negative scale");
    MultiIndex r(size());
    for (std::size_t i = 0; i < size(); ++i) r.entries_[i] = entries_[i] * factor;
    return r;
}

MultiIndex MultiIndex::restricted(const std::vector<std::size_t>& modes) const {
    MultiIndex r(size());
    for (std::size_t m : modes) {
        require(m < size(), ErrorCode::InvalidArgument, "mode out of range");
        r.entries_[m] = entries_[m];
    }
    return r;
}

std::string MultiIndex::to_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (i) os << ',';
        os << entries_[i];
    }
    os << ')';
    return os.str();
}

bool dominated_by(const MultiIndex& a, const MultiIndex& b) {
    require_same_size(a, b);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) return false;
    }
    return true;
}

OperatorMonomial::OperatorMonomial(MultiIndex cre, MultiIndex ann, Ordering ord)
    : creation(std::move(cre)), annihilation(std::move(ann)), ordering(ord) {
    require_same_size(creation, annihilation);
}

OperatorMonomial OperatorMonomial::identity(std::size_t modes) {
    return {MultiIndex(modes), MultiIndex(modes)};
}

Coefficient checked_mul(Coefficient a, Coefficient b) {
    Coefficient r = 0;
    if (__builtin_mul_overflow(a, b, &r)) {
        fail(ErrorCode::CoefficientOverflow, "integer overflow in reordering coefficient");
    }
    return r;
}

Coefficient checked_add(Coefficient a, Coefficient b) {
    Coefficient r = 0;
    if (__builtin_add_overflow(a, b, &r)) {
        fail(ErrorCode::CoefficientOverflow, "integer overflow in reordering coefficient");
    }
    return r;
}

Coefficient binomial(int n, int k) {
    require(n >= 0, ErrorCode::InvalidArgument, "binomial of negative n");
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    Coefficient r = 1;
    for (int j = 1; j <= k; ++j) {
        // r * (n - k + j) is divisible by j at every step.
        r = checked_mul(r, n - k + j) / j;
    }
    return r;
}

Coefficient reordering_coefficient(int m, int n, int i) {
    require(i >= 0 && i <= std::min(m, n), ErrorCode::InvalidArgument,
            "reordering index out of range");
    Coefficient factorial_i = 1;
    for (int j = 2; j <= i; ++j) factorial_i = checked_mul(factorial_i, j);
    return checked_mul(checked_mul(binomial(m, i), binomial(n, i)), factorial_i);
}

void OperatorPolynomial::add(const MultiIndex& creation, const MultiIndex& annihilation,
                             Coefficient c) {
    require_same_size(creation, annihilation);
    if (!terms_.empty()) {
        require(terms_.begin()->first.first.size() == creation.size(), ErrorCode::InvalidArgument,
                "polynomial mode count mismatch");
    }
    if (c == 0) return;
    auto [it, inserted] = terms_.try_emplace(Key{creation, annihilation}, c);
    if (!inserted) {
        it->second = checked_add(it->second, c);
        if (it->second == 0) terms_.erase(it);
    }
}

Coefficient OperatorPolynomial::coefficient(const MultiIndex& creation,
                                            const MultiIndex& annihilation) const {
    auto it = terms_.find(Key{creation, annihilation});
    return it == terms_.end() ? 0 : it->second;
}

std::string OperatorPolynomial::to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [key, c] : terms_) {
        if (!first) os << (c < 0 ? " - " : " + ");
        else if (c < 0) os << '-';
        first = false;
        Coefficient mag = c < 0 ? -c : c;
        os << mag;
        if (ordering_ == Ordering::Normal) {
            os << " a+" << key.first.to_string() << " a" << key.second.to_string();
        } else {
            os << " a" << key.second.to_string() << " a+" << key.first.to_string();
        }
    }
    return os.str();
}

OperatorPolynomial reorder_annihilation_first(int m, int n) {
    check_powers(m, n);
    OperatorPolynomial poly(Ordering::Normal);
    for (int i = 0; i <= std::min(m, n); ++i) {
        poly.add(MultiIndex{n - i}, MultiIndex{m - i}, reordering_coefficient(m, n, i));
    }
    return poly;
}

OperatorPolynomial reorder_creation_first(int m, int n) {
    check_powers(m, n);
    OperatorPolynomial poly(Ordering::Antinormal);
    for (int i = 0; i <= std::min(m, n); ++i) {
        Coefficient c = reordering_coefficient(m, n, i);
        poly.add(MultiIndex{m - i}, MultiIndex{n - i}, (i % 2 == 0) ? c : -c);
    }
    return poly;
}

OperatorPolynomial to_normal_order(const OperatorPolynomial& poly) {
    if (poly.ordering() == Ordering::Normal) return poly;
    OperatorPolynomial out(Ordering::Normal);
    for (const auto& [key, c] : poly.terms()) {
        const auto& [cre, ann] = key;
        // Per mode: a^ann a^dag^cre, modes independent.
        std::vector<std::pair<std::pair<MultiIndex, MultiIndex>, Coefficient>> acc{
            {{MultiIndex(cre.size()), MultiIndex(cre.size())}, c}};
        for (std::size_t mode = 0; mode < cre.size(); ++mode) {
            OperatorPolynomial single = reorder_annihilation_first(ann[mode], cre[mode]);
            std::vector<std::pair<std::pair<MultiIndex, MultiIndex>, Coefficient>> next;
            for (const auto& [partial, pc] : acc) {
                for (const auto& [skey, sc] : single.terms()) {
                    MultiIndex nc = partial.first;
                    MultiIndex na = partial.second;
                    nc.set(mode, skey.first[0]);
                    na.set(mode, skey.second[0]);
                    next.push_back({{nc, na}, checked_mul(pc, sc)});
                }
            }
            acc = std::move(next);
        }
        for (const auto& [k, v] : acc) out.add(k.first, k.second, v);
    }
    return out;
}

OperatorPolynomial multiply_normal(const OperatorMonomial& a, const OperatorMonomial& b) {
    require(a.ordering == Ordering::Normal && b.ordering == Ordering::Normal,
            ErrorCode::InvalidArgument, "multiply_normal expects normal-ordered monomials");
    require(a.modes() == b.modes(), ErrorCode::InvalidArgument, "mode count mismatch");
    const std::size_t modes = a.modes();

    // (a^dag^p a^q)(a^dag^r a^s) = a^dag^p [a^q a^dag^r] a^s per mode.
    struct Partial {
        MultiIndex cre;
        MultiIndex ann;
        Coefficient c;
    };
    std::vector<Partial> acc{{MultiIndex(modes), MultiIndex(modes), 1}};
    for (std::size_t mode = 0; mode < modes; ++mode) {
        const int p = a.creation[mode];
        const int q = a.annihilation[mode];
        const int r = b.creation[mode];
        const int s = b.annihilation[mode];
        check_powers(p + q, r + s);
        std::vector<Partial> next;
        next.reserve(acc.size() * static_cast<std::size_t>(std::min(q, r) + 1));
        for (const auto& part : acc) {
            for (int i = 0; i <= std::min(q, r); ++i) {
                Partial n = part;
                n.cre.set(mode, p + r - i);
                n.ann.set(mode, q + s - i);
                n.c = checked_mul(part.c, reordering_coefficient(q, r, i));
                next.push_back(std::move(n));
            }
        }
        acc = std::move(next);
    }
    OperatorPolynomial out(Ordering::Normal);
    for (const auto& part : acc) out.add(part.cre, part.ann, part.c);
    return out;
}

}  // namespace flm
