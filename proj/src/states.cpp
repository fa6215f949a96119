#include "flm/states.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "flm/error.hpp"

namespace flm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double falling(int n, int k) {
    if (k > n) return 0.0;
    double r = 1.0;
    for (int j = 0; j < k; ++j) r *= static_cast<double>(n - j);
    return r;
}

double sqrt_falling(int n, int k) { return std::sqrt(falling(n, k)); }

double double_factorial_odd(int n) {
    // (n-1)!! for even n, i.e. number of perfect pairings of n objects.
    double r = 1.0;
    for (int j = n - 1; j > 1; j -= 2) r *= j;
    return r;
}

void check_index(const StateModel& s, const MultiIndex& p, const MultiIndex& q) {
    require(p.size() == s.modes() && q.size() == s.modes(), ErrorCode::InvalidArgument,
            "moment index length " + std::to_string(p.size()) + " does not match state mode count " +
                std::to_string(s.modes()));
}

// Sums term(n) for n = 0, 1, ... of a series whose terms eventually decay
// geometrically. Stops once the ratio-test bound on the tail drops below
// 1e-14 relative (absolute below 1e-16).
double geometric_series(const std::function<double(int)>& term, int warmup) {
    double sum = 0.0, comp = 0.0;
    double prev = 0.0;
    for (int n = 0; n < 10'000'000; ++n) {
        const double t = term(n);
        const double y = t - comp;
        const double s = sum + y;
        comp = (s - sum) - y;
        sum = s;
        if (n > warmup && prev != 0.0) {
            const double ratio = std::abs(t / prev);
            if (ratio < 1.0) {
                const double tail = std::abs(t) * ratio / (1.0 - ratio);
                if (tail < 1e-14 * std::max(1.0, std::abs(sum))) return sum;
            }
        }
        if (n > warmup && t == 0.0 && prev == 0.0) return sum;
        prev = t;
    }
    fail(ErrorCode::InvalidState, "series did not converge");
}

// Pure superposition sum_j c_j |v_j> of multimode coherent states.
struct CoherentSuperposition {
    std::vector<cplx> coeffs;
    std::vector<std::vector<cplx>> amps;

    static cplx overlap(const std::vector<cplx>& g, const std::vector<cplx>& d) {
        cplx e = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            e += -0.5 * std::norm(g[i]) - 0.5 * std::norm(d[i]) + std::conj(g[i]) * d[i];
        return std::exp(e);
    }

    cplx moment(const MultiIndex& p, const MultiIndex& q) const {
        cplx num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < amps.size(); ++j) {
            for (std::size_t k = 0; k < amps.size(); ++k) {
                const cplx w = std::conj(coeffs[j]) * coeffs[k] * overlap(amps[j], amps[k]);
                cplx mono = 1.0;
                for (std::size_t i = 0; i < p.size(); ++i)
                    mono *= std::pow(std::conj(amps[j][i]), p[i]) * std::pow(amps[k][i], q[i]);
                num += w * mono;
                den += w;
            }
        }
        return num / den;
    }

    // Fock amplitudes on `space` (unnormalized sum of displaced vacua,
    // normalized by the overlap algebra).
    Eigen::VectorXcd amplitudes(const FockSpace& space) const {
        const std::size_t modes = space.modes();
        const int c = space.cutoff();
        Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space.dimension()));
        cplx norm2 = 0.0;
        for (std::size_t j = 0; j < amps.size(); ++j)
            for (std::size_t k = 0; k < amps.size(); ++k)
                norm2 += std::conj(coeffs[j]) * coeffs[k] * overlap(amps[j], amps[k]);
        const double scale = 1.0 / std::sqrt(norm2.real());
        for (std::size_t j = 0; j < amps.size(); ++j) {
            // Per-mode coherent coefficient tables.
            std::vector<std::vector<cplx>> table(modes, std::vector<cplx>(c));
            for (std::size_t i = 0; i < modes; ++i) {
                const cplx a = amps[j][i];
                cplx v = std::exp(-0.5 * std::norm(a));
                for (int n = 0; n < c; ++n) {
                    table[i][n] = v;
                    v *= a / std::sqrt(static_cast<double>(n + 1));
                }
            }
            std::vector<int> occ(modes, 0);
            for (std::size_t idx = 0; idx < space.dimension(); ++idx) {
                cplx v = coeffs[j] * scale;
                for (std::size_t i = 0; i < modes; ++i) v *= table[i][occ[i]];
                psi[static_cast<Eigen::Index>(idx)] += v;
                for (std::size_t i = modes; i-- > 0;) {
                    if (++occ[i] < c) break;
                    occ[i] = 0;
                }
            }
        }
        return psi;
    }
};

CoherentSuperposition superposition_of(const StateModel& s) {
    return std::visit(
        overloaded{
            [](const Coherent& c) { return CoherentSuperposition{{1.0}, {c.alpha}}; },
            [](const EntangledCoherent& e) {
                return CoherentSuperposition{{1.0, -1.0}, {{e.alpha, e.beta}, {-e.alpha, -e.beta}}};
            },
            [](const CoherentW& w) {
                CoherentSuperposition sup;
                for (int i = 0; i < w.modes; ++i) {
                    std::vector<cplx> v(static_cast<std::size_t>(w.modes), w.alpha);
                    v[static_cast<std::size_t>(i)] = -w.alpha;
                    sup.coeffs.push_back(1.0);
                    sup.amps.push_back(std::move(v));
                }
                return sup;
            },
            [](const auto&) -> CoherentSuperposition {
                fail(ErrorCode::InvalidArgument, "not a coherent superposition");
            }},
        s.value());
}

struct SqueezingMoments {
    double n;  // <Da^dag Da>
    cplx m;    // <Da^2>
};

SqueezingMoments squeezing_moments(cplx xi) {
    const double r = std::abs(xi);
    const double theta = std::arg(xi);
    return {std::sinh(r) * std::sinh(r), std::polar(std::sinh(r) * std::cosh(r), theta)};
}

// <Da^dag^i Da^j> of the zero-mean Gaussian part.
cplx gaussian_central(const SqueezingMoments& g, int i, int j) {
    cplx sum = 0.0;
    for (int k = 0; k <= std::min(i, j); ++k) {
        if ((i - k) % 2 != 0 || (j - k) % 2 != 0) continue;
        const double comb = static_cast<double>(binomial(i, k)) * static_cast<double>(binomial(j, k)) *
                            falling(k, k) * double_factorial_odd(i - k) * double_factorial_odd(j - k);
        sum += comb * std::pow(g.n, k) * std::pow(std::conj(g.m), (i - k) / 2) *
               std::pow(g.m, (j - k) / 2);
    }
    return sum;
}

cplx displaced_squeezed_moment(const DisplacedSqueezed& d, int p, int q) {
    const auto g = squeezing_moments(d.xi);
    cplx sum = 0.0;
    for (int i = 0; i <= p; ++i)
        for (int j = 0; j <= q; ++j) {
            const cplx c = gaussian_central(g, i, j);
            if (c == 0.0) continue;
            sum += static_cast<double>(binomial(p, i)) * static_cast<double>(binomial(q, j)) *
                   std::pow(std::conj(d.beta), p - i) * std::pow(d.beta, q - j) * c;
        }
    return sum;
}

cplx tmsv_moment(double p, const MultiIndex& pi, const MultiIndex& qi) {
    const int d = pi[0] - qi[0];
    if (pi[1] - qi[1] != d) return 0.0;
    const int shift = std::max(0, -d);
    const int order = pi.total() + qi.total();
    const double sp = std::sqrt(p);
    auto term = [&](int k) {
        const int n = k + shift;  // ket level
        const int m = n + d;      // bra level
        return (1.0 - p) * std::pow(sp, n + m) * sqrt_falling(n, qi[0]) * sqrt_falling(m, pi[0]) *
               sqrt_falling(n, qi[1]) * sqrt_falling(m, pi[1]);
    };
    return geometric_series(term, order + static_cast<int>(2.0 * order / (1.0 - p)));
}

cplx pr_tmsv_moment(double p, const MultiIndex& pi, const MultiIndex& qi) {
    if (pi != qi) return 0.0;
    const int order = pi.total() + qi.total();
    auto term = [&](int n) {
        return (1.0 - p) * std::pow(p, n) * falling(n, pi[0]) * falling(n, pi[1]);
    };
    return geometric_series(term, order + static_cast<int>(2.0 * order / (1.0 - p)));
}

double pure_norm(const Eigen::VectorXcd& v) { return v.norm(); }

// Taylor action of exp(G) on v with operator norm bound `bound`.
Eigen::VectorXcd expm_action(const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& g,
                             Eigen::VectorXcd v, double bound) {
    const int steps = std::max(1, static_cast<int>(std::ceil(bound)));
    const double h = 1.0 / steps;
    for (int s = 0; s < steps; ++s) {
        Eigen::VectorXcd term = v;
        Eigen::VectorXcd acc = v;
        for (int k = 1; k < 200; ++k) {
            term = g(term) * (h / k);
            acc += term;
            if (pure_norm(term) < 1e-18 * pure_norm(acc)) break;
        }
        v = std::move(acc);
    }
    return v;
}

Eigen::VectorXcd displaced_squeezed_amplitudes(const DisplacedSqueezed& d, int cutoff) {
    const int big = 2 * cutoff + 20;
    const Eigen::Index dim = big;
    auto lower = [big](const Eigen::VectorXcd& x) {
        Eigen::VectorXcd y = Eigen::VectorXcd::Zero(big);
        for (int n = 1; n < big; ++n) y[n - 1] = std::sqrt(static_cast<double>(n)) * x[n];
        return y;
    };
    auto raise = [big](const Eigen::VectorXcd& x) {
        Eigen::VectorXcd y = Eigen::VectorXcd::Zero(big);
        for (int n = 0; n + 1 < big; ++n) y[n + 1] = std::sqrt(static_cast<double>(n + 1)) * x[n];
        return y;
    };
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
    v[0] = 1.0;
    const cplx xi = d.xi;
    if (xi != 0.0) {
        auto gs = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
            return 0.5 * (xi * raise(raise(x)) - std::conj(xi) * lower(lower(x)));
        };
        v = expm_action(gs, v, std::abs(xi) * big);
    }
    const cplx b = d.beta;
    if (b != 0.0) {
        auto gd = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
            return b * raise(x) - std::conj(b) * lower(x);
        };
        v = expm_action(gd, v, 2.0 * std::abs(b) * std::sqrt(static_cast<double>(big)));
    }
    return v.head(cutoff);
}

// Truncation estimate: weighted probability mass in the top band of levels
// of any mode. `prob(idx)` is the diagonal entry at flat index idx.
double truncation_estimate(const FockSpace& space, int order,
                           const std::function<double(std::size_t)>& prob) {
    const int band_start = space.cutoff() - order - 4;
    double est = 0.0;
    std::vector<int> occ(space.modes(), 0);
    for (std::size_t idx = 0; idx < space.dimension(); ++idx) {
        int top = 0, tot = 0;
        for (int o : occ) {
            top = std::max(top, o);
            tot += o;
        }
        if (top >= band_start) {
            const double pr = prob(idx);
            if (pr > 0.0) est += pr * std::pow(static_cast<double>(tot + order), order);
        }
        for (std::size_t i = space.modes(); i-- > 0;) {
            if (++occ[i] < space.cutoff()) break;
            occ[i] = 0;
        }
    }
    return est;
}

int initial_cutoff(const StateModel& s, int order) {
    double mu = 0.0;
    for (std::size_t i = 0; i < s.modes(); ++i) {
        const auto e = MultiIndex::unit(s.modes(), i);
        mu = std::max(mu, analytic_moment(s, e, e).real());
    }
    const int c = static_cast<int>(std::ceil(mu + 10.0 * std::sqrt(mu) + 10.0));
    return std::max(c, order + 6);
}

std::size_t power(std::size_t base, std::size_t exp) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (r > std::numeric_limits<std::size_t>::max() / base) return std::numeric_limits<std::size_t>::max();
        r *= base;
    }
    return r;
}

Eigen::VectorXcd pure_amplitudes(const StateModel& s, const FockSpace& space) {
    return std::visit(
        overloaded{
            [&](const FockNumber& f) -> Eigen::VectorXcd {
                Eigen::VectorXcd v = Eigen::VectorXcd::Zero(space.cutoff());
                if (f.n < space.cutoff()) v[f.n] = 1.0;
                return v;
            },
            [&](const DisplacedSqueezed& d) -> Eigen::VectorXcd {
                return displaced_squeezed_amplitudes(d, space.cutoff());
            },
            [&](const TwoModeSqueezedVacuum& t) -> Eigen::VectorXcd {
                Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space.dimension()));
                for (int n = 0; n < space.cutoff(); ++n)
                    v[static_cast<Eigen::Index>(space.index({n, n}))] =
                        std::sqrt(1.0 - t.p) * std::pow(t.p, 0.5 * n);
                return v;
            },
            [&](const ProductState& ps) -> Eigen::VectorXcd {
                Eigen::VectorXcd v = Eigen::VectorXcd::Ones(1);
                for (const auto& f : ps.factors) {
                    const Eigen::VectorXcd w = pure_amplitudes(f, FockSpace(f.modes(), space.cutoff()));
                    Eigen::VectorXcd k(v.size() * w.size());
                    for (Eigen::Index i = 0; i < v.size(); ++i) k.segment(i * w.size(), w.size()) = v[i] * w;
                    v = std::move(k);
                }
                return v;
            },
            [&](const auto&) -> Eigen::VectorXcd { return superposition_of(s).amplitudes(space); }},
        s.value());
}

}  // namespace

TwoModeSqueezedVacuum TwoModeSqueezedVacuum::from_squeezing(double r) {
    require(r > 0.0 && std::isfinite(r), ErrorCode::InvalidState, "TMSV squeezing r must be positive");
    const double t = std::tanh(r);
    return {t * t};
}

double TwoModeSqueezedVacuum::squeezing() const { return std::atanh(std::sqrt(p)); }

std::size_t StateModel::modes() const {
    return std::visit(overloaded{[](const FockNumber&) -> std::size_t { return 1; },
                                 [](const Coherent& c) { return c.alpha.size(); },
                                 [](const DisplacedSqueezed&) -> std::size_t { return 1; },
                                 [](const TwoModeSqueezedVacuum&) -> std::size_t { return 2; },
                                 [](const PhaseRandomizedTMSV&) -> std::size_t { return 2; },
                                 [](const EntangledCoherent&) -> std::size_t { return 2; },
                                 [](const CoherentW& w) { return static_cast<std::size_t>(w.modes); },
                                 [](const CoherentMixture& m) { return m.amplitudes.front().size(); },
                                 [](const ProductState& p) {
                                     std::size_t n = 0;
                                     for (const auto& f : p.factors) n += f.modes();
                                     return n;
                                 },
                                 [](const GenericFock& g) { return g.rho->space().modes(); }},
                      value_);
}

std::string StateModel::name() const {
    return std::visit(overloaded{[](const FockNumber&) { return std::string("fock"); },
                                 [](const Coherent&) { return std::string("coherent"); },
                                 [](const DisplacedSqueezed&) { return std::string("displaced_squeezed"); },
                                 [](const TwoModeSqueezedVacuum&) { return std::string("tmsv"); },
                                 [](const PhaseRandomizedTMSV&) { return std::string("pr_tmsv"); },
                                 [](const EntangledCoherent&) { return std::string("ecs"); },
                                 [](const CoherentW&) { return std::string("coherent_w"); },
                                 [](const CoherentMixture&) { return std::string("coherent_mixture"); },
                                 [](const ProductState&) { return std::string("product"); },
                                 [](const GenericFock&) { return std::string("generic_fock"); }},
                      value_);
}

void StateModel::validate() const {
    std::visit(
        overloaded{
            [](const FockNumber& f) { require(f.n >= 0, ErrorCode::InvalidState, "Fock number must be >= 0"); },
            [](const Coherent& c) {
                require(!c.alpha.empty(), ErrorCode::InvalidState, "coherent state needs at least one mode");
            },
            [](const DisplacedSqueezed&) {},
            [](const TwoModeSqueezedVacuum& t) {
                require(t.p > 0.0 && t.p < 1.0, ErrorCode::InvalidState, "TMSV requires 0 < p < 1");
            },
            [](const PhaseRandomizedTMSV& t) {
                require(t.p > 0.0 && t.p < 1.0, ErrorCode::InvalidState,
                        "phase-randomized TMSV requires 0 < p < 1");
            },
            [](const EntangledCoherent& e) {
                require(e.alpha != 0.0 || e.beta != 0.0, ErrorCode::InvalidState,
                        "entangled coherent state requires (alpha, beta) != (0, 0)");
            },
            [](const CoherentW& w) {
                require(w.alpha != 0.0, ErrorCode::InvalidState, "coherent W state requires alpha != 0");
                require(w.modes >= 2, ErrorCode::InvalidState, "coherent W state requires >= 2 modes");
            },
            [](const CoherentMixture& m) {
                require(!m.amplitudes.empty() && m.weights.size() == m.amplitudes.size(),
                        ErrorCode::InvalidState, "mixture weights and amplitudes differ in length");
                double total = 0.0;
                for (std::size_t j = 0; j < m.weights.size(); ++j) {
                    require(m.weights[j] >= 0.0, ErrorCode::InvalidState, "negative mixture weight");
                    require(!m.amplitudes[j].empty() && m.amplitudes[j].size() == m.amplitudes[0].size(),
                            ErrorCode::InvalidState, "mixture components differ in mode count");
                    total += m.weights[j];
                }
                require(std::abs(total - 1.0) < 1e-12, ErrorCode::InvalidState,
                        "mixture weights must sum to 1");
            },
            [](const ProductState& p) {
                require(!p.factors.empty(), ErrorCode::InvalidState, "product state needs factors");
            },
            [](const GenericFock& g) {
                require(g.rho != nullptr, ErrorCode::InvalidState, "generic Fock state without density");
            }},
        value_);
}

MomentTable::MomentTable(std::size_t modes, int max_total_order) : modes_(modes), max_order_(max_total_order) {
    require(modes >= 1, ErrorCode::InvalidArgument, "moment table needs >= 1 mode");
    require(max_total_order >= 0, ErrorCode::InvalidArgument, "negative maximum order");
    const double bits = 2.0 * static_cast<double>(modes) * std::log2(max_total_order + 1.0);
    require(bits < 63.0, ErrorCode::UnsupportedOrder, "moment table too large for index encoding");
}

std::uint64_t MomentTable::encode(const MultiIndex& p, const MultiIndex& q) const {
    const std::uint64_t base = static_cast<std::uint64_t>(max_order_) + 1;
    std::uint64_t key = 0;
    for (int v : p) key = key * base + static_cast<std::uint64_t>(v);
    for (int v : q) key = key * base + static_cast<std::uint64_t>(v);
    return key;
}

std::pair<MultiIndex, MultiIndex> MomentTable::decode(std::uint64_t key) const {
    const std::uint64_t base = static_cast<std::uint64_t>(max_order_) + 1;
    std::vector<int> digits(2 * modes_);
    for (std::size_t i = digits.size(); i-- > 0;) {
        digits[i] = static_cast<int>(key % base);
        key /= base;
    }
    return {MultiIndex(std::vector<int>(digits.begin(), digits.begin() + static_cast<std::ptrdiff_t>(modes_))),
            MultiIndex(std::vector<int>(digits.begin() + static_cast<std::ptrdiff_t>(modes_), digits.end()))};
}

void MomentTable::set(const MultiIndex& p, const MultiIndex& q, cplx value) {
    require(p.size() == modes_ && q.size() == modes_, ErrorCode::InvalidArgument,
            "moment index length does not match table");
    require(p.total() + q.total() <= max_order_, ErrorCode::UnsupportedOrder,
            "moment order exceeds table maximum");
    values_[encode(p, q)] = value;
}

bool MomentTable::contains(const MultiIndex& p, const MultiIndex& q) const {
    if (p.size() != modes_ || q.size() != modes_ || p.total() + q.total() > max_order_) return false;
    return values_.count(encode(p, q)) != 0;
}

cplx MomentTable::operator()(const MultiIndex& p, const MultiIndex& q) const {
    require(p.size() == modes_ && q.size() == modes_, ErrorCode::InvalidArgument,
            "moment index length does not match table");
    if (p.total() + q.total() > max_order_)
        fail(ErrorCode::UnsupportedOrder, "moment <" + p.to_string() + "," + q.to_string() +
                                              "> exceeds table order " + std::to_string(max_order_));
    const auto it = values_.find(encode(p, q));
    if (it == values_.end())
        fail(ErrorCode::MissingMoment, "moment <" + p.to_string() + "," + q.to_string() + "> not in table");
    return it->second;
}

double MomentTable::conjugation_defect() const {
    double worst = 0.0;
    for (const auto& [key, v] : values_) {
        auto [p, q] = decode(key);
        const auto it = values_.find(encode(q, p));
        if (it != values_.end()) worst = std::max(worst, std::abs(v - std::conj(it->second)));
    }
    return worst;
}

std::vector<std::pair<MultiIndex, MultiIndex>> index_pairs(std::size_t modes, int max_total_order) {
    std::vector<std::pair<MultiIndex, MultiIndex>> out;
    std::vector<int> digits(2 * modes, 0);
    // Enumerate all 2N-tuples with digit sum <= max_total_order.
    std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int left) {
        if (pos == digits.size()) {
            out.emplace_back(
                MultiIndex(std::vector<int>(digits.begin(), digits.begin() + static_cast<std::ptrdiff_t>(modes))),
                MultiIndex(std::vector<int>(digits.begin() + static_cast<std::ptrdiff_t>(modes), digits.end())));
            return;
        }
        for (int v = 0; v <= left; ++v) {
            digits[pos] = v;
            rec(pos + 1, left - v);
        }
        digits[pos] = 0;
    };
    rec(0, max_total_order);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        const int ta = a.first.total() + a.second.total();
        const int tb = b.first.total() + b.second.total();
        if (ta != tb) return ta < tb;
        return a < b;
    });
    return out;
}

cplx analytic_moment(const StateModel& s, const MultiIndex& p, const MultiIndex& q) {
    check_index(s, p, q);
    return std::visit(
        overloaded{
            [&](const FockNumber& f) -> cplx { return p[0] == q[0] ? falling(f.n, p[0]) : 0.0; },
            [&](const Coherent& c) -> cplx {
                cplx r = 1.0;
                for (std::size_t i = 0; i < c.alpha.size(); ++i)
                    r *= std::pow(std::conj(c.alpha[i]), p[i]) * std::pow(c.alpha[i], q[i]);
                return r;
            },
            [&](const DisplacedSqueezed& d) -> cplx { return displaced_squeezed_moment(d, p[0], q[0]); },
            [&](const TwoModeSqueezedVacuum& t) -> cplx { return tmsv_moment(t.p, p, q); },
            [&](const PhaseRandomizedTMSV& t) -> cplx { return pr_tmsv_moment(t.p, p, q); },
            [&](const CoherentMixture& m) -> cplx {
                cplx sum = 0.0;
                for (std::size_t j = 0; j < m.weights.size(); ++j) {
                    cplx r = m.weights[j];
                    for (std::size_t i = 0; i < p.size(); ++i)
                        r *= std::pow(std::conj(m.amplitudes[j][i]), p[i]) * std::pow(m.amplitudes[j][i], q[i]);
                    sum += r;
                }
                return sum;
            },
            [&](const ProductState& ps) -> cplx {
                cplx r = 1.0;
                std::size_t offset = 0;
                for (const auto& f : ps.factors) {
                    const std::size_t n = f.modes();
                    std::vector<int> fp(p.begin() + static_cast<std::ptrdiff_t>(offset),
                                        p.begin() + static_cast<std::ptrdiff_t>(offset + n));
                    std::vector<int> fq(q.begin() + static_cast<std::ptrdiff_t>(offset),
                                        q.begin() + static_cast<std::ptrdiff_t>(offset + n));
                    r *= analytic_moment(f, MultiIndex(fp), MultiIndex(fq));
                    offset += n;
                }
                return r;
            },
            [&](const GenericFock& g) -> cplx { return oracle_moment(*g.rho, p, q); },
            [&](const auto&) -> cplx { return superposition_of(s).moment(p, q); }},
        s.value());
}

double mean_photon(const StateModel& s) {
    double n = 0.0;
    for (std::size_t i = 0; i < s.modes(); ++i) {
        const auto e = MultiIndex::unit(s.modes(), i);
        n += analytic_moment(s, e, e).real();
    }
    return n;
}

MomentTable marginal(const MomentTable& t, const std::vector<std::size_t>& keep) {
    require(!keep.empty(), ErrorCode::InvalidArgument, "marginal needs at least one mode");
    std::vector<bool> seen(t.modes(), false);
    for (auto m : keep) {
        require(m < t.modes() && !seen[m], ErrorCode::InvalidArgument, "marginal mode invalid or repeated");
        seen[m] = true;
    }
    MomentTable out(keep.size(), t.max_total_order());
    t.for_each([&](const MultiIndex& p, const MultiIndex& q, cplx v) {
        for (std::size_t i = 0; i < t.modes(); ++i)
            if (!seen[i] && (p[i] != 0 || q[i] != 0)) return;
        std::vector<int> pp, qq;
        for (auto m : keep) {
            pp.push_back(p[m]);
            qq.push_back(q[m]);
        }
        out.set(MultiIndex(std::move(pp)), MultiIndex(std::move(qq)), v);
    });
    return out;
}

MomentTable tabulate(const StateModel& s, int max_total_order) {
    MomentTable t(s.modes(), max_total_order);
    for (const auto& [p, q] : index_pairs(s.modes(), max_total_order)) {
        if (q < p && t.contains(q, p)) {
            t.set(p, q, std::conj(t(q, p)));
            continue;
        }
        t.set(p, q, analytic_moment(s, p, q));
    }
    return t;
}

MomentTable tabulate(const FockDensityMatrix& rho, int max_total_order) {
    MomentTable t(rho.space().modes(), max_total_order);
    for (const auto& [p, q] : index_pairs(rho.space().modes(), max_total_order))
        t.set(p, q, oracle_moment(rho, p, q));
    return t;
}

MomentTable tabulate(const FockPureState& psi, int max_total_order) {
    MomentTable t(psi.space.modes(), max_total_order);
    for (const auto& [p, q] : index_pairs(psi.space.modes(), max_total_order))
        t.set(p, q, oracle_moment(psi, p, q));
    return t;
}

bool is_pure(const StateModel& s) {
    return std::visit(overloaded{[](const PhaseRandomizedTMSV&) { return false; },
                                 [](const CoherentMixture& m) { return m.weights.size() == 1; },
                                 [](const GenericFock&) { return false; },
                                 [](const ProductState& p) {
                                     return std::all_of(p.factors.begin(), p.factors.end(), is_pure);
                                 },
                                 [](const auto&) { return true; }},
                      s.value());
}

FockPureState oracle_pure_state(const StateModel& s, int max_order, std::size_t max_dimension) {
    require(is_pure(s), ErrorCode::InvalidArgument, s.name() + " is not a pure state");
    if (const auto* m = std::get_if<CoherentMixture>(&s.value()))
        return oracle_pure_state(StateModel(Coherent{m->amplitudes.front()}), max_order, max_dimension);
    int cutoff = initial_cutoff(s, max_order);
    if (const auto* f = std::get_if<FockNumber>(&s.value())) cutoff = f->n + 1;
    for (;;) {
        if (power(static_cast<std::size_t>(cutoff), s.modes()) > max_dimension)
            fail(ErrorCode::CutoffTooSmall, "oracle for " + s.name() + " exceeds dimension cap before the "
                                            "truncation estimate dropped below 1e-10");
        FockSpace space(s.modes(), cutoff);
        FockPureState psi{space, pure_amplitudes(s, space), {}};
        if (std::holds_alternative<FockNumber>(s.value())) return psi;  // exact
        const double est = truncation_estimate(
            space, max_order, [&](std::size_t i) { return std::norm(psi.amplitudes[static_cast<Eigen::Index>(i)]); });
        psi.truncation = {est, max_order};
        if (est < kTruncationTolerance) return psi;
        cutoff = static_cast<int>(std::ceil(1.5 * cutoff));
    }
}

FockDensityMatrix oracle_density(const StateModel& s, int max_order, std::size_t max_dimension) {
    if (is_pure(s)) return FockDensityMatrix::from_pure(oracle_pure_state(s, max_order, max_dimension));
    using Triplet = Eigen::Triplet<cplx, std::ptrdiff_t>;
    return std::visit(
        overloaded{
            [&](const GenericFock& g) { return *g.rho; },
            [&](const PhaseRandomizedTMSV& t) {
                int cutoff = initial_cutoff(s, max_order);
                for (;;) {
                    if (power(static_cast<std::size_t>(cutoff), 2) > max_dimension)
                        fail(ErrorCode::CutoffTooSmall, "oracle for pr_tmsv exceeds dimension cap");
                    FockSpace space(2, cutoff);
                    std::vector<Triplet> entries;
                    std::vector<double> diag(space.dimension(), 0.0);
                    for (int n = 0; n < cutoff; ++n) {
                        const auto idx = space.index({n, n});
                        diag[idx] = (1.0 - t.p) * std::pow(t.p, n);
                        entries.emplace_back(idx, idx, diag[idx]);
                    }
                    const double est = truncation_estimate(space, max_order, [&](std::size_t i) { return diag[i]; });
                    if (est < kTruncationTolerance)
                        return FockDensityMatrix::from_entries(space, entries, {est, max_order});
                    cutoff = static_cast<int>(std::ceil(1.5 * cutoff));
                }
            },
            [&](const CoherentMixture& m) {
                int cutoff = initial_cutoff(s, max_order);
                for (;;) {
                    if (power(static_cast<std::size_t>(cutoff), s.modes()) > max_dimension)
                        fail(ErrorCode::CutoffTooSmall, "oracle for coherent mixture exceeds dimension cap");
                    FockSpace space(s.modes(), cutoff);
                    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(space.dimension()),
                                                                  static_cast<Eigen::Index>(space.dimension()));
                    for (std::size_t j = 0; j < m.weights.size(); ++j) {
                        const Eigen::VectorXcd v = superposition_of(StateModel(Coherent{m.amplitudes[j]})).amplitudes(space);
                        rho += m.weights[j] * v * v.adjoint();
                    }
                    const double est = truncation_estimate(space, max_order, [&](std::size_t i) {
                        return rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
                    });
                    if (est < kTruncationTolerance) {
                        FockDensityMatrix::Sparse sp = rho.sparseView(1e-300, 1.0).cast<cplx>();
                        return FockDensityMatrix(space, sp, {est, max_order});
                    }
                    cutoff = static_cast<int>(std::ceil(1.5 * cutoff));
                }
            },
            [&](const ProductState& ps) {
                // Kronecker product of factor densities on a common cutoff.
                std::vector<FockDensityMatrix> parts;
                int cutoff = 1;
                for (const auto& f : ps.factors) {
                    parts.push_back(oracle_density(f, max_order, max_dimension));
                    cutoff = std::max(cutoff, parts.back().space().cutoff());
                }
                require(power(static_cast<std::size_t>(cutoff), s.modes()) <= max_dimension,
                        ErrorCode::CutoffTooSmall, "oracle for product state exceeds dimension cap");
                std::vector<Triplet> acc{Triplet(0, 0, 1.0)};
                std::size_t modes = 0;
                double est = 0.0;
                for (const auto& part : parts) {
                    const FockSpace fs = part.space();
                    const FockSpace target(fs.modes(), cutoff);
                    const std::size_t dim = target.dimension();
                    std::vector<Triplet> next;
                    const auto& mat = part.matrix();
                    for (const auto& a : acc) {
                        for (Eigen::Index col = 0; col < mat.outerSize(); ++col)
                            for (FockDensityMatrix::Sparse::InnerIterator it(mat, col); it; ++it) {
                                const auto r = target.index(fs.occupation(static_cast<std::size_t>(it.row())));
                                const auto c = target.index(fs.occupation(static_cast<std::size_t>(it.col())));
                                next.emplace_back(a.row() * static_cast<std::ptrdiff_t>(dim) + static_cast<std::ptrdiff_t>(r),
                                                  a.col() * static_cast<std::ptrdiff_t>(dim) + static_cast<std::ptrdiff_t>(c),
                                                  a.value() * it.value());
                            }
                    }
                    acc = std::move(next);
                    modes += fs.modes();
                    est += part.truncation().error_estimate;
                }
                return FockDensityMatrix::from_entries(FockSpace(modes, cutoff), acc, {est, max_order});
            },
            [&](const auto&) -> FockDensityMatrix { fail(ErrorCode::InvalidArgument, "unreachable"); }},
        s.value());
}

}  // namespace flm
