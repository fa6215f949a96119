#include "flm/homodyne.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <thread>

#include "flm/error.hpp"

namespace flm {

namespace {

constexpr std::size_t kChunk = 4096;
constexpr std::uint64_t kChunkStreams = std::uint64_t{1} << 32;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Neumaier summation.
struct Sum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        const double t = s + x;
        c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
        s = t;
    }
    void add(const Sum& o) {
        add(o.s);
        add(o.c);
    }
    double value() const { return s + c; }
};

struct Accumulator {
    Sum x, x2, lo;
    std::size_t n = 0;
};

// <a^dag^n a^m> of the attenuated signal, n + m <= 4.
using SignalMoments = std::array<std::array<cplx, 5>, 5>;

SignalMoments signal_moments(const FockDensityMatrix& rho, double t) {
    const auto table = tabulate(attenuate(rho, {t}), 4);
    SignalMoments m{};
    for (int n = 0; n <= 4; ++n)
        for (int k = 0; n + k <= 4; ++k) m[n][k] = table(MultiIndex{n}, MultiIndex{k});
    return m;
}

int degree(const Combination& comb) {
    std::size_t d = 0;
    for (const auto& term : comb.terms) d = std::max(d, term.second.size());
    return static_cast<int>(2 * d);
}

// <: prod_{i in S} n_i :> with a_i = u_i a + v_i beta on the signal/LO part.
double normal_product(const SignalMoments& sm, const DetectionNetwork& net, const std::vector<std::size_t>& set,
                      cplx beta) {
    std::vector<cplx> ann{1.0};  // coefficient of a^k in prod (u_i a + v_i beta)
    for (std::size_t i : set) {
        const auto [u, v] = net.coefficients(i);
        std::vector<cplx> next(ann.size() + 1, 0.0);
        for (std::size_t k = 0; k < ann.size(); ++k) {
            next[k] += ann[k] * v * beta;
            next[k + 1] += ann[k] * u;
        }
        ann = std::move(next);
    }
    cplx total = 0.0;
    for (std::size_t n = 0; n < ann.size(); ++n)
        for (std::size_t m = 0; m < ann.size(); ++m) total += std::conj(ann[n]) * ann[m] * sm[n][m];
    return total.real();
}

double combination_at(const SignalMoments& sm, const DetectionNetwork& net, const Combination& comb, double lo_phase,
                      double t) {
    const cplx beta = std::polar(t * net.lo_amplitude, lo_phase);
    double v = 0.0;
    for (const auto& [w, set] : comb.terms) v += w * normal_product(sm, net, set, beta);
    return v;
}

void check_combination(const DetectionNetwork& net, const Combination& comb) {
    require(comb.order >= 0 && comb.order <= net.max_moment_order(), ErrorCode::UnsupportedOrder,
            "combination order " + std::to_string(comb.order) + " exceeds network capacity " +
                std::to_string(net.max_moment_order()));
    require(degree(comb) <= 4, ErrorCode::UnsupportedOrder, "combinations read at most two detectors per term");
    for (const auto& term : comb.terms) {
        auto set = term.second;
        std::sort(set.begin(), set.end());
        require(std::adjacent_find(set.begin(), set.end()) == set.end(), ErrorCode::InvalidArgument,
                "detector sets must be distinct");
        for (std::size_t i : set)
            require(i < net.detectors(), ErrorCode::InvalidArgument, "detector index out of range");
    }
}

std::vector<std::size_t> detectors_of(const Combination& comb) {
    std::vector<std::size_t> out;
    for (const auto& term : comb.terms) out.insert(out.end(), term.second.begin(), term.second.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Chebyshev nodes on [0, 1] and evaluation of the interpolant through them.
struct Interpolant {
    std::vector<double> nodes, values, weights;

    double operator()(double x) const {
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            const double dx = x - nodes[j];
            if (dx == 0.0) return values[j];
            num += weights[j] / dx * values[j];
            den += weights[j] / dx;
        }
        return num / den;
    }
};

std::vector<double> chebyshev_nodes(int degree) {
    std::vector<double> x(static_cast<std::size_t>(degree + 1));
    for (int j = 0; j <= degree; ++j)
        x[static_cast<std::size_t>(j)] = 0.5 + 0.5 * std::cos(std::numbers::pi * (2 * j + 1) / (2.0 * (degree + 1)));
    return x;
}

std::vector<double> barycentric_weights(const std::vector<double>& x) {
    std::vector<double> w(x.size(), 1.0);
    for (std::size_t j = 0; j < x.size(); ++j)
        for (std::size_t k = 0; k < x.size(); ++k)
            if (k != j) w[j] /= x[j] - x[k];
    return w;
}

double wrap(double phi) {
    double r = std::fmod(phi, kTwoPi);
    return r < 0.0 ? r + kTwoPi : r;
}

void check_grid(const std::vector<double>& phases, int order) {
    const std::size_t need = static_cast<std::size_t>(2 * order + 1);
    require(phases.size() >= need, ErrorCode::InsufficientPhaseGrid,
            "order " + std::to_string(order) + " needs at least " + std::to_string(need) + " phases, got " +
                std::to_string(phases.size()));
    std::vector<double> w;
    for (double p : phases) w.push_back(wrap(p));
    std::sort(w.begin(), w.end());
    const double step = kTwoPi / static_cast<double>(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double next = k + 1 < w.size() ? w[k + 1] : w[0] + kTwoPi;
        require(std::abs(next - w[k] - step) < 1e-9, ErrorCode::InsufficientPhaseGrid,
                "phase grid must be equally spaced on [0, 2 pi)");
    }
}

}  // namespace

std::pair<cplx, cplx> DetectionNetwork::coefficients(std::size_t detector) const {
    require(detector < detectors(), ErrorCode::InvalidArgument, "detector index out of range");
    const double s = std::pow(0.5, 0.5 * depth);
    const cplx i(0.0, 1.0);
    if (detector < detectors() / 2) return {s, i * s};
    return {i * s, s};
}

void DetectionNetwork::validate() const {
    require(depth >= 1 && depth <= 16, ErrorCode::InvalidArgument, "network depth must lie in [1, 16]");
    require(std::isfinite(lo_amplitude) && lo_amplitude > 0.0, ErrorCode::InvalidArgument,
            "LO amplitude must be positive");
}

Combination first_order_combination(const DetectionNetwork& net) {
    net.validate();
    Combination c{"n_c1-n_c2", {}, 1, 1};
    const std::size_t half = net.detectors() / 2;
    for (std::size_t i = 0; i < net.detectors(); ++i) c.terms.push_back({i < half ? 1.0 : -1.0, {i}});
    return c;
}

Combination second_order_combination(const DetectionNetwork& net) {
    net.validate();
    require(net.depth >= 2, ErrorCode::UnsupportedOrder, "second-order retrieval needs depth >= 2");
    const std::size_t h = net.detectors() / 2;
    return {"n1n2-2n1n3+n3n4", {{1.0, {0, 1}}, {-2.0, {0, h}}, {1.0, {h, h + 1}}}, 2, 2};
}

double combination_value(const FockDensityMatrix& rho, const DetectionNetwork& net, const Combination& comb,
                         double lo_phase, double t) {
    net.validate();
    check_combination(net, comb);
    require(rho.space().modes() == 1, ErrorCode::InvalidArgument, "homodyne signal must be single-mode");
    return combination_at(signal_moments(rho, t), net, comb, lo_phase, t);
}

std::vector<CorrelationEstimate> simulate_correlations(const StateModel& s, const TransmittanceModel& c,
                                                       const DetectionNetwork& net,
                                                       const std::vector<double>& lo_phases,
                                                       const std::vector<Combination>& combinations,
                                                       const HomodyneOptions& opt) {
    net.validate();
    require(s.modes() == 1, ErrorCode::InvalidArgument, "homodyne signal must be single-mode");
    require(c.is_sampleable(), ErrorCode::ChannelNotSampleable,
            "channel " + c.name() + " has no law to sample transmissions from");
    require(opt.samples >= 2, ErrorCode::InvalidArgument, "need at least two samples per phase");
    require(!lo_phases.empty(), ErrorCode::InvalidArgument, "empty phase list");
    for (const auto& comb : combinations) check_combination(net, comb);

    // The normally ordered correlations are polynomials in T of degree <= 4:
    // exact at the nodes from the attenuated oracle state, exact in between.
    const auto rho = oracle_density(s, 4);
    const auto nodes = chebyshev_nodes(4);
    const auto weights = barycentric_weights(nodes);
    std::vector<SignalMoments> at_nodes;
    for (double t : nodes) at_nodes.push_back(signal_moments(rho, t));

    const std::size_t nphase = lo_phases.size(), ncomb = combinations.size();
    std::vector<Interpolant> poly;
    for (std::size_t k = 0; k < nphase; ++k)
        for (const auto& comb : combinations) {
            Interpolant p{nodes, {}, weights};
            for (std::size_t j = 0; j < nodes.size(); ++j)
                p.values.push_back(combination_at(at_nodes[j], net, comb, lo_phases[k], nodes[j]));
            poly.push_back(std::move(p));
        }

    const std::size_t chunks = (opt.samples + kChunk - 1) / kChunk;
    const std::size_t jobs = nphase * chunks;
    std::vector<std::vector<Accumulator>> partial(jobs, std::vector<Accumulator>(ncomb));

    auto run = [&](std::size_t job) {
        const std::size_t k = job / chunks, ch = job % chunks;
        auto rng = make_stream(opt.seed, static_cast<std::uint64_t>(k) * kChunkStreams + ch);
        const std::size_t n = std::min(kChunk, opt.samples - ch * kChunk);
        auto& acc = partial[job];
        for (std::size_t i = 0; i < n; ++i) {
            const double t = c.sample(rng);
            const double lo = t * net.lo_amplitude;
            if (!(lo > 1e-300)) continue;  // LO lost: nothing to normalize by
            for (std::size_t q = 0; q < ncomb; ++q) {
                const double v = poly[k * ncomb + q](t) / std::pow(lo, combinations[q].lo_power);
                acc[q].x.add(v);
                acc[q].x2.add(v * v);
                acc[q].lo.add(lo * lo);
                ++acc[q].n;
            }
        }
    };

    unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs));
    if (threads <= 1) {
        for (std::size_t j = 0; j < jobs; ++j) run(j);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t j = w; j < jobs; j += threads) run(j);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<CorrelationEstimate> out;
    for (std::size_t k = 0; k < nphase; ++k)
        for (std::size_t q = 0; q < ncomb; ++q) {
            Accumulator a;
            for (std::size_t ch = 0; ch < chunks; ++ch) {
                const auto& p = partial[k * chunks + ch][q];
                a.x.add(p.x);
                a.x2.add(p.x2);
                a.lo.add(p.lo);
                a.n += p.n;
            }
            require(a.n >= 2, ErrorCode::DegenerateChannel, "transmission vanished in every sample");
            const double n = static_cast<double>(a.n);
            const double mean = a.x.value() / n;
            const double var = std::max(0.0, (a.x2.value() - n * mean * mean) / (n - 1.0));
            const auto& comb = combinations[q];
            out.push_back({comb.label, detectors_of(comb), lo_phases[k], comb.order, mean, std::sqrt(var / n), a.n,
                           a.lo.value() / n});
        }
    return out;
}

std::vector<ExtractedMoment> extract_moments(const std::vector<CorrelationEstimate>& estimates,
                                             const DetectionNetwork& net,
                                             const std::vector<std::pair<int, int>>& targets) {
    net.validate();
    std::vector<ExtractedMoment> out;
    for (const auto& [n, m] : targets) {
        require(n >= 0 && m >= 0, ErrorCode::InvalidArgument, "negative moment index");
        const int order = n + m;
        require(order <= net.max_moment_order(), ErrorCode::UnsupportedOrder,
                "n + m = " + std::to_string(order) + " exceeds network capacity " +
                    std::to_string(net.max_moment_order()));
        require(order <= 2, ErrorCode::UnsupportedOrder, "retrieval implemented for n + m <= 2");
        if (order == 0) {
            out.push_back({0, 0, 1.0, 0.0, 0.0});
            continue;
        }
        std::vector<const CorrelationEstimate*> use;
        std::vector<double> phases;
        for (const auto& e : estimates)
            if (e.order == order) {
                use.push_back(&e);
                phases.push_back(e.lo_phase);
            }
        check_grid(phases, order);

        // Harmonic h = m - n of c(phi) carries <a^dag^n a^m> e^{-i h phi}.
        const int h = m - n;
        const double kk = static_cast<double>(use.size());
        // Prefactor of the harmonic in the normalized combination.
        const double pref = order == 1 ? 1.0 : std::pow(0.25, net.depth - 1) * (h == 0 ? 2.0 : 1.0);
        cplx sum = 0.0;
        double vre = 0.0, vim = 0.0;
        for (const auto* e : use) {
            const double phi = e->lo_phase + 0.5 * std::numbers::pi;
            const cplx w = std::polar(1.0, h * phi);
            sum += e->value * w;
            vre += std::pow(e->standard_error * w.real(), 2);
            vim += std::pow(e->standard_error * w.imag(), 2);
        }
        const double scale = 1.0 / (kk * pref);
        out.push_back({n, m, sum * scale, std::sqrt(vre) * scale, std::sqrt(vim) * scale});
    }
    return out;
}

MomentTable to_table(const std::vector<ExtractedMoment>& moments) {
    int order = 0;
    for (const auto& e : moments) order = std::max(order, e.n + e.m);
    MomentTable t(1, order);
    for (const auto& e : moments) t.set(MultiIndex{e.n}, MultiIndex{e.m}, e.value);
    return t;
}

void write_estimates_csv(std::ostream& out, const std::vector<CorrelationEstimate>& estimates) {
    out << "lo_phase,phi,label,order,estimate,stderr,samples,mean_lo_intensity\n";
    out.precision(17);
    for (const auto& e : estimates)
        out << e.lo_phase << ',' << e.lo_phase + 0.5 * std::numbers::pi << ',' << e.label << ',' << e.order << ','
            << e.value << ',' << e.standard_error << ',' << e.samples << ',' << e.mean_lo_intensity << '\n';
}

void write_extracted_csv(std::ostream& out, const std::vector<ExtractedMoment>& moments) {
    out << "n,m,re,im,stderr_re,stderr_im\n";
    out.precision(17);
    for (const auto& e : moments)
        out << e.n << ',' << e.m << ',' << e.value.real() << ',' << e.value.imag() << ',' << e.stderr_re << ','
            << e.stderr_im << '\n';
}

std::vector<double> phase_grid(int k) {
    require(k >= 1, ErrorCode::InvalidArgument, "phase grid needs at least one point");
    std::vector<double> out;
    for (int j = 0; j < k; ++j) out.push_back(kTwoPi * j / k);
    return out;
}

}  // namespace flm
