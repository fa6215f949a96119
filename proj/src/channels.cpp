#include "flm/channels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "flm/error.hpp"

namespace flm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

GaussRule gauss_legendre(int n) {
    GaussRule g{std::vector<double>(n), std::vector<double>(n)};
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p1 = x, p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        g.nodes[i] = x;
        g.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return g;
}

// Integral of T^l * (linear weight) over [lo, hi]. With shape = 0 the weight
// is (hi - T)/(hi - lo), with shape = 1 it is (T - lo)/(hi - lo). Gauss rule
// with enough points to be exact for degree l + 1.
double panel_integral(double lo, double hi, int l, int shape, const GaussRule& g) {
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    double s = 0.0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const double t = mid + half * g.nodes[i];
        const double w = shape == 0 ? (hi - t) / (hi - lo) : (t - lo) / (hi - lo);
        s += g.weights[i] * std::pow(t, l) * w;
    }
    return s * half;
}

int rule_size(int l) { return (l + 1) / 2 + 2; }

void check_grid(const std::vector<double>& grid, const char* what) {
    require(grid.size() >= 2, ErrorCode::InvalidChannel, std::string(what) + ": grid needs >= 2 points");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        require(grid[i] >= 0.0 && grid[i] <= 1.0, ErrorCode::InvalidChannel,
                std::string(what) + ": grid values must lie in [0,1]");
        if (i > 0)
            require(grid[i] > grid[i - 1], ErrorCode::InvalidChannel,
                    std::string(what) + ": grid must be strictly increasing");
    }
}

double clamp_gamma(double g) {
    if (g < 0.0) {
        require(g > -1e-12, ErrorCode::InvalidChannel,
                "fluctuation parameter negative beyond round-off (" + std::to_string(g) +
                    "): moments violate Cauchy-Schwarz");
        g = 0.0;
    }
    return std::min(g, 1.0);
}

MomentEstimate sample_mean(std::size_t samples, const std::function<double()>& draw) {
    require(samples >= 2, ErrorCode::InvalidChannel, "sampler needs >= 2 samples");
    double mean = 0.0, m2 = 0.0;
    for (std::size_t n = 1; n <= samples; ++n) {
        const double x = draw();
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    const double var = m2 / static_cast<double>(samples - 1);
    return {mean, std::sqrt(var / static_cast<double>(samples))};
}

// Moment of the multilinear grid density.
double grid_moment(const JointGridDensity& g, const MultiIndex& l) {
    const std::size_t n = g.axes.size();
    std::vector<std::vector<std::array<double, 2>>> per_axis(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto rule = gauss_legendre(rule_size(l[i]));
        const auto& ax = g.axes[i];
        per_axis[i].resize(ax.size() - 1);
        for (std::size_t c = 0; c + 1 < ax.size(); ++c)
            per_axis[i][c] = {panel_integral(ax[c], ax[c + 1], l[i], 0, rule),
                              panel_integral(ax[c], ax[c + 1], l[i], 1, rule)};
    }
    std::vector<std::size_t> strides(n, 1);
    for (std::size_t i = n - 1; i-- > 0;) strides[i] = strides[i + 1] * g.axes[i + 1].size();
    std::vector<std::size_t> cell(n, 0);
    double total = 0.0;
    for (;;) {
        for (unsigned corner = 0; corner < (1u << n); ++corner) {
            double w = 1.0;
            std::size_t idx = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const int bit = (corner >> i) & 1u;
                w *= per_axis[i][cell[i]][bit];
                idx += (cell[i] + bit) * strides[i];
            }
            total += w * g.values[idx];
        }
        std::size_t i = n;
        while (i-- > 0) {
            if (++cell[i] + 1 < g.axes[i].size()) break;
            cell[i] = 0;
        }
        if (i == static_cast<std::size_t>(-1)) break;
    }
    return total;
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

Tabulated::Tabulated(std::vector<double> grid, std::vector<double> density)
    : grid_(std::move(grid)), density_(std::move(density)) {
    check_grid(grid_, "tabulated law");
    require(density_.size() == grid_.size(), ErrorCode::InvalidChannel,
            "tabulated law: grid and density differ in length");
    for (double d : density_)
        require(d >= 0.0 && std::isfinite(d), ErrorCode::InvalidChannel,
                "tabulated law: densities must be finite and >= 0");
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < grid_.size(); ++i)
        integral += 0.5 * (grid_[i + 1] - grid_[i]) * (density_[i] + density_[i + 1]);
    require(integral > 0.0, ErrorCode::InvalidChannel, "tabulated law: density integrates to zero");
    raw_integral_ = integral;
    if (std::abs(integral - 1.0) > 1e-8) {
        std::cerr << "warning: tabulated transmittance density integrates to " << integral
                  << "; renormalized\n";
    }
    for (double& d : density_) d /= integral;
    cdf_.assign(grid_.size(), 0.0);
    for (std::size_t i = 0; i + 1 < grid_.size(); ++i)
        cdf_[i + 1] = cdf_[i] + 0.5 * (grid_[i + 1] - grid_[i]) * (density_[i] + density_[i + 1]);
}

Tabulated Tabulated::from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorCode::IoError, path.string() + ": empty file");
    std::vector<double> grid, dens;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double t = 0.0, d = 0.0;
        require(static_cast<bool>(ss >> t >> d), ErrorCode::IoError,
                path.string() + ": malformed row " + std::to_string(row));
        grid.push_back(t);
        dens.push_back(d);
    }
    return Tabulated(std::move(grid), std::move(dens));
}

double Tabulated::moment(int l) const {
    require(l >= 0, ErrorCode::InvalidArgument, "moment order must be >= 0");
    auto integrate = [&](int n) {
        const auto rule = gauss_legendre(n);
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < grid_.size(); ++i)
            s += density_[i] * panel_integral(grid_[i], grid_[i + 1], l, 0, rule) +
                 density_[i + 1] * panel_integral(grid_[i], grid_[i + 1], l, 1, rule);
        return s;
    };
    const double a = integrate(rule_size(l));
    const double b = integrate(rule_size(l) + 2);
    require(std::abs(a - b) < 1e-9, ErrorCode::InvalidChannel, "tabulated quadrature did not converge");
    return b;
}

double Tabulated::sample(Rng& rng) const {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double u = uni(rng) * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - cdf_.begin())) - 1;
    i = std::min(i, grid_.size() - 2);
    // Invert the quadratic CDF on the panel.
    const double h = grid_[i + 1] - grid_[i];
    const double f0 = density_[i], f1 = density_[i + 1];
    const double target = u - cdf_[i];
    const double slope = (f1 - f0) / h;
    double x;
    if (std::abs(slope) < 1e-14) {
        x = f0 > 0.0 ? target / f0 : 0.5 * h;
    } else {
        const double disc = std::max(0.0, f0 * f0 + 2.0 * slope * target);
        x = (std::sqrt(disc) - f0) / slope;
    }
    return std::clamp(grid_[i] + std::clamp(x, 0.0, h), 0.0, 1.0);
}

void validate_fixture(const MomentFixture& f) {
    std::map<int, double> m = f.moments;
    for (const auto& [l, v] : m) {
        require(l >= 0, ErrorCode::InvalidChannel, f.name + ": negative moment order");
        require(v >= 0.0 && v <= 1.0, ErrorCode::InvalidChannel,
                f.name + ": moment <T^" + std::to_string(l) + "> outside [0,1]");
    }
    if (m.count(0))
        require(std::abs(m[0] - 1.0) < 1e-12, ErrorCode::InvalidChannel, f.name + ": <T^0> must be 1");
    m[0] = 1.0;
    double prev = 2.0;
    for (const auto& [l, v] : m) {
        require(v <= prev + 1e-15, ErrorCode::InvalidChannel,
                f.name + ": moments must be non-increasing in the order");
        prev = v;
    }
    // Log-convexity (Lyapunov): <T^j> <= <T^i>^((k-j)/(k-i)) <T^k>^((j-i)/(k-i)).
    std::vector<std::pair<int, double>> v(m.begin(), m.end());
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j)
            for (std::size_t k = j + 1; k < v.size(); ++k) {
                const double li = v[i].first, lj = v[j].first, lk = v[k].first;
                const double bound =
                    std::pow(v[i].second, (lk - lj) / (lk - li)) * std::pow(v[k].second, (lj - li) / (lk - li));
                require(v[j].second <= bound * (1.0 + 1e-12), ErrorCode::InvalidChannel,
                        f.name + ": moments violate log-convexity at orders " + std::to_string(v[i].first) +
                            "," + std::to_string(v[j].first) + "," + std::to_string(v[k].first));
            }
}

MomentFixture beamwandering_fig24() {
    return {"beamwandering-fig24", {{1, 0.398}, {2, 0.163}, {4, 0.030}}, true};
}

void TransmittanceModel::validate() {
    std::visit(overloaded{
                   [](const Deterministic& d) {
                       require(d.t0 >= 0.0 && d.t0 <= 1.0, ErrorCode::InvalidChannel,
                               "deterministic transmission must lie in [0,1]");
                   },
                   [](const BetaLaw& b) {
                       require(b.a > 0.0 && b.b > 0.0, ErrorCode::InvalidChannel,
                               "Beta law needs positive shapes");
                   },
                   [](const Tabulated&) {},
                   [](const MomentFixture& f) {
                       if (f.validated) validate_fixture(f);
                   },
                   [](const Sampler& s) {
                       require(static_cast<bool>(s.draw), ErrorCode::InvalidChannel, "sampler without generator");
                       require(s.samples >= 2, ErrorCode::InvalidChannel, "sampler needs >= 2 samples");
                   }},
               value_);
}

std::string TransmittanceModel::name() const {
    return std::visit(overloaded{[](const Deterministic&) { return std::string("deterministic"); },
                                 [](const BetaLaw&) { return std::string("beta"); },
                                 [](const Tabulated&) { return std::string("tabulated"); },
                                 [](const MomentFixture& f) { return "fixture:" + f.name; },
                                 [](const Sampler& s) { return "sampler:" + s.name; }},
                      value_);
}

bool TransmittanceModel::is_sampleable() const { return !std::holds_alternative<MomentFixture>(value_); }

double TransmittanceModel::sample(Rng& rng) const {
    return std::visit(
        overloaded{[](const Deterministic& d) { return d.t0; },
                   [&](const BetaLaw& b) {
                       std::gamma_distribution<double> ga(b.a, 1.0), gb(b.b, 1.0);
                       const double x = ga(rng), y = gb(rng);
                       return x / (x + y);
                   },
                   [&](const Tabulated& t) { return t.sample(rng); },
                   [](const MomentFixture& f) -> double {
                       fail(ErrorCode::ChannelNotSampleable,
                            "moment fixture " + f.name + " carries no distribution to sample from");
                   },
                   [&](const Sampler& s) {
                       const double t = s.draw(rng);
                       require(t >= 0.0 && t <= 1.0, ErrorCode::InvalidChannel,
                               "sampler produced T outside [0,1]");
                       return t;
                   }},
        value_);
}

MomentEstimate t_moment_estimate(const TransmittanceModel& c, int l) {
    require(l >= 0, ErrorCode::InvalidArgument, "moment order must be >= 0");
    if (l == 0) return {1.0, 0.0};
    return std::visit(
        overloaded{[&](const Deterministic& d) { return MomentEstimate{std::pow(d.t0, l), 0.0}; },
                   [&](const BetaLaw& b) {
                       double r = 1.0;
                       for (int j = 0; j < l; ++j) r *= (b.a + j) / (b.a + b.b + j);
                       return MomentEstimate{r, 0.0};
                   },
                   [&](const Tabulated& t) { return MomentEstimate{t.moment(l), 0.0}; },
                   [&](const MomentFixture& f) {
                       const auto it = f.moments.find(l);
                       if (it == f.moments.end())
                           fail(ErrorCode::MissingMoment,
                                "fixture " + f.name + " has no moment <T^" + std::to_string(l) + ">");
                       return MomentEstimate{it->second, 0.0};
                   },
                   [&](const Sampler& s) {
                       Rng rng = make_stream(s.seed);
                       return sample_mean(s.samples, [&] { return std::pow(s.draw(rng), l); });
                   }},
        c.value());
}

double t_moment(const TransmittanceModel& c, int l) { return t_moment_estimate(c, l).value; }

double mixed_t_moment(const TransmittanceModel& c, int a, int k) {
    double s = 0.0;
    for (int j = 0; j <= k; ++j) {
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        s += sign * static_cast<double>(binomial(k, j)) * t_moment(c, a + 2 * j);
    }
    return s;
}

void JointChannel::validate() {
    std::visit(
        overloaded{
            [](const FullyCorrelated& f) {
                require(f.modes >= 1, ErrorCode::InvalidChannel, "joint channel needs >= 1 mode");
            },
            [](const ProductChannel& p) {
                require(!p.laws.empty(), ErrorCode::InvalidChannel, "product channel needs >= 1 law");
            },
            [](const CustomJoint& c) {
                std::visit(
                    overloaded{
                        [](const JointGridDensity& g) {
                            require(!g.axes.empty() && g.axes.size() <= 8, ErrorCode::InvalidChannel,
                                    "joint grid needs 1..8 axes");
                            std::size_t n = 1;
                            for (const auto& ax : g.axes) {
                                check_grid(ax, "joint grid");
                                n *= ax.size();
                            }
                            require(g.values.size() == n, ErrorCode::InvalidChannel,
                                    "joint grid values do not match the axes");
                            for (double v : g.values)
                                require(v >= 0.0 && std::isfinite(v), ErrorCode::InvalidChannel,
                                        "joint grid densities must be finite and >= 0");
                            const double norm = grid_moment(g, MultiIndex(g.axes.size()));
                            require(std::abs(norm - 1.0) < 1e-8, ErrorCode::InvalidChannel,
                                    "joint grid density integrates to " + std::to_string(norm) + ", not 1");
                        },
                        [](const JointAtoms& a) {
                            require(!a.points.empty() && a.points.size() == a.weights.size(),
                                    ErrorCode::InvalidChannel, "joint atoms: weights and points differ");
                            double total = 0.0;
                            for (std::size_t j = 0; j < a.points.size(); ++j) {
                                require(a.weights[j] >= 0.0, ErrorCode::InvalidChannel, "negative atom weight");
                                require(!a.points[j].empty() && a.points[j].size() == a.points[0].size(),
                                        ErrorCode::InvalidChannel, "joint atoms differ in mode count");
                                for (double t : a.points[j])
                                    require(t >= 0.0 && t <= 1.0, ErrorCode::InvalidChannel,
                                            "joint atom outside [0,1]");
                                total += a.weights[j];
                            }
                            require(std::abs(total - 1.0) < 1e-12, ErrorCode::InvalidChannel,
                                    "joint atom weights must sum to 1");
                        },
                        [](const JointSampler& s) {
                            require(s.modes >= 1 && static_cast<bool>(s.draw) && s.samples >= 2,
                                    ErrorCode::InvalidChannel, "joint sampler incomplete");
                        }},
                    c.law);
            }},
        value_);
}

std::size_t JointChannel::modes() const {
    return std::visit(overloaded{[](const FullyCorrelated& f) { return f.modes; },
                                 [](const ProductChannel& p) { return p.laws.size(); },
                                 [](const CustomJoint& c) {
                                     return std::visit(
                                         overloaded{[](const JointGridDensity& g) { return g.axes.size(); },
                                                    [](const JointAtoms& a) { return a.points[0].size(); },
                                                    [](const JointSampler& s) { return s.modes; }},
                                         c.law);
                                 }},
                      value_);
}

std::string JointChannel::name() const {
    return std::visit(overloaded{[](const FullyCorrelated& f) { return "correlated(" + f.law.name() + ")"; },
                                 [](const ProductChannel& p) {
                                     std::string s = "product(";
                                     for (std::size_t i = 0; i < p.laws.size(); ++i)
                                         s += (i ? ";" : "") + p.laws[i].name();
                                     return s + ")";
                                 },
                                 [](const CustomJoint&) { return std::string("custom"); }},
                      value_);
}

double joint_t_moment(const JointChannel& c, const MultiIndex& l) {
    require(l.size() == c.modes(), ErrorCode::InvalidArgument,
            "moment index length does not match channel mode count");
    return std::visit(
        overloaded{
            [&](const FullyCorrelated& f) { return t_moment(f.law, l.total()); },
            [&](const ProductChannel& p) {
                double r = 1.0;
                for (std::size_t i = 0; i < p.laws.size(); ++i)
                    if (l[i] > 0) r *= t_moment(p.laws[i], l[i]);
                return r;
            },
            [&](const CustomJoint& cj) {
                return std::visit(
                    overloaded{[&](const JointGridDensity& g) { return grid_moment(g, l); },
                               [&](const JointAtoms& a) {
                                   double s = 0.0;
                                   for (std::size_t j = 0; j < a.points.size(); ++j) {
                                       double v = a.weights[j];
                                       for (std::size_t i = 0; i < l.size(); ++i) v *= std::pow(a.points[j][i], l[i]);
                                       s += v;
                                   }
                                   return s;
                               },
                               [&](const JointSampler& s) {
                                   Rng rng = make_stream(s.seed);
                                   return sample_mean(s.samples, [&] {
                                              const auto t = s.draw(rng);
                                              double v = 1.0;
                                              for (std::size_t i = 0; i < l.size(); ++i) v *= std::pow(t.at(i), l[i]);
                                              return v;
                                          })
                                       .value;
                               }},
                    cj.law);
            }},
        c.value());
}

double joint_mixed_moment(const JointChannel& c, const MultiIndex& a, const MultiIndex& k) {
    require(a.size() == c.modes() && k.size() == c.modes(), ErrorCode::InvalidArgument,
            "moment index length does not match channel mode count");
    const std::size_t n = k.size();
    MultiIndex j(n);
    double total = 0.0;
    for (;;) {
        double coeff = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            coeff *= static_cast<double>(binomial(k[i], j[i])) * ((j[i] % 2) ? -1.0 : 1.0);
        total += coeff * joint_t_moment(c, a + j.scaled(2));
        std::size_t i = 0;
        for (; i < n; ++i) {
            if (j[i] < k[i]) {
                j.set(i, j[i] + 1);
                break;
            }
            j.set(i, 0);
        }
        if (i == n) break;
    }
    return total;
}

FluctuationParameter gamma_single(const TransmittanceModel& c, int k) {
    require(k >= 1, ErrorCode::InvalidArgument, "fluctuation order must be >= 1");
    const double den = t_moment(c, 2 * k);
    require(den > 0.0, ErrorCode::DegenerateChannel, "<T^2k> = 0 (full loss)");
    const double num = t_moment(c, k);
    return {MultiIndex{k}, {0}, {}, clamp_gamma(1.0 - num * num / den)};
}

FluctuationParameter gamma_partitioned(const JointChannel& c, const MultiIndex& k,
                                       const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    const std::size_t n = c.modes();
    require(k.size() == n, ErrorCode::PartitionMismatch, "order length does not match channel modes");
    std::vector<int> owner(n, 0);
    for (auto i : a) {
        require(i < n && owner[i] == 0, ErrorCode::PartitionMismatch, "partition A invalid or overlapping");
        owner[i] = 1;
    }
    for (auto i : b) {
        require(i < n && owner[i] == 0, ErrorCode::PartitionMismatch, "partitions A and B overlap");
        owner[i] = 2;
    }
    for (std::size_t i = 0; i < n; ++i)
        require(k[i] == 0 || owner[i] != 0, ErrorCode::PartitionMismatch,
                "partition does not cover the support of the order");
    const MultiIndex k2 = k.scaled(2);
    const double da = a.empty() ? 1.0 : joint_t_moment(c, k2.restricted(a));
    const double db = b.empty() ? 1.0 : joint_t_moment(c, k2.restricted(b));
    require(da > 0.0 && db > 0.0, ErrorCode::DegenerateChannel, "vanishing partition moment (full loss)");
    const double num = joint_t_moment(c, k);
    return {k, a, b, clamp_gamma(1.0 - num * num / (da * db))};
}

}  // namespace flm
