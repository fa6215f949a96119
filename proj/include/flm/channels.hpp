#pragma once

// Random transmission coefficients T in [0,1]: single-mode laws, joint
// multimode channels, transmittance moments <T^l> and fluctuation parameters.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "flm/algebra.hpp"

namespace flm {

using Rng = std::mt19937_64;

// Independent generator for stream `stream` of a run seeded with `seed`.
Rng make_stream(std::uint64_t seed, std::uint64_t stream = 0);

struct Deterministic {
    double t0 = 1.0;
};

struct BetaLaw {
    double a = 1.0;
    double b = 1.0;
};

// Piecewise-linear density on a strictly increasing grid in [0,1].
class Tabulated {
public:
    Tabulated(std::vector<double> grid, std::vector<double> density);

    // Two-column CSV (T, density) with a header row.
    static Tabulated from_csv(const std::filesystem::path& path);

    const std::vector<double>& grid() const noexcept { return grid_; }
    const std::vector<double>& density() const noexcept { return density_; }
    // Normalization of the raw input before renormalization.
    double raw_integral() const noexcept { return raw_integral_; }

    double moment(int l) const;
    double sample(Rng& rng) const;

private:
    std::vector<double> grid_;
    std::vector<double> density_;
    std::vector<double> cdf_;  // cumulative mass at grid nodes
    double raw_integral_ = 1.0;
};

// Named table l -> <T^l>. `validated` fixtures passed the monotonicity and
// log-convexity checks at construction; formal fixtures (moments chosen to
// realize prescribed fluctuation parameters) skip them.
struct MomentFixture {
    std::string name;
    std::map<int, double> moments;
    bool validated = true;
};

// External law, sampled with an explicit seed; moments are Monte Carlo
// estimates over `samples` draws.
struct Sampler {
    std::string name;
    std::function<double(Rng&)> draw;
    std::uint64_t seed = 0;
    std::size_t samples = 1'000'000;
};

class TransmittanceModel {
public:
    using Variant = std::variant<Deterministic, BetaLaw, Tabulated, MomentFixture, Sampler>;

    template <class T>
        requires std::is_constructible_v<Variant, T>
    TransmittanceModel(T value) : value_(std::move(value)) {
        validate();
    }

    const Variant& value() const noexcept { return value_; }
    std::string name() const;
    bool is_sampleable() const;
    // One draw of T; ChannelNotSampleable for moment fixtures.
    double sample(Rng& rng) const;

private:
    void validate();
    Variant value_;
};

struct MomentEstimate {
    double value = 0.0;
    double standard_error = 0.0;  // zero for exact moments
};

double t_moment(const TransmittanceModel& c, int l);
MomentEstimate t_moment_estimate(const TransmittanceModel& c, int l);

// < T^a (1 - T^2)^k >, expanded binomially into pure moments.
double mixed_t_moment(const TransmittanceModel& c, int a, int k);

MomentFixture beamwandering_fig24();
// Throws InvalidChannel when the moment chain is inconsistent.
void validate_fixture(const MomentFixture& f);

// Joint laws of (T_1..T_N).
struct FullyCorrelated {
    TransmittanceModel law;
    std::size_t modes = 2;
};

struct ProductChannel {
    std::vector<TransmittanceModel> laws;
};

// Multilinear density on a tensor grid; values in row-major order over the
// axes (last axis fastest).
struct JointGridDensity {
    std::vector<std::vector<double>> axes;
    std::vector<double> values;
};

// Discrete law: weighted atoms T-vectors (weights sum to 1).
struct JointAtoms {
    std::vector<double> weights;
    std::vector<std::vector<double>> points;
};

struct JointSampler {
    std::size_t modes = 2;
    std::function<std::vector<double>(Rng&)> draw;
    std::uint64_t seed = 0;
    std::size_t samples = 1'000'000;
};

struct CustomJoint {
    std::variant<JointGridDensity, JointAtoms, JointSampler> law;
};

class JointChannel {
public:
    using Variant = std::variant<FullyCorrelated, ProductChannel, CustomJoint>;

    template <class T>
        requires std::is_constructible_v<Variant, T>
    JointChannel(T value) : value_(std::move(value)) {
        validate();
    }

    static JointChannel single(const TransmittanceModel& law) { return FullyCorrelated{law, 1}; }
    static JointChannel uncorrelated(const TransmittanceModel& law, std::size_t modes) {
        return ProductChannel{std::vector<TransmittanceModel>(modes, law)};
    }

    const Variant& value() const noexcept { return value_; }
    std::size_t modes() const;
    std::string name() const;

private:
    void validate();
    Variant value_;
};

double joint_t_moment(const JointChannel& c, const MultiIndex& l);
// < prod_i T_i^{a_i} (1 - T_i^2)^{k_i} >.
double joint_mixed_moment(const JointChannel& c, const MultiIndex& a, const MultiIndex& k);

struct FluctuationParameter {
    MultiIndex order;
    std::vector<std::size_t> a;  // partition A
    std::vector<std::size_t> b;  // partition B
    double value = 0.0;
};

// 1 - <T^k>^2 / <T^2k>.
FluctuationParameter gamma_single(const TransmittanceModel& c, int k);
// 1 - <T^k>^2 / (<T_A^{2k_A}> <T_B^{2k_B}>).
FluctuationParameter gamma_partitioned(const JointChannel& c, const MultiIndex& k,
                                       const std::vector<std::size_t>& a,
                                       const std::vector<std::size_t>& b);

}  // namespace flm
