#pragma once

// State families and their normally ordered moments <a^dag^p a^q>, both in
// closed form and through the truncated-Fock oracle.
//
// Conventions:
//   squeezing  S(xi) = exp[(xi a^dag^2 - xi* a^2)/2], xi = r e^{i theta}:
//              <Da^dag Da> = sinh^2 r, <Da^2> = e^{i theta} sinh r cosh r
//   displaced squeezed |xi,beta> = D(beta) S(xi)|0>, <a> = beta
//   TMSV       sqrt(1-p) sum_n p^{n/2} |n,n>, p = tanh^2 r, <ab> = sinh r cosh r
//   ECS        N(|alpha,beta> - |-alpha,-beta>)
//   CoherentW  N sum_i |alpha..(-alpha at i)..alpha>
// Every family supports arbitrary moment order (sums are exact or geometric
// series summed to a tail below 1e-12).

#include <complex>
#include <memory>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "flm/algebra.hpp"
#include "flm/fock.hpp"

namespace flm {

class StateModel;

struct FockNumber {
    int n = 0;
};

struct Coherent {
    std::vector<cplx> alpha;  // one amplitude per mode
};

struct DisplacedSqueezed {
    cplx xi;
    cplx beta;
};

struct TwoModeSqueezedVacuum {
    double p = 0.0;
    static TwoModeSqueezedVacuum from_squeezing(double r);
    double squeezing() const;  // r = artanh(sqrt p)
};

struct PhaseRandomizedTMSV {
    double p = 0.0;
};

struct EntangledCoherent {
    cplx alpha;
    cplx beta;
};

struct CoherentW {
    cplx alpha;
    int modes = 4;
};

// Classical mixture sum_j w_j |v_j><v_j| of (multimode) coherent states.
struct CoherentMixture {
    std::vector<double> weights;
    std::vector<std::vector<cplx>> amplitudes;
};

// Tensor product of independent factors; factor modes are laid out in order.
struct ProductState {
    std::vector<StateModel> factors;
};

struct GenericFock {
    std::shared_ptr<const FockDensityMatrix> rho;
};

class StateModel {
public:
    using Variant = std::variant<FockNumber, Coherent, DisplacedSqueezed, TwoModeSqueezedVacuum,
                                 PhaseRandomizedTMSV, EntangledCoherent, CoherentW,
                                 CoherentMixture, ProductState, GenericFock>;

    template <class T>
        requires std::is_constructible_v<Variant, T>
    StateModel(T value) : value_(std::move(value)) {
        validate();
    }

    const Variant& value() const noexcept { return value_; }
    std::size_t modes() const;
    std::string name() const;

private:
    void validate() const;
    Variant value_;
};

class MomentTable {
public:
    MomentTable(std::size_t modes, int max_total_order);

    std::size_t modes() const noexcept { return modes_; }
    int max_total_order() const noexcept { return max_order_; }

    void set(const MultiIndex& p, const MultiIndex& q, cplx value);
    // Throws UnsupportedOrder above max_total_order, MissingMoment if absent.
    cplx operator()(const MultiIndex& p, const MultiIndex& q) const;
    bool contains(const MultiIndex& p, const MultiIndex& q) const;

    template <class F>
    void for_each(F&& f) const {
        for (const auto& [key, v] : values_) {
            auto [p, q] = decode(key);
            f(p, q, v);
        }
    }
    std::size_t size() const noexcept { return values_.size(); }

    // max |value(p,q) - conj(value(q,p))| over the table.
    double conjugation_defect() const;

private:
    std::uint64_t encode(const MultiIndex& p, const MultiIndex& q) const;
    std::pair<MultiIndex, MultiIndex> decode(std::uint64_t key) const;

    std::size_t modes_;
    int max_order_;
    std::unordered_map<std::uint64_t, cplx> values_;
};

// All (p,q) pairs over `modes` with |p| + |q| <= max_total_order, graded.
std::vector<std::pair<MultiIndex, MultiIndex>> index_pairs(std::size_t modes, int max_total_order);

// Moments of the reduced state on `keep` (in the listed order).
MomentTable marginal(const MomentTable& t, const std::vector<std::size_t>& keep);

cplx analytic_moment(const StateModel& s, const MultiIndex& p, const MultiIndex& q);
double mean_photon(const StateModel& s);

MomentTable tabulate(const StateModel& s, int max_total_order);
MomentTable tabulate(const FockDensityMatrix& rho, int max_total_order);
MomentTable tabulate(const FockPureState& psi, int max_total_order);

// Truncated-Fock representation certified (estimate < 1e-10) for moments up
// to `max_order`. Cutoff starts at ceil(mu + 10 sqrt(mu) + 10) per mode and
// grows until the certificate holds; CutoffTooSmall once the dimension cap
// is reached.
FockPureState oracle_pure_state(const StateModel& s, int max_order = 4,
                                std::size_t max_dimension = 4'000'000);
FockDensityMatrix oracle_density(const StateModel& s, int max_order = 4,
                                 std::size_t max_dimension = 4'000'000);
bool is_pure(const StateModel& s);

}  // namespace flm
