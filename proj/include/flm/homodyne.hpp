#pragma once

// Balanced homodyne correlation measurement with a co-propagating local
// oscillator.
//
// Network: the first splitter mixes signal a and LO b as
//   c1 = (a + i b)/sqrt2,  c2 = (i a + b)/sqrt2,
// then each of c1, c2 feeds a binary tree of depth-1 further 50:50 splitters
// (vacuum in the free port), (x, v) -> ((x + v)/sqrt2, (x - v)/sqrt2).
// Detectors [0, 2^(d-1)) sit behind c1, the rest behind c2. With
// phi = phi_LO + pi/2 the depth-2 combination
//   <:n1 n2:> - 2 <:n1 n3:> + <:n3 n4:>  (detectors 0, 1, 2^(d-1), 2^(d-1)+1)
// equals 4^-(d-1) |T alpha|^2 (<a^2> e^{-2i phi} + 2 <a^dag a> + <a^dag^2> e^{2i phi}).

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "flm/channels.hpp"
#include "flm/states.hpp"

namespace flm {

struct DetectionNetwork {
    int depth = 2;
    double lo_amplitude = 5.0;  // |alpha|

    std::size_t detectors() const { return std::size_t{1} << depth; }
    // Highest n + m the network can reach.
    int max_moment_order() const { return 1 << (depth - 1); }
    // Coefficients (u, v) with detector mode = u a + v b + vacuum terms.
    std::pair<cplx, cplx> coefficients(std::size_t detector) const;
    void validate() const;
};

// Weighted sum of normally ordered detector-intensity products, divided per
// sample by the monitored LO strength |T alpha|^lo_power.
struct Combination {
    std::string label;
    std::vector<std::pair<double, std::vector<std::size_t>>> terms;  // distinct detectors per term
    int lo_power = 0;
    int order = 0;  // signal moment order it retrieves
};

// <n_c1> - <n_c2> (all detectors), normalized by |T alpha|.
Combination first_order_combination(const DetectionNetwork& net);
// The depth-2 style combination above, normalized by |T alpha|^2. Needs depth >= 2.
Combination second_order_combination(const DetectionNetwork& net);

struct CorrelationEstimate {
    std::string label;
    std::vector<std::size_t> detectors;  // every detector the combination reads
    double lo_phase = 0.0;
    int order = 0;
    double value = 0.0;
    double standard_error = 0.0;
    std::size_t samples = 0;
    double mean_lo_intensity = 0.0;  // <|T alpha|^2>, channel monitor
};

struct HomodyneOptions {
    std::size_t samples = 100'000;  // T draws per phase
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0: hardware concurrency; results do not depend on it
};

// Exact normally ordered expectation of a combination for a fixed T, from the
// oracle state attenuated by T (signal) and the coherent LO T alpha e^{i phi_LO}.
double combination_value(const FockDensityMatrix& rho, const DetectionNetwork& net, const Combination& comb,
                         double lo_phase, double t);

// One estimate per (phase, combination). ChannelNotSampleable for moment
// fixtures; UnsupportedOrder for combinations beyond the network capacity.
std::vector<CorrelationEstimate> simulate_correlations(const StateModel& s, const TransmittanceModel& c,
                                                       const DetectionNetwork& net,
                                                       const std::vector<double>& lo_phases,
                                                       const std::vector<Combination>& combinations,
                                                       const HomodyneOptions& opt);

struct ExtractedMoment {
    int n = 0;  // creation power
    int m = 0;  // annihilation power
    cplx value;
    double stderr_re = 0.0;
    double stderr_im = 0.0;
};

// Fourier analysis over the LO phase grid. Targets with n + m in {1, 2};
// InsufficientPhaseGrid unless the grid is equally spaced with at least
// 2 (n + m) + 1 points; UnsupportedOrder beyond the network capacity
// 2^(d-1) and for n + m > 2.
std::vector<ExtractedMoment> extract_moments(const std::vector<CorrelationEstimate>& estimates,
                                             const DetectionNetwork& net,
                                             const std::vector<std::pair<int, int>>& targets);
MomentTable to_table(const std::vector<ExtractedMoment>& moments);

// CSV: lo_phase,phi,label,order,estimate,stderr,samples,mean_lo_intensity
void write_estimates_csv(std::ostream& out, const std::vector<CorrelationEstimate>& estimates);
// CSV: n,m,re,im,stderr_re,stderr_im
void write_extracted_csv(std::ostream& out, const std::vector<ExtractedMoment>& moments);

// K equally spaced LO phases on [0, 2 pi).
std::vector<double> phase_grid(int k);

}  // namespace flm
