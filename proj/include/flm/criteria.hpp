#pragma once

// Determinant and minor tests on matrices of moments, in input and output
// (fluctuating-loss) form.
//
// Every test is evaluated from the general matrices built in propagation.hpp.
// Output reports also carry the closed-form split
//   value = scale_factor * (input_value + turbulence_term)
// or, for the Simon test, value = deterministic_value + turbulence_term.

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "flm/channels.hpp"
#include "flm/propagation.hpp"
#include "flm/states.hpp"

namespace flm {

inline constexpr double kVerdictTolerance = 1e-12;

enum class Verdict { Detected, Inconclusive };
enum class Decomposition { None, Scaled, Additive };

std::string_view to_string(Verdict v);

struct CriterionReport {
    std::string name;
    double value = 0.0;
    Verdict verdict = Verdict::Inconclusive;
    double tolerance = kVerdictTolerance;

    Decomposition decomposition = Decomposition::None;
    double input_value = 0.0;
    double scale_factor = 1.0;
    double turbulence_term = 0.0;
    double deterministic_value = 0.0;  // Additive only

    // Parameters used, echoed into CSV as key=value pairs.
    std::vector<std::pair<std::string, std::string>> inputs;
    // Named intermediate quantities (fluctuation parameter, quadratic form, ...).
    std::vector<std::pair<std::string, double>> details;

    bool detected() const { return verdict == Verdict::Detected; }
    // |value - reconstructed value| for the recorded decomposition; 0 if none.
    double decomposition_defect() const;
    // Defect over max(1, magnitude of the reconstructed terms).
    double relative_decomposition_defect() const;
    double detail(const std::string& key) const;
};

// CSV: name,parameters,value,scale,turbulence,verdict
void write_criterion_header(std::ostream& out);
void write_criterion_row(std::ostream& out, const CriterionReport& r);

// Determinant of the principal submatrix on `rows` (real part; the matrix is
// Hermitian). Empty rows give 1.
double minor_eval(const MatrixOfMoments& m, const std::vector<std::size_t>& rows);
double min_eigenvalue(const MatrixOfMoments& m);

// Q = (<(dn)^2> - <n>)/<n>. ZeroMeanPhoton if <n> = 0.
CriterionReport mandel_q(const MomentTable& t, double tolerance = kVerdictTolerance);

// d = <a^dag^2 a^2> - <n>^2.
CriterionReport sub_poisson(const MomentTable& t, double tolerance = kVerdictTolerance);
CriterionReport sub_poisson_out(const MomentTable& t, const TransmittanceModel& c,
                                double tolerance = kVerdictTolerance);

// 3x3 normally ordered minor on {1, a^k, a^dag^k}.
CriterionReport amplitude_squeezing(const MomentTable& t, int k, double tolerance = kVerdictTolerance);
CriterionReport amplitude_squeezing_out(const MomentTable& t, const TransmittanceModel& c, int k,
                                        double tolerance = kVerdictTolerance);

// D = <a^dag^2 a^2><b^dag^2 b^2> - <n_a n_b>^2 (two-mode table).
CriterionReport photon_correlation(const MomentTable& t, double tolerance = kVerdictTolerance);
CriterionReport photon_correlation_out(const MomentTable& t, const JointChannel& c,
                                       double tolerance = kVerdictTolerance);

// det of the 5x5 second-order matrix, mode b transposed.
CriterionReport simon(const MomentTable& t, double tolerance = kVerdictTolerance);
CriterionReport simon_out(const MomentTable& t, const JointChannel& c, double tolerance = kVerdictTolerance);

// 2x2 PT minor on {1, ab}: <n_a n_b> - |<a b^dag>|^2.
CriterionReport ho_npt(const MomentTable& t, double tolerance = kVerdictTolerance);
CriterionReport ho_npt_out(const MomentTable& t, const JointChannel& c, double tolerance = kVerdictTolerance);

// Mode quadruple (i,j;k,l), zero-based.
struct MinorModes {
    std::size_t i, j, k, l;
    std::string label() const;  // one-based, e.g. "(1,2;3,4)"
};

inline constexpr MinorModes kMinor1234{0, 1, 2, 3};
inline constexpr MinorModes kMinor1324{0, 2, 1, 3};
inline constexpr MinorModes kMinor2314{1, 2, 0, 3};

// The seven nontrivial bipartition tests for four modes.
std::vector<std::pair<MinorModes, PartitionSpec>> four_mode_tests();

// 2x2 PT minor on {a_i a_j, a_k a_l}. PartitionMismatch for a trivial
// partition or a quadruple outside the three listed above.
CriterionReport four_mode_minor(const MomentTable& t, const MinorModes& perm, const PartitionSpec& part,
                                double tolerance = kVerdictTolerance);
CriterionReport four_mode_minor_out(const MomentTable& t, const MinorModes& perm, const PartitionSpec& part,
                                    const JointChannel& c, double tolerance = kVerdictTolerance);

}  // namespace flm
