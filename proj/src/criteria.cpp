#include "flm/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "flm/error.hpp"

namespace flm {

namespace {

MultiIndex zero(std::size_t n) { return MultiIndex(n); }

MultiIndex unit(std::size_t n, std::size_t i, int power = 1) { return MultiIndex::unit(n, i, power); }

std::string format_modes(const std::vector<std::size_t>& modes) {
    std::string s = "{";
    for (std::size_t i = 0; i < modes.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(modes[i] + 1);
    }
    return s + "}";
}

void finish(CriterionReport& r) {
    r.verdict = r.value < -r.tolerance ? Verdict::Detected : Verdict::Inconclusive;
}

CriterionReport make(std::string name, double value, double tolerance) {
    CriterionReport r;
    r.name = std::move(name);
    r.value = value;
    r.tolerance = tolerance;
    r.input_value = value;
    finish(r);
    return r;
}

void require_modes(const MomentTable& t, std::size_t n, const char* what) {
    require(t.modes() == n, ErrorCode::InvalidArgument, what);
}

void require_channel_modes(const JointChannel& c, std::size_t n) {
    require(c.modes() == n, ErrorCode::InvalidArgument, "channel mode count does not match the table");
}

double det_of(const MatrixOfMoments& m) { return m.entries.determinant().real(); }

std::vector<BasisElement> sub_poisson_basis() {
    return {{MultiIndex{0}, MultiIndex{0}}, {MultiIndex{1}, MultiIndex{1}}};
}

std::vector<BasisElement> squeezing_basis(int k) {
    return {{MultiIndex{0}, MultiIndex{0}}, {MultiIndex{0}, MultiIndex{k}}, {MultiIndex{k}, MultiIndex{0}}};
}

std::vector<BasisElement> correlation_basis() {
    return {{unit(2, 0), unit(2, 0)}, {unit(2, 1), unit(2, 1)}};
}

std::vector<BasisElement> ho_basis() { return {{zero(2), zero(2)}, {zero(2), MultiIndex{1, 1}}}; }

const PartitionSpec& b_transposed() {
    static const PartitionSpec part(2, {1});
    return part;
}

bool same(const MinorModes& a, const MinorModes& b) {
    return a.i == b.i && a.j == b.j && a.k == b.k && a.l == b.l;
}

std::vector<BasisElement> four_mode_basis(const MinorModes& m) {
    return {{zero(4), unit(4, m.i) + unit(4, m.j)}, {zero(4), unit(4, m.k) + unit(4, m.l)}};
}

void check_four_mode(const MomentTable& t, const MinorModes& perm, const PartitionSpec& part) {
    require_modes(t, 4, "four-mode minor needs a four-mode table");
    require(same(perm, kMinor1234) || same(perm, kMinor1324) || same(perm, kMinor2314), ErrorCode::PartitionMismatch,
            "minor quadruple must be (1,2;3,4), (1,3;2,4) or (2,3;1,4)");
    require(part.modes() == 4, ErrorCode::PartitionMismatch, "partition must cover four modes");
    require(!part.b().empty() && !part.a().empty(), ErrorCode::PartitionMismatch,
            "four-mode minor needs a nontrivial bipartition");
}

}  // namespace

std::string_view to_string(Verdict v) { return v == Verdict::Detected ? "detected" : "inconclusive"; }

double CriterionReport::decomposition_defect() const {
    switch (decomposition) {
        case Decomposition::None: return 0.0;
        case Decomposition::Scaled: return std::abs(value - scale_factor * (input_value + turbulence_term));
        case Decomposition::Additive: return std::abs(value - (deterministic_value + turbulence_term));
    }
    return 0.0;
}

double CriterionReport::relative_decomposition_defect() const {
    double mag = 1.0;
    if (decomposition == Decomposition::Scaled)
        mag = std::max(mag, std::abs(scale_factor) * (std::abs(input_value) + std::abs(turbulence_term)));
    else if (decomposition == Decomposition::Additive)
        mag = std::max(mag, std::abs(deterministic_value) + std::abs(turbulence_term));
    return decomposition_defect() / mag;
}

double CriterionReport::detail(const std::string& key) const {
    for (const auto& [k, v] : details)
        if (k == key) return v;
    fail(ErrorCode::InvalidArgument, "report " + name + " has no detail '" + key + "'");
}

void write_criterion_header(std::ostream& out) { out << "name,parameters,value,scale,turbulence,verdict\n"; }

void write_criterion_row(std::ostream& out, const CriterionReport& r) {
    std::string params;
    for (const auto& [k, v] : r.inputs) {
        if (!params.empty()) params += ';';
        params += k + "=" + v;
    }
    out << r.name << ',' << params << ',' << std::setprecision(15) << r.value << ',' << r.scale_factor << ','
        << r.turbulence_term << ',' << to_string(r.verdict) << '\n';
}

double minor_eval(const MatrixOfMoments& m, const std::vector<std::size_t>& rows) {
    if (rows.empty()) return 1.0;
    return m.principal_submatrix(rows).determinant().real();
}

double min_eigenvalue(const MatrixOfMoments& m) {
    const Eigen::MatrixXcd h = 0.5 * (m.entries + m.entries.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

CriterionReport mandel_q(const MomentTable& t, double tolerance) {
    require_modes(t, 1, "mandel_q needs a single-mode table");
    const double n = t(MultiIndex{1}, MultiIndex{1}).real();
    require(std::abs(n) > 1e-14, ErrorCode::ZeroMeanPhoton, "Mandel Q undefined for zero mean photon number");
    const double g2 = t(MultiIndex{2}, MultiIndex{2}).real();
    CriterionReport r = make("mandel_q", (g2 - n * n) / n, tolerance);
    r.details = {{"mean_photon", n}};
    return r;
}

CriterionReport sub_poisson(const MomentTable& t, double tolerance) {
    require_modes(t, 1, "sub_poisson needs a single-mode table");
    return make("sub_poisson", det_of(build_matrix_N(t, sub_poisson_basis())), tolerance);
}

CriterionReport sub_poisson_out(const MomentTable& t, const TransmittanceModel& c, double tolerance) {
    require_modes(t, 1, "sub_poisson_out needs a single-mode table");
    const auto ch = JointChannel::single(c);
    CriterionReport r = make("sub_poisson_out", det_of(output_matrix_N(t, ch, sub_poisson_basis())), tolerance);
    const double n = t(MultiIndex{1}, MultiIndex{1}).real();
    const double gamma = gamma_single(c, 2).value;
    r.decomposition = Decomposition::Scaled;
    r.input_value = det_of(build_matrix_N(t, sub_poisson_basis()));
    r.scale_factor = t_moment(c, 4);
    r.turbulence_term = gamma * n * n;
    r.inputs = {{"channel", c.name()}};
    r.details = {{"gamma", gamma}, {"mean_photon", n}};
    return r;
}

CriterionReport amplitude_squeezing(const MomentTable& t, int k, double tolerance) {
    require_modes(t, 1, "amplitude_squeezing needs a single-mode table");
    require(k >= 1, ErrorCode::InvalidArgument, "squeezing order k must be >= 1");
    CriterionReport r = make("amplitude_squeezing", det_of(build_matrix_N(t, squeezing_basis(k))), tolerance);
    r.inputs = {{"k", std::to_string(k)}};
    return r;
}

CriterionReport amplitude_squeezing_out(const MomentTable& t, const TransmittanceModel& c, int k, double tolerance) {
    require_modes(t, 1, "amplitude_squeezing_out needs a single-mode table");
    require(k >= 1, ErrorCode::InvalidArgument, "squeezing order k must be >= 1");
    const auto basis = squeezing_basis(k);
    CriterionReport r =
        make("amplitude_squeezing_out", det_of(output_matrix_N(t, JointChannel::single(c), basis)), tolerance);
    const cplx x = t(MultiIndex{0}, MultiIndex{k});
    const cplx y = t(MultiIndex{0}, MultiIndex{2 * k});
    const double nk = t(MultiIndex{k}, MultiIndex{k}).real();
    // (<a^dag k>, <a^k>) A_k (<a^k>, <a^dag k>)^T
    const double form = 2.0 * nk * std::norm(x) - 2.0 * (y * std::conj(x) * std::conj(x)).real();
    const double gamma = gamma_single(c, k).value;
    const double t2k = t_moment(c, 2 * k);
    r.decomposition = Decomposition::Scaled;
    r.input_value = det_of(build_matrix_N(t, basis));
    r.scale_factor = t2k * t2k;
    r.turbulence_term = gamma * form;
    r.inputs = {{"k", std::to_string(k)}, {"channel", c.name()}};
    r.details = {{"gamma", gamma}, {"quadratic_form", form}};
    return r;
}

CriterionReport photon_correlation(const MomentTable& t, double tolerance) {
    require_modes(t, 2, "photon_correlation needs a two-mode table");
    return make("photon_correlation", det_of(build_matrix_N(t, correlation_basis())), tolerance);
}

CriterionReport photon_correlation_out(const MomentTable& t, const JointChannel& c, double tolerance) {
    require_modes(t, 2, "photon_correlation_out needs a two-mode table");
    require_channel_modes(c, 2);
    const auto basis = correlation_basis();
    CriterionReport r = make("photon_correlation_out", det_of(output_matrix_N(t, c, basis)), tolerance);
    const double nn = t(MultiIndex{1, 1}, MultiIndex{1, 1}).real();
    const double gamma = gamma_partitioned(c, MultiIndex{2, 2}, {0}, {1}).value;
    r.decomposition = Decomposition::Scaled;
    r.input_value = det_of(build_matrix_N(t, basis));
    r.scale_factor = joint_t_moment(c, MultiIndex{4, 0}) * joint_t_moment(c, MultiIndex{0, 4});
    r.turbulence_term = gamma * nn * nn;
    r.inputs = {{"channel", c.name()}};
    r.details = {{"gamma", gamma}};
    return r;
}

CriterionReport simon(const MomentTable& t, double tolerance) {
    require_modes(t, 2, "simon needs a two-mode table");
    CriterionReport r = make("simon", det_of(build_pt_matrix(t, b_transposed(), graded_basis(2, 1))), tolerance);
    r.inputs = {{"partition", "{2}"}};
    return r;
}

CriterionReport simon_out(const MomentTable& t, const JointChannel& c, double tolerance) {
    require_modes(t, 2, "simon_out needs a two-mode table");
    require_channel_modes(c, 2);
    const auto basis = graded_basis(2, 1);
    CriterionReport r = make("simon_out", det_of(output_pt_matrix(t, c, b_transposed(), basis)), tolerance);
    const double ta2 = joint_t_moment(c, MultiIndex{2, 0});
    const double tb2 = joint_t_moment(c, MultiIndex{0, 2});
    const JointChannel det = ProductChannel{{Deterministic{std::sqrt(ta2)}, Deterministic{std::sqrt(tb2)}}};
    r.decomposition = Decomposition::Additive;
    r.input_value = det_of(build_pt_matrix(t, b_transposed(), basis));
    r.deterministic_value = det_of(output_pt_matrix(t, det, b_transposed(), basis));
    r.turbulence_term = r.value - r.deterministic_value;
    r.inputs = {{"partition", "{2}"}, {"channel", c.name()}};
    r.details = {{"T2_a", ta2}, {"T2_b", tb2}};
    return r;
}

CriterionReport ho_npt(const MomentTable& t, double tolerance) {
    require_modes(t, 2, "ho_npt needs a two-mode table");
    CriterionReport r = make("ho_npt", det_of(build_pt_matrix(t, b_transposed(), ho_basis())), tolerance);
    r.inputs = {{"partition", "{2}"}};
    return r;
}

CriterionReport ho_npt_out(const MomentTable& t, const JointChannel& c, double tolerance) {
    require_modes(t, 2, "ho_npt_out needs a two-mode table");
    require_channel_modes(c, 2);
    const auto basis = ho_basis();
    CriterionReport r = make("ho_npt_out", det_of(output_pt_matrix(t, c, b_transposed(), basis)), tolerance);
    // <a b^dag> = <b^dag a>
    const cplx ab = t(MultiIndex{0, 1}, MultiIndex{1, 0});
    const double gamma = gamma_partitioned(c, MultiIndex{1, 1}, {0, 1}, {}).value;
    r.decomposition = Decomposition::Scaled;
    r.input_value = det_of(build_pt_matrix(t, b_transposed(), basis));
    r.scale_factor = joint_t_moment(c, MultiIndex{2, 2});
    r.turbulence_term = gamma * std::norm(ab);
    r.inputs = {{"partition", "{2}"}, {"channel", c.name()}};
    r.details = {{"gamma", gamma}};
    return r;
}

std::string MinorModes::label() const {
    return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ";" + std::to_string(k + 1) + "," +
           std::to_string(l + 1) + ")";
}

std::vector<std::pair<MinorModes, PartitionSpec>> four_mode_tests() {
    return {{kMinor1234, PartitionSpec(4, {0})},       {kMinor1234, PartitionSpec(4, {1})},
            {kMinor1234, PartitionSpec(4, {2})},       {kMinor1234, PartitionSpec(4, {0, 1, 2})},
            {kMinor1234, PartitionSpec(4, {0, 1})},    {kMinor1324, PartitionSpec(4, {0, 2})},
            {kMinor2314, PartitionSpec(4, {1, 2})}};
}

CriterionReport four_mode_minor(const MomentTable& t, const MinorModes& perm, const PartitionSpec& part,
                                double tolerance) {
    check_four_mode(t, perm, part);
    CriterionReport r = make("four_mode_minor", det_of(build_pt_matrix(t, part, four_mode_basis(perm))), tolerance);
    r.inputs = {{"minor", perm.label()}, {"partition", format_modes(part.b())}};
    return r;
}

CriterionReport four_mode_minor_out(const MomentTable& t, const MinorModes& perm, const PartitionSpec& part,
                                    const JointChannel& c, double tolerance) {
    check_four_mode(t, perm, part);
    require_channel_modes(c, 4);
    const auto basis = four_mode_basis(perm);
    CriterionReport r = make("four_mode_minor_out", det_of(output_pt_matrix(t, c, part, basis)), tolerance);
    const auto input = build_pt_matrix(t, part, basis);
    const MultiIndex ij = unit(4, perm.i) + unit(4, perm.j);
    const MultiIndex kl = unit(4, perm.k) + unit(4, perm.l);
    const double gamma = gamma_partitioned(c, ij + kl, {perm.i, perm.j}, {perm.k, perm.l}).value;
    r.decomposition = Decomposition::Scaled;
    r.input_value = input.entries.determinant().real();
    r.scale_factor = joint_t_moment(c, ij.scaled(2)) * joint_t_moment(c, kl.scaled(2));
    r.turbulence_term = gamma * std::norm(input.entries(0, 1));
    r.inputs = {{"minor", perm.label()}, {"partition", format_modes(part.b())}, {"channel", c.name()}};
    r.details = {{"gamma", gamma}};
    return r;
}

}  // namespace flm
