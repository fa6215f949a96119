// Acceptance checks 1-10. One PASS/FAIL line per criterion; exit code 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include "flm/algebra.hpp"
#include "flm/criteria.hpp"
#include "flm/error.hpp"
#include "flm/figures.hpp"
#include "flm/homodyne.hpp"
#include "flm/propagation.hpp"
#include "oracles.hpp"

using namespace flm;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 6) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

double min_eig(const Eigen::MatrixXcd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// ---- 1 ----
Outcome reordering_oracle() {
    const int cutoff = 20;
    const auto cre = oracle::IntMatrix::creation(cutoff);
    const auto ann = oracle::IntMatrix::annihilation(cutoff);
    int bad = 0, checked = 0;
    for (int m = 0; m <= 5; ++m)
        for (int n = 0; n <= 5; ++n) {
            const auto an = oracle::power(ann, m) * oracle::power(cre, n);
            const auto cr = oracle::power(cre, m) * oracle::power(ann, n);
            bad += !oracle::equal_on_leading(oracle::polynomial_matrix(reorder_annihilation_first(m, n), cutoff), an,
                                             cutoff - m - n);
            bad += !oracle::equal_on_leading(oracle::polynomial_matrix(reorder_creation_first(m, n), cutoff), cr,
                                             cutoff - m - n);
            checked += 2;
        }
    return {bad == 0, std::to_string(checked - bad) + "/" + std::to_string(checked) + " expansions exact"};
}

// ---- 2 ----
Outcome deterministic_limit() {
    double worst = 0.0;
    for (double t0 : {0.3, 0.7}) {
        for (const StateModel& s : {StateModel(Coherent{{cplx(0.8, -0.3)}}), StateModel(FockNumber{2})}) {
            const auto t = tabulate(s, 4);
            const auto att = oracle::attenuated_table(s, {t0}, 4);
            const auto ref = build_matrix_M(att, 2).entries;
            worst = std::max(worst, oracle::max_abs_diff(output_matrix_single(t, Deterministic{t0}, 2).entries, ref));
            worst = std::max(worst, oracle::max_abs_diff(
                                        output_matrix_multi(t, JointChannel::single(Deterministic{t0}), 2).entries, ref));
        }
        const StateModel tmsv = TwoModeSqueezedVacuum{0.3};
        const auto t = tabulate(tmsv, 4);
        const auto att = oracle::attenuated_table(tmsv, {t0, t0}, 4);
        const JointChannel c = JointChannel::uncorrelated(Deterministic{t0}, 2);
        worst = std::max(worst, oracle::max_abs_diff(output_matrix_multi(t, c, 2).entries, build_matrix_M(att, 2).entries));
        for (std::vector<std::size_t> b : {std::vector<std::size_t>{1}, std::vector<std::size_t>{0, 1}}) {
            const PartitionSpec part(2, b);
            worst = std::max(worst, oracle::max_abs_diff(output_pt_matrix(t, c, part, 2).entries,
                                                         partial_transpose(build_matrix_M(att, 2), part, att).entries));
        }
    }
    return {worst <= 1e-9, "max entry deviation " + fmt(worst, 3)};
}

// ---- 3 ----
Outcome sub_poisson_threshold() {
    bool ok = true;
    std::string detail;
    for (double g : {0.05, 0.1144, 0.3}) {
        const TransmittanceModel c = MomentFixture{"g2", {{2, std::sqrt(0.03 * (1.0 - g))}, {4, 0.03}}, true};
        const double gamma = gamma_single(c, 2).value;
        int first_lost = -1;
        for (int n = 1; n <= 40 && first_lost < 0; ++n)
            if (!sub_poisson_out(tabulate(StateModel(FockNumber{n}), 4), c).detected()) first_lost = n;
        const int expect = static_cast<int>(std::ceil(1.0 / gamma - 1e-9));
        ok = ok && first_lost == expect;
        detail += "Gamma=" + fmt(g) + ": lost at n=" + std::to_string(first_lost) + " (ceil 1/Gamma=" +
                  std::to_string(expect) + "); ";
    }
    const TransmittanceModel fx = beamwandering_fig24();
    const double gamma = gamma_single(fx, 2).value;
    double worst_d = 0.0, worst_split = 0.0;
    bool law = true;
    for (int n = 1; n <= 20; ++n) {
        const auto t = tabulate(StateModel(FockNumber{n}), 4);
        worst_d = std::max(worst_d, std::abs(sub_poisson(t).value + n));
        const auto r = sub_poisson_out(t, fx);
        worst_split = std::max(worst_split, r.decomposition_defect());
        law = law && (r.detected() == (n < 1.0 / gamma));
    }
    ok = ok && worst_d <= 1e-12 && worst_split <= 1e-12 && law;
    detail += "fixture: |d+n| <= " + fmt(worst_d, 2) + ", split defect <= " + fmt(worst_split, 2) +
              ", survival law " + (law ? "holds" : "violated");
    return {ok, detail};
}

// ---- 4 ----
Outcome figure1_properties() {
    const Fig1Params p;
    bool axis = true, lobes = true;
    for (int i = 0; i < 73; ++i) {
        const double phi = 2.0 * std::numbers::pi * i / 72.0;
        axis = axis && fig1_point(p, phi, 0.0).detected();
    }
    for (int j = 0; j <= 40; ++j) {
        const double b = 2.0 * j / 40.0;
        lobes = lobes && fig1_point(p, 0.0, b).detected() && fig1_point(p, std::numbers::pi, b).detected();
    }
    lobes = lobes && !fig1_point(p, std::numbers::pi / 2, 2.0).detected() &&
            !fig1_point(p, 3 * std::numbers::pi / 2, 2.0).detected();
    const double closed = fig1_boundary_closed_form(p, std::numbers::pi / 2);
    const double general = bisect([&](double b) { return fig1_point(p, std::numbers::pi / 2, b).value; }, 0.5, 1.5, 1e-14);
    const bool boundary = std::abs(closed - 0.964) <= 1e-3 && std::abs(closed - general) <= 1e-9;
    return {axis && lobes && boundary, std::string("beta=0 axis ") + (axis ? "preserved" : "NOT preserved") +
                                           ", lobes at phi in {0,pi} " + (lobes ? "yes" : "no") +
                                           ", boundary closed " + fmt(closed, 7) + " vs general " + fmt(general, 7)};
}

// ---- 5 ----
Outcome figure2_properties() {
    const auto r = figure2();
    double rel = 0.0, abs_defect = 0.0;
    const Fig2Params p;
    for (const auto& row : r.curve.rows) {
        rel = std::max(rel, row[4]);
        const auto out = photon_correlation_out(tabulate(StateModel(PhaseRandomizedTMSV{row[0]}), 4), fig2_channel(p));
        abs_defect = std::max(abs_defect, out.decomposition_defect());
    }
    const bool ok = r.curve.rows.front()[2] < 0.0 && r.sign_changes == 1 && std::abs(r.crossing - 0.785) <= 0.005 &&
                    std::abs(r.closed_form_p_max - 0.626) <= 1e-3 && rel <= 1e-10 && r.curve.columns.size() == 5;
    return {ok, "crossing p=" + fmt(r.crossing) + " (closed-form p_max=" + fmt(r.closed_form_p_max, 4) +
                    "), sign changes " + std::to_string(r.sign_changes) + ", decomposition defect relative <= " +
                    fmt(rel, 2) + " (absolute <= " + fmt(abs_defect, 2) + ")"};
}

// ---- 6 ----
Outcome figure3_properties() {
    const auto r = figure3();
    const bool ok = std::abs(r.ecs_threshold_closed_form - 0.990) <= 1e-3 &&
                    std::abs(r.ecs_crossing - r.ecs_threshold_closed_form) <= 1e-9 && r.tmsv_crossing > 0.0 &&
                    r.tmsv_crossing < r.ecs_crossing;
    return {ok, "Gamma*_ECS=" + fmt(r.ecs_threshold_closed_form) + " (bisection " + fmt(r.ecs_crossing) +
                    "), Gamma*_TMSV=" + fmt(r.tmsv_crossing) + "; arm moments <T_a><T_b> = <T^2> sqrt(1-Gamma)"};
}

// ---- 7 ----
Outcome figure4_properties() {
    const auto r = figure4();
    const TransmittanceModel fx = beamwandering_fig24();
    const JointChannel corr = FullyCorrelated{fx, 4};
    double worst = 0.0;
    for (int i = 1; i <= 30; ++i) {
        const auto v = fig4_point(0.05 * i, corr);
        worst = std::max({worst, std::abs(v[2] - 0.03 * 0.03 * v[0]), std::abs(v[3] - 0.03 * 0.03 * v[1])});
    }
    const bool contain = !r.m_i_out.empty() && r.m_ii_out.lo <= r.m_i_out.lo && r.m_ii_out.hi >= r.m_i_out.hi &&
                         r.m_ii_out.length() > r.m_i_out.length();
    const bool shorter = r.m_i_out.length() < r.m_i.length() && r.m_ii_out.length() < r.m_ii.length();
    return {worst <= 1e-12 && contain && shorter,
            "correlated scaling defect " + fmt(worst, 2) + "; m_I_out<0 on (" + fmt(r.m_i_out.lo, 4) + ", " +
                fmt(r.m_i_out.hi, 4) + "), m_II_out<0 on (" + fmt(r.m_ii_out.lo, 4) + ", " + fmt(r.m_ii_out.hi, 4) +
                "), lossless lengths " + fmt(r.m_i.length(), 4) + " / " + fmt(r.m_ii.length(), 4)};
}

// ---- 8 ----
TransmittanceModel random_law(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    switch (rng() % 3) {
        case 0: return BetaLaw{0.3 + 6 * u(rng), 0.3 + 6 * u(rng)};
        case 1: return Deterministic{u(rng)};
        default: {
            const double x = 0.25 + 0.5 * u(rng);
            std::vector<double> y{u(rng), 0.2 + u(rng), u(rng)};
            const double area = 0.5 * x * (y[0] + y[1]) + 0.5 * (1 - x) * (y[1] + y[2]);
            for (double& v : y) v /= area;
            return Tabulated({0.0, x, 1.0}, y);
        }
    }
}

// Truncated, renormalized single-mode density of a pure state, embedded at `cutoff`.
Eigen::MatrixXcd local_density(const StateModel& s, int cutoff) {
    const auto psi = oracle_pure_state(s, 4);
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(cutoff);
    for (int n = 0; n < std::min<int>(cutoff, static_cast<int>(psi.amplitudes.size())); ++n) v[n] = psi.amplitudes[n];
    v /= v.norm();
    return v * v.adjoint();
}

StateModel random_separable(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int cutoff = 16;
    auto local = [&]() -> StateModel {
        switch (rng() % 3) {
            case 0: return FockNumber{static_cast<int>(rng() % 4)};
            case 1: return DisplacedSqueezed{std::polar(0.4 * u(rng), 2 * std::numbers::pi * u(rng)),
                                             std::polar(0.8 * u(rng), 2 * std::numbers::pi * u(rng))};
            default: return Coherent{{std::polar(1.0 * u(rng), 2 * std::numbers::pi * u(rng))}};
        }
    };
    const int terms = 1 + static_cast<int>(rng() % 4);
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(cutoff * cutoff, cutoff * cutoff);
    double total = 0.0;
    for (int k = 0; k < terms; ++k) {
        const double w = 0.05 + u(rng);
        total += w;
        rho += w * Eigen::kroneckerProduct(local_density(local(), cutoff), local_density(local(), cutoff));
    }
    rho /= total;
    const FockSpace space(2, cutoff);
    std::vector<Eigen::Triplet<cplx, std::ptrdiff_t>> entries;
    for (int r = 0; r < rho.rows(); ++r)
        for (int c = 0; c < rho.cols(); ++c)
            if (std::abs(rho(r, c)) > 0.0) entries.emplace_back(r, c, rho(r, c));
    return GenericFock{std::make_shared<const FockDensityMatrix>(FockDensityMatrix::from_entries(space, entries))};
}

Outcome classical_and_separable() {
    std::mt19937_64 rng(20261014);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double tol = 1e-9;
    std::vector<TransmittanceModel> laws;
    for (int i = 0; i < 50; ++i) laws.push_back(random_law(rng));
    int nonclassical = 0, classical_checks = 0;
    double worst_eig = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 200; ++s) {
        CoherentMixture mix;
        const int terms = 1 + static_cast<int>(rng() % 5);
        double total = 0.0;
        for (int k = 0; k < terms; ++k) {
            mix.weights.push_back(0.05 + u(rng));
            total += mix.weights.back();
            mix.amplitudes.push_back({std::polar(1.5 * u(rng), 2 * std::numbers::pi * u(rng))});
        }
        for (double& w : mix.weights) w /= total;
        const auto t = tabulate(StateModel(mix), 4);
        for (const auto& c : laws) {
            nonclassical += sub_poisson_out(t, c, tol).detected();
            nonclassical += amplitude_squeezing_out(t, c, 1, tol).detected();
            nonclassical += amplitude_squeezing_out(t, c, 2, tol).detected();
            const double e = min_eig(output_matrix_N(t, JointChannel::single(c), 2).entries);
            worst_eig = std::min(worst_eig, e);
            nonclassical += e < -tol;
            classical_checks += 4;
        }
    }
    int entangled = 0, separable_checks = 0;
    double worst_pt = std::numeric_limits<double>::infinity();
    const PartitionSpec part(2, {1});
    for (int s = 0; s < 200; ++s) {
        const auto t = tabulate(random_separable(rng), 4);
        const JointChannel c = ProductChannel{{laws[s % 50], laws[(7 * s + 3) % 50]}};
        entangled += simon(t, tol).detected() + ho_npt(t, tol).detected();
        entangled += simon_out(t, c, tol).detected() + ho_npt_out(t, c, tol).detected();
        const double e = std::min(min_eig(build_pt_matrix(t, part, graded_basis(2, 2)).entries),
                                  min_eig(output_pt_matrix(t, c, part, 2).entries));
        worst_pt = std::min(worst_pt, e);
        entangled += e < -tol;
        separable_checks += 5;
    }
    return {nonclassical == 0 && entangled == 0,
            std::to_string(nonclassical) + " nonclassicality detections in " + std::to_string(classical_checks) +
                " checks (min N^out eigenvalue " + fmt(worst_eig, 3) + "), " + std::to_string(entangled) +
                " entanglement detections in " + std::to_string(separable_checks) + " checks (min PT eigenvalue " +
                fmt(worst_pt, 3) + ")"};
}

// ---- 9 ----
Outcome homodyne_end_to_end() {
    const StateModel s = DisplacedSqueezed{cplx(0.5, 0.0), cplx(0.0, 0.0)};
    const TransmittanceModel c = BetaLaw{5, 2};
    const DetectionNetwork net{2, 5.0};
    const auto predicted = output_moment(tabulate(s, 4), JointChannel::single(c));
    double worst = 0.0;
    std::string detail;
    for (std::uint64_t seed : {101ULL, 202ULL}) {
        HomodyneOptions opt;
        opt.samples = 100'000;
        opt.seed = seed;
        const auto est = simulate_correlations(s, c, net, phase_grid(5), {second_order_combination(net)}, opt);
        const auto ex = extract_moments(est, net, {{0, 2}, {1, 1}, {2, 0}});
        double seed_worst = 0.0;
        for (const auto& e : ex) {
            const cplx want = predicted(MultiIndex{e.n}, MultiIndex{e.m});
            seed_worst = std::max(seed_worst, std::abs(e.value.real() - want.real()) / e.stderr_re);
            if (e.stderr_im > 0.0)
                seed_worst = std::max(seed_worst, std::abs(e.value.imag() - want.imag()) / e.stderr_im);
        }
        worst = std::max(worst, seed_worst);
        detail += "seed " + std::to_string(seed) + ": max|z|=" + fmt(seed_worst, 3) + "; ";
    }
    return {worst < 3.0, detail + "<a^2>_out=" + fmt(predicted(MultiIndex{0}, MultiIndex{2}).real())};
}

// ---- 10 ----
Outcome fixture_gammas() {
    const TransmittanceModel fx = beamwandering_fig24();
    const double g2 = gamma_partitioned(JointChannel::uncorrelated(fx, 2), MultiIndex{2, 2}, {0}, {1}).value;
    const double g1 = gamma_partitioned(JointChannel::uncorrelated(fx, 4), MultiIndex{1, 1, 1, 1}, {0, 1}, {2, 3}).value;
    const double g2_formula = 1.0 - std::pow(0.163 * 0.163, 2) / (0.030 * 0.030);
    const double g1_formula = 1.0 - std::pow(0.398, 8) / std::pow(0.163, 4);
    const bool ok = std::abs(g2 - 0.2155) <= 1e-4 && std::abs(g1 - 0.1081) <= 1e-4;
    return {ok, "closed-form mismatch " + fmt(std::max(std::abs(g2 - g2_formula), std::abs(g1 - g1_formula)), 2) +
                    "; Gamma^(2)_{1;2}=" + fmt(g2) + " (target 0.2155 +- 1e-4)" + " (quoted 0.23, deviation " + fmt(g2 - 0.23, 3) +
                    "), Gamma^(1)_{i,j;k,l}=" + fmt(g1) + " (target 0.1081 +- 1e-4, quoted 0.119, deviation " + fmt(g1 - 0.119, 3) +
                    ")"};
}

}  // namespace

// --known-failure N (repeatable): criteria recorded as failing. The exit code is 0 only when
// the failing set equals this list; the PASS/FAIL lines are unaffected.
int main(int argc, char** argv) {
    std::vector<int> known;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--known-failure") known.push_back(std::stoi(argv[++i]));
    struct Criterion {
        int id;
        const char* name;
        double budget_s;  // runtime bound, 0 if none
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all{
        {1, "reordering oracle equivalence", 1.0, reordering_oracle},
        {2, "deterministic-limit equivalence", 10.0, deterministic_limit},
        {3, "Fock sub-Poisson threshold", 0.0, sub_poisson_threshold},
        {4, "Fig. 1 properties", 0.0, figure1_properties},
        {5, "Fig. 2 crossing and decomposition", 0.0, figure2_properties},
        {6, "Fig. 3 ECS vs TMSV crossing", 0.0, figure3_properties},
        {7, "Fig. 4 negativity intervals", 0.0, figure4_properties},
        {8, "classical/separable robustness", 120.0, classical_and_separable},
        {9, "homodyne end-to-end", 60.0, homodyne_end_to_end},
        {10, "fixture fluctuation parameters", 0.0, fixture_gammas},
    };
    int failed = 0;
    std::vector<int> failing;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0.0 && secs >= c.budget_s) {
            o.pass = false;
            o.detail += "; over runtime budget " + fmt(c.budget_s, 3) + " s";
        }
        failed += !o.pass;
        if (!o.pass) failing.push_back(c.id);
        std::printf("criterion %2d %s: %s  [%s] (%.2f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                    secs);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
    std::sort(known.begin(), known.end());
    if (!known.empty()) {
        std::string list;
        for (int k : known) list += " " + std::to_string(k);
        std::printf("known failures:%s -> %s\n", list.c_str(), failing == known ? "as recorded" : "MISMATCH");
    }
    return failing == known ? 0 : 1;
}
