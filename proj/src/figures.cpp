#include "flm/figures.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "flm/error.hpp"

namespace flm {

namespace {

void require_points(int n, const char* what) { require(n >= 2, ErrorCode::InvalidArgument, what); }

double lerp(double lo, double hi, int i, int n) { return lo + (hi - lo) * i / (n - 1); }

// First maximal run of negative samples, edges refined on f.
template <class F>
Interval negative_interval(const std::vector<double>& xs, const std::vector<double>& ys, F&& f) {
    std::size_t i = 0;
    while (i < ys.size() && !(ys[i] < 0.0)) ++i;
    if (i == ys.size()) return {};
    std::size_t j = i;
    while (j + 1 < ys.size() && ys[j + 1] < 0.0) ++j;
    Interval out{xs[i], xs[j]};
    if (i > 0) out.lo = bisect(f, xs[i - 1], xs[i]);
    if (j + 1 < ys.size()) out.hi = bisect(f, xs[j], xs[j + 1]);
    return out;
}

}  // namespace

TransmittanceModel gamma1_fixture(double t2, double gamma) {
    require(t2 > 0.0 && t2 <= 1.0 && gamma >= 0.0 && gamma < 1.0, ErrorCode::InvalidChannel,
            "gamma1 fixture needs 0 < <T^2> <= 1 and 0 <= Gamma < 1");
    return MomentFixture{"gamma1", {{1, std::sqrt(t2 * (1.0 - gamma))}, {2, t2}}, false};
}

TransmittanceModel gamma2_pair_fixture(double t4, double gamma) {
    require(t4 > 0.0 && t4 <= 1.0 && gamma >= 0.0 && gamma < 1.0, ErrorCode::InvalidChannel,
            "gamma2 fixture needs 0 < <T^4> <= 1 and 0 <= Gamma < 1");
    return MomentFixture{"gamma2-pair", {{2, std::sqrt(t4) * std::pow(1.0 - gamma, 0.25)}, {4, t4}}, false};
}

TransmittanceModel gamma_ab_fixture(double t2, double gamma) {
    require(t2 > 0.0 && t2 <= 1.0 && gamma >= 0.0 && gamma < 1.0, ErrorCode::InvalidChannel,
            "gamma_ab fixture needs 0 < <T^2> <= 1 and 0 <= Gamma < 1");
    return MomentFixture{"gamma-ab", {{1, std::sqrt(t2) * std::pow(1.0 - gamma, 0.25)}, {2, t2}}, false};
}

TransmittanceModel gamma_ijkl_fixture(double t2, double gamma) {
    require(t2 > 0.0 && t2 <= 1.0 && gamma >= 0.0 && gamma < 1.0, ErrorCode::InvalidChannel,
            "gamma_ijkl fixture needs 0 < <T^2> <= 1 and 0 <= Gamma < 1");
    return MomentFixture{"gamma-ijkl", {{1, std::sqrt(t2) * std::pow(1.0 - gamma, 0.125)}, {2, t2}}, false};
}

// ---- Fig. 1 ----

CriterionReport fig1_point(const Fig1Params& p, double phi, double beta_abs) {
    const auto t = tabulate(StateModel(DisplacedSqueezed{cplx(p.xi, 0.0), std::polar(beta_abs, phi)}), 4);
    return amplitude_squeezing_out(t, gamma1_fixture(p.t2, p.gamma), 1);
}

double fig1_boundary_closed_form(const Fig1Params& p, double phi) {
    const double s = std::sinh(p.xi), c = std::cosh(p.xi);
    const double coeff = s * s - s * c * std::cos(2.0 * phi);
    if (coeff <= 0.0 || p.gamma <= 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(s * s / (2.0 * p.gamma * coeff));
}

Fig1Result figure1(const Fig1Params& p) {
    require_points(p.phi_points, "fig1 needs at least two phase points");
    require_points(p.beta_points, "fig1 needs at least two amplitude points");
    require(p.beta_max > 0.0, ErrorCode::InvalidArgument, "fig1 beta_max must be positive");
    Fig1Result r;
    r.grid = {"fig1_grid", {"phi", "beta_abs", "d1_out", "quadratic_form"}, {}};
    r.contour = {"fig1_contour", {"phi", "beta_abs", "beta_abs_closed_form"}, {}};
    for (int i = 0; i < p.phi_points; ++i) {
        const double phi = lerp(0.0, 2.0 * std::numbers::pi, i, p.phi_points);
        for (int j = 0; j < p.beta_points; ++j) {
            const double b = lerp(0.0, p.beta_max, j, p.beta_points);
            const auto rep = fig1_point(p, phi, b);
            r.grid.rows.push_back({phi, b, rep.value, rep.detail("quadratic_form")});
        }
        auto f = [&](double b) { return fig1_point(p, phi, b).value; };
        if (f(p.beta_max) > 0.0)
            r.contour.rows.push_back({phi, bisect(f, 0.0, p.beta_max), fig1_boundary_closed_form(p, phi)});
    }
    return r;
}

// ---- Fig. 2 ----

JointChannel fig2_channel(const Fig2Params& p) {
    return JointChannel::uncorrelated(gamma2_pair_fixture(p.t4, p.gamma), 2);
}

double fig2_d_out(const Fig2Params& p, double prob) {
    return photon_correlation_out(tabulate(StateModel(PhaseRandomizedTMSV{prob}), 4), fig2_channel(p)).value;
}

double fig2_closed_form(const Fig2Params& p, double x) {
    return p.t4 * p.t4 * x * x * (1 + x) / std::pow(1 - x, 3) * (-1.0 + p.gamma * (1 + x) / (1 - x));
}

Fig2Result figure2(const Fig2Params& p) {
    require_points(p.points, "fig2 needs at least two points");
    require(p.p_min > 0.0 && p.p_max < 1.0 && p.p_min < p.p_max, ErrorCode::InvalidArgument,
            "fig2 range must lie inside (0,1)");
    Fig2Result r;
    r.curve = {"fig2", {"p", "D", "D_out", "D_out_closed_form", "relative_decomposition_defect"}, {}};
    const auto c = fig2_channel(p);
    double prev = 0.0;
    double lo = 0.0, hi = 0.0;
    for (int i = 0; i < p.points; ++i) {
        const double x = lerp(p.p_min, p.p_max, i, p.points);
        const auto t = tabulate(StateModel(PhaseRandomizedTMSV{x}), 4);
        const auto out = photon_correlation_out(t, c);
        r.curve.rows.push_back({x, out.input_value, out.value, fig2_closed_form(p, x), out.relative_decomposition_defect()});
        if (i > 0 && (out.value < 0.0) != (prev < 0.0)) {
            if (r.sign_changes == 0) {
                lo = lerp(p.p_min, p.p_max, i - 1, p.points);
                hi = x;
            }
            ++r.sign_changes;
        }
        prev = out.value;
    }
    if (r.sign_changes > 0) r.crossing = bisect([&](double x) { return fig2_d_out(p, x); }, lo, hi);
    r.closed_form_p_max = (1.0 - p.gamma) / (1.0 + p.gamma);
    return r;
}

// ---- Fig. 3 ----

JointChannel fig3_channel(const Fig3Params& p, double gamma) {
    return JointChannel::uncorrelated(gamma_ab_fixture(p.t2, gamma), 2);
}

StateModel fig3_ecs(const Fig3Params& p) {
    const double a = std::sqrt(p.ecs_alpha2);
    return EntangledCoherent{cplx(a, 0.0), cplx(a, 0.0)};
}

StateModel fig3_tmsv(const Fig3Params& p) {
    const double n = 0.5 * p.tmsv_total_mean;
    return TwoModeSqueezedVacuum{n / (1.0 + n)};
}

Fig3Result figure3(const Fig3Params& p) {
    require_points(p.points, "fig3 needs at least two points");
    require(p.gamma_max > 0.0 && p.gamma_max < 1.0, ErrorCode::InvalidArgument, "fig3 gamma_max must lie in (0,1)");
    Fig3Result r;
    r.curve = {"fig3", {"gamma", "S_out_ecs", "G_out_tmsv", "G_det_tmsv", "G_tur_tmsv"}, {}};
    const auto ecs = tabulate(fig3_ecs(p), 4);
    const auto tmsv = tabulate(fig3_tmsv(p), 2);
    for (int i = 0; i < p.points; ++i) {
        const double g = lerp(0.0, p.gamma_max, i, p.points);
        const auto c = fig3_channel(p, g);
        const auto s = ho_npt_out(ecs, c);
        const auto gs = simon_out(tmsv, c);
        r.curve.rows.push_back({g, s.value, gs.value, gs.deterministic_value, gs.turbulence_term});
    }
    const double e = std::exp(-4.0 * p.ecs_alpha2);
    r.ecs_threshold_closed_form = 4.0 * e / ((1.0 + e) * (1.0 + e));
    auto s_of = [&](double g) { return ho_npt_out(ecs, fig3_channel(p, g)).value; };
    auto g_of = [&](double g) { return simon_out(tmsv, fig3_channel(p, g)).value; };
    if (s_of(0.0) < 0.0 && s_of(p.gamma_max) > 0.0) r.ecs_crossing = bisect(s_of, 0.0, p.gamma_max);
    if (g_of(0.0) < 0.0 && g_of(p.gamma_max) > 0.0) r.tmsv_crossing = bisect(g_of, 0.0, p.gamma_max);
    return r;
}

// ---- Fig. 4 ----

JointChannel fig4_channel(const Fig4Params& p) {
    return JointChannel::uncorrelated(gamma_ijkl_fixture(p.t2, p.gamma), 4);
}

std::vector<double> fig4_point(double alpha, const JointChannel& c) {
    const auto t = tabulate(StateModel(CoherentW{cplx(alpha, 0.0), 4}), 4);
    const auto tests = four_mode_tests();
    const auto& one = tests[0];   // (1,2;3,4) with {1}
    const auto& half = tests[4];  // (1,2;3,4) with {1,2}
    const auto i_out = four_mode_minor_out(t, one.first, one.second, c);
    const auto ii_out = four_mode_minor_out(t, half.first, half.second, c);
    return {i_out.input_value, ii_out.input_value, i_out.value, ii_out.value};
}

Fig4Result figure4(const Fig4Params& p) {
    require_points(p.points, "fig4 needs at least two points");
    require(p.alpha_min > 0.0 && p.alpha_min < p.alpha_max, ErrorCode::InvalidArgument,
            "fig4 needs 0 < alpha_min < alpha_max");
    Fig4Result r;
    r.curve = {"fig4", {"alpha", "m_I", "m_II", "m_I_out", "m_II_out", "m_I_out_scaled", "m_II_out_scaled"}, {}};
    const auto c = fig4_channel(p);
    std::vector<double> xs;
    std::vector<std::vector<double>> ys(4);
    for (int i = 0; i < p.points; ++i) {
        const double a = lerp(p.alpha_min, p.alpha_max, i, p.points);
        const auto v = fig4_point(a, c);
        xs.push_back(a);
        for (int k = 0; k < 4; ++k) ys[static_cast<std::size_t>(k)].push_back(v[static_cast<std::size_t>(k)]);
        r.curve.rows.push_back({a, v[0], v[1], v[2], v[3], p.output_scale * v[2], p.output_scale * v[3]});
    }
    auto component = [&](int k) { return [&, k](double a) { return fig4_point(a, c)[static_cast<std::size_t>(k)]; }; };
    r.m_i = negative_interval(xs, ys[0], component(0));
    r.m_ii = negative_interval(xs, ys[1], component(1));
    r.m_i_out = negative_interval(xs, ys[2], component(2));
    r.m_ii_out = negative_interval(xs, ys[3], component(3));
    return r;
}

}  // namespace flm
