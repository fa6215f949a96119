#pragma once

// Parameter sweeps behind the four figures, plus the channel fixtures they use.

#include <string>
#include <utility>
#include <vector>

#include "flm/channels.hpp"
#include "flm/criteria.hpp"

namespace flm {

// Column-named numeric table; one per emitted curve.
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

// Fixture with <T^2> = t2 and <T>^2 = t2 (1 - gamma), i.e. Gamma^(1) = gamma.
TransmittanceModel gamma1_fixture(double t2, double gamma);
// Per-arm fixture with <T^4> = t4 and <T^2> = sqrt(t4) (1 - gamma)^(1/4), so
// that two uncorrelated arms have Gamma^(2)_{1;2} = gamma.
TransmittanceModel gamma2_pair_fixture(double t4, double gamma);
// Per-arm fixture with <T^2> = t2 and <T> = sqrt(t2) (1 - gamma)^(1/4), so
// that two uncorrelated arms have Gamma^(1)_{a,b} = gamma. Formal: <T> drops
// below <T^2> once gamma > 1 - t2^2.
TransmittanceModel gamma_ab_fixture(double t2, double gamma);
// Per-mode fixture with <T^2> = t2 and <T> = sqrt(t2) (1 - gamma)^(1/8), so
// that four uncorrelated modes have Gamma^(1)_{i,j;k,l} = gamma.
TransmittanceModel gamma_ijkl_fixture(double t2, double gamma);

// x in [lo, hi] with f(x) = 0 by bisection; requires a sign change.
template <class F>
double bisect(F&& f, double lo, double hi, double tol = 1e-12) {
    double flo = f(lo);
    for (int i = 0; i < 200 && hi - lo > tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

struct Fig1Params {
    double xi = 0.5;
    double gamma = 0.17;
    double t2 = 0.163;
    int phi_points = 73;
    int beta_points = 81;
    double beta_max = 2.0;
};

struct Fig1Result {
    Table grid;     // phi, beta_abs, d1_out, quadratic_form
    Table contour;  // phi, beta_abs where d1_out = 0 (general evaluation), closed form
};

// d_1^out at one displacement.
CriterionReport fig1_point(const Fig1Params& p, double phi, double beta_abs);
// |beta| of the d_1^out = 0 contour at phi; +inf when squeezing survives for all |beta|.
double fig1_boundary_closed_form(const Fig1Params& p, double phi);
Fig1Result figure1(const Fig1Params& p = {});

struct Fig2Params {
    double gamma = 0.23;
    double t4 = 0.030;
    double p_min = 0.005;
    double p_max = 0.995;
    int points = 199;
};

struct Fig2Result {
    Table curve;  // p, D, D_out, D_out_closed_form, relative_decomposition_defect
    double crossing = 0.0;        // root of D_out in p
    double closed_form_p_max = 0.0;     // (1 - Gamma)/(1 + Gamma)
    int sign_changes = 0;
};

JointChannel fig2_channel(const Fig2Params& p);
double fig2_d_out(const Fig2Params& p, double prob);
// <T^4>^2 p^2 (1+p)/(1-p)^3 [-1 + Gamma (1+p)/(1-p)] as printed.
double fig2_closed_form(const Fig2Params& p, double prob);
Fig2Result figure2(const Fig2Params& p = {});

struct Fig3Params {
    double t2 = 0.7;
    double ecs_alpha2 = 0.05;     // |alpha|^2 = |beta|^2
    double tmsv_total_mean = 1.0;  // <n_a + n_b>
    double gamma_max = 0.999;
    int points = 200;
};

struct Fig3Result {
    Table curve;  // gamma, S_out_ecs, G_out_tmsv, G_det_tmsv, G_tur_tmsv
    double ecs_threshold_closed_form = 0.0;
    double ecs_crossing = 0.0;   // bisection on S_out
    double tmsv_crossing = 0.0;  // bisection on G_out
};

JointChannel fig3_channel(const Fig3Params& p, double gamma);
StateModel fig3_ecs(const Fig3Params& p);
StateModel fig3_tmsv(const Fig3Params& p);
Fig3Result figure3(const Fig3Params& p = {});

struct Fig4Params {
    double gamma = 0.119;
    double t2 = 0.163;
    double alpha_min = 0.01;
    double alpha_max = 1.5;
    int points = 150;
    double output_scale = 5e3;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool empty() const { return !(hi > lo); }
    double length() const { return empty() ? 0.0 : hi - lo; }
};

struct Fig4Result {
    Table curve;  // alpha, m_I, m_II, m_I_out, m_II_out, m_I_out_scaled, m_II_out_scaled
    Interval m_i, m_ii, m_i_out, m_ii_out;  // negativity intervals, edges refined by bisection
};

JointChannel fig4_channel(const Fig4Params& p);
// {m_I, m_II, m_I_out, m_II_out} at |alpha| for the given channel.
std::vector<double> fig4_point(double alpha, const JointChannel& c);
Fig4Result figure4(const Fig4Params& p = {});

}  // namespace flm
