#include <doctest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "flm/error.hpp"
#include "flm/propagation.hpp"
#include "oracles.hpp"

using namespace flm;

namespace {

double min_eig(const Eigen::MatrixXcd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (m + m.adjoint()));
    return es.eigenvalues().minCoeff();
}

BasisElement e1(int p, int q) { return {MultiIndex{p}, MultiIndex{q}}; }

const std::vector<double> kGrid{0.0, 0.3, 0.7, 1.0};

}  // namespace

TEST_SUITE("propagation") {

TEST_CASE("graded basis layout") {
    const auto b = graded_basis(1, 2);
    REQUIRE(b.size() == 6);
    CHECK(b[0] == e1(0, 0));
    CHECK(b[1] == e1(0, 1));
    CHECK(b[2] == e1(1, 0));
    CHECK(b[3] == e1(0, 2));
    CHECK(b[4] == e1(1, 1));
    CHECK(b[5] == e1(2, 0));
    CHECK(graded_basis(2, 1).size() == 5);
    CHECK(required_order(b) == 4);
}

TEST_CASE("vacuum matrix of moments") {
    const auto t = tabulate(StateModel(Coherent{{0.0}}), 2);
    const auto m = build_matrix_M(t, 1);
    Eigen::MatrixXcd expect = Eigen::MatrixXcd::Zero(3, 3);
    expect(0, 0) = 1.0;
    expect(2, 2) = 1.0;
    CHECK(oracle::max_abs_diff(m.entries, expect) < 1e-15);
}

TEST_CASE("Fock(1) entries") {
    const auto t = tabulate(StateModel(FockNumber{1}), 4);
    const auto m = build_matrix_M(t, 2);
    CHECK(std::abs(m.at(e1(1, 0), e1(1, 0)) - 2.0) < 1e-15);
    CHECK(std::abs(m.entries(0, 0) - 1.0) < 1e-15);
    const auto out = output_matrix_single(t, Deterministic{0.6}, 2);
    CHECK(std::abs(out.at(e1(1, 0), e1(1, 0)) - 1.36) < 1e-12);
    const auto n = build_matrix_N(t, {e1(0, 0), e1(1, 1)});
    CHECK(std::abs(n.entries.determinant() - (-1.0)) < 1e-14);
    CHECK(std::abs(n.entries(0, 1) - 1.0) < 1e-15);
    CHECK(std::abs(n.entries(1, 1)) < 1e-15);
}

TEST_CASE("N matrix of squeezed vacuum") {
    const auto t = tabulate(StateModel(DisplacedSqueezed{0.5, 0.0}), 4);
    const auto n = build_matrix_N(t, 1);
    CHECK(n.entries.determinant().real() == doctest::Approx(-std::sinh(0.5) * std::sinh(0.5)).epsilon(1e-12));
    CHECK(n.entries.determinant().real() == doctest::Approx(-0.2715).epsilon(1e-3));
}

TEST_CASE("N for a coherent state is a rank-one outer product") {
    const auto t = tabulate(StateModel(Coherent{{cplx(0.7, -0.4)}}), 4);
    const auto n = build_matrix_N(t, 2);
    CHECK(std::abs(min_eig(n.entries)) < 1e-12);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(n.entries);
    CHECK(svd.singularValues()(1) < 1e-12);
}

TEST_CASE("output N scaling") {
    const auto t = tabulate(StateModel(DisplacedSqueezed{cplx(0.2, 0.1), cplx(0.6, 0.3)}), 4);
    const TransmittanceModel fx = beamwandering_fig24();
    const auto c = JointChannel::single(fx);
    const auto n = build_matrix_N(t, {e1(0, 0), e1(0, 1)});
    const auto out = output_matrix_N(t, c, {e1(0, 0), e1(0, 1)});
    CHECK(std::abs(out.entries(0, 1) - 0.398 * n.entries(0, 1)) < 1e-15);
    const auto n2 = build_matrix_N(t, {e1(0, 0), e1(2, 0)});
    const auto out2 = output_matrix_N(t, c, {e1(0, 0), e1(2, 0)});
    CHECK(std::abs(out2.entries(1, 1) - 0.030 * n2.entries(1, 1)) < 1e-15);
    CHECK(std::abs(out2.entries(0, 1) - 0.163 * n2.entries(0, 1)) < 1e-15);
    const auto same = output_matrix_N(t, JointChannel::single(Deterministic{1.0}), 2);
    CHECK(oracle::max_abs_diff(same.entries, build_matrix_N(t, 2).entries) < 1e-15);
}

TEST_CASE("output_moment") {
    const auto t = tabulate(StateModel(Coherent{{cplx(0.5, 0.2)}}), 2);
    const TransmittanceModel beta = BetaLaw{3, 2};
    const auto out = output_moment(t, JointChannel::single(beta));
    CHECK(std::abs(out(MultiIndex{0}, MultiIndex{1}) - 0.6 * cplx(0.5, 0.2)) < 1e-15);
    const auto f = output_moment(tabulate(StateModel(FockNumber{1}), 2),
                                 JointChannel::single(TransmittanceModel(beamwandering_fig24())));
    CHECK(out.conjugation_defect() < 1e-15);
    CHECK(f(MultiIndex{1}, MultiIndex{1}).real() == doctest::Approx(0.163));
}

TEST_CASE("deterministic-limit oracle equivalence, single mode") {
    const std::vector<StateModel> states{StateModel(Coherent{{cplx(0.8, -0.3)}}), StateModel(FockNumber{2}),
                                         StateModel(DisplacedSqueezed{cplx(0.3, 0.2), cplx(-0.4, 0.5)})};
    for (const auto& s : states) {
        const auto t = tabulate(s, 4);
        for (double t0 : kGrid) {
            CAPTURE(s.name());
            CAPTURE(t0);
            const auto att = oracle::attenuated_table(s, {t0}, 4);
            for (int cut : {1, 2}) {
                const auto out = output_matrix_single(t, Deterministic{t0}, cut);
                CHECK(oracle::max_abs_diff(out.entries, build_matrix_M(att, cut).entries) < 1e-9);
                CHECK(out.hermiticity_defect() < 1e-10);
                const auto n = output_matrix_N(t, JointChannel::single(Deterministic{t0}), cut);
                CHECK(oracle::max_abs_diff(n.entries, build_matrix_N(att, cut).entries) < 1e-9);
            }
        }
    }
}

TEST_CASE("deterministic-limit oracle equivalence, two modes and PT") {
    const std::vector<StateModel> states{StateModel(Coherent{{cplx(0.5, 0.1), cplx(-0.3, 0.4)}}),
                                         StateModel(TwoModeSqueezedVacuum{0.3}),
                                         StateModel(EntangledCoherent{0.4, cplx(0.2, 0.3)})};
    for (const auto& s : states) {
        const auto t = tabulate(s, 4);
        const auto rho = oracle_density(s, 4);
        for (double ta : kGrid)
            for (double tb : {0.7}) {
                CAPTURE(s.name());
                CAPTURE(ta);
                CAPTURE(tb);
                const auto att = oracle::attenuated_table(rho, {ta, tb}, 4);
                const JointChannel c = ProductChannel{{Deterministic{ta}, Deterministic{tb}}};
                const auto out = output_matrix_multi(t, c, 2);
                CHECK(oracle::max_abs_diff(out.entries, build_matrix_M(att, 2).entries) < 1e-9);
                for (std::vector<std::size_t> b : {std::vector<std::size_t>{1}, std::vector<std::size_t>{0, 1}}) {
                    const PartitionSpec part(2, b);
                    const auto pt = output_pt_matrix(t, c, part, 2);
                    const auto ref = partial_transpose(build_matrix_M(att, 2), part, att);
                    CHECK(oracle::max_abs_diff(pt.entries, ref.entries) < 1e-9);
                    CHECK(pt.hermiticity_defect() < 1e-10);
                }
            }
    }
}

TEST_CASE("k-sum route agrees with the normal-order scaling route") {
    const auto t = tabulate(StateModel(EntangledCoherent{cplx(0.6, 0.2), cplx(-0.3, 0.5)}), 4);
    const std::vector<JointChannel> channels{
        JointChannel::uncorrelated(BetaLaw{2.0, 1.3}, 2),
        JointChannel(FullyCorrelated{BetaLaw{4.0, 2.0}, 2}),
        JointChannel(ProductChannel{{Tabulated({0.1, 0.6, 1.0}, {0.0, 2.0, 1.0}), BetaLaw{1.0, 1.0}}})};
    const auto basis = graded_basis(2, 2);
    for (const auto& c : channels)
        for (std::vector<std::size_t> b : {std::vector<std::size_t>{}, std::vector<std::size_t>{0},
                                           std::vector<std::size_t>{1}}) {
            const PartitionSpec part(2, b);
            const auto route1 = output_pt_matrix(t, c, part, basis);
            const auto route2 = oracle::scaled_output_matrix(t, c, part, basis);
            CHECK(oracle::max_abs_diff(route1.entries, route2.entries) < 1e-12);
        }
}

TEST_CASE("partial transpose reductions") {
    const auto t = tabulate(StateModel(TwoModeSqueezedVacuum{0.3}), 4);
    const auto m = build_matrix_M(t, 2);
    const auto none = partial_transpose(m, PartitionSpec::none(2), t);
    CHECK(oracle::max_abs_diff(none.entries, m.entries) < 1e-15);
    const auto c = JointChannel::uncorrelated(BetaLaw{2, 2}, 2);
    CHECK(oracle::max_abs_diff(output_pt_matrix(t, c, PartitionSpec::none(2), 2).entries,
                               output_matrix_multi(t, c, 2).entries) < 1e-15);
    const auto id = JointChannel::uncorrelated(Deterministic{1.0}, 2);
    const PartitionSpec pb(2, {1});
    CHECK(oracle::max_abs_diff(output_pt_matrix(t, id, pb, 2).entries, partial_transpose(m, pb, t).entries) < 1e-14);

    // Rows {a, b}: det = <n_a><n_b> - |<ab>|^2 = -p/(1-p) for the TMSV.
    const auto pt = build_pt_matrix(t, pb, {{MultiIndex{0, 0}, MultiIndex{1, 0}}, {MultiIndex{0, 0}, MultiIndex{0, 1}}});
    CHECK(pt.entries.determinant().real() == doctest::Approx(-0.3 / 0.7).epsilon(1e-10));
    // The fourth-order minor {1, <a b^dag>; <a^dag b>, <n_a n_b>} stays positive:
    // <a b^dag> vanishes for the TMSV.
    const auto s4 = build_pt_matrix(t, pb, {{MultiIndex{0, 0}, MultiIndex{0, 0}}, {MultiIndex{0, 0}, MultiIndex{1, 1}}});
    CHECK(std::abs(s4.entries(0, 1)) < 1e-14);
    CHECK(s4.entries.determinant().real() == doctest::Approx(0.3 * 1.3 / 0.49).epsilon(1e-10));
}

TEST_CASE("classical and separable states stay positive") {
    const CoherentMixture mix{{0.2, 0.5, 0.3}, {{cplx(0.4, 0.1), cplx(-0.2, 0.6)},
                                                 {cplx(-0.9, 0.3), cplx(0.1, 0.0)},
                                                 {cplx(0.0, -0.5), cplx(0.7, 0.7)}}};
    const auto t = tabulate(StateModel(mix), 4);
    const std::vector<JointChannel> channels{JointChannel::uncorrelated(BetaLaw{0.5, 0.5}, 2),
                                             JointChannel(ProductChannel{{Deterministic{0.4}, BetaLaw{3, 1}}}),
                                             JointChannel(FullyCorrelated{BetaLaw{2, 5}, 2})};
    CHECK(min_eig(build_matrix_N(t, 2).entries) > -1e-9);
    for (const auto& c : channels) {
        CHECK(min_eig(output_matrix_N(t, c, 2).entries) > -1e-9);
        for (std::vector<std::size_t> b : {std::vector<std::size_t>{0}, std::vector<std::size_t>{1}}) {
            const PartitionSpec part(2, b);
            CHECK(min_eig(build_pt_matrix(t, part, graded_basis(2, 2)).entries) > -1e-9);
            CHECK(min_eig(output_pt_matrix(t, c, part, 2).entries) > -1e-9);
        }
    }
    const auto coh = tabulate(StateModel(Coherent{{cplx(1.1, 0.2)}}), 4);
    CHECK(min_eig(build_matrix_M(coh, 2).entries) > -1e-10);
}

TEST_CASE("missing channel moments propagate") {
    const auto t = tabulate(StateModel(FockNumber{1}), 4);
    const TransmittanceModel fx = beamwandering_fig24();
    try {
        output_matrix_single(t, fx, 2);
        FAIL("expected MissingMoment");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingMoment);
    }
    try {
        build_matrix_M(tabulate(StateModel(FockNumber{1}), 2), 2);
        FAIL("expected UnsupportedOrder");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnsupportedOrder);
    }
}

TEST_CASE("matrix CSV export") {
    const auto m = build_matrix_M(tabulate(StateModel(FockNumber{1}), 2), 1);
    std::ostringstream os;
    m.write_csv(os);
    const auto s = os.str();
    CHECK(s.rfind("row,col,re,im\n", 0) == 0);
    CHECK(s.find("(1)|(0),(1)|(0),2,0") != std::string::npos);
}

TEST_CASE("partition validation") {
    CHECK_THROWS_AS(PartitionSpec(2, {2}), Error);
    CHECK_THROWS_AS(PartitionSpec(2, {1, 1}), Error);
    const PartitionSpec p(4, {1, 3});
    CHECK(p.a() == std::vector<std::size_t>{0, 2});
    CHECK(p.b() == std::vector<std::size_t>{1, 3});
}

}
