#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "common.hpp"
#include "dcgrid/error.hpp"
#include "dcgrid/io.hpp"
#include "dcgrid/laplacian.hpp"
#include "dcgrid/network.hpp"

using namespace dcgrid;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Numerical;
}

}  // namespace

TEST_CASE("incidence of the smallest graphs") {
    const NetworkTopology two(2, {{0, 1, 1.0, 0.0}});
    const Matrix b = build_incidence(two);
    CHECK(b.rows() == 1);
    CHECK(b(0, 0) == 1.0);
    CHECK(b(0, 1) == -1.0);

    const NetworkTopology tri(3, {{0, 1, 1.0, 0.0}, {1, 2, 1.0, 0.0}, {0, 2, 1.0, 0.0}});
    Matrix expected(3, 3);
    expected << 1, -1, 0, 0, 1, -1, 1, 0, -1;
    CHECK(build_incidence(tri) == expected);
    CHECK(build_incidence(tri).rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("incidence rejects disconnected graphs naming the components") {
    const NetworkTopology split(4, {{0, 1, 1.0, 0.0}, {2, 3, 1.0, 0.0}});
    try {
        build_incidence(split);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        CHECK(std::string(e.what()).find("{0,1}") != std::string::npos);
        CHECK(std::string(e.what()).find("{2,3}") != std::string::npos);
    }
}

TEST_CASE("laplacian examples") {
    const NetworkTopology two(2, {{0, 1, 0.1, 0.0}});
    Matrix expected(2, 2);
    expected << 10, -10, -10, 10;
    CHECK((laplacian(two) - expected).cwiseAbs().maxCoeff() < 1e-12);

    const NetworkTopology single(1, {});
    CHECK(laplacian(single).rows() == 1);
    CHECK(laplacian(single)(0, 0) == 0.0);

    CHECK(kind_of([] { laplacian(NetworkTopology(2, {{0, 1, -1.0, 0.0}})); }) == ErrorKind::Parameter);
    CHECK(kind_of([] { laplacian(NetworkTopology(2, {{0, 1, 0.0, 0.0}})); }) == ErrorKind::Parameter);
}

TEST_CASE("laplacian of the bundled scenario is a connected weighted laplacian") {
    const auto s = io::load_scenario(fixtures::scenario("paper_6node.json"));
    const Matrix lap = laplacian(s.topology);
    // Oracle: sum of conductance-weighted edge outer products.
    Matrix built = Matrix::Zero(6, 6);
    for (const auto& e : s.topology.edges()) {
        const double g = 1.0 / e.resistance;
        built(e.source, e.source) += g;
        built(e.sink, e.sink) += g;
        built(e.source, e.sink) -= g;
        built(e.sink, e.source) -= g;
    }
    CHECK((lap - built).cwiseAbs().maxCoeff() <= 1e-12 * lap.norm());
    CHECK((lap * Vector::Ones(6)).cwiseAbs().maxCoeff() <= 1e-12 * lap.norm());
    CHECK((lap - lap.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Vector cap(6);
    for (int i = 0; i < 6; ++i) cap(i) = s.converters[i].capacitance;
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(lap, cap.asDiagonal().toDenseMatrix());
    CHECK(es.eigenvalues()(0) >= -1e-10 * lap.norm());
    CHECK(es.eigenvalues()(1) > 0.0);
}

TEST_CASE("topology validation") {
    CHECK(kind_of([] { NetworkTopology(0, {}); }) == ErrorKind::Config);
    CHECK(kind_of([] { NetworkTopology(2, {{0, 2, 1.0, 0.0}}); }) == ErrorKind::Config);
    CHECK(kind_of([] { NetworkTopology(2, {{1, 1, 1.0, 0.0}}); }) == ErrorKind::Config);
    CHECK(kind_of([] { NetworkTopology(2, {{0, 1, 1.0, 0.0}, {1, 0, 1.0, 0.0}}); }) == ErrorKind::Config);
    // Orientation normalised to lower id -> higher id.
    const NetworkTopology t(2, {{1, 0, 1.0, 0.0}});
    CHECK(t.edges()[0].source == 0);
}

TEST_CASE("ZIP load current") {
    LoadModel load;
    load.nominal = {0.1, 2.0, 1000.0};
    load.actual = load.nominal;
    load.v_cutoff = 40.0;
    CHECK(load_current(load, 100.0, true) == doctest::Approx(22.0).epsilon(1e-14));
    load.nominal = ZipLoad::constant_power(0.95 * 43000.0);
    CHECK(load_current(load, 560.0, true) == doctest::Approx(40850.0 / 560.0).epsilon(1e-14));
    CHECK(load_current(load, 560.0, true) == doctest::Approx(72.946428571).epsilon(1e-9));
    load.nominal = {};
    CHECK(load_current(load, 300.0, true) == 0.0);
    load.nominal = ZipLoad::constant_power(1000.0);
    CHECK(kind_of([&] { load_current(load, 40.0, true); }) == ErrorKind::Singularity);
    CHECK(kind_of([&] { load_current(load, 10.0, true); }) == ErrorKind::Singularity);
}

TEST_CASE("ZIP monotonicity") {
    const ZipLoad passive{0.05, 3.0, 0.0};
    const ZipLoad cpl = ZipLoad::constant_power(5000.0);
    double prev_passive = -1.0, prev_cpl = 1e300;
    for (double v = 1.0; v < 900.0; v += 0.7) {
        const double a = zip_current(passive, v, 0.5);
        const double b = zip_current(cpl, v, 0.5);
        CHECK(a >= prev_passive);
        CHECK(b < prev_cpl);
        prev_passive = a;
        prev_cpl = b;
    }
}

TEST_CASE("time-scale validation") {
    std::vector<ConverterParams> conv(2, fixtures::converter());
    std::vector<LoadModel> loads(2);
    for (auto& l : loads) {
        l.nominal = ZipLoad::constant_power(30000.0);
        l.v_cutoff = 40.0;
    }
    const auto resistive = validate_timescale(conv, NetworkTopology(2, {{0, 1, 1.0, 0.0}}), loads);
    CHECK(std::isinf(resistive.ratio));
    CHECK(resistive.pass);

    // Oracle for the node minimum.
    const auto& p = conv[0];
    const double node_min = std::min({p.inductance / (p.resistance + p.k_p),
                                      4.0 * p.capacitance * 30000.0 / (p.i_max * p.i_max), (p.resistance + p.k_p) / p.k_i});
    CHECK(resistive.node_min == doctest::Approx(node_min).epsilon(1e-14));

    const auto boundary = validate_timescale(conv, NetworkTopology(2, {{0, 1, 1.0, node_min}}), loads);
    CHECK(boundary.ratio == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(boundary.pass);

    const auto s = io::load_scenario(fixtures::scenario("paper_6node.json"));
    CHECK(validate_timescale(s.converters, s.topology, s.loads).pass);
}

TEST_CASE("constraint membership") {
    const auto p = fixtures::converter();
    CHECK(within_constraints(p, 560.0, 0.0, 0.0));
    CHECK_FALSE(within_constraints(p, 200.0, 0.0, 0.0));
    CHECK_FALSE(within_constraints(p, 560.0, 90.0, 0.0));
    CHECK(within_constraints(p, 560.0, 89.35, 1.5707963267948966));
}
