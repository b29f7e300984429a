#include "imdpsyn/dynamics.hpp"
#include "imdpsyn/random.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace imdpsyn;

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
    Eigen::MatrixXd m(2, 2);
    m << a, b, c, d;
    return m;
}

// the repaired unstable benchmark system
const Eigen::MatrixXd kBenchA = mat2(1.5, 1.0, 0.0, 1.1);
const Eigen::MatrixXd kBenchB = mat2(1.25, 0.5, 1.0, 1.0);

LinearSystem bench_system() {
    LinearSystem s;
    s.A = kBenchA;
    s.B = kBenchB;
    s.state_dim = 2;
    s.input_dim = 2;
    Eigen::VectorXd lo(2), hi(2);
    lo << -60, -60;
    hi << 60, 60;
    s.input_set = HalfspacePolytope::box(lo, hi);
    s.noise = NoiseSource::gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    return s;
}

}  // namespace

TEST_CASE("check_controllability basics") {
    CHECK(check_controllability(mat2(1, 1, 0, 1), (Eigen::MatrixXd(2, 1) << 0, 1).finished()));
    CHECK_FALSE(check_controllability(Eigen::MatrixXd::Identity(2, 2),
                                      Eigen::MatrixXd::Zero(2, 1)));
    CHECK(check_controllability(kBenchA, kBenchB));
    CHECK_THROWS_AS(check_controllability(kBenchA, Eigen::MatrixXd::Zero(3, 1)),
                    std::invalid_argument);
}

TEST_CASE("solve_dare scalar golden ratio") {
    Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
    const auto [P, K] = solve_dare(one, one, {one, one});
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    CHECK(std::abs(P(0, 0) - phi) < 1e-6);
    CHECK(std::abs(K(0, 0) - 2.0 / (1.0 + std::sqrt(5.0))) < 1e-6);
}

TEST_CASE("solve_dare one-step fixed point for A = 0") {
    Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
    const auto [P, K] = solve_dare(Eigen::MatrixXd::Zero(1, 1), one, {one, one});
    CHECK(std::abs(P(0, 0) - 1.0) < 1e-12);
    CHECK(std::abs(K(0, 0)) < 1e-12);
}

TEST_CASE("solve_dare stabilizes the benchmark system") {
    const LQRWeights w{Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)};
    const auto [P, K] = solve_dare(kBenchA, kBenchB, w);
    CHECK(spectral_radius(kBenchA) > 1.0);  // open loop unstable
    CHECK(spectral_radius(kBenchA - kBenchB * K) < 1.0);

    // Riccati residual
    const Eigen::MatrixXd BtPB = w.R + kBenchB.transpose() * P * kBenchB;
    const Eigen::MatrixXd res = w.Q + kBenchA.transpose() * P * kBenchA
                                - kBenchA.transpose() * P * kBenchB
                                      * BtPB.inverse() * kBenchB.transpose() * P * kBenchA
                                - P;
    CHECK(res.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("validate_gain") {
    Eigen::VectorXd xlo(2), xhi(2), ulo(2), uhi(2);
    xlo << -100, -100;
    xhi << 100, 100;
    ulo << -60, -60;
    uhi << 60, 60;
    const HyperRectangle X(xlo, xhi);
    const auto U = HalfspacePolytope::box(ulo, uhi);

    // zero gain is admissible whenever U contains the origin
    CHECK(validate_gain(kBenchA, kBenchB, Eigen::MatrixXd::Zero(2, 2), X, U).ok());

    // identity gain pushes the corner out of U
    const auto v = validate_gain(kBenchA, kBenchB, Eigen::MatrixXd::Identity(2, 2), X, U);
    CHECK_FALSE(v.ok());
    CHECK(v.message.find("vertex") != std::string::npos);

    // benchmark LQR gain over the benchmark domain
    const auto K = solve_dare(kBenchA, kBenchB,
                              {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)})
                       .second;
    Eigen::VectorXd blo(2), bhi(2);
    blo << -41, -41;
    bhi << 41, 41;
    CHECK(validate_gain(kBenchA, kBenchB, K, HyperRectangle(blo, bhi), U).ok());
}

TEST_CASE("group_dynamics products and identity") {
    LinearSystem s;
    s.A = mat2(1, 1, 0, 1);
    s.B = (Eigen::MatrixXd(2, 1) << 0, 1).finished();
    s.state_dim = 2;
    s.input_dim = 1;
    Eigen::VectorXd lo(1), hi(1);
    lo << -1;
    hi << 1;
    s.input_set = HalfspacePolytope::box(lo, hi);
    s.noise = NoiseSource::gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));

    const LinearSystem same = group_dynamics(s, 1);
    CHECK(same.A == s.A);
    CHECK(same.B == s.B);

    const LinearSystem g = group_dynamics(s, 2);
    CHECK(g.A == mat2(1, 2, 0, 1));
    CHECK(g.B == mat2(1, 0, 1, 1));
    CHECK(g.input_dim == 2);
    CHECK(g.input_set.rows() == 4);

    CHECK_THROWS_AS(group_dynamics(s, 3), std::invalid_argument);
}

TEST_CASE("group_dynamics is semantically equivalent to stepping the base system") {
    LinearSystem s;
    s.A = mat2(1, 1, 0, 1);
    s.B = (Eigen::MatrixXd(2, 1) << 0.3, 1).finished();
    s.state_dim = 2;
    s.input_dim = 1;
    Eigen::VectorXd lo(1), hi(1);
    lo << -1;
    hi << 1;
    s.input_set = HalfspacePolytope::box(lo, hi);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(2, 2) * 0.25;
    s.noise = NoiseSource::gaussian(Eigen::VectorXd::Zero(2), cov);

    const int m = 2;
    const LinearSystem g = group_dynamics(s, m);
    const RandomStream st(99, 5);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::uint64_t base = static_cast<std::uint64_t>(trial) * 100;
        Eigen::VectorXd x(2);
        x << st.normal(base + 90), st.normal(base + 91);
        Eigen::VectorXd u(2);
        u << st.normal(base + 92), st.normal(base + 93);

        // grouped step with grouped noise draw `trial`
        const Eigen::VectorXd lumped = g.noise.sample(st, trial);
        const Eigen::VectorXd x_grouped = g.A * x + g.B * u + lumped;

        // m base steps with the base draws the grouped source consumed
        Eigen::VectorXd x_base = x;
        for (int j = 0; j < m; ++j) {
            const Eigen::VectorXd eta =
                s.noise.sample(st, static_cast<std::uint64_t>(trial) * m + j);
            x_base = s.A * x_base + s.B * u.segment(j, 1) + eta;
        }
        CHECK((x_grouped - x_base).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("make_stabilized") {
    const LinearSystem s = bench_system();
    Eigen::VectorXd blo(2), bhi(2);
    blo << -41, -41;
    bhi << 41, 41;
    const HyperRectangle X(blo, bhi);

    // zero gain degenerates to the open loop
    const auto zero = make_stabilized(s, Eigen::MatrixXd::Zero(2, 2),
                                      HalfspacePolytope::unconstrained(2), X);
    CHECK(zero.A_cl == s.A);

    const auto K = solve_dare(s.A, s.B, {Eigen::MatrixXd::Identity(2, 2),
                                         Eigen::MatrixXd::Identity(2, 2)})
                       .second;
    Eigen::VectorXd plo(2), phi_(2);
    plo << -20, -20;
    phi_ << 20, 20;
    const auto ss = make_stabilized(s, K, HalfspacePolytope::box(plo, phi_), X);
    CHECK(spectral_radius(ss.A_cl) < 1.0);

    // closed-loop identity A_cl x + B u' == A x + B(-K x + u')
    const RandomStream st(5, 1);
    for (int i = 0; i < 1000; ++i) {
        Eigen::VectorXd x(2), up(2);
        x << st.normal(4 * i), st.normal(4 * i + 1);
        up << st.normal(4 * i + 2), st.normal(4 * i + 3);
        const Eigen::VectorXd lhs = ss.A_cl * x + s.B * up;
        const Eigen::VectorXd rhs = s.A * x + s.B * (-K * x + up);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
    }

    // abstract input set must contain the origin
    Eigen::VectorXd qlo(2), qhi(2);
    qlo << 1, 1;
    qhi << 2, 2;
    CHECK_THROWS_AS(make_stabilized(s, K, HalfspacePolytope::box(qlo, qhi), X),
                    std::invalid_argument);

    // scalar arithmetic: A=2, B=1, K=1.5 -> A_cl = 0.5
    LinearSystem sc;
    sc.A = Eigen::MatrixXd::Constant(1, 1, 2.0);
    sc.B = Eigen::MatrixXd::Ones(1, 1);
    sc.state_dim = sc.input_dim = 1;
    Eigen::VectorXd l1(1), h1(1);
    l1 << -6;
    h1 << 6;
    sc.input_set = HalfspacePolytope::box(l1, h1);
    sc.noise = NoiseSource::gaussian(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
    Eigen::VectorXd xl(1), xh(1);
    xl << -2;
    xh << 2;
    const auto scs = make_stabilized(sc, Eigen::MatrixXd::Constant(1, 1, 1.5),
                                     HalfspacePolytope::box((Eigen::VectorXd(1) << -1).finished(),
                                                            (Eigen::VectorXd(1) << 1).finished()),
                                     HyperRectangle(xl, xh));
    CHECK(std::abs(scs.A_cl(0, 0) - 0.5) < 1e-15);
}
