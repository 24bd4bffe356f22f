#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "netstab/dynamics.hpp"
#include "netstab/lyapunov.hpp"

using namespace netstab;
using Catch::Approx;

namespace {

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

DiscreteSystem sat_lorentz(double alpha, double beta) {
    LorentzParams p;
    p.alpha = alpha;
    p.beta = beta;
    return saturated_lorentz_system(p);
}

}  // namespace

TEST_CASE("diagonal LTI spectrum is the log-moduli of the eigenvalues") {
    Matrix A(2, 2);
    A << 2, 0, 0, 0.5;
    const DiscreteSystem sys = linear_system(A, Matrix::Identity(2, 2));
    const LyapunovSpectrum s = estimate_spectrum(sys, vec2(0, 0), 1000, 0);
    REQUIRE(s.exponents[0] == Approx(std::log(2.0)).margin(1e-10));
    REQUIRE(s.exponents[1] == Approx(-std::log(2.0)).margin(1e-10));
    REQUIRE(s.multipliers[0] == Approx(std::exp(s.exponents[0])).margin(1e-15));
    REQUIRE(s.multipliers[1] == Approx(std::exp(s.exponents[1])).margin(1e-15));
    REQUIRE(s.tail_variation < 1e-12);
}

TEST_CASE("LTI oracle: spectrum matches sorted eigenvalue log-moduli") {
    SeededStream stream(31337, 0, SeededStream::InitTag);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 2 + trial % 3;  // N in {2, 3, 4}
        Matrix A(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                A(i, j) = 2.0 * stream.next_uniform() - 1.0;
        A += 1.5 * Matrix::Identity(n, n);  // push away from singularity
        const DiscreteSystem sys = linear_system(A, Matrix::Identity(n, n));
        // the frame transient decays like 1/n, so the 1e-6 margin needs a
        // long run even though each step is cheap
        const LyapunovSpectrum s =
            estimate_spectrum(sys, Vector::Zero(n), 500000, 0);

        Eigen::EigenSolver<Matrix> es(A);
        std::vector<double> want;
        for (int i = 0; i < n; ++i)
            want.push_back(std::log(std::abs(es.eigenvalues()(i))));
        std::sort(want.begin(), want.end(), std::greater<>());
        for (int i = 0; i < n; ++i)
            REQUIRE(s.exponents[i] == Approx(want[i]).margin(1e-6));
    }
}

TEST_CASE("top exponent of the chaotic map, both parameter sets") {
    SeededStream stream(1001, 0, SeededStream::InitTag);

    const DiscreteSystem a = sat_lorentz(1.25, 0.75);
    const Vector x0a = attractor_point(a, stream);
    const LyapunovSpectrum sa = estimate_spectrum(a, x0a, 100000);
    REQUIRE(sa.top() == Approx(0.34).margin(0.05));

    const DiscreteSystem b = sat_lorentz(2.25, 0.29);
    const Vector x0b = attractor_point(b, stream);
    const LyapunovSpectrum sb = estimate_spectrum(b, x0b, 100000);
    REQUIRE(sb.multipliers[0] == Approx(1.13).margin(0.05));
}

TEST_CASE("norm-growth estimator agrees with the QR top exponent") {
    Matrix A(2, 2);
    A << 2, 0, 0, 0.5;
    const DiscreteSystem lti = linear_system(A, Matrix::Identity(2, 2));
    REQUIRE(estimate_max_exponent(lti, vec2(0, 0), 2000000, 0) ==
            Approx(std::log(2.0)).margin(1e-6));

    SeededStream stream(1002, 0, SeededStream::InitTag);
    for (auto [alpha, beta] : {std::pair{1.25, 0.75}, std::pair{2.25, 0.29}}) {
        const DiscreteSystem sys = sat_lorentz(alpha, beta);
        const Vector x0 = attractor_point(sys, stream);
        const double top = estimate_spectrum(sys, x0, 100000).top();
        const double growth = estimate_max_exponent(sys, x0, 100000);
        REQUIRE(growth == Approx(top).margin(0.01));
    }
}

TEST_CASE("an isometry has zero top exponent") {
    const double th = 0.7;
    Matrix R(2, 2);
    R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    const DiscreteSystem sys = linear_system(R, Matrix::Identity(2, 2));
    REQUIRE(estimate_max_exponent(sys, vec2(1, 0), 1000, 0) ==
            Approx(0.0).margin(1e-10));
}

TEST_CASE("determinant average equals log|det A| for LTI") {
    Matrix A(2, 2);
    A << 1.2, 0.3, -0.1, 0.9;
    const DiscreteSystem sys = linear_system(A, Matrix::Identity(2, 2));
    REQUIRE(sum_exponents_via_det(sys, vec2(0, 0), 500, 0) ==
            Approx(std::log(std::abs(A.determinant()))).margin(1e-12));
}

TEST_CASE("exponent sum equals the determinant average") {
    SeededStream stream(1003, 0, SeededStream::InitTag);
    for (auto [alpha, beta] : {std::pair{1.25, 0.75}, std::pair{2.25, 0.29}}) {
        const DiscreteSystem sys = sat_lorentz(alpha, beta);
        const Vector x0 = attractor_point(sys, stream);
        const LyapunovSpectrum s = estimate_spectrum(sys, x0, 100000);
        const double det_avg = sum_exponents_via_det(sys, x0, 100000);
        REQUIRE(std::abs(s.sum() - det_avg) <= 0.02);
    }
}

TEST_CASE("fixed-point orbit determinant is the origin determinant") {
    LorentzParams p;
    p.alpha = 1.25;
    p.beta = 0.75;
    const DiscreteSystem sys = lorentz_system(p);
    // x0 = 0 stays at the fixed point, so the average is a constant
    REQUIRE(sum_exponents_via_det(sys, vec2(0, 0), 1000, 0) ==
            Approx(std::log(1.65625)).margin(1e-12));
}

TEST_CASE("QR refactorization returns an orthonormal frame") {
    LorentzParams p;
    p.alpha = 1.25;
    p.beta = 0.75;
    const DiscreteSystem sys = saturated_lorentz_system(p);
    Vector x = vec2(0.3, -0.2);
    Matrix frame = Matrix::Identity(2, 2);
    for (int k = 0; k < 200; ++k) {
        frame = sys.jacobian(x) * frame;
        Eigen::HouseholderQR<Matrix> qr(frame);
        frame = qr.householderQ();
        REQUIRE((frame.transpose() * frame - Matrix::Identity(2, 2)).norm() <
                1e-12);
        x = sys.step(x);
    }
}

TEST_CASE("top exponent is robust to the initial condition") {
    for (auto [alpha, beta] : {std::pair{1.25, 0.75}, std::pair{2.25, 0.29}}) {
        const DiscreteSystem sys = sat_lorentz(alpha, beta);
        std::vector<double> tops;
        for (int i = 0; i < 10; ++i) {
            SeededStream stream(555, i, SeededStream::InitTag);
            const Vector x0 = attractor_point(sys, stream);
            tops.push_back(estimate_max_exponent(sys, x0, 100000));
        }
        const auto [lo, hi] = std::minmax_element(tops.begin(), tops.end());
        REQUIRE(*hi - *lo < 0.02);
    }
}

TEST_CASE("diverging trajectories and singular Jacobians are reported") {
    LorentzParams p;
    p.alpha = 1.25;
    p.beta = 0.75;
    const DiscreteSystem plain = lorentz_system(p);  // unsaturated blows up
    REQUIRE_THROWS_AS(estimate_spectrum(plain, vec2(500, 500), 100),
                      DivergedError);

    Matrix A(2, 2);
    A << 1, 0, 0, 0;  // rank deficient
    DiscreteSystem sys;
    sys.dim = 2;
    sys.input_dim = 2;
    sys.input_matrix = Matrix::Identity(2, 2);
    sys.step = [A](const Vector& x) -> Vector { return A * x; };
    sys.jacobian = [A](const Vector&) { return A; };
    REQUIRE_THROWS_AS(estimate_spectrum(sys, vec2(1, 1), 100, 0),
                      DegenerateError);
    REQUIRE_THROWS_AS(sum_exponents_via_det(sys, vec2(1, 1), 100, 0),
                      DegenerateError);
    REQUIRE_THROWS_AS(estimate_spectrum(sys, vec2(1, 1), 0, 0),
                      std::invalid_argument);
}
