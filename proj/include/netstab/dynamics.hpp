/*
 Copyright 2026 netstab contributors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace netstab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Any trajectory whose norm exceeds this cap is flagged diverged and frozen.
inline constexpr double kDivergenceCap = 1e9;

struct DivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Discrete-time map x_{n+1} = f(x_n) + B v_n with an analytic Jacobian.
struct DiscreteSystem {
    int dim = 0;
    int input_dim = 0;
    std::function<Vector(const Vector&)> step;
    std::function<Matrix(const Vector&)> jacobian;
    Matrix input_matrix;  // B, with B'B > 0
};

/// Parameters of the discrete Lorentz map and its tanh saturation.
struct LorentzParams {
    double alpha = 1.25;
    double beta = 0.75;
    double k_sat = 100.0;
    double L_sat = 50.0;
    double M_sat = 100.0;
};

/// One step of the unsaturated Lorentz map plus input v on the first
/// coordinate and additive noise gamma.
inline Vector lorentz_step(const Vector& z, const LorentzParams& p, double v,
                           const Vector& gamma) {
    const double x = z(0), y = z(1);
    const double sa = std::sqrt(p.alpha);
    Vector out(2);
    out(0) = (1.0 + p.alpha * p.beta) * (x + sa) -
             p.beta * (x + sa) * (y + p.alpha) - sa + v + gamma(0);
    out(1) = (1.0 - p.beta) * (y + p.alpha) + p.beta * (x + sa) * (x + sa) -
             p.alpha + gamma(1);
    return out;
}

inline Matrix lorentz_jacobian(const Vector& z, const LorentzParams& p) {
    const double x = z(0), y = z(1);
    const double sa = std::sqrt(p.alpha);
    Matrix j(2, 2);
    j(0, 0) = (1.0 + p.alpha * p.beta) - p.beta * (y + p.alpha);
    j(0, 1) = -p.beta * (x + sa);
    j(1, 0) = 2.0 * p.beta * (x + sa);
    j(1, 1) = 1.0 - p.beta;
    return j;
}

namespace detail {

// Saturation blends: G1 is ~1 inside ||z|| <= M and ~0 outside; G2*z is
// ~0 inside and ~2Lz far outside (the printed formula carries 1+tanh).
inline double sat_g1(double s, const LorentzParams& p) {
    return 0.5 * (1.0 + std::tanh(p.k_sat * (p.M_sat - s)));
}
inline double sat_g2(double s, const LorentzParams& p) {
    return p.L_sat * (1.0 + std::tanh(p.k_sat * (s - p.M_sat)));
}
inline double sech2(double t) {
    // guard against overflow of cosh for |t| large; sech^2 underflows to 0
    if (std::abs(t) > 350.0) return 0.0;
    const double c = std::cosh(t);
    return 1.0 / (c * c);
}

}  // namespace detail

/// Eq-(10)-style saturated Lorentz map: F(z) = Ftilde(z) G1(z) + G2(z) z,
/// plus B v + gamma. Agrees with lorentz_step to 1e-8 inside the attractor
/// region and has a uniformly bounded Jacobian.
inline Vector saturated_lorentz_step(const Vector& z, const LorentzParams& p,
                                     double v, const Vector& gamma) {
    const double s = z.norm();
    Vector zero = Vector::Zero(2);
    const Vector f = lorentz_step(z, p, 0.0, zero);
    Vector out = f * detail::sat_g1(s, p) + detail::sat_g2(s, p) * z;
    out(0) += v + gamma(0);
    out(1) += gamma(1);
    return out;
}

inline Matrix saturated_lorentz_jacobian(const Vector& z,
                                         const LorentzParams& p) {
    const double s = z.norm();
    const double g1 = detail::sat_g1(s, p);
    const double g2 = detail::sat_g2(s, p);
    Matrix j = g1 * lorentz_jacobian(z, p) + g2 * Matrix::Identity(2, 2);
    if (s > 0.0) {
        const double dg1 = -0.5 * p.k_sat * detail::sech2(p.k_sat * (p.M_sat - s));
        const double dg2 = p.L_sat * p.k_sat * detail::sech2(p.k_sat * (s - p.M_sat));
        const Vector grad_s = z / s;
        Vector zero = Vector::Zero(2);
        const Vector f = lorentz_step(z, p, 0.0, zero);
        j += dg1 * f * grad_s.transpose() + dg2 * z * grad_s.transpose();
    }
    return j;
}

inline DiscreteSystem lorentz_system(const LorentzParams& p) {
    DiscreteSystem sys;
    sys.dim = 2;
    sys.input_dim = 1;
    sys.input_matrix = (Matrix(2, 1) << 1.0, 0.0).finished();
    sys.step = [p](const Vector& z) {
        return lorentz_step(z, p, 0.0, Vector::Zero(2));
    };
    sys.jacobian = [p](const Vector& z) { return lorentz_jacobian(z, p); };
    return sys;
}

inline DiscreteSystem saturated_lorentz_system(const LorentzParams& p) {
    DiscreteSystem sys;
    sys.dim = 2;
    sys.input_dim = 1;
    sys.input_matrix = (Matrix(2, 1) << 1.0, 0.0).finished();
    sys.step = [p](const Vector& z) {
        return saturated_lorentz_step(z, p, 0.0, Vector::Zero(2));
    };
    sys.jacobian = [p](const Vector& z) {
        return saturated_lorentz_jacobian(z, p);
    };
    return sys;
}

/// LTI system f(x) = Ax with constant Jacobian.
inline DiscreteSystem linear_system(const Matrix& A, const Matrix& B) {
    if (A.rows() != A.cols())
        throw std::invalid_argument("linear_system: A must be square");
    if (B.rows() != A.rows())
        throw std::invalid_argument("linear_system: B rows must match A");
    Eigen::JacobiSVD<Matrix> svd(B);
    if (svd.singularValues().minCoeff() <= 0.0)
        throw std::invalid_argument("linear_system: B'B must be positive definite");
    DiscreteSystem sys;
    sys.dim = static_cast<int>(A.rows());
    sys.input_dim = static_cast<int>(B.cols());
    sys.input_matrix = B;
    sys.step = [A](const Vector& x) -> Vector { return A * x; };
    sys.jacobian = [A](const Vector&) { return A; };
    return sys;
}

/// Central-difference Jacobian, the oracle the analytic Jacobians are
/// validated against.
inline Matrix jacobian_fd(const DiscreteSystem& sys, const Vector& x,
                          double h = 1e-6) {
    if (h <= 0.0) throw std::invalid_argument("jacobian_fd: h must be positive");
    Matrix j(sys.dim, sys.dim);
    for (int i = 0; i < sys.dim; ++i) {
        Vector xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        j.col(i) = (sys.step(xp) - sys.step(xm)) / (2.0 * h);
    }
    return j;
}

/// Controllability Gramian of the linearization along the uncontrolled
/// trajectory from x0: sum_{l=0}^{k} Phi(x_k,x_l) BB' Phi'(x_k,x_l).
inline Matrix controllability_gramian(const DiscreteSystem& sys,
                                      const Vector& x0, int k) {
    if (k < 0) throw std::invalid_argument("controllability_gramian: k >= 0");
    const Matrix bbt = sys.input_matrix * sys.input_matrix.transpose();
    // Phi(x_k, x_l) is the transition matrix J(x_{k-1})...J(x_l) of the
    // linearization along the uncontrolled trajectory, Phi(x_k, x_k) = I.
    Matrix gram = bbt;  // l = k term
    Vector x = x0;
    std::vector<Matrix> phis;  // phis[l] = Phi(x_{n+1}, x_l) after step n
    for (int n = 0; n < k; ++n) {
        if (!x.allFinite() || x.norm() > kDivergenceCap)
            throw DivergedError("controllability_gramian: trajectory diverged");
        const Matrix j = sys.jacobian(x);
        for (auto& phi : phis) phi = j * phi;
        phis.push_back(j);
        x = sys.step(x);
    }
    for (const auto& phi : phis) gram += phi * bbt * phi.transpose();
    return gram;
}

}  // namespace netstab
