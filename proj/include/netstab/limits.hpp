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

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "netstab/dynamics.hpp"
#include "netstab/lyapunov.hpp"

namespace netstab {

struct NoUnstableDirectionsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Dominant { Local, Global };
enum class InputRegime { FewInputs, FullInputs };

/// Critical non-erasure probabilities: p*_eig from the origin eigenvalues,
/// p*_lya from the positive Lyapunov exponents, p* their max.
struct QosReport {
    double p_star_eig = 0.0;
    double p_star_lya = 0.0;
    double p_star = 0.0;
    Dominant dominant = Dominant::Local;
    int d = 1;
    InputRegime regime = InputRegime::FewInputs;
    double inputs_product_eig = 0.0;  // product of squared unstable moduli
    double inputs_product_lya = 0.0;  // product of squared multipliers, exp > 0
};

namespace detail {

// moduli strictly above 1 + 1e-9 count as unstable
inline constexpr double kUnstableFloor = 1.0 + 1e-9;

inline std::vector<double> origin_moduli(const Matrix& origin_jacobian) {
    Eigen::EigenSolver<Matrix> es(origin_jacobian);
    std::vector<double> moduli;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        moduli.push_back(std::abs(es.eigenvalues()(i)));
    std::sort(moduli.begin(), moduli.end(), std::greater<>());
    return moduli;
}

inline double unstable_squared_product(const std::vector<double>& moduli) {
    double prod = 1.0;
    bool any = false;
    for (double m : moduli)
        if (m > kUnstableFloor) {
            prod *= m * m;
            any = true;
        }
    if (!any) return 0.0;
    return prod;
}

}  // namespace detail

/// Theorem-4 predicate. FewInputs: (1-rho)^d prod |lambda_k|^2 < 1;
/// FullInputs (d == N): (1-rho) |lambda_max|^2 < 1. Strict inequality.
inline bool linear_necessary(const std::vector<double>& eig_moduli, int d,
                             int N, double rho) {
    if (d < 1 || d > N)
        throw std::invalid_argument("linear_necessary: need 1 <= d <= N");
    if (rho < 0.0 || rho > 1.0)
        throw std::invalid_argument("linear_necessary: rho in [0,1]");
    for (double m : eig_moduli)
        if (m <= 1.0)
            throw std::invalid_argument(
                "linear_necessary: all moduli must exceed 1");
    const double bar_rho = 1.0 - rho;
    if (d == N) {
        const double lmax = *std::max_element(eig_moduli.begin(), eig_moduli.end());
        return bar_rho * lmax * lmax < 1.0;
    }
    double prod = 1.0;
    for (double m : eig_moduli) prod *= m * m;
    return std::pow(bar_rho, d) * prod < 1.0;
}

/// Smallest rho satisfying the Theorem-4 condition:
/// 1 - (prod lambda^2)^(-1/d) for d < N, 1 - 1/lambda_max^2 for d = N.
inline double critical_rho_linear(const std::vector<double>& eig_moduli, int d,
                                  int N) {
    if (d < 1 || d > N)
        throw std::invalid_argument("critical_rho_linear: need 1 <= d <= N");
    for (double m : eig_moduli)
        if (m <= 1.0)
            throw std::invalid_argument(
                "critical_rho_linear: all moduli must exceed 1");
    if (d == N) {
        const double lmax = *std::max_element(eig_moduli.begin(), eig_moduli.end());
        return 1.0 - 1.0 / (lmax * lmax);
    }
    double prod = 1.0;
    for (double m : eig_moduli) prod *= m * m;
    return 1.0 - std::pow(prod, -1.0 / double(d));
}

struct NecessaryVerdict {
    bool eig_side = false;  // (1-rho)^d prod |lambda_0|^2 < 1
    bool lya_side = false;  // (1-rho)^d prod (lambda_exp)^2 < 1
    bool both() const { return eig_side && lya_side; }
};

/// Theorem-5 predicate, evaluated separately on the eigenvalue and
/// Lyapunov-exponent sides. Products run over unstable moduli and
/// positive exponents only.
inline NecessaryVerdict nonlinear_necessary(const LyapunovSpectrum& spectrum,
                                            const Matrix& origin_jacobian,
                                            int d, double rho) {
    const int N = static_cast<int>(origin_jacobian.rows());
    if (d < 1 || d > N)
        throw std::invalid_argument("nonlinear_necessary: need 1 <= d <= N");
    const auto moduli = detail::origin_moduli(origin_jacobian);

    double eig_prod = 1.0;
    bool any_eig = false;
    if (d == N) {
        if (moduli.front() > detail::kUnstableFloor) {
            eig_prod = moduli.front() * moduli.front();
            any_eig = true;
        }
    } else {
        eig_prod = detail::unstable_squared_product(moduli);
        any_eig = eig_prod > 0.0;
    }

    double lya_prod = 1.0;
    bool any_lya = false;
    if (d == N) {
        if (spectrum.exponents.front() > 0.0) {
            lya_prod = std::exp(2.0 * spectrum.exponents.front());
            any_lya = true;
        }
    } else {
        double prod = 1.0;
        for (double e : spectrum.exponents)
            if (e > 0.0) {
                prod *= std::exp(2.0 * e);
                any_lya = true;
            }
        lya_prod = prod;
    }

    if (!any_eig && !any_lya)
        throw NoUnstableDirectionsError(
            "nonlinear_necessary: no unstable eigenvalue and no positive exponent");

    const double bar = std::pow(1.0 - rho, d);
    NecessaryVerdict v;
    v.eig_side = !any_eig || bar * eig_prod < 1.0;
    v.lya_side = !any_lya || bar * lya_prod < 1.0;
    return v;
}

/// Full QoS report: p*_eig = 1 - (prod |lambda_0|^2)^(-1/d),
/// p*_lya = 1 - (prod_{exp>0} (lambda_exp)^2)^(-1/d), p* = max.
inline QosReport qos_report(const Matrix& origin_jacobian, int d,
                            const LyapunovSpectrum& spectrum) {
    const int N = static_cast<int>(origin_jacobian.rows());
    if (d < 1 || d > N)
        throw std::invalid_argument("qos_report: need 1 <= d <= N");
    const auto moduli = detail::origin_moduli(origin_jacobian);

    QosReport rep;
    rep.d = d;
    rep.regime = d == N ? InputRegime::FullInputs : InputRegime::FewInputs;

    double eig_prod, lya_prod;
    if (d == N) {
        eig_prod = moduli.front() > detail::kUnstableFloor
                       ? moduli.front() * moduli.front()
                       : 0.0;
        lya_prod = spectrum.exponents.front() > 0.0
                       ? std::exp(2.0 * spectrum.exponents.front())
                       : 0.0;
    } else {
        eig_prod = detail::unstable_squared_product(moduli);
        double prod = 1.0;
        bool any = false;
        for (double e : spectrum.exponents)
            if (e > 0.0) {
                prod *= std::exp(2.0 * e);
                any = true;
            }
        lya_prod = any ? prod : 0.0;
    }

    if (eig_prod == 0.0 && lya_prod == 0.0)
        throw NoUnstableDirectionsError(
            "qos_report: no unstable eigenvalue and no positive exponent");

    rep.inputs_product_eig = eig_prod;
    rep.inputs_product_lya = lya_prod;
    const double exp_d = d == N ? 1.0 : double(d);
    rep.p_star_eig =
        eig_prod > 1.0 ? 1.0 - std::pow(eig_prod, -1.0 / exp_d) : 0.0;
    rep.p_star_lya =
        lya_prod > 1.0 ? 1.0 - std::pow(lya_prod, -1.0 / exp_d) : 0.0;
    rep.p_star = std::max(rep.p_star_eig, rep.p_star_lya);
    rep.dominant =
        rep.p_star_eig >= rep.p_star_lya ? Dominant::Local : Dominant::Global;
    return rep;
}

inline QosReport qos_report(const DiscreteSystem& sys,
                            const LyapunovSpectrum& spectrum) {
    return qos_report(sys.jacobian(Vector::Zero(sys.dim)), sys.input_dim,
                      spectrum);
}

}  // namespace netstab
