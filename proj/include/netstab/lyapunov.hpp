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
#include <stdexcept>
#include <vector>

#include "netstab/channel.hpp"
#include "netstab/dynamics.hpp"

namespace netstab {

struct DegenerateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Sorted (descending) Lyapunov exponent estimates with convergence
/// diagnostics. multipliers[i] = exp(exponents[i]).
struct LyapunovSpectrum {
    std::vector<double> exponents;
    std::vector<double> multipliers;
    long n_steps = 0;
    long burn_in = 0;
    // max absolute change of each running exponent over the last 10% of steps
    double tail_variation = 0.0;
    // running exponents sampled along the way: history[k] = (step, exponents)
    std::vector<std::pair<long, std::vector<double>>> history;

    double top() const { return exponents.front(); }
    double sum() const {
        double s = 0.0;
        for (double e : exponents) s += e;
        return s;
    }
};

/// Full-spectrum estimator: propagate an orthonormal frame through the
/// Jacobians, QR-refactorize every reorth_every steps, and average the
/// logs of the R diagonal.
inline LyapunovSpectrum estimate_spectrum(const DiscreteSystem& sys,
                                          const Vector& x0, long n_steps,
                                          long burn_in = 1000,
                                          long reorth_every = 1) {
    if (n_steps <= 0 || burn_in < 0 || reorth_every < 1)
        throw std::invalid_argument("estimate_spectrum: bad step counts");
    const int n = sys.dim;
    Vector x = x0;
    for (long i = 0; i < burn_in; ++i) {
        x = sys.step(x);
        if (!x.allFinite() || x.norm() > kDivergenceCap)
            throw DivergedError("estimate_spectrum: trajectory diverged in burn-in");
    }

    Matrix frame = Matrix::Identity(n, n);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    LyapunovSpectrum out;
    out.n_steps = n_steps;
    out.burn_in = burn_in;
    const long record_every = std::max<long>(1, n_steps / 1000);

    for (long k = 0; k < n_steps; ++k) {
        frame = sys.jacobian(x) * frame;
        if ((k + 1) % reorth_every == 0 || k + 1 == n_steps) {
            Eigen::HouseholderQR<Matrix> qr(frame);
            Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
            Matrix q = qr.householderQ();
            for (int i = 0; i < n; ++i) {
                const double d = std::abs(r(i, i));
                if (d == 0.0)
                    throw DegenerateError(
                        "estimate_spectrum: non-invertible Jacobian encountered");
                acc(i) += std::log(d);
            }
            frame = q;
        }
        x = sys.step(x);
        if (!x.allFinite() || x.norm() > kDivergenceCap)
            throw DivergedError("estimate_spectrum: trajectory diverged");
        if ((k + 1) % record_every == 0 || k + 1 == n_steps) {
            std::vector<double> running(n);
            for (int i = 0; i < n; ++i) running[i] = acc(i) / double(k + 1);
            std::sort(running.begin(), running.end(), std::greater<>());
            out.history.emplace_back(k + 1, running);
        }
    }

    out.exponents.resize(n);
    for (int i = 0; i < n; ++i) out.exponents[i] = acc(i) / double(n_steps);
    std::sort(out.exponents.begin(), out.exponents.end(), std::greater<>());
    out.multipliers.resize(n);
    for (int i = 0; i < n; ++i) out.multipliers[i] = std::exp(out.exponents[i]);

    // tail variation over the last 10% of the recorded history
    const std::size_t tail_start = out.history.size() - out.history.size() / 10;
    double tv = 0.0;
    for (std::size_t k = std::max<std::size_t>(tail_start, 1);
         k < out.history.size(); ++k)
        for (int i = 0; i < n; ++i)
            tv = std::max(tv, std::abs(out.history[k].second[i] -
                                       out.history[k - 1].second[i]));
    out.tail_variation = tv;
    return out;
}

/// Maximum-exponent estimator: norm growth of a single tangent vector
/// with periodic renormalization (the induced-2-norm limit).
inline double estimate_max_exponent(const DiscreteSystem& sys, const Vector& x0,
                                    long n_steps, long burn_in = 1000) {
    if (n_steps <= 0 || burn_in < 0)
        throw std::invalid_argument("estimate_max_exponent: bad step counts");
    Vector x = x0;
    for (long i = 0; i < burn_in; ++i) x = sys.step(x);
    Vector v = Vector::Ones(sys.dim).normalized();
    double acc = 0.0;
    for (long k = 0; k < n_steps; ++k) {
        v = sys.jacobian(x) * v;
        const double nv = v.norm();
        if (nv == 0.0)
            throw DegenerateError("estimate_max_exponent: tangent collapsed");
        acc += std::log(nv);
        v /= nv;
        x = sys.step(x);
        if (!x.allFinite() || x.norm() > kDivergenceCap)
            throw DivergedError("estimate_max_exponent: trajectory diverged");
    }
    return acc / double(n_steps);
}

/// Exponent-sum estimator via log|det| averaging.
inline double sum_exponents_via_det(const DiscreteSystem& sys, const Vector& x0,
                                    long n_steps, long burn_in = 1000) {
    if (n_steps <= 0 || burn_in < 0)
        throw std::invalid_argument("sum_exponents_via_det: bad step counts");
    Vector x = x0;
    for (long i = 0; i < burn_in; ++i) x = sys.step(x);
    double acc = 0.0;
    for (long k = 0; k < n_steps; ++k) {
        const double d = sys.jacobian(x).determinant();
        if (d == 0.0)
            throw DegenerateError("sum_exponents_via_det: zero determinant");
        acc += std::log(std::abs(d));
        x = sys.step(x);
        if (!x.allFinite() || x.norm() > kDivergenceCap)
            throw DivergedError("sum_exponents_via_det: trajectory diverged");
    }
    return acc / double(n_steps);
}

/// Land on the attractor: iterate from a random point in ||z|| <= 5 before
/// measuring. Points outside the basin are resampled.
inline Vector attractor_point(const DiscreteSystem& sys, SeededStream& stream,
                              long warmup = 1000, int max_attempts = 100) {
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Vector x(sys.dim);
        for (int i = 0; i < sys.dim; ++i)
            x(i) = 5.0 * (2.0 * stream.next_uniform() - 1.0);
        bool ok = true;
        for (long i = 0; i < warmup; ++i) {
            x = sys.step(x);
            if (!x.allFinite() || x.norm() > kDivergenceCap) {
                ok = false;
                break;
            }
        }
        if (ok) return x;
    }
    throw DivergedError("attractor_point: no bounded orbit found");
}

}  // namespace netstab
