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

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "netstab/channel.hpp"
#include "netstab/dynamics.hpp"

namespace netstab {

struct NoConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotStabilizableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnboundedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RiccatiSolution {
    Matrix P;
    double residual = 0.0;
    int iterations = 0;
};

struct TrajectoryRiccati {
    std::vector<Matrix> Q;  // Q0(x_n) for n = 0..horizon-1
    int horizon = 0;
    Matrix R_weight;
};

namespace detail {

inline Matrix symmetrize(const Matrix& m) {
    return 0.5 * (m + m.transpose());
}

/// (B'PB)^{-1} B'P via LDLT; raises SingularError on ill conditioning.
inline Matrix bpb_solve(const Matrix& P, const Matrix& B, const Matrix& rhs) {
    const Matrix bpb = symmetrize(B.transpose() * P * B);
    Eigen::JacobiSVD<Matrix> svd(bpb, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0.0 ||
        sv(sv.size() - 1) <= sv(0) * 1e-12)
        throw SingularError("B'PB is singular or near-singular");
    return svd.solve(rhs);
}

inline Matrix riccati_map(const Matrix& P, const Matrix& A, const Matrix& B,
                          const Matrix& R) {
    const int d = static_cast<int>(B.cols());
    const Matrix bpb = symmetrize(B.transpose() * P * B);
    const Matrix gain =
        (Matrix::Identity(d, d) + bpb).ldlt().solve(B.transpose() * P * A);
    return symmetrize(A.transpose() * P * A -
                      A.transpose() * P * B * gain + R);
}

}  // namespace detail

/// Fixed-point iteration for P = A'PA - A'PB(I+B'PB)^{-1}B'PA + R from
/// P0 = I.
inline RiccatiSolution solve_dare(const Matrix& A, const Matrix& B,
                                  const Matrix& R, double tol = 1e-12,
                                  int max_iter = 10000) {
    RiccatiSolution sol;
    Matrix P = Matrix::Identity(A.rows(), A.cols());
    for (int it = 1; it <= max_iter; ++it) {
        const Matrix Pn = detail::riccati_map(P, A, B, R);
        const double res = (Pn - P).norm();
        P = Pn;
        if (!P.allFinite() || P.norm() > 1e14)
            throw NotStabilizableError("solve_dare: iterates diverged");
        if (res < tol) {
            sol.P = P;
            sol.residual = (detail::riccati_map(P, A, B, R) - P).norm();
            sol.iterations = it;
            return sol;
        }
    }
    throw NoConvergenceError("solve_dare: no convergence within max_iter");
}

/// Optimal tangent gain dk/dx = -(mu/(sigma^2+mu^2)) (B'PB)^{-1} B'PA.
inline Matrix optimal_gain(const Matrix& P_next, const Matrix& A,
                           const Matrix& B, const ChannelModel& model) {
    const double denom = model.sigma2 + model.mu * model.mu;
    if (denom <= 0.0)
        throw std::invalid_argument("optimal_gain: mu and sigma both zero");
    const double c = model.mu / denom;
    if (c == 0.0) return Matrix::Zero(B.cols(), A.cols());
    return -c * detail::bpb_solve(P_next, B, B.transpose() * P_next * A);
}

/// Backward Riccati-like recursion along the trajectory x_{n+1} = f(x_n).
inline TrajectoryRiccati trajectory_riccati(const DiscreteSystem& sys,
                                            const Vector& x0, int horizon,
                                            const Matrix& R_weight,
                                            const Matrix& terminal,
                                            double norm_ceiling = 1e12) {
    if (horizon < 1)
        throw std::invalid_argument("trajectory_riccati: horizon >= 1");
    std::vector<Vector> traj(horizon);
    Vector x = x0;
    for (int n = 0; n < horizon; ++n) {
        if (!x.allFinite() || x.norm() > kDivergenceCap)
            throw DivergedError("trajectory_riccati: trajectory diverged");
        traj[n] = x;
        x = sys.step(x);
    }
    TrajectoryRiccati out;
    out.horizon = horizon;
    out.R_weight = R_weight;
    out.Q.resize(horizon);
    Matrix Qnext = terminal;
    for (int n = horizon - 1; n >= 0; --n) {
        const Matrix A = sys.jacobian(traj[n]);
        out.Q[n] = detail::riccati_map(Qnext, A, sys.input_matrix, R_weight);
        if (!out.Q[n].allFinite() || out.Q[n].norm() > norm_ceiling)
            throw UnboundedError("trajectory_riccati: Q exceeded norm ceiling");
        Qnext = out.Q[n];
    }
    return out;
}

struct SufficiencyResult {
    bool holds = false;
    double margin = 0.0;  // worst (largest) eigenvalue found
};

/// Theorem-6-style check: J'(P - p PB(B'PB)^{-1}B'P)J - P must be
/// negative definite at every sample state and at the origin.
inline SufficiencyResult check_sufficient(const DiscreteSystem& sys,
                                          const RiccatiSolution& P_sol,
                                          double p,
                                          const std::vector<Vector>& sample_states) {
    if (p <= 0.0 || p > 1.0)
        throw std::invalid_argument("check_sufficient: p must be in (0,1]");
    const Matrix& P = P_sol.P;
    const Matrix& B = sys.input_matrix;
    const Matrix proj = P - p * P * B * detail::bpb_solve(P, B, B.transpose() * P);

    SufficiencyResult res;
    res.margin = -std::numeric_limits<double>::infinity();
    auto eval = [&](const Vector& x) {
        const Matrix J = sys.jacobian(x);
        const Matrix M = detail::symmetrize(J.transpose() * proj * J - P);
        Eigen::SelfAdjointEigenSolver<Matrix> es(M);
        res.margin = std::max(res.margin, es.eigenvalues().maxCoeff());
    };
    eval(Vector::Zero(sys.dim));
    for (const auto& x : sample_states) eval(x);
    res.holds = res.margin < 0.0;
    return res;
}

}  // namespace netstab
