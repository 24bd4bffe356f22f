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
#include <cstdint>
#include <thread>
#include <vector>

#include "netstab/channel.hpp"
#include "netstab/dynamics.hpp"

namespace netstab {

/// Feedback law applied at the transmitter side of the channel.
struct Controller {
    enum class Kind { None, CancelNonlinearity, LinearGain };
    Kind kind = Kind::CancelNonlinearity;
    Matrix K;  // d x N, for LinearGain
};

/// A system the experiment runner can instantiate by name.
struct SystemSpec {
    enum class Kind { Lorentz, SaturatedLorentz, Linear };
    Kind kind = Kind::SaturatedLorentz;
    LorentzParams params;
    Matrix A, B;  // for Linear

    DiscreteSystem make() const {
        switch (kind) {
            case Kind::Lorentz: return lorentz_system(params);
            case Kind::SaturatedLorentz: return saturated_lorentz_system(params);
            case Kind::Linear: return linear_system(A, B);
        }
        return saturated_lorentz_system(params);
    }
};

struct ExperimentConfig {
    SystemSpec master;
    SystemSpec slave;
    ChannelModel channel = ChannelModel::bernoulli(0.9);
    NoiseModel noise{0.1};
    long n_steps = 300;
    int n_realizations = 3000;
    std::uint64_t master_seed = 12345;
    Controller controller;
    double init_radius = 2.0;  // x0, y0 uniform in ||z|| <= init_radius
    long master_warmup = 500;
    int threads = 0;  // 0 = hardware concurrency
};

/// The paper's cancelling controller for the Lorentz first coordinate.
inline double cancel_controller(const Vector& z, const LorentzParams& p) {
    const double x = z(0), y = z(1);
    const double sa = std::sqrt(p.alpha);
    return -((1.0 + p.alpha * p.beta) * (x + sa) -
             p.beta * (x + sa) * (y + p.alpha) - sa);
}

/// u = k(z) for the configured controller (d-vector).
inline Vector control_input(const Vector& z, const SystemSpec& spec,
                            const Controller& ctrl) {
    switch (ctrl.kind) {
        case Controller::Kind::None:
            return Vector::Zero(spec.kind == SystemSpec::Kind::Linear
                                    ? spec.B.cols()
                                    : 1);
        case Controller::Kind::CancelNonlinearity: {
            Vector u(1);
            u(0) = cancel_controller(z, spec.params);
            return u;
        }
        case Controller::Kind::LinearGain:
            return ctrl.K * z;
    }
    return Vector::Zero(1);
}

/// One step of x' = f(x) + xi B k(x) + xi B w + gamma.
inline Vector closed_loop_step(const Vector& z, const DiscreteSystem& sys,
                               const Vector& u, double xi, const Vector& w,
                               const Vector& gamma) {
    return sys.step(z) + xi * (sys.input_matrix * (u + w)) + gamma;
}

struct MasterSlaveRun {
    std::vector<Vector> master;
    std::vector<Vector> slave_x;
    std::vector<Vector> slave_y;
    std::vector<Vector> error;  // x_n - y_n
    std::vector<double> xi_seq;
    bool diverged_x = false;
    bool diverged_y = false;
    bool diverged() const { return diverged_x || diverged_y; }
};

namespace detail {

inline Vector uniform_in_ball(SeededStream& stream, int dim, double radius) {
    // rejection sampling; acceptance is ~0.79 at dim 2
    for (;;) {
        Vector v(dim);
        for (int i = 0; i < dim; ++i)
            v(i) = radius * (2.0 * stream.next_uniform() - 1.0);
        if (v.norm() <= radius) return v;
    }
}

/// Initial condition on the attractor: uniform draw in ||z|| <= radius,
/// warmed up through the uncontrolled map; draws outside the basin of
/// attraction are resampled.
inline Vector warmed_initial(SeededStream& stream, const DiscreteSystem& sys,
                             double radius, long warmup) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Vector x = uniform_in_ball(stream, sys.dim, radius);
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
    throw DivergedError("warmed_initial: no bounded orbit found");
}

}  // namespace detail

/// One replica of the one-way-coupled experiment: noise-free master, two
/// slave trajectories sharing the identical (xi, gamma) realization.
inline MasterSlaveRun simulate_master_slave(const ExperimentConfig& cfg,
                                            int replica) {
    const DiscreteSystem master_sys = cfg.master.make();
    const DiscreteSystem slave_sys = cfg.slave.make();
    SeededStream xi_stream(cfg.master_seed, replica, SeededStream::XiTag);
    SeededStream gamma_stream(cfg.master_seed, replica, SeededStream::GammaTag);
    SeededStream init_stream(cfg.master_seed, replica, SeededStream::InitTag);

    // master and both slaves start on their attractors; a raw uniform
    // draw in ||z|| <= 2 is not contained in the basin for every
    // parameter set. Linear systems get no warm-up (no attractor).
    const long warm_master =
        cfg.master.kind == SystemSpec::Kind::Linear ? 0 : cfg.master_warmup;
    const long warm_slave =
        cfg.slave.kind == SystemSpec::Kind::Linear ? 0 : cfg.master_warmup;
    Vector w = detail::warmed_initial(init_stream, master_sys, cfg.init_radius,
                                      warm_master);
    Vector x = detail::warmed_initial(init_stream, slave_sys, cfg.init_radius,
                                      warm_slave);
    Vector y = detail::warmed_initial(init_stream, slave_sys, cfg.init_radius,
                                      warm_slave);

    MasterSlaveRun run;
    run.master.reserve(cfg.n_steps + 1);
    run.slave_x.reserve(cfg.n_steps + 1);
    run.slave_y.reserve(cfg.n_steps + 1);
    run.error.reserve(cfg.n_steps + 1);
    run.xi_seq.reserve(cfg.n_steps);
    run.master.push_back(w);
    run.slave_x.push_back(x);
    run.slave_y.push_back(y);
    run.error.push_back(x - y);

    for (long n = 0; n < cfg.n_steps; ++n) {
        const double xi = sample_xi(cfg.channel, xi_stream);
        const Vector gamma =
            sample_noise(cfg.noise, slave_sys.dim, gamma_stream);
        run.xi_seq.push_back(xi);
        // exogenous coupling term: w_n = -u(master state)
        const Vector w_exo = -control_input(w, cfg.slave, cfg.controller);

        if (!run.diverged_x) {
            const Vector u = control_input(x, cfg.slave, cfg.controller);
            x = closed_loop_step(x, slave_sys, u, xi, w_exo, gamma);
            if (!x.allFinite() || x.norm() > kDivergenceCap) {
                run.diverged_x = true;
                x = run.slave_x.back();  // freeze
            }
        }
        if (!run.diverged_y) {
            const Vector u = control_input(y, cfg.slave, cfg.controller);
            y = closed_loop_step(y, slave_sys, u, xi, w_exo, gamma);
            if (!y.allFinite() || y.norm() > kDivergenceCap) {
                run.diverged_y = true;
                y = run.slave_y.back();
            }
        }
        w = master_sys.step(w);
        run.master.push_back(w);
        run.slave_x.push_back(x);
        run.slave_y.push_back(y);
        run.error.push_back(x - y);
    }
    return run;
}

struct EnsembleStats {
    std::vector<double> mse;        // per step, over non-diverged replicas
    std::vector<double> stderr_mse;
    std::vector<double> hist_edges;  // 102 edges for 101 bins
    std::vector<long> hist_counts;   // terminal first-coordinate error
    int diverged_count = 0;
    double beta_hat = 1.0;  // fitted geometric decay rate of the MSE tail
    double terminal_variance = 0.0;  // pooled over coordinates
};

namespace detail {

template <typename Fn>
inline void parallel_replicas(int n_realizations, int threads, Fn&& fn) {
    int n_threads = threads > 0
                        ? threads
                        : static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads < 1) n_threads = 1;
    n_threads = std::min(n_threads, n_realizations);
    if (n_threads == 1) {
        for (int r = 0; r < n_realizations; ++r) fn(r);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t)
        pool.emplace_back([&, t] {
            for (int r = t; r < n_realizations; r += n_threads) fn(r);
        });
    for (auto& th : pool) th.join();
}

/// Least-squares slope of v against its index; also writes the slope's
/// standard error when se is non-null.
inline double lsq_slope(const std::vector<double>& xs,
                        const std::vector<double>& ys, double* se = nullptr) {
    const std::size_t n = xs.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0) {
        if (se) *se = 0.0;
        return 0.0;
    }
    const double slope = sxy / sxx;
    if (se) {
        double rss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double res = ys[i] - my - slope * (xs[i] - mx);
            rss += res * res;
        }
        *se = n > 2 ? std::sqrt(rss / double(n - 2) / sxx) : 0.0;
    }
    return slope;
}

}  // namespace detail

/// Runs n_realizations independent replicas and aggregates per-step MSE,
/// the terminal-error histogram, and the fitted decay rate. The reduce is
/// in replica order, so results are identical for any thread count.
inline EnsembleStats ensemble_error_stats(const ExperimentConfig& cfg) {
    const int R = cfg.n_realizations;
    const long S = cfg.n_steps;
    std::vector<std::vector<double>> sq(R);  // ||e_n||^2 per replica
    std::vector<Vector> terminal(R);
    std::vector<char> diverged(R, 0);

    detail::parallel_replicas(R, cfg.threads, [&](int r) {
        const MasterSlaveRun run = simulate_master_slave(cfg, r);
        diverged[r] = run.diverged() ? 1 : 0;
        sq[r].resize(S + 1);
        for (long n = 0; n <= S; ++n) sq[r][n] = run.error[n].squaredNorm();
        terminal[r] = run.error.back();
    });

    EnsembleStats st;
    st.mse.assign(S + 1, 0.0);
    st.stderr_mse.assign(S + 1, 0.0);
    long alive = 0;
    for (int r = 0; r < R; ++r) {
        if (diverged[r]) {
            ++st.diverged_count;
            continue;
        }
        ++alive;
        for (long n = 0; n <= S; ++n) st.mse[n] += sq[r][n];
    }
    if (alive > 0)
        for (long n = 0; n <= S; ++n) st.mse[n] /= double(alive);
    if (alive > 1) {
        for (int r = 0; r < R; ++r) {
            if (diverged[r]) continue;
            for (long n = 0; n <= S; ++n) {
                const double d = sq[r][n] - st.mse[n];
                st.stderr_mse[n] += d * d;
            }
        }
        for (long n = 0; n <= S; ++n)
            st.stderr_mse[n] =
                std::sqrt(st.stderr_mse[n] / double(alive - 1) / double(alive));
    }

    // terminal histogram on the first error coordinate, 101 bins centred at 0
    double emax = 0.0;
    for (int r = 0; r < R; ++r)
        if (!diverged[r]) emax = std::max(emax, std::abs(terminal[r](0)));
    if (emax == 0.0) emax = 1e-12;
    const int bins = 101;
    st.hist_edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b)
        st.hist_edges[b] = -emax + 2.0 * emax * double(b) / double(bins);
    st.hist_counts.assign(bins, 0);
    for (int r = 0; r < R; ++r) {
        if (diverged[r]) continue;
        int b = static_cast<int>((terminal[r](0) + emax) / (2.0 * emax) * bins);
        b = std::clamp(b, 0, bins - 1);
        ++st.hist_counts[b];
    }

    // pooled terminal sample variance across coordinates
    if (alive > 0) {
        double mean = 0;
        long cnt = 0;
        for (int r = 0; r < R; ++r) {
            if (diverged[r]) continue;
            for (int i = 0; i < terminal[r].size(); ++i) {
                mean += terminal[r](i);
                ++cnt;
            }
        }
        mean /= double(cnt);
        double var = 0;
        for (int r = 0; r < R; ++r) {
            if (diverged[r]) continue;
            for (int i = 0; i < terminal[r].size(); ++i) {
                const double d = terminal[r](i) - mean;
                var += d * d;
            }
        }
        st.terminal_variance = cnt > 1 ? var / double(cnt - 1) : 0.0;
    }

    // beta_hat: slope of log MSE over the last 60% of steps above the floor
    std::vector<double> xs, ys;
    for (long n = 0; n <= S; ++n)
        if (st.mse[n] > 1e-20) {
            xs.push_back(double(n));
            ys.push_back(std::log(st.mse[n]));
        }
    if (xs.size() >= 3) {
        const std::size_t start = xs.size() - (xs.size() * 6) / 10;
        std::vector<double> txs(xs.begin() + start, xs.end());
        std::vector<double> tys(ys.begin() + start, ys.end());
        st.beta_hat = std::exp(detail::lsq_slope(txs, tys));
    }
    return st;
}

/// Trace of the exact second-moment recursion of the linearized closed
/// loop: Sigma' = (A + mu BK) Sigma (A + mu BK)' + sigma^2 BK Sigma (BK)'.
struct CovarianceTrace {
    std::vector<double> traces;
    double p = 0.0;
    enum class Status { Converged, Diverged } status = Status::Converged;
    double limit = 0.0;  // final trace when converged
};

inline CovarianceTrace linearized_covariance_trace(const Matrix& A,
                                                   const Matrix& B,
                                                   const Matrix& K,
                                                   const ChannelModel& model,
                                                   long n,
                                                   double blowup = 1e12) {
    CovarianceTrace out;
    out.p = rho(model);
    const Matrix BK = B * K;
    const Matrix Abar = A + model.mu * BK;
    Matrix sigma = Matrix::Identity(A.rows(), A.cols());
    out.traces.reserve(n + 1);
    out.traces.push_back(sigma.trace());
    for (long k = 0; k < n; ++k) {
        sigma = Abar * sigma * Abar.transpose() +
                model.sigma2 * BK * sigma * BK.transpose();
        const double tr = sigma.trace();
        out.traces.push_back(tr);
        if (!std::isfinite(tr) || tr > blowup) {
            out.status = CovarianceTrace::Status::Diverged;
            return out;
        }
    }
    const std::size_t m = out.traces.size();
    const double last = out.traces[m - 1];
    const double prev = out.traces[m - 2];
    if (std::abs(last - prev) < 1e-9) {
        out.status = CovarianceTrace::Status::Converged;
        out.limit = last;
        return out;
    }
    // near the threshold: classify by the trend over the last 100 steps
    const std::size_t w = std::min<std::size_t>(100, m - 1);
    bool growing = true;
    for (std::size_t k = m - w; k < m; ++k)
        if (out.traces[k] <= out.traces[k - 1]) {
            growing = false;
            break;
        }
    if (growing || last > out.traces[m - 1 - w]) {
        out.status = CovarianceTrace::Status::Diverged;
    } else {
        out.status = CovarianceTrace::Status::Converged;
        out.limit = last;
    }
    return out;
}

/// Empirical second-moment boundedness test for the self-feedback loop
/// x' = f(x) + xi B k(x) + gamma (no master coupling).
struct SecondMomentResult {
    bool bounded = false;
    double sup_estimate = 0.0;  // running max of tail MSE
    double tail_slope = 0.0;
    double tail_slope_se = 0.0;
};

inline SecondMomentResult second_moment_check(const ExperimentConfig& cfg,
                                              double cap = 1e6) {
    const int R = cfg.n_realizations;
    const long S = cfg.n_steps;
    const DiscreteSystem sys = cfg.slave.make();
    std::vector<std::vector<double>> sq(R);
    std::vector<char> diverged(R, 0);

    detail::parallel_replicas(R, cfg.threads, [&](int r) {
        SeededStream xi_stream(cfg.master_seed, r, SeededStream::XiTag);
        SeededStream gamma_stream(cfg.master_seed, r, SeededStream::GammaTag);
        SeededStream init_stream(cfg.master_seed, r, SeededStream::InitTag);
        Vector x = detail::uniform_in_ball(init_stream, sys.dim, cfg.init_radius);
        sq[r].resize(S + 1);
        sq[r][0] = x.squaredNorm();
        for (long n = 0; n < S; ++n) {
            const double xi = sample_xi(cfg.channel, xi_stream);
            const Vector gamma = sample_noise(cfg.noise, sys.dim, gamma_stream);
            const Vector u = control_input(x, cfg.slave, cfg.controller);
            const Vector next = closed_loop_step(x, sys, u, xi,
                                                 Vector::Zero(u.size()), gamma);
            if (!next.allFinite() || next.norm() > kDivergenceCap)
                diverged[r] = 1;  // freeze the state, keep counting
            else
                x = next;
            sq[r][n + 1] = x.squaredNorm();
        }
    });

    std::vector<double> mse(S + 1, 0.0);
    for (int r = 0; r < R; ++r)
        for (long n = 0; n <= S; ++n) mse[n] += sq[r][n];
    for (long n = 0; n <= S; ++n) mse[n] /= double(R);

    SecondMomentResult res;
    const long tail_start = (S + 1) / 2;
    std::vector<double> xs, ys;
    for (long n = tail_start; n <= S; ++n) {
        res.sup_estimate = std::max(res.sup_estimate, mse[n]);
        xs.push_back(double(n));
        ys.push_back(mse[n]);
    }
    res.tail_slope = detail::lsq_slope(xs, ys, &res.tail_slope_se);
    res.bounded = res.sup_estimate < cap &&
                  res.tail_slope <= 3.0 * res.tail_slope_se;
    return res;
}

}  // namespace netstab
