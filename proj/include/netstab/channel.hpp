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
#include <cstdint>
#include <stdexcept>

namespace netstab {

/// Multiplicative channel scalar xi_n: Bernoulli erasure or a general
/// two-moment family matched on (mu, sigma^2).
struct ChannelModel {
    enum class Kind { Bernoulli, TwoMoment };
    enum class Family { Gaussian, TwoPoint };

    Kind kind = Kind::Bernoulli;
    Family family = Family::Gaussian;  // only used for TwoMoment
    double mu = 1.0;
    double sigma2 = 0.0;

    static ChannelModel bernoulli(double p) {
        if (p <= 0.0 || p > 1.0)
            throw std::invalid_argument("bernoulli: p must be in (0,1]");
        ChannelModel m;
        m.kind = Kind::Bernoulli;
        m.mu = p;
        m.sigma2 = p * (1.0 - p);
        return m;
    }

    static ChannelModel two_moment(double mu, double sigma2,
                                   Family family = Family::Gaussian) {
        if (sigma2 <= 0.0)
            throw std::invalid_argument("two_moment: sigma2 must be positive");
        ChannelModel m;
        m.kind = Kind::TwoMoment;
        m.family = family;
        m.mu = mu;
        m.sigma2 = sigma2;
        return m;
    }

    // Bernoulli(1) is the degenerate ideal-channel baseline.
    bool ideal() const { return kind == Kind::Bernoulli && mu == 1.0; }

    double non_erasure_p() const { return mu; }
};

/// rho = mu^2 / (mu^2 + sigma^2); equals p exactly for Bernoulli(p).
inline double rho(const ChannelModel& model) {
    const double denom = model.mu * model.mu + model.sigma2;
    if (denom <= 0.0)
        throw std::invalid_argument("rho: mu and sigma both zero");
    if (model.kind == ChannelModel::Kind::Bernoulli) return model.mu;
    return model.mu * model.mu / denom;
}

/// Zero-mean IID Gaussian additive noise, per-coordinate stddev.
struct NoiseModel {
    double stddev = 0.0;
};

/// Counter-free deterministic stream: the state is seeded from
/// hash(master_seed, replica_index, stream_tag) so replicas and the
/// xi/gamma/init streams never overlap and replay bit-for-bit.
class SeededStream {
public:
    enum Tag : std::uint64_t { XiTag = 1, GammaTag = 2, InitTag = 3 };

    SeededStream(std::uint64_t master_seed, std::uint64_t replica_index,
                 std::uint64_t stream_tag)
        : state_(mix(mix(mix(0x9e3779b97f4a7c15ULL ^ master_seed) ^
                         replica_index) ^
                     stream_tag)) {
        if (state_ == 0) state_ = 0x2545f4914f6cdd1dULL;
    }

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0,1) with 53-bit resolution.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (polar form avoided to keep the
    /// draw count per call fixed, which the replay contract needs).
    double next_normal() {
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        return r * std::cos(2.0 * M_PI * u2);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
        z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
        return z ^ (z >> 33);
    }

    std::uint64_t state_;
};

/// One IID draw of the channel scalar xi.
inline double sample_xi(const ChannelModel& model, SeededStream& stream) {
    switch (model.kind) {
        case ChannelModel::Kind::Bernoulli:
            return stream.next_uniform() < model.mu ? 1.0 : 0.0;
        case ChannelModel::Kind::TwoMoment:
            if (model.family == ChannelModel::Family::Gaussian)
                return model.mu + std::sqrt(model.sigma2) * stream.next_normal();
            // symmetric two-point support mu +/- sigma
            return model.mu + (stream.next_uniform() < 0.5 ? -1.0 : 1.0) *
                                  std::sqrt(model.sigma2);
    }
    return model.mu;
}

/// One IID draw of the additive noise vector gamma.
inline Eigen::VectorXd sample_noise(const NoiseModel& model, int dim,
                                    SeededStream& stream) {
    Eigen::VectorXd g(dim);
    for (int i = 0; i < dim; ++i)
        g(i) = model.stddev == 0.0 ? 0.0 : model.stddev * stream.next_normal();
    return g;
}

}  // namespace netstab
