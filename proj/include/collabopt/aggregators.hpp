#pragma once

#include <collabopt/objective.hpp>

#include <span>
#include <string>
#include <vector>

namespace collabopt {

enum class Aggregator { Alone, WGA, BC, OracleBC };

std::string to_string(Aggregator a);
Aggregator aggregator_from_string(const std::string& s);

struct CollaborationWeights {
    double alpha = 0.0;
    Vec tau;
    double beta = 1.0;

    // Checks alpha in [0,1] and tau on the simplex; beta in (0,1] when required.
    void validate(std::size_t n_collaborators, bool need_beta = false) const;

    bool operator==(const CollaborationWeights&) const = default;
};

// WGA needs alpha < 1/sqrt(m) when m > 0.
void check_wga_alpha(double alpha, double m);

struct BcState {
    Vec bias_estimate;
    bool initialized = false;
};

struct BcOutput {
    Vec gradient;
    Vec observed_bias;
};

Vec alone_combine(const GradientSample& g0);
Vec wga_combine(const GradientSample& g0, const std::vector<GradientSample>& gks,
                const CollaborationWeights& w);
BcOutput bc_combine(const GradientSample& g0, const std::vector<GradientSample>& gks,
                    const CollaborationWeights& w, const BcState& state);
BcState bc_update(const BcState& state, std::span<const double> observed_bias, double beta);
// c_oracle = true_bias + Gaussian noise of total variance v^2 / N.
Vec oracle_bc_combine(const GradientSample& g0, const std::vector<GradientSample>& gks,
                      const CollaborationWeights& w, std::span<const double> true_bias,
                      NormalStream& oracle_noise, double v);

// Kernels shared with the run loop. No validation, no allocation.
namespace kernel {

void weighted_average(std::span<const Vec> gks, std::span<const double> tau, std::span<double> out);
// out = (1-alpha) g0 + alpha avg
void mix(std::span<const double> g0, std::span<const double> avg, double alpha, std::span<double> out);
// out = (1-alpha) g0 + alpha (avg - c)
void mix_corrected(std::span<const double> g0, std::span<const double> avg, std::span<const double> c,
                   double alpha, std::span<double> out);
// c <- (1-beta) c + beta b
void ema(std::span<double> c, std::span<const double> b, double beta);
// c <- true_bias + noise with per-coordinate variance v^2 / (N d)
void oracle_estimate(std::span<const double> true_bias, NormalStream& noise, double v,
                     std::size_t n_collaborators, std::span<double> c);

}  // namespace kernel

}  // namespace collabopt
