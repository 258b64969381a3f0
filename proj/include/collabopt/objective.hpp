#pragma once

#include <collabopt/rng.hpp>

#include <cstddef>
#include <span>
#include <vector>

namespace collabopt {

using Vec = std::vector<double>;

// f(x) = 1/2 sum_d a_d (x_d - x*_d)^2 with Gaussian gradient noise whose
// per-coordinate variance is noise_std^2 + noise_scale * |grad f(x)|^2 / dim.
struct QuadraticTask {
    Vec curvature;
    Vec optimum;
    double noise_std = 0.0;
    double noise_scale = 0.0;

    std::size_t dim() const { return curvature.size(); }
    void validate() const;
    // E|n|^2 of the additive part, summed over coordinates
    double noise_variance() const { return static_cast<double>(dim()) * noise_std * noise_std; }

    bool operator==(const QuadraticTask&) const = default;
};

struct GradientSample {
    Vec value;
    std::size_t agent = 0;
};

struct SimilarityParams {
    double smoothness = 0.0;           // L
    double pl_constant = 0.0;          // mu
    double grad_scale_mismatch = 0.0;  // m
    double grad_offset_sq = 0.0;       // zeta^2 = sum_k tau_k zeta_k^2
    Vec agent_offset_sq;               // zeta_k^2
    double hessian_dissimilarity = 0.0;  // delta
    Vec noise_scales;                  // M_0, M_1, ..., M_N
};

// A pair (m, zeta_k^2) for which |grad f_k - grad f_0|^2 <= m |grad f_0|^2 + zeta_k^2
// holds at every point.
struct GradientSimilarity {
    double m = 0.0;
    Vec zeta_sq;
};

double eval_loss(const QuadraticTask& task, std::span<const double> x);
Vec true_gradient(const QuadraticTask& task, std::span<const double> x);
void true_gradient_into(const QuadraticTask& task, std::span<const double> x, std::span<double> out);

GradientSample sample_gradient(const QuadraticTask& task, std::span<const double> x,
                               NormalStream& stream, std::size_t agent);
// Allocation-free variant used by the run loop; returns |grad f(x)|^2.
double sample_gradient_into(const QuadraticTask& task, std::span<const double> x,
                            NormalStream& stream, std::span<double> out);

// L, mu from the main task; delta = worst max-abs curvature gap;
// zeta_k^2 = |A_k (x_k* - x_0*)|^2; m = worst max_d ((a_kd - a_0d)/a_0d)^2.
SimilarityParams similarity_params(const QuadraticTask& main,
                                   const std::vector<QuadraticTask>& collaborators,
                                   std::span<const double> tau);

// The reported (m, zeta_k^2) are tight and valid when a collaborator is a pure
// translation or a pure rescaling of the main task. Mixed cases need the cross
// term absorbed, which doubles both constants.
GradientSimilarity certified_similarity(const QuadraticTask& main,
                                        const std::vector<QuadraticTask>& collaborators);

QuadraticTask mean_estimation_task(double mu, double sigma);

void check_same_dim(std::size_t expected, std::size_t got, const char* what);

}  // namespace collabopt
