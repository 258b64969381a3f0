#pragma once

#include <collabopt/objective.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace collabopt {

struct ScheduleInputs {
    SimilarityParams sim;
    std::int64_t horizon = 1;   // T
    double f0_gap = 0.0;        // F_0
    double sigma0_sq = 0.0;     // total noise variance of the main agent
    double sigma_a_sq = 0.0;    // sum_k tau_k^2 sigma_k^2
    double alpha = 0.0;
    double oracle_var = 0.0;    // v^2
    double grad0_sq = 0.0;      // |grad f_0(x_0)|^2
    std::size_t num_collaborators = 1;
    double noise_scale = 0.0;   // M multiplying |grad f_0|^2 in the combined noise

    void validate() const;
};

// Builds inputs from tasks. Relative noise of the collaborators is folded in as
// M = M_0 + 2(1+m) sum tau_k^2 M_k and sigma_a^2 += 2 sum tau_k^2 M_k zeta_k^2.
ScheduleInputs make_schedule_inputs(const QuadraticTask& main, const std::vector<QuadraticTask>& collaborators,
                                    std::span<const double> tau, double alpha, std::int64_t horizon,
                                    std::span<const double> x0, double oracle_var);

double sigma_tilde_sq(const ScheduleInputs& in);         // (1-a)^2 s0 + a^2 sa
double sigma_tilde_oracle_sq(const ScheduleInputs& in);  // (1-a)^2 s0 + a^2 (sa + v^2/N)
double zeta_tilde_sq(const ScheduleInputs& in);          // 2(1+m) |g0|^2 + 2 zeta^2
double eta_max(const ScheduleInputs& in);                // min(1/L, (1-a^2 m)/(2LM))
int recursion_constant(const ScheduleInputs& in);        // 2 if M = 0 else 4

double eta_wga_nonconvex(const ScheduleInputs& in);
// Returns 0 when the log argument is <= 1; callers then use eta_wga_nonconvex.
double eta_wga_pl(const ScheduleInputs& in);
double eta_decreasing_pl(std::int64_t t, const ScheduleInputs& in, int c);
// First t whose unclamped decreasing step fits under eta_max.
std::int64_t decreasing_pl_t0(const ScheduleInputs& in, int c);

struct BetaChoice {
    double beta = 1.0;
    std::optional<std::string> warning;
};
BetaChoice beta_bc(const ScheduleInputs& in, double eta);
double eta_bc(const ScheduleInputs& in);

double alpha_opt_wga_m0(int n, double mu, double L, double zeta_sq, double sigma0_sq, std::int64_t horizon);
double alpha_opt_oracle(int n, double v_sq, double sigma0_sq);

double tau_qp_coeff(double L, double mu, std::int64_t horizon, double alpha, double m);
Vec tau_qp(std::span<const double> sigmas_sq, std::span<const double> zetas_sq, double coeff);
double tau_qp_objective(std::span<const double> tau, std::span<const double> sigmas_sq,
                        std::span<const double> zetas_sq, double coeff);

double speedup_factor(double alpha_opt);
// speedup_factor(alpha_opt_wga_m0(...)) rearranged to 1 + N / (1 + N r); exactly N + 1 at zeta = 0
double speedup_wga_m0(int n, double mu, double L, double zeta_sq, double sigma0_sq, std::int64_t horizon);

double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi, double tol);

// L sigma~^2 / (mu^2 T (1-a^2 m)^2) + a^2 zeta^2 / (mu (1-a^2 m)) with
// sigma~^2 = (1-a)^2 s0 + a^2 s1 / N.
double wga_pl_rate(double alpha, double m, double zeta_sq, double sigma0_sq, double sigma1_sq, double mu,
                   double L, std::int64_t horizon, int n);
double alpha_opt_wga_general(double m, double zeta_sq, double sigma0_sq, double sigma1_sq, double mu, double L,
                             std::int64_t horizon, int n);
// rate at alpha = 0 divided by the rate at the optimal alpha
double wga_speedup(double m, double zeta_sq, double sigma0_sq, double sigma1_sq, double mu, double L,
                   std::int64_t horizon, int n);

}  // namespace collabopt
