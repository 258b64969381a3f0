#pragma once

#include <collabopt/schedules.hpp>

#include <vector>

namespace collabopt {

struct BoundInputs {
    ScheduleInputs sched;  // delta lives in sched.sim.hessian_dissimilarity
    double e0 = 0.0;       // E|c_0 - true bias(x_0)|^2
    double beta = 1.0;
    double eta = 0.0;
    int c = 2;             // 2 when M = 0, otherwise 4
};

enum class Regime { NonConvex, PL };

// Bound on (1/T) sum_t E|grad f_0(x_t)|^2 at the prescribed step:
// c/(1-a^2 m) [F_0/(eta_max T) + sqrt(2 L F_0 s~^2 / T) + a^2 zeta^2 / 2].
double bound_wga_nonconvex(const BoundInputs& in);

// Bound on F_T after T constant steps of size in.eta (0 < eta <= eta_max):
// (1 - 2 mu eta (1-a^2 m)/c)^T F_0 + c a^2 zeta^2 / (4 mu (1-a^2 m)) + c L eta s~^2 / (4 mu (1-a^2 m)).
double bound_wga_pl(const BoundInputs& in);
// Same recursion after `steps` steps from F_0 at a given constant step.
double bound_wga_pl_constant_step(const ScheduleInputs& in, int c, double eta, std::int64_t steps);
// Decreasing-step variant: c a^2 zeta^2/(4 mu g) + c^2 L s~^2 / (2 mu^2 g^2 T) + t0^2 F_t0 / T^2,
// with F_t0 bounded by the constant-step recursion at eta_max.
double bound_wga_pl_decreasing(const BoundInputs& in);

// Oracle bias correction: no zeta or m terms, s~^2 includes v^2/N.
double bound_oracle(const BoundInputs& in, Regime regime);

// Right-hand side of the BC bound; (1/(4T)) sum_t E|grad f_0(x_t)|^2 is below it.
double bound_bc(const BoundInputs& in);
double bc_average_gradient_bound(const BoundInputs& in);

// Bound on E(x_T - mu_0)^2 for WGA on the mean-estimation pair with constant step eta.
double mean_estimation_bound(double mu0, double mu1, double sigma0, double sigma1, double alpha,
                             std::int64_t horizon, double x0, double eta);

// speedup_factor(alpha_opt_wga_m0) over N x (L sigma_0^2 / (mu T zeta^2)); rows follow ns.
std::vector<Vec> gainfactor_surface(std::span<const double> ns, std::span<const double> ratios);

}  // namespace collabopt
