#include <collabopt/bounds.hpp>

#include <collabopt/aggregators.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace collabopt {

namespace {

void check_common(const BoundInputs& in) {
    in.sched.validate();
    if (in.c != 2 && in.c != 4) throw std::invalid_argument("c must be 2 or 4");
    if (in.sched.noise_scale > 0.0 && in.c != 4)
        throw std::invalid_argument("relative gradient noise (M > 0) requires c = 4");
    if (!(in.e0 >= 0.0) || !(in.beta >= 0.0) || !(in.eta >= 0.0))
        throw std::invalid_argument("bound inputs must be nonnegative");
}

double gap(const ScheduleInputs& s) { return 1.0 - s.alpha * s.alpha * s.sim.grad_scale_mismatch; }

double pl_recursion(double contraction, std::int64_t steps, double f0, double floor) {
    // F_t <= q F_{t-1} + (1-q) floor  =>  F_T <= q^T F_0 + (1 - q^T) floor <= q^T F_0 + floor
    return std::pow(contraction, static_cast<double>(steps)) * f0 + floor;
}

}  // namespace

double bound_wga_nonconvex(const BoundInputs& in) {
    check_common(in);
    const auto& s = in.sched;
    check_wga_alpha(s.alpha, s.sim.grad_scale_mismatch);
    double L = s.sim.smoothness, T = static_cast<double>(s.horizon);
    double rhs = s.f0_gap / (eta_max(s) * T) + std::sqrt(2.0 * L * s.f0_gap * sigma_tilde_sq(s) / T) +
                 0.5 * s.alpha * s.alpha * s.sim.grad_offset_sq;
    return in.c * rhs / gap(s);
}

double bound_wga_pl_constant_step(const ScheduleInputs& s, int c, double eta, std::int64_t steps) {
    double L = s.sim.smoothness, mu = s.sim.pl_constant, g = gap(s);
    double a2 = s.alpha * s.alpha;
    double floor = c * a2 * s.sim.grad_offset_sq / (4.0 * mu * g) + c * L * eta * sigma_tilde_sq(s) / (4.0 * mu * g);
    return pl_recursion(1.0 - 2.0 * mu * eta * g / c, steps, s.f0_gap, floor);
}

double bound_wga_pl(const BoundInputs& in) {
    check_common(in);
    const auto& s = in.sched;
    check_wga_alpha(s.alpha, s.sim.grad_scale_mismatch);
    if (!(s.sim.pl_constant > 0.0)) throw std::invalid_argument("PL bound needs mu > 0");
    if (!(in.eta > 0.0) || in.eta > eta_max(s) * (1.0 + 1e-12))
        throw std::invalid_argument("PL bound needs 0 < eta <= eta_max");
    return bound_wga_pl_constant_step(s, in.c, in.eta, s.horizon);
}

double bound_wga_pl_decreasing(const BoundInputs& in) {
    check_common(in);
    const auto& s = in.sched;
    check_wga_alpha(s.alpha, s.sim.grad_scale_mismatch);
    if (!(s.sim.pl_constant > 0.0)) throw std::invalid_argument("PL bound needs mu > 0");
    double L = s.sim.smoothness, mu = s.sim.pl_constant, g = gap(s), T = static_cast<double>(s.horizon);
    double c = in.c;
    auto t0 = decreasing_pl_t0(s, in.c);
    double ft0 = bound_wga_pl_constant_step(s, in.c, eta_max(s), t0);
    double t0d = static_cast<double>(t0);
    return c * s.alpha * s.alpha * s.sim.grad_offset_sq / (4.0 * mu * g) +
           c * c * L * sigma_tilde_sq(s) / (2.0 * mu * mu * g * g * T) + t0d * t0d * ft0 / (T * T);
}

double bound_oracle(const BoundInputs& in, Regime regime) {
    check_common(in);
    const auto& s = in.sched;
    double L = s.sim.smoothness, mu = s.sim.pl_constant, T = static_cast<double>(s.horizon);
    double emax = 1.0 / L;
    if (s.noise_scale > 0.0) emax = std::min(emax, 1.0 / (2.0 * L * s.noise_scale));
    double s2 = sigma_tilde_oracle_sq(s);
    if (regime == Regime::NonConvex)
        return in.c * (s.f0_gap / (emax * T) + std::sqrt(2.0 * L * s.f0_gap * s2 / T));
    if (!(mu > 0.0)) throw std::invalid_argument("PL bound needs mu > 0");
    if (!(in.eta > 0.0) || in.eta > emax * (1.0 + 1e-12))
        throw std::invalid_argument("PL bound needs 0 < eta <= eta_max");
    return pl_recursion(1.0 - 2.0 * in.eta * mu / in.c, s.horizon, s.f0_gap, in.c * L * in.eta * s2 / (4.0 * mu));
}

double bound_bc(const BoundInputs& in) {
    check_common(in);
    const auto& s = in.sched;
    double L = s.sim.smoothness, T = static_cast<double>(s.horizon), eta = in.eta;
    double a2 = s.alpha * s.alpha, d = s.sim.hessian_dissimilarity;
    double cap = 1.0 / L;
    if (a2 * d * d > 0.0) cap = std::min(cap, 1.0 / (6.0 * a2 * d * d));
    if (!(eta > 0.0) || eta > cap * (1.0 + 1e-12))
        throw std::invalid_argument("BC bound needs 0 < eta <= min(1/L, 1/(6 alpha^2 delta^2))");

    double ss = s.sigma0_sq + s.sigma_a_sq;
    double s2 = sigma_tilde_sq(s);
    double e0_term = 0.0;
    if (a2 * in.e0 > 0.0)
        e0_term = in.beta > 0.0 ? 4.0 * a2 * in.e0 / (in.beta * T) : std::numeric_limits<double>::infinity();
    return s.f0_gap / (eta * T) + e0_term +
           12.0 * a2 * std::cbrt(ss * (zeta_tilde_sq(s) / T + ss)) * std::pow(d * eta, 2.0 / 3.0) +
           L * s2 * eta / 2.0 + 10.0 * a2 * d * d * s2 * eta * eta;
}

double bc_average_gradient_bound(const BoundInputs& in) { return 4.0 * bound_bc(in); }

double mean_estimation_bound(double mu0, double mu1, double sigma0, double sigma1, double alpha,
                             std::int64_t horizon, double x0, double eta) {
    auto t0 = mean_estimation_task(mu0, sigma0);
    auto t1 = mean_estimation_task(mu1, sigma1);
    BoundInputs b;
    b.sched = make_schedule_inputs(t0, {t1}, Vec{1.0}, alpha, horizon, Vec{x0}, 0.0);
    b.eta = eta;
    b.c = 2;
    // f_0 = (x - mu_0)^2 / 2
    return 2.0 * bound_wga_pl(b);
}

std::vector<Vec> gainfactor_surface(std::span<const double> ns, std::span<const double> ratios) {
    std::vector<Vec> out;
    for (double n : ns) {
        if (!(n >= 1.0)) throw std::invalid_argument("gainfactor: N must be >= 1");
        Vec row;
        for (double r : ratios) {
            if (!(r > 0.0)) throw std::invalid_argument("gainfactor: ratio must be > 0");
            double a = 1.0 / (1.0 + 1.0 / n + 1.0 / r);
            row.push_back(speedup_factor(a));
        }
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace collabopt
