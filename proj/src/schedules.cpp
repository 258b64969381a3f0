#include <collabopt/schedules.hpp>

#include <collabopt/aggregators.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace collabopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double one_minus_am(const ScheduleInputs& in) {
    return 1.0 - in.alpha * in.alpha * in.sim.grad_scale_mismatch;
}

void guard_alpha(const ScheduleInputs& in) {
    in.validate();
    check_wga_alpha(in.alpha, in.sim.grad_scale_mismatch);
}

void check_c(int c) {
    if (c != 2 && c != 4) throw std::invalid_argument("recursion constant c must be 2 or 4");
}

}  // namespace

void ScheduleInputs::validate() const {
    if (horizon < 1) throw std::invalid_argument("horizon T must be >= 1");
    if (!(sim.smoothness > 0.0)) throw std::invalid_argument("smoothness L must be > 0");
    if (!(sim.pl_constant >= 0.0 && sim.pl_constant <= sim.smoothness))
        throw std::invalid_argument("PL constant must satisfy 0 <= mu <= L");
    for (double v : {f0_gap, sigma0_sq, sigma_a_sq, oracle_var, grad0_sq, noise_scale, sim.grad_scale_mismatch,
                     sim.grad_offset_sq, sim.hessian_dissimilarity})
        if (!(v >= 0.0)) throw std::invalid_argument("schedule inputs must be nonnegative");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (num_collaborators < 1) throw std::invalid_argument("need at least one collaborator");
}

ScheduleInputs make_schedule_inputs(const QuadraticTask& main, const std::vector<QuadraticTask>& collaborators,
                                    std::span<const double> tau, double alpha, std::int64_t horizon,
                                    std::span<const double> x0, double oracle_var) {
    ScheduleInputs in;
    in.sim = similarity_params(main, collaborators, tau);
    in.horizon = horizon;
    in.f0_gap = eval_loss(main, x0);
    auto g = true_gradient(main, x0);
    in.grad0_sq = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    in.sigma0_sq = main.noise_variance();
    double m = in.sim.grad_scale_mismatch, mk = 0.0;
    for (std::size_t k = 0; k < collaborators.size(); ++k) {
        const auto& c = collaborators[k];
        double t2 = tau[k] * tau[k];
        in.sigma_a_sq += t2 * (c.noise_variance() + 2.0 * c.noise_scale * in.sim.agent_offset_sq[k]);
        mk += t2 * c.noise_scale;
    }
    in.noise_scale = main.noise_scale + 2.0 * (1.0 + m) * mk;
    in.alpha = alpha;
    in.oracle_var = oracle_var;
    in.num_collaborators = collaborators.size();
    return in;
}

double sigma_tilde_sq(const ScheduleInputs& in) {
    double a = in.alpha;
    return (1 - a) * (1 - a) * in.sigma0_sq + a * a * in.sigma_a_sq;
}

double sigma_tilde_oracle_sq(const ScheduleInputs& in) {
    double a = in.alpha;
    return (1 - a) * (1 - a) * in.sigma0_sq +
           a * a * (in.sigma_a_sq + in.oracle_var / static_cast<double>(in.num_collaborators));
}

double zeta_tilde_sq(const ScheduleInputs& in) {
    return 2.0 * (1.0 + in.sim.grad_scale_mismatch) * in.grad0_sq + 2.0 * in.sim.grad_offset_sq;
}

double eta_max(const ScheduleInputs& in) {
    double L = in.sim.smoothness;
    double e = 1.0 / L;
    if (in.noise_scale > 0.0) e = std::min(e, one_minus_am(in) / (2.0 * L * in.noise_scale));
    return e;
}

int recursion_constant(const ScheduleInputs& in) { return in.noise_scale > 0.0 ? 4 : 2; }

double eta_wga_nonconvex(const ScheduleInputs& in) {
    guard_alpha(in);
    double L = in.sim.smoothness;
    double s2t = sigma_tilde_sq(in) * static_cast<double>(in.horizon);
    double e = eta_max(in);
    if (s2t > 0.0) e = std::min(e, std::sqrt(2.0 * in.f0_gap / (L * s2t)));
    return e;
}

double eta_wga_pl(const ScheduleInputs& in) {
    guard_alpha(in);
    double L = in.sim.smoothness, mu = in.sim.pl_constant, T = static_cast<double>(in.horizon);
    double s2 = sigma_tilde_sq(in);
    double arg = s2 > 0.0 ? 2.0 * mu * in.f0_gap * T / (3.0 * L * s2) : kInf;
    if (!(arg > 1.0) || mu <= 0.0) return 0.0;
    double e = std::log(arg) / (one_minus_am(in) * mu * T);
    return std::min(eta_max(in), e);
}

double eta_decreasing_pl(std::int64_t t, const ScheduleInputs& in, int c) {
    check_c(c);
    guard_alpha(in);
    if (t < 0) throw std::invalid_argument("step index must be >= 0");
    double mu = in.sim.pl_constant;
    if (!(mu > 0.0)) throw std::invalid_argument("decreasing schedule needs mu > 0");
    double tp = static_cast<double>(t) + 1.0;
    double raw = c * (2.0 * static_cast<double>(t) + 1.0) / (2.0 * mu * one_minus_am(in) * tp * tp);
    return std::min(eta_max(in), raw);
}

std::int64_t decreasing_pl_t0(const ScheduleInputs& in, int c) {
    check_c(c);
    guard_alpha(in);
    double mu = in.sim.pl_constant, cap = eta_max(in), k = 2.0 * mu * one_minus_am(in);
    // raw step ~ 2c/(k t); start the scan near the crossing and walk back
    auto raw = [&](std::int64_t t) {
        double tp = static_cast<double>(t) + 1.0;
        return c * (2.0 * static_cast<double>(t) + 1.0) / (k * tp * tp);
    };
    auto t = static_cast<std::int64_t>(std::max(0.0, std::floor(2.0 * c / (k * cap)) - 2.0));
    while (t > 0 && raw(t - 1) <= cap) --t;
    while (raw(t) > cap) ++t;
    return t;
}

BetaChoice beta_bc(const ScheduleInputs& in, double eta) {
    in.validate();
    if (!(eta > 0.0)) throw std::invalid_argument("beta_bc: eta must be > 0");
    double s = in.sigma0_sq + in.sigma_a_sq;
    if (s <= 0.0) return {1.0, std::nullopt};
    double d2 = in.sim.hessian_dissimilarity * in.sim.hessian_dissimilarity;
    if (d2 == 0.0)
        return {0.0, std::string("delta = 0 makes the prescribed beta zero, which freezes c at c_0; set beta explicitly")};
    double T = static_cast<double>(in.horizon);
    double inner = 10.0 * d2 * (zeta_tilde_sq(in) / T + s) / s;
    return {std::min(1.0, std::cbrt(inner) * std::pow(eta, 2.0 / 3.0)), std::nullopt};
}

double eta_bc(const ScheduleInputs& in) {
    in.validate();
    double L = in.sim.smoothness, a = in.alpha, d = in.sim.hessian_dissimilarity;
    double e = 1.0 / L;
    double ad = a * a * d * d;
    if (ad > 0.0) e = std::min(e, 1.0 / (6.0 * ad));
    double s2t = sigma_tilde_sq(in) * static_cast<double>(in.horizon);
    if (s2t > 0.0) e = std::min(e, std::sqrt(2.0 * in.f0_gap / (L * s2t)));
    return e;
}

double alpha_opt_wga_m0(int n, double mu, double L, double zeta_sq, double sigma0_sq, std::int64_t horizon) {
    if (n < 1) throw std::invalid_argument("N must be >= 1");
    if (sigma0_sq <= 0.0) return 0.0;
    double r = mu * zeta_sq * static_cast<double>(horizon) / (L * sigma0_sq);
    return 1.0 / (1.0 + 1.0 / n + r);
}

double alpha_opt_oracle(int n, double v_sq, double sigma0_sq) {
    if (n < 1) throw std::invalid_argument("N must be >= 1");
    if (sigma0_sq <= 0.0) return 0.0;
    return n / (n + 1.0 + v_sq / sigma0_sq);
}

double tau_qp_coeff(double L, double mu, std::int64_t horizon, double alpha, double m) {
    double g = 1.0 - alpha * alpha * m;
    if (!(g > 0.0)) throw std::invalid_argument("tau_qp: alpha must be below 1/sqrt(m)");
    return L / (mu * static_cast<double>(horizon) * g);
}

double tau_qp_objective(std::span<const double> tau, std::span<const double> s, std::span<const double> z,
                        double coeff) {
    double v = 0.0;
    for (std::size_t k = 0; k < tau.size(); ++k) v += coeff * tau[k] * tau[k] * s[k] + tau[k] * z[k];
    return v;
}

Vec tau_qp(std::span<const double> s, std::span<const double> z, double coeff) {
    std::size_t n = s.size();
    if (n == 0 || z.size() != n) throw std::invalid_argument("tau_qp: sigmas and zetas must be nonempty and equal length");
    if (!(coeff >= 0.0)) throw std::invalid_argument("tau_qp: coeff must be >= 0");
    for (std::size_t k = 0; k < n; ++k)
        if (!(s[k] >= 0.0) || !(z[k] >= 0.0)) throw std::invalid_argument("tau_qp: inputs must be >= 0");

    // Quadratic members get tau_k = max(0, (lambda - z_k) / (2 coeff s_k)).
    // Linear members (coeff s_k = 0) absorb whatever is left at lambda = min z over them.
    std::vector<std::size_t> quad, lin;
    for (std::size_t k = 0; k < n; ++k) (coeff * s[k] > 0.0 ? quad : lin).push_back(k);

    auto mass_at = [&](double lam) {
        double m = 0.0;
        for (auto k : quad) m += std::max(0.0, (lam - z[k]) / (2.0 * coeff * s[k]));
        return m;
    };

    Vec tau(n, 0.0);
    double lam_cap = kInf;
    if (!lin.empty()) {
        for (auto k : lin) lam_cap = std::min(lam_cap, z[k]);
        if (mass_at(lam_cap) < 1.0) {
            for (auto k : quad) tau[k] = std::max(0.0, (lam_cap - z[k]) / (2.0 * coeff * s[k]));
            double rest = 1.0 - std::accumulate(tau.begin(), tau.end(), 0.0);
            std::vector<std::size_t> ties;
            for (auto k : lin)
                if (z[k] == lam_cap) ties.push_back(k);
            for (auto k : ties) tau[k] = rest / static_cast<double>(ties.size());
            return tau;
        }
    }

    // Solve mass_at(lambda) = 1 on the piecewise-linear segments.
    std::vector<std::size_t> order = quad;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return z[a] < z[b]; });
    double inv_sum = 0.0, zw_sum = 0.0, lam = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto k = order[i];
        double w = 1.0 / (2.0 * coeff * s[k]);
        inv_sum += w;
        zw_sum += z[k] * w;
        lam = (1.0 + zw_sum) / inv_sum;
        bool last = i + 1 == order.size();
        if (last || lam <= z[order[i + 1]]) break;
    }
    for (auto k : quad) tau[k] = std::max(0.0, (lam - z[k]) / (2.0 * coeff * s[k]));
    // renormalise away rounding so the simplex constraint is exact
    double tot = std::accumulate(tau.begin(), tau.end(), 0.0);
    for (auto& t : tau) t /= tot;
    return tau;
}

double speedup_factor(double alpha_opt) {
    if (!(alpha_opt >= 0.0 && alpha_opt < 1.0)) throw std::invalid_argument("speedup_factor: alpha must lie in [0, 1)");
    return 1.0 / (1.0 - alpha_opt);
}

double speedup_wga_m0(int n, double mu, double L, double zeta_sq, double sigma0_sq, std::int64_t horizon) {
    if (n < 1) throw std::invalid_argument("N must be >= 1");
    if (sigma0_sq <= 0.0) return 1.0;
    double r = mu * zeta_sq * static_cast<double>(horizon) / (L * sigma0_sq);
    return 1.0 + n / (1.0 + n * r);
}

double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi, double tol) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

double wga_pl_rate(double alpha, double m, double zeta_sq, double sigma0_sq, double sigma1_sq, double mu, double L,
                   std::int64_t horizon, int n) {
    double g = 1.0 - alpha * alpha * m;
    if (!(g > 0.0)) return kInf;
    double s2 = (1 - alpha) * (1 - alpha) * sigma0_sq + alpha * alpha * sigma1_sq / n;
    return L * s2 / (mu * mu * static_cast<double>(horizon) * g * g) + alpha * alpha * zeta_sq / (mu * g);
}

double alpha_opt_wga_general(double m, double zeta_sq, double sigma0_sq, double sigma1_sq, double mu, double L,
                             std::int64_t horizon, int n) {
    if (!(m >= 0.0)) throw std::invalid_argument("m must be >= 0");
    if (n < 1) throw std::invalid_argument("N must be >= 1");
    double hi = m > 0.0 ? std::min(1.0, 1.0 / std::sqrt(m)) : 1.0;
    auto f = [&](double a) { return wga_pl_rate(a, m, zeta_sq, sigma0_sq, sigma1_sq, mu, L, horizon, n); };
    double a = golden_section_minimize(f, 0.0, hi, 1e-10);
    // the open interval excludes 1/sqrt(m); stay strictly inside
    if (m > 0.0 && a * a * m >= 1.0) a = std::nextafter(1.0 / std::sqrt(m), 0.0);
    return a;
}

double wga_speedup(double m, double zeta_sq, double sigma0_sq, double sigma1_sq, double mu, double L,
                   std::int64_t horizon, int n) {
    double a = alpha_opt_wga_general(m, zeta_sq, sigma0_sq, sigma1_sq, mu, L, horizon, n);
    return wga_pl_rate(0.0, m, zeta_sq, sigma0_sq, sigma1_sq, mu, L, horizon, n) /
           wga_pl_rate(a, m, zeta_sq, sigma0_sq, sigma1_sq, mu, L, horizon, n);
}

}  // namespace collabopt
