#include <collabopt/simulator.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace collabopt {

StepSize StepSize::constant(double eta) {
    StepSize s;
    s.eta = eta;
    return s;
}

StepSize StepSize::decreasing_pl(const ScheduleInputs& in, int c) {
    StepSize s;
    s.kind = Kind::DecreasingPL;
    s.c = c;
    s.mu = in.sim.pl_constant;
    s.gap = 1.0 - in.alpha * in.alpha * in.sim.grad_scale_mismatch;
    s.cap = eta_max(in);
    s.eta = s.cap;
    s.validate();
    return s;
}

double StepSize::at(std::int64_t t) const {
    if (kind == Kind::Constant) return eta;
    double tp = static_cast<double>(t) + 1.0;
    double raw = c * (2.0 * static_cast<double>(t) + 1.0) / (2.0 * mu * gap * tp * tp);
    return std::min(cap, raw);
}

void StepSize::validate() const {
    if (kind == Kind::Constant) {
        if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("step size must be > 0");
        return;
    }
    if (c != 2 && c != 4) throw std::invalid_argument("decreasing step: c must be 2 or 4");
    if (!(mu > 0.0) || !(gap > 0.0) || !(cap > 0.0))
        throw std::invalid_argument("decreasing step: mu, gap and cap must be > 0");
}

std::string to_string(const C0Policy& p) {
    switch (p.kind) {
        case C0Kind::FirstBias: return "first_bias";
        case C0Kind::Zero: return "zero";
        case C0Kind::WarmStart: return "warm_start:" + std::to_string(p.samples);
    }
    return "?";
}

C0Policy c0_policy_from_string(const std::string& s) {
    if (s == "first_bias") return {C0Kind::FirstBias, 1};
    if (s == "zero") return {C0Kind::Zero, 1};
    const std::string pre = "warm_start:";
    if (s.rfind(pre, 0) == 0) {
        std::size_t used = 0;
        int n = 0;
        try {
            n = std::stoi(s.substr(pre.size()), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size() - pre.size() || n < 1)
            throw std::invalid_argument("c0 policy: warm_start needs a positive sample count");
        return {C0Kind::WarmStart, n};
    }
    throw std::invalid_argument("unknown c0 policy '" + s + "' (first_bias, zero, warm_start:S)");
}

void RunConfig::validate() const {
    main.validate();
    for (const auto& c : collaborators) {
        c.validate();
        check_same_dim(main.dim(), c.dim(), "collaborator");
    }
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    step.validate();
    if (!x0.empty()) check_same_dim(main.dim(), x0.size(), "x0");
    for (double v : x0)
        if (!std::isfinite(v)) throw std::invalid_argument("x0 must be finite");
    if (snapshot_stride < 0) throw std::invalid_argument("snapshot_stride must be >= 0");
    if (aggregator == Aggregator::Alone) return;
    if (collaborators.empty()) throw std::invalid_argument(to_string(aggregator) + " needs at least one collaborator");
    weights.validate(collaborators.size(), aggregator == Aggregator::BC);
    if (aggregator == Aggregator::WGA) {
        auto sim = similarity_params(main, collaborators, weights.tau);
        check_wga_alpha(weights.alpha, sim.grad_scale_mismatch);
    }
    if (aggregator == Aggregator::BC && c0.kind == C0Kind::WarmStart && c0.samples < 1)
        throw std::invalid_argument("warm_start needs at least one sample");
    if (aggregator == Aggregator::OracleBC && !(oracle_v >= 0.0))
        throw std::invalid_argument("oracle_v must be >= 0");
}

Vec RunConfig::initial_iterate() const {
    if (!x0.empty()) return x0;
    return Vec(main.dim(), kDefaultInitialIterate);
}

std::int64_t plateau_window(std::int64_t horizon) { return std::max<std::int64_t>(1, horizon / 10); }

double Trace::final_gap() const { return test_loss.back(); }

double Trace::plateau_loss() const {
    auto n = static_cast<std::int64_t>(test_loss.size());
    auto w = std::min(plateau_window(steps_completed), n);
    double s = 0.0;
    for (auto t = n - w; t < n; ++t) s += test_loss[t];
    return s / static_cast<double>(w);
}

double Trace::avg_grad_norm_sq() const {
    if (steps_completed == 0) return grad_norm_sq.front();
    double s = 0.0;
    for (std::int64_t t = 0; t < steps_completed; ++t) s += grad_norm_sq[t];
    return s / static_cast<double>(steps_completed);
}

Stat summarize(std::span<const double> values) {
    Stat st;
    st.n = values.size();
    if (st.n == 0) {
        st.mean = std::numeric_limits<double>::quiet_NaN();
        return st;
    }
    // shifted by the first value, so identical inputs give exactly zero spread
    const double ref = values[0];
    double s = 0.0;
    for (double v : values) s += v - ref;
    const double dm = s / static_cast<double>(st.n);
    st.mean = ref + dm;
    if (st.n > 1) {
        double q = 0.0;
        for (double v : values) q += (v - ref - dm) * (v - ref - dm);
        st.se = std::sqrt(q / static_cast<double>(st.n - 1) / static_cast<double>(st.n));
    }
    return st;
}

namespace {

double sq_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

// Fills avg with sum_k tau_k g_k and g0 with the main sample; returns |grad f_0|^2.
struct Sampler {
    const RunConfig& cfg;
    std::vector<Vec> gk;
    Vec g0, avg;

    explicit Sampler(const RunConfig& c)
        : cfg(c), gk(c.collaborators.size(), Vec(c.main.dim())), g0(c.main.dim()), avg(c.main.dim()) {}

    double draw(std::span<const double> x, std::uint64_t step, StreamDomain dom, bool with_collabs) {
        NormalStream s0({cfg.seed, 0, step, dom}, cfg.antithetic);
        double gn = sample_gradient_into(cfg.main, x, s0, g0);
        if (with_collabs) {
            for (std::size_t k = 0; k < gk.size(); ++k) {
                NormalStream sk({cfg.seed, static_cast<std::uint32_t>(k + 1), step, dom}, cfg.antithetic);
                sample_gradient_into(cfg.collaborators[k], x, sk, gk[k]);
            }
            kernel::weighted_average(gk, cfg.weights.tau, avg);
        }
        return gn;
    }
};

Vec warm_start_bias(const RunConfig& cfg, std::span<const double> x) {
    Sampler sm(cfg);
    Vec c(x.size(), 0.0);
    for (int s = 0; s < cfg.c0.samples; ++s) {
        sm.draw(x, static_cast<std::uint64_t>(s), StreamDomain::WarmStart, true);
        for (std::size_t d = 0; d < c.size(); ++d) c[d] += sm.avg[d] - sm.g0[d];
    }
    for (auto& v : c) v /= cfg.c0.samples;
    return c;
}

void true_bias_into(const RunConfig& cfg, std::span<const double> x, std::span<double> scratch,
                    std::span<double> out) {
    true_gradient_into(cfg.main, x, out);
    for (auto& v : out) v = -v;
    for (std::size_t k = 0; k < cfg.collaborators.size(); ++k) {
        true_gradient_into(cfg.collaborators[k], x, scratch);
        for (std::size_t d = 0; d < out.size(); ++d) out[d] += cfg.weights.tau[k] * scratch[d];
    }
}

}  // namespace

Vec initial_bias_estimate(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.aggregator != Aggregator::BC) throw std::invalid_argument("initial_bias_estimate: BC only");
    Vec x = cfg.initial_iterate();
    switch (cfg.c0.kind) {
        case C0Kind::Zero: return Vec(x.size(), 0.0);
        case C0Kind::WarmStart: return warm_start_bias(cfg, x);
        case C0Kind::FirstBias: break;
    }
    Sampler sm(cfg);
    sm.draw(x, 0, StreamDomain::Gradient, true);
    Vec c(x.size());
    for (std::size_t d = 0; d < c.size(); ++d) c[d] = sm.avg[d] - sm.g0[d];
    return c;
}

Trace run(const RunConfig& cfg) {
    cfg.validate();
    const std::size_t dim = cfg.main.dim();
    const auto T = cfg.horizon;
    const double alpha = cfg.weights.alpha;
    const auto agg = cfg.aggregator;
    const bool collab = agg != Aggregator::Alone;

    Trace tr;
    tr.test_loss.reserve(static_cast<std::size_t>(T) + 1);
    tr.grad_norm_sq.reserve(static_cast<std::size_t>(T) + 1);

    Vec x = cfg.initial_iterate();
    Vec g(dim), c(dim, 0.0), b(dim), scratch(dim);
    Sampler sm(cfg);

    if (agg == Aggregator::BC && cfg.c0.kind == C0Kind::WarmStart) c = warm_start_bias(cfg, x);

    const auto window = plateau_window(T);
    const auto plateau_start = T - window + 1;
    tr.plateau_iterate.assign(dim, 0.0);

    auto snapshot = [&](std::int64_t t) {
        if (cfg.snapshot_stride > 0 && t % cfg.snapshot_stride == 0) {
            tr.snapshot_steps.push_back(t);
            tr.snapshots.push_back(x);
        }
        if (t >= plateau_start)
            for (std::size_t d = 0; d < dim; ++d) tr.plateau_iterate[d] += x[d];
    };

    for (std::int64_t t = 0; t < T; ++t) {
        snapshot(t);
        double gn = sm.draw(x, static_cast<std::uint64_t>(t), StreamDomain::Gradient, collab);
        tr.test_loss.push_back(eval_loss(cfg.main, x));
        tr.grad_norm_sq.push_back(gn);

        switch (agg) {
            case Aggregator::Alone: g = sm.g0; break;
            case Aggregator::WGA: kernel::mix(sm.g0, sm.avg, alpha, g); break;
            case Aggregator::BC:
                for (std::size_t d = 0; d < dim; ++d) b[d] = sm.avg[d] - sm.g0[d];
                if (t == 0 && cfg.c0.kind == C0Kind::FirstBias) c = b;
                kernel::mix_corrected(sm.g0, sm.avg, c, alpha, g);
                kernel::ema(c, b, cfg.weights.beta);
                break;
            case Aggregator::OracleBC: {
                true_bias_into(cfg, x, scratch, b);
                NormalStream on({cfg.seed, 0, static_cast<std::uint64_t>(t), StreamDomain::Oracle}, cfg.antithetic);
                kernel::oracle_estimate(b, on, cfg.oracle_v, cfg.collaborators.size(), c);
                kernel::mix_corrected(sm.g0, sm.avg, c, alpha, g);
                break;
            }
        }

        const double eta = cfg.step.at(t);
        bool bad = false;
        for (std::size_t d = 0; d < dim; ++d) {
            x[d] -= eta * g[d];
            if (!std::isfinite(x[d]) || std::abs(x[d]) > kDivergenceThreshold) bad = true;
        }
        if (bad) {
            tr.diverged = true;
            tr.steps_completed = t;
            tr.final_iterate = x;
            return tr;
        }
    }
    snapshot(T);
    tr.test_loss.push_back(eval_loss(cfg.main, x));
    true_gradient_into(cfg.main, x, g);
    tr.grad_norm_sq.push_back(sq_norm(g));
    tr.steps_completed = T;
    tr.final_iterate = x;
    for (auto& v : tr.plateau_iterate) v /= static_cast<double>(window);
    return tr;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    auto worker = [&] {
        for (;;) {
            auto i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lk(mu);
                if (!err) err = std::current_exception();
                next.store(count);
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

RunResult run_replicated(const RunConfig& cfg, std::span<const std::uint64_t> seeds, const ReplicateOptions& opts) {
    cfg.validate();
    if (seeds.empty()) throw std::invalid_argument("run_replicated: need at least one seed");
    RunResult res;
    res.seeds.assign(seeds.begin(), seeds.end());
    const auto len = static_cast<std::size_t>(cfg.horizon) + 1;
    Vec sum_loss(len, 0.0), sum_grad(len, 0.0);
    Vec gaps, plateaus, avg_grads;
    std::size_t ok = 0;

    // fixed-size chunks keep memory bounded; accumulation is always in seed order
    const std::size_t chunk = 64;
    std::vector<Trace> buf;
    for (std::size_t lo = 0; lo < seeds.size(); lo += chunk) {
        std::size_t n = std::min(chunk, seeds.size() - lo);
        buf.assign(n, Trace{});
        parallel_for(n, opts.threads, [&](std::size_t i) {
            RunConfig c = cfg;
            c.seed = seeds[lo + i];
            buf[i] = run(c);
        });
        for (std::size_t i = 0; i < n; ++i) {
            auto& tr = buf[i];
            if (tr.diverged) {
                res.diverged_seeds.push_back(seeds[lo + i]);
                res.per_seed_plateau.push_back(std::numeric_limits<double>::quiet_NaN());
                res.per_seed_plateau_iterate.emplace_back();
            } else {
                ++ok;
                for (std::size_t t = 0; t < len; ++t) {
                    sum_loss[t] += tr.test_loss[t];
                    sum_grad[t] += tr.grad_norm_sq[t];
                }
                gaps.push_back(tr.final_gap());
                plateaus.push_back(tr.plateau_loss());
                avg_grads.push_back(tr.avg_grad_norm_sq());
                res.per_seed_plateau.push_back(plateaus.back());
                res.per_seed_plateau_iterate.push_back(tr.plateau_iterate);
            }
            if (opts.keep_traces) res.traces.push_back(std::move(tr));
        }
    }
    res.final_gap = summarize(gaps);
    res.plateau_loss = summarize(plateaus);
    res.avg_grad_norm_sq = summarize(avg_grads);
    if (ok > 0) {
        for (auto& v : sum_loss) v /= static_cast<double>(ok);
        for (auto& v : sum_grad) v /= static_cast<double>(ok);
        res.mean_test_loss = std::move(sum_loss);
        res.mean_grad_norm_sq = std::move(sum_grad);
    }
    return res;
}

SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "zeta") return SweepAxis::Zeta;
    if (s == "N") return SweepAxis::N;
    if (s == "alpha") return SweepAxis::Alpha;
    if (s == "beta") return SweepAxis::Beta;
    if (s == "eta") return SweepAxis::Eta;
    if (s == "delta") return SweepAxis::Delta;
    if (s == "sigma") return SweepAxis::Sigma;
    if (s == "T") return SweepAxis::T;
    throw std::invalid_argument("unknown sweep axis '" + s + "' (zeta, N, alpha, beta, eta, delta, sigma, T)");
}

std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::Zeta: return "zeta";
        case SweepAxis::N: return "N";
        case SweepAxis::Alpha: return "alpha";
        case SweepAxis::Beta: return "beta";
        case SweepAxis::Eta: return "eta";
        case SweepAxis::Delta: return "delta";
        case SweepAxis::Sigma: return "sigma";
        case SweepAxis::T: return "T";
    }
    return "?";
}

QuadraticTask averaged_collaborator(const QuadraticTask& one, int n) {
    if (n < 1) throw std::invalid_argument("N must be >= 1");
    QuadraticTask t = one;
    t.noise_std = one.noise_std / std::sqrt(static_cast<double>(n));
    return t;
}

RunConfig apply_axis(const RunConfig& base, SweepAxis axis, double value, bool alpha_follows_n) {
    RunConfig c = base;
    auto need_collab = [&] {
        if (c.collaborators.empty()) throw std::invalid_argument("sweep axis " + to_string(axis) + " needs collaborators");
    };
    const auto dim = c.main.dim();
    switch (axis) {
        case SweepAxis::Zeta: {
            need_collab();
            if (!(value >= 0.0)) throw std::invalid_argument("zeta must be >= 0");
            double per = value / std::sqrt(static_cast<double>(dim));
            for (auto& k : c.collaborators)
                for (std::size_t d = 0; d < dim; ++d) k.optimum[d] = c.main.optimum[d] + per / k.curvature[d];
            break;
        }
        case SweepAxis::N: {
            need_collab();
            double r = std::round(value);
            if (r < 1.0 || std::abs(r - value) > 1e-9) throw std::invalid_argument("N must be a positive integer");
            int n = static_cast<int>(r);
            for (auto& k : c.collaborators) k = averaged_collaborator(k, n);
            if (alpha_follows_n) c.weights.alpha = r / (r + 1.0);
            break;
        }
        case SweepAxis::Alpha: c.weights.alpha = value; break;
        case SweepAxis::Beta: c.weights.beta = value; break;
        case SweepAxis::Eta: c.step = StepSize::constant(value); break;
        case SweepAxis::Delta: {
            need_collab();
            if (!(value >= 0.0)) throw std::invalid_argument("delta must be >= 0");
            for (auto& k : c.collaborators)
                for (std::size_t d = 0; d < dim; ++d) {
                    double w = k.curvature[d] * (k.optimum[d] - c.main.optimum[d]);
                    k.curvature[d] = c.main.curvature[d] + value;
                    k.optimum[d] = c.main.optimum[d] + w / k.curvature[d];
                }
            break;
        }
        case SweepAxis::Sigma: {
            if (!(value >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
            double ref = c.main.noise_std;
            for (auto& k : c.collaborators) k.noise_std = ref > 0.0 ? k.noise_std * value / ref : value;
            c.main.noise_std = value;
            break;
        }
        case SweepAxis::T: {
            double r = std::round(value);
            if (r < 1.0 || std::abs(r - value) > 1e-9) throw std::invalid_argument("T must be a positive integer");
            c.horizon = static_cast<std::int64_t>(r);
            break;
        }
    }
    return c;
}

std::vector<SweepPoint> sweep(const RunConfig& base, SweepAxis axis, std::span<const double> values,
                              std::span<const std::uint64_t> seeds, const SweepOptions& opts) {
    std::vector<SweepPoint> out;
    out.reserve(values.size());
    // validate everything up front so a bad value fails before any run
    for (double v : values) {
        auto c = apply_axis(base, axis, v, opts.alpha_follows_n);
        c.validate();
        out.push_back({v, std::move(c), {}});
    }
    for (auto& p : out) p.result = run_replicated(p.config, seeds, opts.replicate);
    return out;
}

std::vector<Vec> mean_dynamics_oracle(const RunConfig& cfg, std::int64_t horizon) {
    cfg.validate();
    if (cfg.aggregator == Aggregator::BC || cfg.aggregator == Aggregator::OracleBC)
        throw std::invalid_argument("mean dynamics oracle covers Alone and WGA only");
    const double a = cfg.aggregator == Aggregator::WGA ? cfg.weights.alpha : 0.0;
    const auto dim = cfg.main.dim();
    // E g = H x - h per coordinate
    Vec H(dim), h(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        H[d] = (1.0 - a) * cfg.main.curvature[d];
        h[d] = (1.0 - a) * cfg.main.curvature[d] * cfg.main.optimum[d];
        if (a > 0.0)
            for (std::size_t k = 0; k < cfg.collaborators.size(); ++k) {
                const auto& t = cfg.collaborators[k];
                H[d] += a * cfg.weights.tau[k] * t.curvature[d];
                h[d] += a * cfg.weights.tau[k] * t.curvature[d] * t.optimum[d];
            }
    }
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(horizon) + 1);
    Vec x = cfg.initial_iterate();
    out.push_back(x);
    for (std::int64_t t = 0; t < horizon; ++t) {
        double eta = cfg.step.at(t);
        for (std::size_t d = 0; d < dim; ++d) x[d] -= eta * (H[d] * x[d] - h[d]);
        out.push_back(x);
    }
    return out;
}

Vec wga_fixed_point(const RunConfig& cfg) {
    cfg.validate();
    const double a = cfg.weights.alpha;
    const auto dim = cfg.main.dim();
    Vec x(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        double H = (1.0 - a) * cfg.main.curvature[d];
        double h = H * cfg.main.optimum[d];
        for (std::size_t k = 0; k < cfg.collaborators.size(); ++k) {
            const auto& t = cfg.collaborators[k];
            H += a * cfg.weights.tau[k] * t.curvature[d];
            h += a * cfg.weights.tau[k] * t.curvature[d] * t.optimum[d];
        }
        x[d] = h / H;
    }
    return x;
}

}  // namespace collabopt
