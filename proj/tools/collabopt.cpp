#include <collabopt/bounds.hpp>
#include <collabopt/config.hpp>
#include <collabopt/csv.hpp>
#include <collabopt/figures.hpp>
#include <collabopt/schedules.hpp>
#include <collabopt/simulator.hpp>

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

using namespace collabopt;

namespace {

constexpr int kConfigError = 1;
constexpr int kInternalError = 2;

// "0-19" or "1,5,9" (ranges and lists may be mixed)
std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        try {
            auto dash = part.find('-');
            if (dash == std::string::npos) {
                out.push_back(std::stoull(part));
            } else {
                auto lo = std::stoull(part.substr(0, dash)), hi = std::stoull(part.substr(dash + 1));
                if (hi < lo) throw ConfigError("seed range '" + part + "' is empty");
                for (auto s = lo; s <= hi; ++s) out.push_back(s);
            }
        } catch (const std::logic_error&) {
            throw ConfigError("cannot parse seeds '" + spec + "'");
        }
    }
    if (out.empty()) throw ConfigError("no seeds given");
    return out;
}

struct InstanceFlags {
    std::string aggregator = "bc";
    double a0 = 1.0, x0_star = 0.0, sigma = 10.0, delta = 1.0, zeta = 4.0;
    int n = 10;
    std::optional<double> alpha;
    double beta = 1e-4, eta = 1e-4, x0 = kDefaultInitialIterate, oracle_v = 0.0;
    std::int64_t horizon = 200000;
    std::string c0 = "first_bias";
};

void add_instance_flags(CLI::App* c, InstanceFlags& f) {
    c->add_option("--aggregator", f.aggregator, "alone, wga, bc or oracle_bc")->capture_default_str();
    c->add_option("--a0", f.a0, "main-task curvature")->capture_default_str();
    c->add_option("--x0star", f.x0_star, "main-task optimum")->capture_default_str();
    c->add_option("--sigma", f.sigma, "per-agent gradient noise std")->capture_default_str();
    c->add_option("--delta", f.delta, "collaborator curvature minus a0")->capture_default_str();
    c->add_option("--zeta", f.zeta, "gradient offset between the tasks")->capture_default_str();
    c->add_option("--N", f.n, "number of averaged collaborators")->capture_default_str();
    c->add_option("--alpha", f.alpha, "collaboration weight (default N/(N+1))");
    c->add_option("--beta", f.beta, "BC moving-average weight")->capture_default_str();
    c->add_option("--eta", f.eta, "constant step size")->capture_default_str();
    c->add_option("--x0", f.x0, "initial iterate")->capture_default_str();
    c->add_option("--T", f.horizon, "number of steps")->capture_default_str();
    c->add_option("--oracle-v", f.oracle_v, "bias-oracle noise std")->capture_default_str();
    c->add_option("--c0", f.c0, "first_bias, zero or warm_start:S")->capture_default_str();
}

RunConfig instance_from_flags(const InstanceFlags& f) {
    RunConfig c;
    try {
        c.aggregator = aggregator_from_string(f.aggregator);
        c.c0 = c0_policy_from_string(f.c0);
        c.main = QuadraticTask{{f.a0}, {f.x0_star}, f.sigma, 0.0};
        double a1 = f.a0 + f.delta;
        if (!(a1 > 0.0)) throw ConfigError("a0 + delta must be > 0");
        QuadraticTask one{{a1}, {f.x0_star + f.zeta / a1}, f.sigma, 0.0};
        c.collaborators = {averaged_collaborator(one, f.n)};
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    double alpha = f.alpha.value_or(f.n / (f.n + 1.0));
    c.weights = CollaborationWeights{c.aggregator == Aggregator::Alone ? 0.0 : alpha, {1.0}, f.beta};
    c.step = StepSize::constant(f.eta);
    c.horizon = f.horizon;
    c.x0 = {f.x0};
    c.oracle_v = f.oracle_v;
    return c;
}

void write_all(const std::filesystem::path& dir, const std::vector<OutputFile>& files) {
    for (const auto& f : files) write_file_atomic(dir / f.name, f.content);
}

std::string value_tag(double v) {
    auto s = format_number(v);
    for (auto& ch : s)
        if (ch == '-') ch = 'm';
    return s;
}

std::string run_gnuplot(const std::vector<std::string>& csvs) {
    std::string s = "set datafile separator ','\nset key autotitle columnhead\nset logscale xy\nplot ";
    for (std::size_t i = 0; i < csvs.size(); ++i) {
        if (i) s += ", \\\n     ";
        s += "'" + csvs[i] + "' using ($1+1):2 with lines title '" + csvs[i] + "'";
    }
    return s + "\n";
}

int cmd_run(const ExperimentConfig& cfg) {
    auto dir = resolve_output_dir(cfg.output.dir);
    std::vector<std::pair<std::string, RunConfig>> points;
    if (cfg.sweep) {
        for (double v : cfg.sweep->values)
            points.emplace_back(cfg.output.prefix + "_" + to_string(cfg.sweep->axis) + value_tag(v),
                                apply_axis(cfg.run, cfg.sweep->axis, v, cfg.sweep->alpha_follows_n));
    } else {
        points.emplace_back(cfg.output.prefix, cfg.run);
    }
    auto summary = result_table();
    std::vector<OutputFile> files;
    std::vector<std::string> means;
    for (const auto& [label, rc] : points) {
        auto r = run_replicated(rc, cfg.seeds, {cfg.threads, cfg.output.per_seed_traces});
        if (cfg.output.per_seed_traces)
            for (std::size_t i = 0; i < r.traces.size(); ++i)
                files.push_back({label + "_seed" + std::to_string(cfg.seeds[i]) + ".csv", trace_csv(r.traces[i])});
        if (!r.mean_test_loss.empty()) {
            files.push_back({label + "_mean.csv", trace_csv(r.mean_test_loss, r.mean_grad_norm_sq)});
            means.push_back(label + "_mean.csv");
        }
        append_result_rows(summary, label, r);
        std::printf("%s: final loss %s", label.c_str(), format_number(r.final_gap.mean).c_str());
        if (r.final_gap.se) std::printf(" +- %s", format_number(*r.final_gap.se).c_str());
        std::printf(", plateau %s over %zu seeds", format_number(r.plateau_loss.mean).c_str(), r.plateau_loss.n);
        if (!r.diverged_seeds.empty()) {
            std::printf("; diverged seeds:");
            for (auto s : r.diverged_seeds) std::printf(" %llu", static_cast<unsigned long long>(s));
        }
        std::printf("\n");
    }
    files.push_back({cfg.output.prefix + "_summary.csv", summary.str()});
    if (cfg.output.gnuplot && !means.empty()) files.push_back({cfg.output.prefix + ".gp", run_gnuplot(means)});
    write_all(dir, files);
    std::printf("wrote %zu files to %s\n", files.size(), dir.string().c_str());
    return 0;
}

struct BoundFlags {
    double L = 1.0, mu = 1.0, m = 0.0, zeta_sq = 0.0, delta = 0.0, sigma0_sq = 1.0, sigma_a_sq = 1.0;
    double alpha = 0.0, f0 = 1.0, grad0_sq = 0.0, M = 0.0, v_sq = 0.0, e0 = 0.0;
    std::int64_t horizon = 1000;
    int n = 1;
    std::optional<double> eta, beta;
    std::optional<int> c;
    std::string ns = "1,2,5,10,20,50,100", ratios;
};

ScheduleInputs sched_from(const BoundFlags& f) {
    ScheduleInputs s;
    s.sim.smoothness = f.L;
    s.sim.pl_constant = f.mu;
    s.sim.grad_scale_mismatch = f.m;
    s.sim.grad_offset_sq = f.zeta_sq;
    s.sim.hessian_dissimilarity = f.delta;
    s.horizon = f.horizon;
    s.f0_gap = f.f0;
    s.sigma0_sq = f.sigma0_sq;
    s.sigma_a_sq = f.sigma_a_sq;
    s.alpha = f.alpha;
    s.oracle_var = f.v_sq;
    s.grad0_sq = f.grad0_sq;
    s.num_collaborators = static_cast<std::size_t>(std::max(1, f.n));
    s.noise_scale = f.M;
    return s;
}

Vec parse_list(const std::string& s) {
    Vec out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        try {
            out.push_back(std::stod(part));
        } catch (const std::logic_error&) {
            throw ConfigError("cannot parse number '" + part + "'");
        }
    }
    return out;
}

int cmd_bounds(const std::string& kind, const BoundFlags& f, const std::string& out) {
    if (kind == "gainfactor") {
        auto g = figure_gainfactor(parse_list(f.ns), f.ratios.empty() ? Vec{} : parse_list(f.ratios));
        CsvTable t({"N", "ratio", "speedup"});
        for (std::size_t i = 0; i < g.ns.size(); ++i)
            for (std::size_t j = 0; j < g.ratios.size(); ++j)
                t.add_row({format_number(g.ns[i]), format_number(g.ratios[j]), format_number(g.speedup[i][j])});
        if (out.empty())
            std::cout << t.str();
        else
            write_file_atomic(out, t.str());
        return 0;
    }
    auto s = sched_from(f);
    s.validate();
    BoundInputs b{s, f.e0, 1.0, 0.0, f.c.value_or(recursion_constant(s))};
    CsvTable t({"bound", "eta", "beta", "value"});
    double value = 0.0;
    if (kind == "wga-nonconvex") {
        b.eta = eta_wga_nonconvex(s);
        value = bound_wga_nonconvex(b);
    } else if (kind == "wga-pl") {
        double e = eta_wga_pl(s);
        if (e <= 0.0) {
            std::fprintf(stderr, "note: the PL step-size formula is vacuous here; using the non-convex step\n");
            e = eta_wga_nonconvex(s);
        }
        b.eta = f.eta.value_or(e);
        value = bound_wga_pl(b);
    } else if (kind == "wga-pl-decreasing") {
        value = bound_wga_pl_decreasing(b);
    } else if (kind == "oracle-nonconvex" || kind == "oracle-pl") {
        bool pl = kind == "oracle-pl";
        double emax = 1.0 / f.L;
        if (f.M > 0.0) emax = std::min(emax, 1.0 / (2.0 * f.L * f.M));
        b.eta = f.eta.value_or(emax);
        value = bound_oracle(b, pl ? Regime::PL : Regime::NonConvex);
    } else if (kind == "bc") {
        b.eta = f.eta.value_or(eta_bc(s));
        if (f.beta) {
            b.beta = *f.beta;
        } else {
            auto choice = beta_bc(s, b.eta);
            if (choice.warning) std::fprintf(stderr, "warning: %s\n", choice.warning->c_str());
            b.beta = choice.beta;
        }
        value = bound_bc(b);
    } else {
        throw ConfigError("unknown bound '" + kind +
                          "' (wga-nonconvex, wga-pl, wga-pl-decreasing, oracle-nonconvex, oracle-pl, bc, gainfactor)");
    }
    t.add_row({kind, format_number(b.eta), format_number(b.beta), format_number(value)});
    if (out.empty())
        std::cout << t.str();
    else
        write_file_atomic(out, t.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Collaborative SGD simulator: runs, sweeps, figures and bounds"};
    app.require_subcommand(1);

    // run
    auto* run_cmd = app.add_subcommand("run", "simulate one configuration (or a sweep) over seeds");
    std::string config_path, seeds_spec = "0", out_dir, prefix = "run", sweep_axis, sweep_values;
    std::optional<std::uint64_t> single_seed;
    unsigned threads = 0;
    bool no_per_seed = false, gnuplot = false, alpha_follows_n = false;
    InstanceFlags inst;
    run_cmd->add_option("--config", config_path, "JSON experiment config (flags below are then ignored)");
    add_instance_flags(run_cmd, inst);
    run_cmd->add_option("--seed", single_seed, "single seed");
    run_cmd->add_option("--seeds", seeds_spec, "seed list, e.g. 0-19 or 1,4,7")->capture_default_str();
    run_cmd->add_option("--sweep", sweep_axis, "sweep axis: zeta, N, alpha, beta, eta, delta, sigma, T");
    run_cmd->add_option("--values", sweep_values, "comma-separated sweep values");
    run_cmd->add_flag("--alpha-follows-n", alpha_follows_n, "N sweep sets alpha = N/(N+1)");
    run_cmd->add_option("--out", out_dir, "output directory (default $COLLABOPT_OUT_DIR or ./out)");
    run_cmd->add_option("--prefix", prefix, "output file stem")->capture_default_str();
    run_cmd->add_option("--threads", threads, "worker threads (0: all cores)");
    run_cmd->add_flag("--no-per-seed", no_per_seed, "skip per-seed trace files");
    run_cmd->add_flag("--gnuplot", gnuplot, "also write a gnuplot script");

    // figure
    auto* fig_cmd = app.add_subcommand("figure", "reproduce a named figure");
    std::string fig_name, fig_seeds, fig_values, fig_c0;
    FigureOptions fo;
    std::optional<double> f_eta, f_beta, f_alpha;
    std::optional<int> f_n;
    fig_cmd->add_option("name", fig_name, "fig2, fig3, fig4, fig5, gainfactor or sublinear")->required();
    fig_cmd->add_option("--seeds", fig_seeds, "seed list (default 0-19)");
    fig_cmd->add_option("--T", fo.horizon, "steps per run")->capture_default_str();
    fig_cmd->add_option("--x0", fo.x0, "initial iterate")->capture_default_str();
    fig_cmd->add_option("--sigma", fo.sigma, "gradient noise std")->capture_default_str();
    fig_cmd->add_option("--delta", fo.delta, "curvature gap")->capture_default_str();
    fig_cmd->add_option("--zeta", fo.zeta, "gradient offset")->capture_default_str();
    fig_cmd->add_option("--eta", f_eta, "override the figure's step size");
    fig_cmd->add_option("--beta", f_beta, "override the BC weight");
    fig_cmd->add_option("--alpha", f_alpha, "override the collaboration weight");
    fig_cmd->add_option("--N", f_n, "override N");
    fig_cmd->add_option("--values", fig_values, "swept zeta (fig3/4), N (fig5), N grid (gainfactor) or m (sublinear)");
    fig_cmd->add_option("--c0", fig_c0, "BC bias-estimate start: zero, first_bias, warm_start:S");
    fig_cmd->add_option("--threads", fo.threads, "worker threads (0: all cores)");
    fig_cmd->add_option("--out", out_dir, "output directory");
    fig_cmd->add_flag("--gnuplot", fo.gnuplot, "also write a gnuplot script");

    // bounds
    auto* bnd_cmd = app.add_subcommand("bounds", "evaluate a convergence bound");
    std::string bound_kind, bound_out;
    BoundFlags bf;
    bnd_cmd->add_option("kind", bound_kind,
                        "wga-nonconvex, wga-pl, wga-pl-decreasing, oracle-nonconvex, oracle-pl, bc, gainfactor")
        ->required();
    bnd_cmd->add_option("--L", bf.L)->capture_default_str();
    bnd_cmd->add_option("--mu", bf.mu)->capture_default_str();
    bnd_cmd->add_option("--m", bf.m, "gradient-scale mismatch")->capture_default_str();
    bnd_cmd->add_option("--zeta-sq", bf.zeta_sq)->capture_default_str();
    bnd_cmd->add_option("--delta", bf.delta)->capture_default_str();
    bnd_cmd->add_option("--sigma0-sq", bf.sigma0_sq)->capture_default_str();
    bnd_cmd->add_option("--sigma-a-sq", bf.sigma_a_sq)->capture_default_str();
    bnd_cmd->add_option("--alpha", bf.alpha)->capture_default_str();
    bnd_cmd->add_option("--T", bf.horizon)->capture_default_str();
    bnd_cmd->add_option("--F0", bf.f0)->capture_default_str();
    bnd_cmd->add_option("--grad0-sq", bf.grad0_sq)->capture_default_str();
    bnd_cmd->add_option("--M", bf.M, "relative noise scale")->capture_default_str();
    bnd_cmd->add_option("--v-sq", bf.v_sq, "oracle noise variance")->capture_default_str();
    bnd_cmd->add_option("--N", bf.n)->capture_default_str();
    bnd_cmd->add_option("--E0", bf.e0)->capture_default_str();
    bnd_cmd->add_option("--eta", bf.eta, "step size (default: the prescribed one)");
    bnd_cmd->add_option("--beta", bf.beta, "BC weight (default: the prescribed one)");
    bnd_cmd->add_option("--c", bf.c, "recursion constant 2 or 4 (default from M)");
    bnd_cmd->add_option("--grid-n", bf.ns, "gainfactor N grid")->capture_default_str();
    bnd_cmd->add_option("--grid-ratio", bf.ratios, "gainfactor ratio grid");
    bnd_cmd->add_option("--out", bound_out, "write CSV here instead of stdout");

    // tau
    auto* tau_cmd = app.add_subcommand("tau", "optimal collaborator weights");
    std::string t_sig, t_zeta;
    double t_L = 1.0, t_mu = 1.0, t_alpha = 0.5, t_m = 0.0;
    std::int64_t t_T = 1000;
    tau_cmd->add_option("--sigmas", t_sig, "collaborator noise variances, comma-separated")->required();
    tau_cmd->add_option("--zetas", t_zeta, "collaborator offsets zeta_k^2, comma-separated")->required();
    tau_cmd->add_option("--L", t_L)->capture_default_str();
    tau_cmd->add_option("--mu", t_mu)->capture_default_str();
    tau_cmd->add_option("--T", t_T)->capture_default_str();
    tau_cmd->add_option("--alpha", t_alpha)->capture_default_str();
    tau_cmd->add_option("--m", t_m)->capture_default_str();

    // config
    auto* cfg_cmd = app.add_subcommand("config", "check or normalise a config file");
    cfg_cmd->require_subcommand(1);
    std::string cfg_file;
    auto* cfg_validate = cfg_cmd->add_subcommand("validate", "parse and validate");
    cfg_validate->add_option("file", cfg_file)->required();
    auto* cfg_dump = cfg_cmd->add_subcommand("dump", "print the normalised config");
    cfg_dump->add_option("file", cfg_file)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    try {
        if (*run_cmd) {
            ExperimentConfig cfg;
            if (!config_path.empty()) {
                cfg = load_config(config_path);
                if (!out_dir.empty()) cfg.output.dir = out_dir;
                if (threads) cfg.threads = threads;
            } else {
                cfg.run = instance_from_flags(inst);
                cfg.seeds = single_seed ? std::vector<std::uint64_t>{*single_seed} : parse_seeds(seeds_spec);
                if (!sweep_axis.empty()) {
                    SweepSpec sp;
                    try {
                        sp.axis = sweep_axis_from_string(sweep_axis);
                    } catch (const std::invalid_argument& e) {
                        throw ConfigError(e.what());
                    }
                    sp.values = parse_list(sweep_values);
                    sp.alpha_follows_n = alpha_follows_n;
                    cfg.sweep = sp;
                }
                cfg.output.dir = out_dir;
                cfg.output.prefix = prefix;
                cfg.output.per_seed_traces = !no_per_seed;
                cfg.output.gnuplot = gnuplot;
                cfg.threads = threads;
                cfg.validate();
            }
            return cmd_run(cfg);
        }
        if (*fig_cmd) {
            if (!fig_seeds.empty()) fo.seeds = parse_seeds(fig_seeds);
            if (!fig_values.empty()) fo.values = parse_list(fig_values);
            if (!fig_c0.empty()) {
                try {
                    fo.c0 = c0_policy_from_string(fig_c0);
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(e.what());
                }
            }
            fo.eta = f_eta;
            fo.beta = f_beta;
            fo.alpha = f_alpha;
            fo.n = f_n;
            FigureBundle b;
            try {
                b = render_figure(fig_name, fo);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            auto dir = resolve_output_dir(out_dir);
            write_all(dir, b.files);
            std::cout << b.summary << "wrote " << b.files.size() << " files to " << dir.string() << "\n";
            return 0;
        }
        if (*bnd_cmd) {
            try {
                return cmd_bounds(bound_kind, bf, bound_out);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        }
        if (*tau_cmd) {
            Vec s = parse_list(t_sig), z = parse_list(t_zeta);
            try {
                double coeff = tau_qp_coeff(t_L, t_mu, t_T, t_alpha, t_m);
                auto tau = tau_qp(s, z, coeff);
                CsvTable t({"k", "tau"});
                for (std::size_t k = 0; k < tau.size(); ++k) t.add_row({std::to_string(k + 1), format_number(tau[k])});
                std::cout << t.str() << "objective," << format_number(tau_qp_objective(tau, s, z, coeff)) << "\n";
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            return 0;
        }
        if (*cfg_validate) {
            auto c = load_config(cfg_file);
            std::printf("ok: %zu seed(s)%s\n", c.seeds.size(), c.sweep ? ", sweep" : "");
            return 0;
        }
        if (*cfg_dump) {
            std::cout << dump_config(load_config(cfg_file));
            return 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kInternalError;
    }
    return kInternalError;
}
