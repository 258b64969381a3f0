#include <collabopt/figures.hpp>

#include <collabopt/bounds.hpp>
#include <collabopt/csv.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace collabopt {

std::vector<std::uint64_t> FigureOptions::default_figure_seeds() {
    std::vector<std::uint64_t> s(20);
    std::iota(s.begin(), s.end(), 0);
    return s;
}

RunConfig figure_instance(const FigureOptions& o, Aggregator agg, int n, double alpha, double beta, double eta) {
    if (n < 1) throw std::invalid_argument("N must be >= 1");
    RunConfig c;
    c.main = QuadraticTask{{o.a0}, {0.0}, o.sigma, 0.0};
    double a1 = o.a0 + o.delta;
    QuadraticTask one{{a1}, {o.zeta / a1}, o.sigma, 0.0};
    c.collaborators = {averaged_collaborator(one, n)};
    c.aggregator = agg;
    c.weights = CollaborationWeights{alpha, {1.0}, beta};
    c.step = StepSize::constant(eta);
    c.horizon = o.horizon;
    c.x0 = {o.x0};
    c.c0 = o.c0;
    return c;
}

namespace {

ReplicateOptions repl(const FigureOptions& o, bool traces = false) { return {o.threads, traces}; }

Curve make_curve(std::string label, double value, RunConfig cfg, const FigureOptions& o) {
    Curve c;
    c.label = std::move(label);
    c.value = value;
    c.result = run_replicated(cfg, o.seeds, repl(o));
    c.config = std::move(cfg);
    if (!c.result.mean_test_loss.empty()) c.time_to_plateau = time_to_plateau(c.result.mean_test_loss);
    return c;
}

std::string label_for(const char* stem, double v) {
    std::ostringstream s;
    s << stem << v;
    return s.str();
}

}  // namespace

Vec fig2_eta_grid() { return {1e-5, 1e-4, 1e-3, 1e-2}; }

Fig2Result figure2(const FigureOptions& o) {
    const int n = o.n.value_or(10);
    const double alpha = o.alpha.value_or(n / (n + 1.0));
    const double beta = o.beta.value_or(1e-4);
    const double eta_bc = o.eta.value_or(5e-5);

    auto tune = [&](Aggregator agg, double a, std::vector<TuneEntry>& log) {
        double best = std::numeric_limits<double>::infinity(), best_eta = 0.0;
        for (double eta : fig2_eta_grid()) {
            auto r = run_replicated(figure_instance(o, agg, n, a, beta, eta), o.seeds, repl(o));
            log.push_back({eta, r.plateau_loss.mean, r.diverged_seeds.size()});
            if (r.diverged_seeds.empty() && r.plateau_loss.mean < best) {
                best = r.plateau_loss.mean;
                best_eta = eta;
            }
        }
        if (best_eta == 0.0) throw std::runtime_error("fig2: every grid step size diverged for " + to_string(agg));
        return best_eta;
    };

    Fig2Result r;
    double ea = tune(Aggregator::Alone, 0.0, r.alone_tuning);
    double ew = tune(Aggregator::WGA, alpha, r.wga_tuning);
    r.alone = make_curve("alone", 0.0, figure_instance(o, Aggregator::Alone, n, 0.0, beta, ea), o);
    r.wga = make_curve("wga", 0.0, figure_instance(o, Aggregator::WGA, n, alpha, beta, ew), o);
    r.bc = make_curve("bc", 0.0, figure_instance(o, Aggregator::BC, n, alpha, beta, eta_bc), o);
    return r;
}

SweepFigureResult figure3(const FigureOptions& o) {
    const int n = o.n.value_or(10);
    const double alpha = o.alpha.value_or(n / (n + 1.0));
    const double beta = o.beta.value_or(1e-4);
    const double eta = o.eta.value_or(1e-4);
    Vec zetas = o.values.empty() ? Vec{1.0, 4.0, 16.0} : o.values;
    SweepFigureResult r;
    for (double z : zetas) {
        auto oz = o;
        oz.zeta = z;
        r.curves.push_back(make_curve(label_for("bc_zeta", z), z, figure_instance(oz, Aggregator::BC, n, alpha, beta, eta), o));
    }
    return r;
}

SweepFigureResult figure4(const FigureOptions& o) {
    const int n = o.n.value_or(10);
    const double alpha = o.alpha.value_or(1e-3);
    const double eta = o.eta.value_or(5e-4);
    const double beta = o.beta.value_or(1e-4);
    Vec zetas = o.values.empty() ? Vec{1.0, 4.0, 16.0, 64.0} : o.values;
    SweepFigureResult r;
    for (double z : zetas) {
        auto oz = o;
        oz.zeta = z;
        r.curves.push_back(make_curve(label_for("wga_zeta", z), z, figure_instance(oz, Aggregator::WGA, n, alpha, beta, eta), o));
    }
    r.reference = make_curve("alone", 0.0, figure_instance(o, Aggregator::Alone, n, 0.0, beta, eta), o);
    return r;
}

Fig4Analysis analyze_figure4(const FigureOptions& o, const SweepFigureResult& r) {
    if (!r.reference) throw std::invalid_argument("fig4 analysis needs the Alone reference");
    auto mean_iterate = [](const RunResult& res) {
        double s = 0.0;
        std::size_t k = 0;
        for (const auto& v : res.per_seed_plateau_iterate)
            if (!v.empty()) {
                s += v[0];
                ++k;
            }
        return k ? s / static_cast<double>(k) : std::numeric_limits<double>::quiet_NaN();
    };
    Fig4Analysis a;
    double ref = mean_iterate(r.reference->result);
    Vec xs, ys;
    for (const auto& c : r.curves) {
        double d = mean_iterate(c.result) - ref;
        a.zetas.push_back(c.value);
        a.excess.push_back(0.5 * o.a0 * d * d);
        if (c.value >= 4.0) {
            xs.push_back(c.value);
            ys.push_back(a.excess.back());
        }
        auto quiet = c.config;
        quiet.main.noise_std = 0.0;
        for (auto& k : quiet.collaborators) k.noise_std = 0.0;
        auto tr = run(quiet);
        a.fixed_point_error.push_back(std::abs(tr.final_iterate[0] - wga_fixed_point(quiet)[0]));
    }
    a.slope = xs.size() >= 2 ? loglog_slope(xs, ys) : std::numeric_limits<double>::quiet_NaN();
    return a;
}

SweepFigureResult figure5(const FigureOptions& o) {
    const double beta = o.beta.value_or(1e-4);
    const double eta = o.eta.value_or(5e-4);
    Vec ns = o.values.empty() ? Vec{1.0, 10.0, 100.0} : o.values;
    SweepFigureResult r;
    for (double nv : ns) {
        int n = static_cast<int>(std::lround(nv));
        if (n < 1 || std::abs(nv - n) > 1e-9) throw std::invalid_argument("fig5: N values must be positive integers");
        double alpha = o.alpha.value_or(n / (n + 1.0));
        r.curves.push_back(make_curve(label_for("bc_N", n), nv, figure_instance(o, Aggregator::BC, n, alpha, beta, eta), o));
    }
    return r;
}

GainfactorGrid figure_gainfactor(const Vec& ns, const Vec& ratios) {
    GainfactorGrid g;
    g.ns = ns.empty() ? Vec{1, 2, 5, 10, 20, 50, 100} : ns;
    if (ratios.empty()) {
        for (int k = -12; k <= 12; ++k) g.ratios.push_back(std::pow(10.0, k / 4.0));
    } else {
        g.ratios = ratios;
    }
    g.speedup = gainfactor_surface(g.ns, g.ratios);
    return g;
}

SublinearCurves figure_sublinear(const Vec& ms, int max_n) {
    if (max_n < 1) throw std::invalid_argument("sublinear: max N must be >= 1");
    SublinearCurves s;
    s.ms = ms.empty() ? Vec{0.0, 0.01, 0.1, 0.5, 1.0} : ms;
    for (int n = 1; n <= max_n; ++n) s.ns.push_back(n);
    // zeta = 0, equal per-agent noise; the horizon cancels out of the ratio
    const double sigma_sq = 1.0;
    const std::int64_t T = 1000;
    for (double m : s.ms) {
        Vec row;
        for (int n : s.ns) {
            if (m == 0.0)
                row.push_back(speedup_wga_m0(n, 1.0, 1.0, 0.0, sigma_sq, T));
            else
                row.push_back(wga_speedup(m, 0.0, sigma_sq, sigma_sq, 1.0, 1.0, T, n));
        }
        s.speedup.push_back(std::move(row));
    }
    return s;
}

std::int64_t time_to_plateau(const Vec& mean_loss, std::int64_t window) {
    const auto n = static_cast<std::int64_t>(mean_loss.size());
    if (n == 0) return -1;
    window = std::max<std::int64_t>(1, std::min(window, n));
    // trailing moving average
    Vec sm(static_cast<std::size_t>(n));
    double acc = 0.0;
    for (std::int64_t t = 0; t < n; ++t) {
        acc += mean_loss[t];
        if (t >= window) acc -= mean_loss[t - window];
        sm[t] = acc / static_cast<double>(std::min(t + 1, window));
    }
    auto w = plateau_window(n - 1);
    double plateau = 0.0;
    for (auto t = n - w; t < n; ++t) plateau += mean_loss[t];
    plateau /= static_cast<double>(w);
    auto peak = std::max_element(sm.begin(), sm.end()) - sm.begin();
    for (auto t = peak; t < n; ++t)
        if (sm[t] <= 2.0 * plateau) return t;
    return -1;
}

double loglog_slope(const Vec& x, const Vec& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 paired points");
    double mx = 0, my = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("loglog_slope: values must be > 0");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

namespace {

std::string gnuplot_script(const std::string& title, const std::vector<std::string>& csvs, bool logy = true) {
    std::string s = "set datafile separator ','\nset key autotitle columnhead\nset logscale x\n";
    if (logy) s += "set logscale y\n";
    s += "set title '" + title + "'\nset xlabel 'step'\nset ylabel 'test loss'\nplot ";
    for (std::size_t i = 0; i < csvs.size(); ++i) {
        if (i) s += ", \\\n     ";
        s += "'" + csvs[i] + "' using ($1+1):2 with lines title '" + csvs[i] + "'";
    }
    return s + "\n";
}

void add_curves(FigureBundle& b, const std::string& fig, const std::vector<const Curve*>& curves, bool gnuplot) {
    auto table = result_table();
    std::vector<std::string> names;
    std::ostringstream sum;
    for (const auto* c : curves) {
        std::string name = fig + "_" + c->label + ".csv";
        b.files.push_back({name, trace_csv(c->result.mean_test_loss, c->result.mean_grad_norm_sq)});
        names.push_back(name);
        append_result_rows(table, c->label, c->result);
        sum << c->label << ": plateau " << format_number(c->result.plateau_loss.mean);
        if (c->result.plateau_loss.se) sum << " +- " << format_number(*c->result.plateau_loss.se);
        sum << "  eta " << format_number(c->config.step.eta) << "  time_to_plateau " << c->time_to_plateau;
        if (!c->result.diverged_seeds.empty()) sum << "  diverged seeds " << c->result.diverged_seeds.size();
        sum << "\n";
    }
    b.files.push_back({fig + "_summary.csv", table.str()});
    if (gnuplot) b.files.push_back({fig + ".gp", gnuplot_script(fig, names)});
    b.summary += sum.str();
}

}  // namespace

std::vector<std::string> figure_names() { return {"fig2", "fig3", "fig4", "fig5", "gainfactor", "sublinear"}; }

FigureBundle render_figure(const std::string& name, const FigureOptions& o) {
    FigureBundle b;
    if (name == "fig2") {
        auto r = figure2(o);
        add_curves(b, name, {&r.alone, &r.wga, &r.bc}, o.gnuplot);
        CsvTable tune({"method", "eta", "plateau_loss", "diverged_seeds"});
        for (const auto& e : r.alone_tuning)
            tune.add_row({"alone", format_number(e.eta), format_number(e.plateau), std::to_string(e.diverged)});
        for (const auto& e : r.wga_tuning)
            tune.add_row({"wga", format_number(e.eta), format_number(e.plateau), std::to_string(e.diverged)});
        b.files.push_back({"fig2_tuning.csv", tune.str()});
    } else if (name == "fig3" || name == "fig5") {
        auto r = name == "fig3" ? figure3(o) : figure5(o);
        std::vector<const Curve*> cs;
        for (const auto& c : r.curves) cs.push_back(&c);
        add_curves(b, name, cs, o.gnuplot);
    } else if (name == "fig4") {
        auto r = figure4(o);
        std::vector<const Curve*> cs;
        for (const auto& c : r.curves) cs.push_back(&c);
        cs.push_back(&*r.reference);
        add_curves(b, name, cs, o.gnuplot);
        auto a = analyze_figure4(o, r);
        CsvTable t({"zeta", "excess_loss", "fixed_point_error"});
        for (std::size_t i = 0; i < a.zetas.size(); ++i)
            t.add_row({format_number(a.zetas[i]), format_number(a.excess[i]), format_number(a.fixed_point_error[i])});
        b.files.push_back({"fig4_excess.csv", t.str()});
        b.summary += "excess loss log-log slope: " + format_number(a.slope) + "\n";
    } else if (name == "gainfactor") {
        auto g = figure_gainfactor(o.values);
        CsvTable t({"N", "ratio", "speedup"});
        for (std::size_t i = 0; i < g.ns.size(); ++i)
            for (std::size_t j = 0; j < g.ratios.size(); ++j)
                t.add_row({format_number(g.ns[i]), format_number(g.ratios[j]), format_number(g.speedup[i][j])});
        b.files.push_back({"gainfactor.csv", t.str()});
        if (o.gnuplot)
            b.files.push_back({"gainfactor.gp",
                               "set datafile separator ','\nset logscale xy\nset view map\nset xlabel 'N'\n"
                               "set ylabel 'L sigma^2/(mu T zeta^2)'\nsplot 'gainfactor.csv' every ::1 using 1:2:3 "
                               "with points palette pt 5 notitle\n"});
        b.summary += "gainfactor grid " + std::to_string(g.ns.size()) + " x " + std::to_string(g.ratios.size()) + "\n";
    } else if (name == "sublinear") {
        auto s = figure_sublinear(o.values);
        CsvTable t({"m", "N", "speedup"});
        for (std::size_t i = 0; i < s.ms.size(); ++i)
            for (std::size_t j = 0; j < s.ns.size(); ++j)
                t.add_row({format_number(s.ms[i]), std::to_string(s.ns[j]), format_number(s.speedup[i][j])});
        b.files.push_back({"sublinear.csv", t.str()});
        if (o.gnuplot)
            b.files.push_back({"sublinear.gp",
                               "set datafile separator ','\nset xlabel 'N'\nset ylabel 'speedup'\n"
                               "plot for [m in '" + [&] {
                                   std::string l;
                                   for (double m : s.ms) l += (l.empty() ? "" : " ") + format_number(m);
                                   return l;
                               }() + "'] 'sublinear.csv' every ::1 using ($1==m+0 ? $2 : 1/0):3 with lines title 'm='.m, "
                                      "x+1 dashtype 2 title 'N+1'\n"});
        b.summary += "sublinear curves for " + std::to_string(s.ms.size()) + " values of m\n";
    } else {
        std::string names;
        for (const auto& n : figure_names()) names += (names.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown figure '" + name + "' (valid: " + names + ")");
    }
    return b;
}

}  // namespace collabopt
