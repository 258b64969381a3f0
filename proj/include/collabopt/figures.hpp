#pragma once

#include <collabopt/simulator.hpp>

#include <optional>
#include <string>
#include <vector>

namespace collabopt {

// Shared defaults of the figure commands. Every field can be overridden.
struct FigureOptions {
    std::vector<std::uint64_t> seeds = default_figure_seeds();
    std::int64_t horizon = 200000;
    double x0 = 1.0;
    double a0 = 1.0;
    double delta = 1.0;
    double zeta = 4.0;
    double sigma = 10.0;
    C0Policy c0{C0Kind::Zero, 1};
    unsigned threads = 0;
    bool gnuplot = false;
    // per-figure knobs; unset means the figure's own default
    std::optional<double> eta;
    std::optional<double> beta;
    std::optional<double> alpha;
    std::optional<int> n;
    Vec values;  // zeta list (fig3, fig4) or N list (fig5)

    static std::vector<std::uint64_t> default_figure_seeds();
};

// main: a0, optimum 0, noise sigma. Collaborator: curvature a0 + delta, optimum
// zeta / (a0 + delta), noise sigma / sqrt(N) (the average of N agents).
RunConfig figure_instance(const FigureOptions& o, Aggregator agg, int n, double alpha, double beta, double eta);

struct TuneEntry {
    double eta = 0.0;
    double plateau = 0.0;
    std::size_t diverged = 0;
};

struct Curve {
    std::string label;
    double value = 0.0;  // swept value (zeta, N) or 0
    RunConfig config;
    RunResult result;
    std::int64_t time_to_plateau = -1;
};

struct Fig2Result {
    Curve alone, wga, bc;
    std::vector<TuneEntry> alone_tuning, wga_tuning;
};

struct SweepFigureResult {
    std::vector<Curve> curves;
    std::optional<Curve> reference;  // Alone, fig4 only
};

struct Fig4Analysis {
    Vec zetas;
    Vec excess;             // 0.5 a0 (mean WGA plateau iterate - mean Alone plateau iterate)^2
    double slope = 0.0;     // log-log regression over zetas >= 4
    Vec fixed_point_error;  // |x_T - wga_fixed_point| of the noiseless run, per zeta
};

Vec fig2_eta_grid();
Fig2Result figure2(const FigureOptions& o);
SweepFigureResult figure3(const FigureOptions& o);
SweepFigureResult figure4(const FigureOptions& o);
Fig4Analysis analyze_figure4(const FigureOptions& o, const SweepFigureResult& r);
SweepFigureResult figure5(const FigureOptions& o);

struct GainfactorGrid {
    Vec ns, ratios;
    std::vector<Vec> speedup;  // rows follow ns
};
GainfactorGrid figure_gainfactor(const Vec& ns = {}, const Vec& ratios = {});

struct SublinearCurves {
    Vec ms;
    std::vector<int> ns;
    std::vector<Vec> speedup;  // rows follow ms
};
SublinearCurves figure_sublinear(const Vec& ms = {}, int max_n = 100);

// First step after the peak of the smoothed mean trace at which the smoothed
// loss is within a factor 2 of the plateau; -1 when never reached.
std::int64_t time_to_plateau(const Vec& mean_loss, std::int64_t window = 1000);

// Least-squares slope of log y on log x.
double loglog_slope(const Vec& x, const Vec& y);

struct OutputFile {
    std::string name;
    std::string content;
};

// Runs a named figure and renders CSV files (plus a gnuplot script on request)
// and a human-readable summary. Unknown names throw std::invalid_argument.
struct FigureBundle {
    std::vector<OutputFile> files;
    std::string summary;
};
FigureBundle render_figure(const std::string& name, const FigureOptions& o);
std::vector<std::string> figure_names();

}  // namespace collabopt
