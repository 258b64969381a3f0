#pragma once

#include <collabopt/aggregators.hpp>
#include <collabopt/schedules.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace collabopt {

inline constexpr double kDivergenceThreshold = 1e12;
inline constexpr double kDefaultInitialIterate = 10.0;

struct StepSize {
    enum class Kind { Constant, DecreasingPL };
    Kind kind = Kind::Constant;
    double eta = 1e-3;
    // decreasing: c (2t+1) / (2 mu gap (t+1)^2), clamped at cap
    int c = 2;
    double mu = 1.0;
    double gap = 1.0;
    double cap = 1.0;

    static StepSize constant(double eta);
    static StepSize decreasing_pl(const ScheduleInputs& in, int c);
    double at(std::int64_t t) const;
    void validate() const;

    bool operator==(const StepSize&) const = default;
};

enum class C0Kind { FirstBias, WarmStart, Zero };

// How BC seeds its bias estimate c_0.
//   FirstBias: b_0 from the step-0 samples (so the first step is a plain local step)
//   WarmStart: mean of `samples` independent bias samples at x_0
//   Zero:      c_0 = 0
struct C0Policy {
    C0Kind kind = C0Kind::FirstBias;
    int samples = 1;

    bool operator==(const C0Policy&) const = default;
};

std::string to_string(const C0Policy& p);
C0Policy c0_policy_from_string(const std::string& s);

struct RunConfig {
    QuadraticTask main;
    std::vector<QuadraticTask> collaborators;
    Aggregator aggregator = Aggregator::Alone;
    CollaborationWeights weights;
    StepSize step;
    std::int64_t horizon = 200000;
    Vec x0;  // empty means 10 * ones
    std::uint64_t seed = 0;
    C0Policy c0;
    double oracle_v = 0.0;
    std::int64_t snapshot_stride = 0;  // 0 disables iterate snapshots
    bool antithetic = false;           // negate every noise draw

    void validate() const;
    Vec initial_iterate() const;

    bool operator==(const RunConfig&) const = default;
};

struct Trace {
    Vec test_loss;     // f_0(x_t) - f_0^*, t = 0..T
    Vec grad_norm_sq;  // |grad f_0(x_t)|^2
    std::vector<std::int64_t> snapshot_steps;
    std::vector<Vec> snapshots;
    Vec final_iterate;
    Vec plateau_iterate;  // mean iterate over the plateau window
    bool diverged = false;
    std::int64_t steps_completed = 0;

    double final_gap() const;
    double plateau_loss() const;
    double avg_grad_norm_sq() const;  // (1/T) sum_{t<T}
};

// Plateau window: the last max(1, T/10) recorded steps.
std::int64_t plateau_window(std::int64_t horizon);

struct Stat {
    double mean = 0.0;
    std::optional<double> se;
    std::size_t n = 0;
};

Stat summarize(std::span<const double> values);

struct RunResult {
    Stat final_gap;
    Stat plateau_loss;
    Stat avg_grad_norm_sq;
    Vec mean_test_loss;     // seed mean per step over non-diverged seeds
    Vec mean_grad_norm_sq;
    std::vector<std::uint64_t> seeds;
    std::vector<std::uint64_t> diverged_seeds;
    Vec per_seed_plateau;   // NaN for diverged seeds
    std::vector<Vec> per_seed_plateau_iterate;
    std::vector<Trace> traces;  // only with keep_traces
};

struct ReplicateOptions {
    unsigned threads = 0;  // 0: hardware concurrency
    bool keep_traces = false;
};

Trace run(const RunConfig& cfg);
RunResult run_replicated(const RunConfig& cfg, std::span<const std::uint64_t> seeds,
                         const ReplicateOptions& opts = {});

// c_0 as the run loop would set it before step 0 (FirstBias uses the step-0 samples).
Vec initial_bias_estimate(const RunConfig& cfg);

enum class SweepAxis { Zeta, N, Alpha, Beta, Eta, Delta, Sigma, T };
SweepAxis sweep_axis_from_string(const std::string& s);
std::string to_string(SweepAxis a);

struct SweepOptions {
    bool alpha_follows_n = false;  // N axis sets alpha = N/(N+1)
    ReplicateOptions replicate;
};

struct SweepPoint {
    double value = 0.0;
    RunConfig config;
    RunResult result;
};

// N axis: the single collaborator stands for the average of N agents with
// noise sigma_1 / sqrt(N), where sigma_1 is the base collaborator's noise.
RunConfig apply_axis(const RunConfig& base, SweepAxis axis, double value, bool alpha_follows_n = false);
std::vector<SweepPoint> sweep(const RunConfig& base, SweepAxis axis, std::span<const double> values,
                              std::span<const std::uint64_t> seeds, const SweepOptions& opts = {});

// Expected iterates of Alone/WGA on quadratics (exact: noise is zero-mean and
// enters linearly). Returns T+1 iterates.
std::vector<Vec> mean_dynamics_oracle(const RunConfig& cfg, std::int64_t horizon);
Vec wga_fixed_point(const RunConfig& cfg);

// Average of N identical collaborators as a single task with noise sigma/sqrt(N).
QuadraticTask averaged_collaborator(const QuadraticTask& one, int n);

// Runs `count` work items on up to `threads` workers; fn(i) must be independent per i.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace collabopt
