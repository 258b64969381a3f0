#pragma once

#include <collabopt/simulator.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace collabopt {

struct SweepSpec {
    SweepAxis axis = SweepAxis::Zeta;
    Vec values;
    bool alpha_follows_n = false;

    bool operator==(const SweepSpec&) const = default;
};

struct OutputSpec {
    std::string dir;  // empty: $COLLABOPT_OUT_DIR, else "out"
    std::string prefix = "run";
    bool per_seed_traces = true;
    bool gnuplot = false;

    bool operator==(const OutputSpec&) const = default;
};

// JSON document: {"run": {...}, "seeds": [...], "sweep": {...}, "output": {...}, "threads": n}.
// Unknown keys are rejected at every level.
struct ExperimentConfig {
    RunConfig run;
    std::vector<std::uint64_t> seeds{0};
    std::optional<SweepSpec> sweep;
    OutputSpec output;
    unsigned threads = 0;

    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

// Thrown for anything the user can fix in the config (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& cfg);

std::string task_to_json(const QuadraticTask& t);

std::filesystem::path resolve_output_dir(const std::string& configured);

}  // namespace collabopt
