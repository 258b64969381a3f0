#include <collabopt/config.hpp>

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace collabopt {

using nlohmann::json;

namespace {

void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

template <class T>
T require(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
    return get<T>(j, key, where, T{});
}

json task_json(const QuadraticTask& t) {
    return {{"curvature", t.curvature}, {"optimum", t.optimum}, {"noise_std", t.noise_std},
            {"noise_scale", t.noise_scale}};
}

QuadraticTask task_from(const json& j, const std::string& where) {
    only_keys(j, {"curvature", "optimum", "noise_std", "noise_scale"}, where);
    QuadraticTask t;
    t.curvature = require<Vec>(j, "curvature", where);
    t.optimum = require<Vec>(j, "optimum", where);
    t.noise_std = get<double>(j, "noise_std", where, 0.0);
    t.noise_scale = get<double>(j, "noise_scale", where, 0.0);
    return t;
}

json step_json(const StepSize& s) {
    if (s.kind == StepSize::Kind::Constant) return {{"kind", "constant"}, {"eta", s.eta}};
    return {{"kind", "decreasing_pl"}, {"c", s.c}, {"mu", s.mu}, {"gap", s.gap}, {"cap", s.cap}};
}

StepSize step_from(const json& j, const std::string& where) {
    if (j.is_number()) return StepSize::constant(j.get<double>());
    auto kind = get<std::string>(j, "kind", where, "constant");
    StepSize s;
    if (kind == "constant") {
        only_keys(j, {"kind", "eta"}, where);
        s.eta = require<double>(j, "eta", where);
    } else if (kind == "decreasing_pl") {
        only_keys(j, {"kind", "c", "mu", "gap", "cap"}, where);
        s.kind = StepSize::Kind::DecreasingPL;
        s.c = require<int>(j, "c", where);
        s.mu = require<double>(j, "mu", where);
        s.gap = get<double>(j, "gap", where, 1.0);
        s.cap = require<double>(j, "cap", where);
        s.eta = s.cap;
    } else {
        throw ConfigError(where + ".kind: expected constant or decreasing_pl");
    }
    return s;
}

json run_json(const RunConfig& r) {
    json cols = json::array();
    for (const auto& c : r.collaborators) cols.push_back(task_json(c));
    return {{"main", task_json(r.main)},
            {"collaborators", cols},
            {"aggregator", to_string(r.aggregator)},
            {"weights", {{"alpha", r.weights.alpha}, {"tau", r.weights.tau}, {"beta", r.weights.beta}}},
            {"step", step_json(r.step)},
            {"horizon", r.horizon},
            {"x0", r.x0},
            {"c0", to_string(r.c0)},
            {"oracle_v", r.oracle_v},
            {"snapshot_stride", r.snapshot_stride}};
}

RunConfig run_from(const json& j) {
    const std::string w = "run";
    only_keys(j, {"main", "collaborators", "aggregator", "weights", "step", "horizon", "x0", "c0", "oracle_v",
                  "snapshot_stride"},
              w);
    RunConfig r;
    r.main = task_from(j.contains("main") ? j.at("main") : throw ConfigError("run: missing 'main'"), "run.main");
    if (j.contains("collaborators")) {
        const auto& cs = j.at("collaborators");
        if (!cs.is_array()) throw ConfigError("run.collaborators: expected an array");
        for (std::size_t i = 0; i < cs.size(); ++i)
            r.collaborators.push_back(task_from(cs[i], "run.collaborators[" + std::to_string(i) + "]"));
    }
    try {
        r.aggregator = aggregator_from_string(get<std::string>(j, "aggregator", w, "alone"));
        r.c0 = c0_policy_from_string(get<std::string>(j, "c0", w, "first_bias"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("run: ") + e.what());
    }
    if (j.contains("weights")) {
        const auto& wj = j.at("weights");
        only_keys(wj, {"alpha", "tau", "beta"}, "run.weights");
        r.weights.alpha = get<double>(wj, "alpha", "run.weights", 0.0);
        r.weights.beta = get<double>(wj, "beta", "run.weights", 1.0);
        r.weights.tau = get<Vec>(wj, "tau", "run.weights", {});
    }
    if (r.weights.tau.empty() && !r.collaborators.empty())
        r.weights.tau.assign(r.collaborators.size(), 1.0 / static_cast<double>(r.collaborators.size()));
    if (j.contains("step")) r.step = step_from(j.at("step"), "run.step");
    r.horizon = get<std::int64_t>(j, "horizon", w, r.horizon);
    r.x0 = get<Vec>(j, "x0", w, {});
    r.oracle_v = get<double>(j, "oracle_v", w, 0.0);
    r.snapshot_stride = get<std::int64_t>(j, "snapshot_stride", w, 0);
    return r;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigError("seeds: need at least one seed");
    try {
        if (sweep) {
            if (sweep->values.empty()) throw ConfigError("sweep.values: need at least one value");
            for (double v : sweep->values) apply_axis(run, sweep->axis, v, sweep->alpha_follows_n).validate();
        } else {
            run.validate();
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (output.prefix.empty() || output.prefix.find('/') != std::string::npos)
        throw ConfigError("output.prefix must be a plain file name stem");
}

ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    only_keys(j, {"run", "seeds", "sweep", "output", "threads"}, "config");
    ExperimentConfig c;
    if (!j.contains("run")) throw ConfigError("config: missing 'run'");
    c.run = run_from(j.at("run"));
    c.seeds = get<std::vector<std::uint64_t>>(j, "seeds", "config", {0});
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        only_keys(s, {"axis", "values", "alpha_follows_n"}, "sweep");
        SweepSpec sp;
        try {
            sp.axis = sweep_axis_from_string(require<std::string>(s, "axis", "sweep"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("sweep: ") + e.what());
        }
        sp.values = require<Vec>(s, "values", "sweep");
        sp.alpha_follows_n = get<bool>(s, "alpha_follows_n", "sweep", false);
        c.sweep = sp;
    }
    if (j.contains("output")) {
        const auto& o = j.at("output");
        only_keys(o, {"dir", "prefix", "per_seed_traces", "gnuplot"}, "output");
        c.output.dir = get<std::string>(o, "dir", "output", "");
        c.output.prefix = get<std::string>(o, "prefix", "output", "run");
        c.output.per_seed_traces = get<bool>(o, "per_seed_traces", "output", true);
        c.output.gnuplot = get<bool>(o, "gnuplot", "output", false);
    }
    c.threads = get<unsigned>(j, "threads", "config", 0u);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& cfg) {
    json j;
    j["run"] = run_json(cfg.run);
    j["seeds"] = cfg.seeds;
    if (cfg.sweep)
        j["sweep"] = {{"axis", to_string(cfg.sweep->axis)},
                      {"values", cfg.sweep->values},
                      {"alpha_follows_n", cfg.sweep->alpha_follows_n}};
    j["output"] = {{"dir", cfg.output.dir},
                   {"prefix", cfg.output.prefix},
                   {"per_seed_traces", cfg.output.per_seed_traces},
                   {"gnuplot", cfg.output.gnuplot}};
    j["threads"] = cfg.threads;
    return j.dump(2) + "\n";
}

std::string task_to_json(const QuadraticTask& t) { return task_json(t).dump(); }

std::filesystem::path resolve_output_dir(const std::string& configured) {
    if (!configured.empty()) return configured;
    if (const char* env = std::getenv("COLLABOPT_OUT_DIR"); env && *env) return env;
    return "out";
}

}  // namespace collabopt
