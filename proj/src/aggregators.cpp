#include <collabopt/aggregators.hpp>

#include <cmath>
#include <stdexcept>

namespace collabopt {

std::string to_string(Aggregator a) {
    switch (a) {
        case Aggregator::Alone: return "alone";
        case Aggregator::WGA: return "wga";
        case Aggregator::BC: return "bc";
        case Aggregator::OracleBC: return "oracle_bc";
    }
    return "?";
}

Aggregator aggregator_from_string(const std::string& s) {
    if (s == "alone") return Aggregator::Alone;
    if (s == "wga") return Aggregator::WGA;
    if (s == "bc") return Aggregator::BC;
    if (s == "oracle_bc" || s == "oracle-bc") return Aggregator::OracleBC;
    throw std::invalid_argument("unknown aggregator '" + s + "' (expected alone, wga, bc, oracle_bc)");
}

void CollaborationWeights::validate(std::size_t n, bool need_beta) const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (tau.size() != n) throw std::invalid_argument("tau length must equal the number of collaborators");
    double s = 0.0;
    for (double t : tau) {
        if (!(t >= 0.0)) throw std::invalid_argument("tau entries must be >= 0");
        s += t;
    }
    if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("tau entries must sum to 1");
    if (need_beta && !(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in (0, 1]");
}

void check_wga_alpha(double alpha, double m) {
    if (m > 0.0 && alpha * alpha * m >= 1.0)
        throw std::invalid_argument("WGA bound vacuous: alpha must be below 1/sqrt(m) = " +
                                    std::to_string(1.0 / std::sqrt(m)));
}

namespace kernel {

void weighted_average(std::span<const Vec> gks, std::span<const double> tau, std::span<double> out) {
    for (auto& v : out) v = 0.0;
    for (std::size_t k = 0; k < gks.size(); ++k)
        for (std::size_t d = 0; d < out.size(); ++d) out[d] += tau[k] * gks[k][d];
}

void mix(std::span<const double> g0, std::span<const double> avg, double alpha, std::span<double> out) {
    for (std::size_t d = 0; d < out.size(); ++d) out[d] = (1.0 - alpha) * g0[d] + alpha * avg[d];
}

void mix_corrected(std::span<const double> g0, std::span<const double> avg, std::span<const double> c,
                   double alpha, std::span<double> out) {
    for (std::size_t d = 0; d < out.size(); ++d)
        out[d] = (1.0 - alpha) * g0[d] + alpha * (avg[d] - c[d]);
}

void ema(std::span<double> c, std::span<const double> b, double beta) {
    for (std::size_t d = 0; d < c.size(); ++d) c[d] = (1.0 - beta) * c[d] + beta * b[d];
}

void oracle_estimate(std::span<const double> true_bias, NormalStream& noise, double v,
                     std::size_t n_collaborators, std::span<double> c) {
    double sd = v / std::sqrt(static_cast<double>(n_collaborators) * static_cast<double>(c.size()));
    for (std::size_t d = 0; d < c.size(); ++d) c[d] = true_bias[d] + sd * noise.next();
}

}  // namespace kernel

namespace {

std::vector<Vec> values_of(const GradientSample& g0, const std::vector<GradientSample>& gks,
                           const CollaborationWeights& w) {
    if (gks.size() != w.tau.size()) throw std::invalid_argument("number of collaborator samples must equal |tau|");
    std::vector<Vec> vals;
    vals.reserve(gks.size());
    for (const auto& g : gks) {
        check_same_dim(g0.value.size(), g.value.size(), "combine");
        vals.push_back(g.value);
    }
    return vals;
}

}  // namespace

Vec alone_combine(const GradientSample& g0) { return g0.value; }

Vec wga_combine(const GradientSample& g0, const std::vector<GradientSample>& gks,
                const CollaborationWeights& w) {
    auto vals = values_of(g0, gks, w);
    Vec avg(g0.value.size()), out(g0.value.size());
    kernel::weighted_average(vals, w.tau, avg);
    kernel::mix(g0.value, avg, w.alpha, out);
    return out;
}

BcOutput bc_combine(const GradientSample& g0, const std::vector<GradientSample>& gks,
                    const CollaborationWeights& w, const BcState& state) {
    if (!state.initialized) throw std::invalid_argument("bc_combine: bias estimate not initialized");
    auto vals = values_of(g0, gks, w);
    check_same_dim(g0.value.size(), state.bias_estimate.size(), "bc_combine state");
    std::size_t dim = g0.value.size();
    Vec avg(dim);
    kernel::weighted_average(vals, w.tau, avg);
    BcOutput out{Vec(dim), Vec(dim)};
    kernel::mix_corrected(g0.value, avg, state.bias_estimate, w.alpha, out.gradient);
    for (std::size_t d = 0; d < dim; ++d) out.observed_bias[d] = avg[d] - g0.value[d];
    return out;
}

BcState bc_update(const BcState& state, std::span<const double> observed_bias, double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("bc_update: beta must lie in (0, 1]");
    check_same_dim(state.bias_estimate.size(), observed_bias.size(), "bc_update");
    BcState next = state;
    kernel::ema(next.bias_estimate, observed_bias, beta);
    next.initialized = true;
    return next;
}

Vec oracle_bc_combine(const GradientSample& g0, const std::vector<GradientSample>& gks,
                      const CollaborationWeights& w, std::span<const double> true_bias,
                      NormalStream& oracle_noise, double v) {
    if (!(v >= 0.0)) throw std::invalid_argument("oracle noise level must be >= 0");
    auto vals = values_of(g0, gks, w);
    check_same_dim(g0.value.size(), true_bias.size(), "oracle_bc_combine bias");
    std::size_t dim = g0.value.size();
    Vec avg(dim), c(dim), out(dim);
    kernel::weighted_average(vals, w.tau, avg);
    kernel::oracle_estimate(true_bias, oracle_noise, v, gks.size(), c);
    kernel::mix_corrected(g0.value, avg, c, w.alpha, out);
    return out;
}

}  // namespace collabopt
