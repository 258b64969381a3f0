#include <collabopt/objective.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace collabopt {

void check_same_dim(std::size_t expected, std::size_t got, const char* what) {
    if (expected != got)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(expected) + " vs " + std::to_string(got) + ")");
}

void QuadraticTask::validate() const {
    if (curvature.empty()) throw std::invalid_argument("task: empty curvature");
    check_same_dim(curvature.size(), optimum.size(), "task optimum");
    for (double a : curvature)
        if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("task: curvature must be positive");
    for (double v : optimum)
        if (!std::isfinite(v)) throw std::invalid_argument("task: optimum must be finite");
    if (!(noise_std >= 0.0)) throw std::invalid_argument("task: noise_std must be >= 0");
    if (!(noise_scale >= 0.0)) throw std::invalid_argument("task: noise_scale must be >= 0");
}

double eval_loss(const QuadraticTask& task, std::span<const double> x) {
    check_same_dim(task.dim(), x.size(), "eval_loss");
    double s = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        double r = x[d] - task.optimum[d];
        s += task.curvature[d] * r * r;
    }
    return 0.5 * s;
}

void true_gradient_into(const QuadraticTask& task, std::span<const double> x, std::span<double> out) {
    for (std::size_t d = 0; d < x.size(); ++d) out[d] = task.curvature[d] * (x[d] - task.optimum[d]);
}

Vec true_gradient(const QuadraticTask& task, std::span<const double> x) {
    check_same_dim(task.dim(), x.size(), "true_gradient");
    Vec g(x.size());
    true_gradient_into(task, x, g);
    return g;
}

double sample_gradient_into(const QuadraticTask& task, std::span<const double> x,
                            NormalStream& stream, std::span<double> out) {
    true_gradient_into(task, x, out);
    double gn = 0.0;
    for (double v : out) gn += v * v;
    double var = task.noise_std * task.noise_std;
    if (task.noise_scale > 0.0) var += task.noise_scale * gn / static_cast<double>(out.size());
    double sd = std::sqrt(var);
    for (auto& v : out) v += sd * stream.next();
    return gn;
}

GradientSample sample_gradient(const QuadraticTask& task, std::span<const double> x,
                               NormalStream& stream, std::size_t agent) {
    check_same_dim(task.dim(), x.size(), "sample_gradient");
    GradientSample g{Vec(x.size()), agent};
    sample_gradient_into(task, x, stream, g.value);
    return g;
}

namespace {

void check_simplex(std::span<const double> tau, std::size_t n) {
    if (tau.size() != n) throw std::invalid_argument("tau: length must equal number of collaborators");
    double s = 0.0;
    for (double t : tau) {
        if (!(t >= 0.0)) throw std::invalid_argument("tau: entries must be >= 0");
        s += t;
    }
    if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("tau: entries must sum to 1");
}

struct PairTerms {
    double scale_sq = 0.0;   // max_d r_d^2
    double offset_sq = 0.0;  // |A_k (x_k* - x_0*)|^2
};

PairTerms pair_terms(const QuadraticTask& main, const QuadraticTask& c) {
    PairTerms p;
    for (std::size_t d = 0; d < main.dim(); ++d) {
        double r = (c.curvature[d] - main.curvature[d]) / main.curvature[d];
        p.scale_sq = std::max(p.scale_sq, r * r);
        double w = c.curvature[d] * (c.optimum[d] - main.optimum[d]);
        p.offset_sq += w * w;
    }
    return p;
}

void check_collaborators(const QuadraticTask& main, const std::vector<QuadraticTask>& collaborators) {
    main.validate();
    if (collaborators.empty()) throw std::invalid_argument("similarity: no collaborators");
    for (const auto& c : collaborators) {
        c.validate();
        check_same_dim(main.dim(), c.dim(), "similarity");
    }
}

}  // namespace

SimilarityParams similarity_params(const QuadraticTask& main,
                                   const std::vector<QuadraticTask>& collaborators,
                                   std::span<const double> tau) {
    check_collaborators(main, collaborators);
    check_simplex(tau, collaborators.size());

    SimilarityParams s;
    s.smoothness = *std::max_element(main.curvature.begin(), main.curvature.end());
    s.pl_constant = *std::min_element(main.curvature.begin(), main.curvature.end());
    s.noise_scales.push_back(main.noise_scale);
    for (std::size_t k = 0; k < collaborators.size(); ++k) {
        const auto& c = collaborators[k];
        for (std::size_t d = 0; d < main.dim(); ++d)
            s.hessian_dissimilarity =
                std::max(s.hessian_dissimilarity, std::abs(c.curvature[d] - main.curvature[d]));
        auto p = pair_terms(main, c);
        s.grad_scale_mismatch = std::max(s.grad_scale_mismatch, p.scale_sq);
        s.agent_offset_sq.push_back(p.offset_sq);
        s.grad_offset_sq += tau[k] * p.offset_sq;
        s.noise_scales.push_back(c.noise_scale);
    }
    return s;
}

GradientSimilarity certified_similarity(const QuadraticTask& main,
                                        const std::vector<QuadraticTask>& collaborators) {
    check_collaborators(main, collaborators);
    GradientSimilarity g;
    for (const auto& c : collaborators) {
        auto p = pair_terms(main, c);
        // |r g - w|^2 <= 2 r^2 |g|^2 + 2 |w|^2 when neither part vanishes
        bool mixed = p.scale_sq > 0.0 && p.offset_sq > 0.0;
        double f = mixed ? 2.0 : 1.0;
        g.m = std::max(g.m, f * p.scale_sq);
        g.zeta_sq.push_back(f * p.offset_sq);
    }
    return g;
}

QuadraticTask mean_estimation_task(double mu, double sigma) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("mean_estimation_task: sigma must be >= 0");
    return QuadraticTask{{1.0}, {mu}, sigma, 0.0};
}

}  // namespace collabopt
