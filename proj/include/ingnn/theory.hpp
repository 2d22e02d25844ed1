#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ingnn/rng.hpp"
#include "ingnn/synth.hpp"

namespace ingnn {
namespace theory {

inline double normal_pdf(double x, double mu, double sigma) {
    double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * 2.5066282746310005024);
}

// Φ via the complementary error function (absolute error well below 1e-12).
inline double normal_cdf(double x, double mu, double sigma) {
    return 0.5 * std::erfc(-(x - mu) / (sigma * 1.4142135623730950488));
}

// Misclassification rate of the optimal binary classifier: the overlap area
// ∫ min(f1, f2) dx of the two class densities. Equal variances reduce to the
// single-crossing form 1 - Φ1(z) + Φ2(z) with z the midpoint of the means;
// unequal variances have two density crossings and the overlap is summed
// segment by segment from CDF differences.
inline double bayes_error(double mu1, double sigma1, double mu2, double sigma2) {
    if (sigma1 <= 0.0 || sigma2 <= 0.0)
        throw std::invalid_argument("bayes_error: sigmas must be positive");
    if (mu1 == mu2 && sigma1 == sigma2) return 1.0;

    const double sigma_scale = std::max(sigma1, sigma2);
    if (std::fabs(sigma1 - sigma2) <= 1e-12 * sigma_scale) {
        if (mu1 > mu2) std::swap(mu1, mu2);
        double z = 0.5 * (mu1 + mu2);
        return (1.0 - normal_cdf(z, mu1, sigma1)) + normal_cdf(z, mu2, sigma2);
    }

    // log f1(x) = log f2(x) is the quadratic a·x² + b·x + c = 0
    const double a = 0.5 / (sigma2 * sigma2) - 0.5 / (sigma1 * sigma1);
    const double b = mu1 / (sigma1 * sigma1) - mu2 / (sigma2 * sigma2);
    const double c = 0.5 * mu2 * mu2 / (sigma2 * sigma2) -
                     0.5 * mu1 * mu1 / (sigma1 * sigma1) + std::log(sigma2 / sigma1);
    double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) disc = 0.0;  // tangent densities; overlap is total
    const double sq = std::sqrt(disc);
    double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
    double r1 = q / a;
    double r2 = q == 0.0 ? -b / (2.0 * a) : c / q;
    if (r1 > r2) std::swap(r1, r2);

    auto segment_mass = [&](double lo, double hi) {
        // which density is smaller on this segment decides whose mass counts;
        // compare through the log-density difference a·x²+b·x+c, which never
        // underflows the way the raw densities do far from the means
        double probe = std::isinf(lo) ? hi - 1.0 : (std::isinf(hi) ? lo + 1.0 : 0.5 * (lo + hi));
        bool use_first = (a * probe + b) * probe + c <= 0.0;
        double mu = use_first ? mu1 : mu2;
        double sigma = use_first ? sigma1 : sigma2;
        double upper = std::isinf(hi) ? 1.0 : normal_cdf(hi, mu, sigma);
        double lower = std::isinf(lo) ? 0.0 : normal_cdf(lo, mu, sigma);
        return upper - lower;
    };
    const double inf = std::numeric_limits<double>::infinity();
    double eps = segment_mass(-inf, r1) + segment_mass(r1, r2) + segment_mass(r2, inf);
    return std::min(1.0, std::max(0.0, eps));
}

// Class-conditional parameters after mean aggregation over d neighbors of
// which a fraction h share the class:
//   class 1 → N(h·μ1 + (1-h)·μ2, (h·σ1² + (1-h)·σ2²)/d), class 2 symmetric.
struct AggregatedParams {
    double mean1 = 0.0, var1 = 0.0;
    double mean2 = 0.0, var2 = 0.0;
};

inline AggregatedParams aggregated_params(double mu1, double sigma1, double mu2,
                                          double sigma2, double h, double d) {
    if (sigma1 <= 0.0 || sigma2 <= 0.0)
        throw std::invalid_argument("aggregated_params: sigmas must be positive");
    if (d < 1.0) throw std::invalid_argument("aggregated_params: d must be >= 1");
    AggregatedParams out;
    out.mean1 = h * mu1 + (1.0 - h) * mu2;
    out.var1 = (h * sigma1 * sigma1 + (1.0 - h) * sigma2 * sigma2) / d;
    out.mean2 = h * mu2 + (1.0 - h) * mu1;
    out.var2 = (h * sigma2 * sigma2 + (1.0 - h) * sigma1 * sigma1) / d;
    return out;
}

inline double bayes_error_aggregated(const synth::GaussianClassSpec& spec, double h) {
    AggregatedParams p = aggregated_params(spec.mu1, spec.sigma1, spec.mu2, spec.sigma2, h,
                                           static_cast<double>(spec.degree));
    return bayes_error(p.mean1, std::sqrt(p.var1), p.mean2, std::sqrt(p.var2));
}

struct EpsilonCurve {
    std::vector<double> h_grid;
    std::vector<double> eps_agg;
    double eps_raw = 0.0;
    std::optional<double> h_lower;  // crossing of eps_agg(h) = eps_raw in (0, 0.5)
    std::optional<double> h_upper;  // crossing in (0.5, 1)
};

// Evaluates the misclassification-rate curve over a homophily grid and
// locates the interval where aggregation hurts (bisection, tolerance 1e-6).
inline EpsilonCurve epsilon_curve(const synth::GaussianClassSpec& spec,
                                  const std::vector<double>& h_grid) {
    spec.check();
    for (std::size_t i = 1; i < h_grid.size(); ++i)
        if (h_grid[i] <= h_grid[i - 1])
            throw std::invalid_argument("epsilon_curve: grid must be strictly ascending");
    EpsilonCurve curve;
    curve.h_grid = h_grid;
    curve.eps_raw = bayes_error(spec.mu1, spec.sigma1, spec.mu2, spec.sigma2);
    curve.eps_agg.reserve(h_grid.size());
    for (double h : h_grid) curve.eps_agg.push_back(bayes_error_aggregated(spec, h));

    auto gap = [&](double h) { return bayes_error_aggregated(spec, h) - curve.eps_raw; };
    auto bisect = [&](double lo, double hi) -> std::optional<double> {
        double glo = gap(lo), ghi = gap(hi);
        if (glo == 0.0) return lo;
        if (ghi == 0.0) return hi;
        if ((glo < 0.0) == (ghi < 0.0)) return std::nullopt;
        while (hi - lo > 1e-6) {
            double mid = 0.5 * (lo + hi);
            double gm = gap(mid);
            if (gm == 0.0) return mid;
            if ((gm < 0.0) == (glo < 0.0)) {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    };
    curve.h_lower = bisect(0.0, 0.5);
    curve.h_upper = bisect(0.5, 1.0);
    return curve;
}

enum class McMode {
    raw,              // classify raw class samples
    aggregate_direct, // classify samples of the aggregated distributions
    aggregate_graph   // generate a regular graph and mean-aggregate over it
};

// The regular-graph construction realizes round(h·d)/d same-class neighbors
// per node; analytic comparisons against graph output must use this value.
inline double effective_homophily(const synth::GaussianClassSpec& spec) {
    auto k_same = static_cast<double>(
        std::llround(spec.homophily * static_cast<double>(spec.degree)));
    return std::min(k_same, static_cast<double>(spec.degree)) /
           static_cast<double>(spec.degree);
}

struct MonteCarloResult {
    double error_rate = 0.0;  // balanced misclassification frequency, max 0.5
    double epsilon = 0.0;     // overlap-scale estimate, 2 × error_rate
    double stderr_rate = 0.0;
    double stderr_epsilon = 0.0;
    std::size_t samples = 0;
};

// Samples balanced class data, classifies with the true-parameter Bayes rule
// for the distribution actually being classified, and reports the error
// frequency. `aggregate_direct` samples the aggregated class distributions
// at the requested h (the empirical counterpart of the analytic curve);
// `aggregate_graph` runs the full graph pipeline, whose mixing fraction is
// the rounded `effective_homophily`, and classifies accordingly. The analytic
// ε is the overlap area, which for balanced classes is twice the error rate;
// both scales are returned.
inline MonteCarloResult monte_carlo_error(const synth::GaussianClassSpec& spec,
                                          std::size_t n_samples, McMode mode,
                                          std::uint64_t seed) {
    spec.check();
    if (n_samples == 0) throw std::invalid_argument("monte_carlo_error: n_samples == 0");

    double m1 = spec.mu1, s1 = spec.sigma1, m2 = spec.mu2, s2 = spec.sigma2;
    if (mode != McMode::raw) {
        double h = mode == McMode::aggregate_graph ? effective_homophily(spec)
                                                   : spec.homophily;
        AggregatedParams p = aggregated_params(spec.mu1, spec.sigma1, spec.mu2, spec.sigma2,
                                               h, static_cast<double>(spec.degree));
        m1 = p.mean1;
        s1 = std::sqrt(p.var1);
        m2 = p.mean2;
        s2 = std::sqrt(p.var2);
    }
    // ties (identical densities) go to class 1, so indistinguishable classes
    // come out at error rate 0.5 on balanced data
    auto classify = [&](double x) {
        return normal_pdf(x, m1, s1) >= normal_pdf(x, m2, s2) ? 0 : 1;
    };

    std::size_t errors = 0, total = 0;
    if (mode == McMode::aggregate_graph) {
        std::size_t n = n_samples + (n_samples % 2);
        if (n < 4) n = 4;
        synth::GaussianGraphResult data = synth::gen_gaussian_regular(spec, n, seed);
        DenseMatrix agg = synth::mean_aggregate(data.graph, data.features);
        for (std::size_t i = 0; i < n; ++i) {
            if (classify(agg(i, 0)) != data.labels.values[i]) ++errors;
            ++total;
        }
    } else {
        Rng rng(derive_seed(seed, stream::monte_carlo));
        for (std::size_t i = 0; i < n_samples; ++i) {
            int label = static_cast<int>(i % 2);
            double x = label == 0 ? m1 + s1 * rng.next_normal()
                                  : m2 + s2 * rng.next_normal();
            if (classify(x) != label) ++errors;
            ++total;
        }
    }

    MonteCarloResult result;
    result.samples = total;
    result.error_rate = static_cast<double>(errors) / static_cast<double>(total);
    result.epsilon = 2.0 * result.error_rate;
    result.stderr_rate =
        std::sqrt(result.error_rate * (1.0 - result.error_rate) / static_cast<double>(total));
    result.stderr_epsilon = 2.0 * result.stderr_rate;
    return result;
}

}  // namespace theory
}  // namespace ingnn
