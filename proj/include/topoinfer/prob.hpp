#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace topoinfer {

// Mean and variance of a normal delay component. All durations are carried in
// milliseconds internally; unit conversion happens once at ingestion.
struct NormalParams {
    double mean_ms = 0.0;
    double var_ms2 = 0.0;
};

inline void validate(const NormalParams& p) {
    if (!std::isfinite(p.mean_ms) || !std::isfinite(p.var_ms2))
        throw std::invalid_argument("normal parameters must be finite");
    if (p.var_ms2 < 0.0) throw std::invalid_argument("variance must be >= 0");
}

// Hop-count prior for a uniform random-graph overlay: with mean degree deg and
// N nodes, any two given nodes share an edge with probability deg/(N-1), which
// makes the hop count geometrically distributed.
struct HopPrior {
    double mean_degree = 16.0;
    int node_count = 300;
};

inline void validate(const HopPrior& prior) {
    if (prior.node_count < 3) throw std::invalid_argument("hop prior needs node_count >= 3");
    if (!(prior.mean_degree > 0.0) ||
        !(prior.mean_degree < static_cast<double>(prior.node_count - 1)))
        throw std::invalid_argument("hop prior needs 0 < mean_degree < node_count - 1");
}

inline double edge_probability(const HopPrior& prior) {
    return prior.mean_degree / static_cast<double>(prior.node_count - 1);
}

// Per-hop delay model for one (source, relay) country pair and block size.
// latency covers the full three-way relay exchange; processing is the
// receiving node's validation delay. tolerance_ms is the half-width of the
// integration window absorbing measurement error.
struct LikelihoodParams {
    NormalParams latency;
    NormalParams processing;
    double tolerance_ms = 5.0;
    int max_hops = 9;
};

inline void validate(const LikelihoodParams& params) {
    validate(params.latency);
    validate(params.processing);
    if (!(params.tolerance_ms >= 0.0) || !std::isfinite(params.tolerance_ms))
        throw std::invalid_argument("tolerance must be >= 0");
    if (params.max_hops < 1) throw std::invalid_argument("max_hops must be >= 1");
    if (!(params.latency.var_ms2 + params.processing.var_ms2 > 0.0))
        throw std::invalid_argument("combined per-hop variance must be > 0");
}

// probs[h-1] = P(H = h | observed time difference), h = 1..max_hops.
struct PosteriorVector {
    std::vector<double> probs;

    int max_hops() const { return static_cast<int>(probs.size()); }
    double at_hop(int h) const { return probs.at(static_cast<std::size_t>(h) - 1); }
};

inline double normal_cdf(double x, double mean, double stddev) {
    return 0.5 * std::erfc((mean - x) / (stddev * std::numbers::sqrt2_v<double>));
}

// Probability masses below this are flushed to exact zero; evidence of 0 is
// the uninformative-measurement signal.
inline constexpr double kLikelihoodFloor = 1e-300;

// P(H = h): geometric with success probability deg/(N-1).
inline double hop_prior_prob(const HopPrior& prior, int h) {
    validate(prior);
    if (h < 1) throw std::invalid_argument("hop count must be >= 1");
    const double p = edge_probability(prior);
    return std::pow(1.0 - p, h - 1) * p;
}

// P(t - eps <= delta <= t + eps | H = h). The h-hop delay is the h-fold
// convolution of the per-hop normal (latency * processing); sums of
// independent normals are normal, so the window mass comes out of the Gaussian
// CDF with mean h*(mu_l + mu_d) and variance h*(var_l + var_d).
inline double hop_likelihood(const LikelihoodParams& params, int h, double t_ms) {
    validate(params);
    if (h < 1) throw std::invalid_argument("hop count must be >= 1");
    if (!std::isfinite(t_ms)) throw std::invalid_argument("time difference must be finite");
    const double mean = h * (params.latency.mean_ms + params.processing.mean_ms);
    const double sd = std::sqrt(h * (params.latency.var_ms2 + params.processing.var_ms2));
    const double eps = params.tolerance_ms;
    double mass = normal_cdf(t_ms + eps, mean, sd) - normal_cdf(t_ms - eps, mean, sd);
    if (mass < kLikelihoodFloor) mass = 0.0;
    return std::min(mass, 1.0);
}

namespace detail {

// Unnormalized joint terms likelihood(h) * prior(h) for h = 1..max_hops.
// Inputs already validated. The geometric prior is built by a running product
// to keep the loop pow-free.
inline void joint_terms(const HopPrior& prior, const LikelihoodParams& params, double t_ms,
                        std::vector<double>& out) {
    const double p = edge_probability(prior);
    const double hop_mean = params.latency.mean_ms + params.processing.mean_ms;
    const double hop_var = params.latency.var_ms2 + params.processing.var_ms2;
    const double eps = params.tolerance_ms;
    out.assign(static_cast<std::size_t>(params.max_hops), 0.0);
    double prior_h = p;
    for (int h = 1; h <= params.max_hops; ++h) {
        const double mean = h * hop_mean;
        const double sd = std::sqrt(h * hop_var);
        double mass = normal_cdf(t_ms + eps, mean, sd) - normal_cdf(t_ms - eps, mean, sd);
        if (mass < kLikelihoodFloor) mass = 0.0;
        out[static_cast<std::size_t>(h) - 1] = std::min(mass, 1.0) * prior_h;
        prior_h *= 1.0 - p;
    }
}

}  // namespace detail

// P(delta = t) by total probability over h = 1..max_hops. An exact 0 marks an
// uninformative measurement: no hop count within range explains it.
inline double evidence(const HopPrior& prior, const LikelihoodParams& params, double t_ms) {
    validate(prior);
    validate(params);
    if (!std::isfinite(t_ms)) throw std::invalid_argument("time difference must be finite");
    std::vector<double> terms;
    detail::joint_terms(prior, params, t_ms, terms);
    double total = 0.0;
    for (double term : terms) total += term;
    return total;
}

// Bayes over the truncated support h = 1..max_hops, renormalized. Returns
// nullopt when the evidence vanishes; the caller should skip the measurement
// rather than divide by zero.
inline std::optional<PosteriorVector> posterior(const HopPrior& prior,
                                                const LikelihoodParams& params, double t_ms) {
    validate(prior);
    validate(params);
    if (!std::isfinite(t_ms)) throw std::invalid_argument("time difference must be finite");
    std::vector<double> terms;
    detail::joint_terms(prior, params, t_ms, terms);
    double total = 0.0;
    for (double term : terms) total += term;
    if (total <= 0.0) return std::nullopt;
    for (double& term : terms) term /= total;
    return PosteriorVector{std::move(terms)};
}

}  // namespace topoinfer
