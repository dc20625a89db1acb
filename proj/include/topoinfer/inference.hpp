#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "topoinfer/errors.hpp"
#include "topoinfer/ingest.hpp"
#include "topoinfer/params.hpp"
#include "topoinfer/prob.hpp"

namespace topoinfer {

namespace detail {

// Zero-variance packs (noise-free fits with zero-variance constants) would
// make the per-hop density degenerate. Flooring the combined variance keeps
// the likelihood valid and converges to the epsilon-window indicator the
// degenerate case means.
inline constexpr double kVarianceFloor = 1e-9;

}  // namespace detail

// Per-hop likelihood parameters for one country pair and block size. The
// stored one-way latency is scaled by the relay factor (mean linearly,
// variance quadratically) to cover the full three-way relay exchange.
inline LikelihoodParams likelihood_params(const ParameterPack& pack, const std::string& country_a,
                                          const std::string& country_b,
                                          std::int64_t block_size_bytes) {
    const NormalParams& one_way = pack.pairs.at(country_a, country_b);
    const double f = pack.relay_factor;
    LikelihoodParams params;
    params.latency = NormalParams{one_way.mean_ms * f, one_way.var_ms2 * f * f};
    params.processing = processing_params(pack.constants, block_size_bytes);
    params.tolerance_ms = pack.epsilon_ms;
    params.max_hops = pack.max_hops;
    if (params.latency.var_ms2 + params.processing.var_ms2 < detail::kVarianceFloor)
        params.latency.var_ms2 = detail::kVarianceFloor;
    return params;
}

// Posterior hop distribution for one measurement; nullopt when the evidence
// vanishes (uninformative measurement, caller skips it).
inline std::optional<PosteriorVector> observation_posterior(const ParameterPack& pack,
                                                            const std::string& country_a,
                                                            const std::string& country_b,
                                                            double delta_ms,
                                                            std::int64_t block_size_bytes) {
    return posterior(pack.prior, likelihood_params(pack, country_a, country_b, block_size_bytes),
                     delta_ms);
}

enum class AggregationMode { mean_posterior, bayes_update };

inline AggregationMode parse_aggregation_mode(std::string_view name) {
    if (name == "mean") return AggregationMode::mean_posterior;
    if (name == "bayes") return AggregationMode::bayes_update;
    throw ConfigError("unknown aggregation mode: " + std::string(name) + " (want mean|bayes)");
}

// Combine per-observation posteriors for one pair. mean_posterior averages
// them hop-wise and renormalizes. bayes_update treats observations as
// independent evidence: in log space, sum of log posteriors minus (n-1) log
// priors; if every hop ends up with zero mass (conflicting one-hot inputs) the
// truncated prior is returned, carrying no observational information.
inline PosteriorVector aggregate(const std::vector<PosteriorVector>& posteriors,
                                 AggregationMode mode = AggregationMode::mean_posterior,
                                 const HopPrior* prior = nullptr) {
    if (posteriors.empty()) throw std::invalid_argument("aggregate needs >= 1 posterior");
    const std::size_t hops = posteriors.front().probs.size();
    for (const PosteriorVector& p : posteriors)
        if (p.probs.size() != hops) throw std::invalid_argument("posterior length mismatch");

    std::vector<double> out(hops, 0.0);
    if (mode == AggregationMode::mean_posterior) {
        for (const PosteriorVector& p : posteriors)
            for (std::size_t i = 0; i < hops; ++i) out[i] += p.probs[i];
        double total = 0.0;
        for (double v : out) total += v;
        for (double& v : out) v /= total;
        return PosteriorVector{std::move(out)};
    }

    if (prior == nullptr) throw std::invalid_argument("bayes_update aggregation needs the prior");
    validate(*prior);
    const double n = static_cast<double>(posteriors.size());
    std::vector<double> log_mass(hops, 0.0);
    for (std::size_t i = 0; i < hops; ++i) {
        const double prior_h = hop_prior_prob(*prior, static_cast<int>(i) + 1);
        double lm = -(n - 1.0) * std::log(prior_h);
        for (const PosteriorVector& p : posteriors)
            lm += p.probs[i] > 0.0 ? std::log(p.probs[i])
                                   : -std::numeric_limits<double>::infinity();
        log_mass[i] = lm;
    }
    const double peak = *std::max_element(log_mass.begin(), log_mass.end());
    if (!std::isfinite(peak)) {
        double total = 0.0;
        for (std::size_t i = 0; i < hops; ++i) {
            out[i] = hop_prior_prob(*prior, static_cast<int>(i) + 1);
            total += out[i];
        }
        for (double& v : out) v /= total;
        return PosteriorVector{std::move(out)};
    }
    double total = 0.0;
    for (std::size_t i = 0; i < hops; ++i) {
        out[i] = std::exp(log_mass[i] - peak);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return PosteriorVector{std::move(out)};
}

// Argmax hop count; ties break toward the smaller h, favoring a direct
// connection.
inline int decide_distance(const PosteriorVector& agg) {
    if (agg.probs.empty()) throw std::invalid_argument("empty posterior");
    int best = 1;
    for (int h = 2; h <= agg.max_hops(); ++h)
        if (agg.probs[static_cast<std::size_t>(h) - 1] >
            agg.probs[static_cast<std::size_t>(best) - 1])
            best = h;
    return best;
}

// Distance estimate for one (source, relay) pair. estimated_hops == 0 means
// every observation of the pair was uninformative.
struct EdgeEstimate {
    std::string source;
    std::string relay;
    int estimated_hops = 0;
    double mean_posterior = 0.0;  // posterior mass at the argmax
    std::int64_t observation_count = 0;
    std::string flag;  // "", "low_confidence" (estimate above 3), "uninformative"
};

struct InferenceResult {
    std::vector<EdgeEstimate> estimates;  // sorted by (source, relay)
    std::set<std::pair<std::string, std::string>> direct_edges;
    std::int64_t uninformative_observations = 0;
};

using CountryLookup = std::function<std::string(const std::string&)>;

struct InferOptions {
    int min_blocks = 5;
    AggregationMode mode = AggregationMode::mean_posterior;
};

// Classify (source, relay) pairs: sources must pass the miner filter, each
// pair's observation posteriors are aggregated, and the pair is a direct edge
// iff the decided distance is 1. Observations within a pair are processed in
// (block_index, delta) order, so the result is independent of input order.
inline InferenceResult infer_edges(const std::vector<Observation>& observations,
                                   const ParameterPack& pack, const CountryLookup& country_of,
                                   const InferOptions& options = {}) {
    validate(pack);
    const std::set<std::string> miners = filter_miners(observations, options.min_blocks);

    std::map<std::pair<std::string, std::string>, std::vector<const Observation*>> pairs;
    for (const Observation& obs : observations) {
        if (!miners.count(obs.source)) continue;
        pairs[{obs.source, obs.relay}].push_back(&obs);
    }

    InferenceResult result;
    for (auto& [key, group] : pairs) {
        std::sort(group.begin(), group.end(), [](const Observation* a, const Observation* b) {
            if (a->block_index != b->block_index) return a->block_index < b->block_index;
            return a->delta_ms < b->delta_ms;
        });

        const std::string ca = country_of(key.first);
        const std::string cb = country_of(key.second);
        std::vector<PosteriorVector> posteriors;
        posteriors.reserve(group.size());
        for (const Observation* obs : group) {
            std::optional<PosteriorVector> p =
                observation_posterior(pack, ca, cb, obs->delta_ms, obs->block_size_bytes);
            if (p)
                posteriors.push_back(std::move(*p));
            else
                ++result.uninformative_observations;
        }

        EdgeEstimate estimate;
        estimate.source = key.first;
        estimate.relay = key.second;
        estimate.observation_count = static_cast<std::int64_t>(posteriors.size());
        if (posteriors.empty()) {
            estimate.flag = "uninformative";
        } else {
            const PosteriorVector agg = aggregate(posteriors, options.mode, &pack.prior);
            estimate.estimated_hops = decide_distance(agg);
            estimate.mean_posterior = agg.at_hop(estimate.estimated_hops);
            if (estimate.estimated_hops > 3) estimate.flag = "low_confidence";
            if (estimate.estimated_hops == 1) result.direct_edges.insert(key);
        }
        result.estimates.push_back(std::move(estimate));
    }
    return result;
}

}  // namespace topoinfer
