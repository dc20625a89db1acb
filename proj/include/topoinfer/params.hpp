#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "topoinfer/errors.hpp"
#include "topoinfer/prob.hpp"

namespace topoinfer {

// One RTT measurement between two countries. Pairs are unordered.
struct LatencyRecord {
    std::string country_a;
    std::string country_b;
    double rtt_ms = 0.0;
};

struct LatencyDataset {
    std::vector<LatencyRecord> records;
};

// Per-country-pair one-hop latency parameters, keyed by the unordered pair.
class LatencyModel {
public:
    using Key = std::pair<std::string, std::string>;

    static Key key(std::string_view a, std::string_view b) {
        return a <= b ? Key{std::string(a), std::string(b)} : Key{std::string(b), std::string(a)};
    }

    void set(std::string_view a, std::string_view b, NormalParams params) {
        pairs_[key(a, b)] = params;
    }

    const NormalParams* find(std::string_view a, std::string_view b) const {
        const auto it = pairs_.find(key(a, b));
        return it == pairs_.end() ? nullptr : &it->second;
    }

    const NormalParams& at(std::string_view a, std::string_view b) const {
        if (const NormalParams* p = find(a, b)) return *p;
        throw DataError("latency model has no entry for country pair (" + std::string(a) + ", " +
                        std::string(b) + ")");
    }

    const std::map<Key, NormalParams>& pairs() const { return pairs_; }
    bool empty() const { return pairs_.empty(); }

private:
    std::map<Key, NormalParams> pairs_;
};

// Latency standard deviation assumed as a fraction of the mean, or estimated
// from the per-pair samples.
enum class VarianceScenario { small, medium, large, empirical };

inline double scenario_fraction(VarianceScenario s) {
    switch (s) {
        case VarianceScenario::small: return 0.10;
        case VarianceScenario::medium: return 0.30;
        case VarianceScenario::large: return 0.50;
        case VarianceScenario::empirical: break;
    }
    throw std::invalid_argument("empirical scenario has no fixed fraction");
}

inline std::string scenario_name(VarianceScenario s) {
    switch (s) {
        case VarianceScenario::small: return "small";
        case VarianceScenario::medium: return "medium";
        case VarianceScenario::large: return "large";
        case VarianceScenario::empirical: return "empirical";
    }
    throw std::invalid_argument("unknown scenario");
}

inline VarianceScenario parse_scenario(std::string_view name) {
    if (name == "small") return VarianceScenario::small;
    if (name == "medium") return VarianceScenario::medium;
    if (name == "large") return VarianceScenario::large;
    if (name == "empirical") return VarianceScenario::empirical;
    throw ConfigError("unknown variance scenario: " + std::string(name));
}

// How to turn an RTT sample into a one-way latency. half_rtt is the default;
// full_rtt keeps the whole RTT as the one-way value (alternate reading of the
// relay-factor convention, selectable for comparison).
enum class RttConvention { half_rtt, full_rtt };

inline RttConvention parse_rtt_convention(std::string_view name) {
    if (name == "half") return RttConvention::half_rtt;
    if (name == "full") return RttConvention::full_rtt;
    throw ConfigError("unknown rtt convention: " + std::string(name) + " (want half|full)");
}

inline std::string rtt_convention_name(RttConvention c) {
    return c == RttConvention::half_rtt ? "half" : "full";
}

// Validation-delay constants: mean grows as k_mu * block_size, variance as
// k_sigma2 * block_size. Constants are given in microseconds per byte.
struct ProcessingModel {
    double k_mu_us_per_byte = 0.0;
    double k_sigma2_us2_per_byte = 0.0;
};

inline void validate(const ProcessingModel& m) {
    if (m.k_mu_us_per_byte < 0.0 || m.k_sigma2_us2_per_byte < 0.0)
        throw std::invalid_argument("processing constants must be >= 0");
}

// Built-in constants sets: gervais (block-validation benchmark from the
// literature), testnet and mainnet (locally measured validation timings).
inline ProcessingModel preset_constants(std::string_view name) {
    if (name == "gervais") return {0.3796, 0.552049};
    if (name == "testnet") return {8.55, 345.1};
    if (name == "mainnet") return {12.7357, 2128.16};
    throw ConfigError("unknown constants preset: " + std::string(name) +
                      " (want gervais|testnet|mainnet)");
}

// Scale the per-byte constants to one block. This is the single point where
// microseconds become milliseconds.
inline NormalParams processing_params(const ProcessingModel& model, std::int64_t block_size_bytes) {
    validate(model);
    if (block_size_bytes < 0) throw std::invalid_argument("block size must be >= 0");
    const double bytes = static_cast<double>(block_size_bytes);
    return NormalParams{
        model.k_mu_us_per_byte * bytes / 1e3,       // us -> ms
        model.k_sigma2_us2_per_byte * bytes / 1e6,  // us^2 -> ms^2
    };
}

// Fit per-pair one-way latency parameters from RTT samples. Named scenarios
// set sigma = fraction * mean; empirical uses the Bessel-corrected sample
// variance of the one-way values and needs at least two samples per pair.
inline LatencyModel fit_latency_model(const LatencyDataset& data, VarianceScenario scenario,
                                      RttConvention convention = RttConvention::half_rtt) {
    if (data.records.empty()) throw DataError("latency dataset is empty");
    const double rtt_scale = convention == RttConvention::half_rtt ? 0.5 : 1.0;

    std::map<LatencyModel::Key, std::vector<double>> buckets;
    for (const LatencyRecord& rec : data.records) {
        if (!(rec.rtt_ms > 0.0))
            throw DataError("non-positive RTT for pair (" + rec.country_a + ", " + rec.country_b +
                            ")");
        buckets[LatencyModel::key(rec.country_a, rec.country_b)].push_back(rec.rtt_ms * rtt_scale);
    }

    LatencyModel model;
    for (const auto& [key, samples] : buckets) {
        double mean = 0.0;
        for (double s : samples) mean += s;
        mean /= static_cast<double>(samples.size());

        double var = 0.0;
        if (scenario == VarianceScenario::empirical) {
            if (samples.size() < 2)
                throw DataError("empirical variance needs >= 2 samples for pair (" + key.first +
                                ", " + key.second + ")");
            for (double s : samples) var += (s - mean) * (s - mean);
            var /= static_cast<double>(samples.size() - 1);
        } else {
            const double sigma = scenario_fraction(scenario) * mean;
            var = sigma * sigma;
        }
        model.set(key.first, key.second, NormalParams{mean, var});
    }
    return model;
}

// Everything the estimator needs for one inference run: one-way latency per
// country pair, processing constants, the integration tolerance, the hop
// range, the relay factor applied to one-way latencies, and the hop prior.
struct ParameterPack {
    LatencyModel pairs;
    ProcessingModel constants;
    double epsilon_ms = 5.0;
    int max_hops = 9;
    double relay_factor = 1.5;
    HopPrior prior;
};

inline void validate(const ParameterPack& pack) {
    if (pack.pairs.empty()) throw ConfigError("parameter pack has no latency pairs");
    validate(pack.constants);
    if (!(pack.epsilon_ms >= 0.0)) throw ConfigError("epsilon must be >= 0");
    if (pack.max_hops < 1) throw ConfigError("max_hops must be >= 1");
    if (!(pack.relay_factor > 0.0)) throw ConfigError("relay factor must be > 0");
    validate(pack.prior);
}

}  // namespace topoinfer
