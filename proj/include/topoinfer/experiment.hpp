#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "topoinfer/eval.hpp"
#include "topoinfer/inference.hpp"
#include "topoinfer/params.hpp"
#include "topoinfer/simulate.hpp"
#include "topoinfer/topology.hpp"

namespace topoinfer {

// Full simulation experiment: one random topology, then one cell per
// (block size, variance scenario) running generate -> assign latencies ->
// synthesize repetitions -> infer -> score against ground-truth hop counts.
struct ExperimentConfig {
    int n_nodes = 300;
    int out_degree = 8;
    CountryDistribution countries;
    std::vector<std::int64_t> block_sizes_bytes;
    std::vector<VarianceScenario> scenarios;
    int repetitions = 50;
    double epsilon_ms = 5.0;
    int max_hops = 9;
    ProcessingModel constants;
    double relay_factor = 1.5;
    RttConvention rtt_convention = RttConvention::half_rtt;
    bool include_processing = true;
    int up_to_distance = 3;
    double prior_mean_degree = 0.0;  // 0: use 2 * out_degree
    AggregationMode aggregation = AggregationMode::mean_posterior;
    std::uint64_t seed = 0;
    LatencyDataset latency_data;
};

inline void validate(const ExperimentConfig& cfg) {
    if (cfg.repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (cfg.block_sizes_bytes.empty()) throw ConfigError("block_sizes_bytes must be non-empty");
    if (cfg.scenarios.empty()) throw ConfigError("scenarios must be non-empty");
    if (cfg.up_to_distance < 1) throw ConfigError("up_to_distance must be >= 1");
    if (cfg.max_hops < 1) throw ConfigError("max_hops must be >= 1");
    if (!(cfg.epsilon_ms >= 0.0)) throw ConfigError("epsilon must be >= 0");
    validate(cfg.countries);
    validate(cfg.constants);
}

struct ReportRow {
    std::int64_t block_size = 0;
    VarianceScenario scenario = VarianceScenario::small;
    int distance = 0;
    ConfusionCounts counts;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> stderr_precision;
};

struct CellError {
    std::int64_t block_size = 0;
    VarianceScenario scenario = VarianceScenario::small;
    std::string message;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;     // ordered by (block size, scenario, distance)
    std::vector<CellError> errors;   // failed cells; the rest still report
};

namespace detail {

// Seed streams: the topology is shared by every cell of a run so block-size
// and scenario effects are compared on one graph; repetition draws descend
// from the cell seed via weights_seed/processing_seed.
inline constexpr std::uint64_t kTopologyStream = 0x746f706f;
inline constexpr std::uint64_t kCellStreamBase = 0x63656c6c;

struct PairAccumulator {
    std::vector<double> mass;           // mean mode: sum of posteriors; bayes: sum of logs
    std::vector<std::int64_t> counts;   // informative observations per pair
};

inline std::size_t pair_index(int i, int j, int n) {
    // i < j; row-major upper triangle
    return static_cast<std::size_t>(i) * (2u * static_cast<std::size_t>(n) -
                                          static_cast<std::size_t>(i) - 1u) / 2u +
           static_cast<std::size_t>(j - i - 1);
}

inline std::vector<ReportRow> run_cell(const ExperimentConfig& cfg, const Topology& topo,
                                       const std::vector<std::vector<int>>& hops,
                                       std::int64_t block_size, VarianceScenario scenario,
                                       std::uint64_t cell_seed) {
    const int n = topo.node_count();
    const LatencyModel model =
        fit_latency_model(cfg.latency_data, scenario, cfg.rtt_convention);

    ParameterPack pack;
    pack.pairs = model;
    pack.constants = cfg.constants;
    pack.epsilon_ms = cfg.epsilon_ms;
    pack.max_hops = cfg.max_hops;
    pack.relay_factor = cfg.relay_factor;
    pack.prior = HopPrior{
        cfg.prior_mean_degree > 0.0 ? cfg.prior_mean_degree : 2.0 * cfg.out_degree, n};
    validate(pack);

    // Per-country-index likelihood parameter table; node countries never
    // change across repetitions, so the string-keyed lookups leave the loop.
    std::vector<std::string> codes;
    std::vector<int> country_of(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) {
        const std::string& c = topo.node_country[static_cast<std::size_t>(v)];
        const auto it = std::find(codes.begin(), codes.end(), c);
        if (it == codes.end()) {
            country_of[static_cast<std::size_t>(v)] = static_cast<int>(codes.size());
            codes.push_back(c);
        } else {
            country_of[static_cast<std::size_t>(v)] = static_cast<int>(it - codes.begin());
        }
    }
    const std::size_t nc = codes.size();
    std::vector<LikelihoodParams> params_table(nc * nc);
    for (std::size_t a = 0; a < nc; ++a)
        for (std::size_t b = 0; b < nc; ++b)
            params_table[a * nc + b] = likelihood_params(pack, codes[a], codes[b], block_size);

    const std::size_t hop_count = static_cast<std::size_t>(cfg.max_hops);
    const std::size_t pair_count = static_cast<std::size_t>(n) * (n - 1) / 2;
    const bool bayes = cfg.aggregation == AggregationMode::bayes_update;
    PairAccumulator acc;
    acc.mass.assign(pair_count * hop_count, 0.0);
    acc.counts.assign(pair_count, 0);

    std::vector<int> sources(static_cast<std::size_t>(n));
    std::iota(sources.begin(), sources.end(), 0);

    SimOptions options;
    options.block_size_bytes = block_size;
    options.repetitions = cfg.repetitions;
    options.relay_factor = cfg.relay_factor;
    options.include_processing = cfg.include_processing;
    options.seed = cell_seed;

    SimDiagnostics diagnostics;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        const std::vector<SyntheticObservation> batch = synthesize_repetition(
            topo, model, processing_params(cfg.constants, block_size), options, sources, hops,
            rep, diagnostics);
        for (const SyntheticObservation& obs : batch) {
            const int i = std::min(obs.source, obs.relay);
            const int j = std::max(obs.source, obs.relay);
            const LikelihoodParams& lp =
                params_table[static_cast<std::size_t>(
                                 country_of[static_cast<std::size_t>(obs.source)]) * nc +
                             static_cast<std::size_t>(
                                 country_of[static_cast<std::size_t>(obs.relay)])];
            const std::optional<PosteriorVector> post = posterior(pack.prior, lp, obs.delta_ms);
            if (!post) continue;
            const std::size_t base = pair_index(i, j, n) * hop_count;
            if (bayes) {
                for (std::size_t h = 0; h < hop_count; ++h)
                    acc.mass[base + h] +=
                        post->probs[h] > 0.0 ? std::log(post->probs[h])
                                             : -std::numeric_limits<double>::infinity();
            } else {
                for (std::size_t h = 0; h < hop_count; ++h) acc.mass[base + h] += post->probs[h];
            }
            ++acc.counts[pair_index(i, j, n)];
        }
    }

    std::vector<double> log_prior(hop_count);
    for (std::size_t h = 0; h < hop_count; ++h)
        log_prior[h] = std::log(hop_prior_prob(pack.prior, static_cast<int>(h) + 1));

    std::map<std::pair<int, int>, int> estimates;
    std::map<std::pair<int, int>, int> truth;
    std::vector<double> vec(hop_count);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const int true_hops = hops[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (true_hops < 1) continue;  // disconnected pair, nothing to score
            const std::size_t idx = pair_index(i, j, n);
            int est = 0;
            if (acc.counts[idx] > 0) {
                const std::size_t base = idx * hop_count;
                if (bayes) {
                    const double extra = static_cast<double>(acc.counts[idx] - 1);
                    for (std::size_t h = 0; h < hop_count; ++h)
                        vec[h] = acc.mass[base + h] - extra * log_prior[h];
                    const double peak = *std::max_element(vec.begin(), vec.end());
                    if (std::isfinite(peak)) {
                        for (std::size_t h = 0; h < hop_count; ++h)
                            vec[h] = std::exp(vec[h] - peak);
                    } else {
                        for (std::size_t h = 0; h < hop_count; ++h)
                            vec[h] = std::exp(log_prior[h]);
                    }
                } else {
                    for (std::size_t h = 0; h < hop_count; ++h) vec[h] = acc.mass[base + h];
                }
                int best = 0;
                for (std::size_t h = 1; h < hop_count; ++h)
                    if (vec[h] > vec[static_cast<std::size_t>(best)]) best = static_cast<int>(h);
                est = best + 1;
            }
            estimates[{i, j}] = est;
            truth[{i, j}] = true_hops;
        }
    }

    const std::map<int, ClassScore> scores = score(estimates, truth, cfg.up_to_distance);
    std::vector<ReportRow> rows;
    rows.reserve(scores.size());
    for (const auto& [distance, cls] : scores) {
        ReportRow row;
        row.block_size = block_size;
        row.scenario = scenario;
        row.distance = distance;
        row.counts = cls.counts;
        row.precision = cls.precision;
        row.recall = cls.recall;
        row.stderr_precision = proportion_stderr(cls.precision, cls.counts.tp + cls.counts.fp);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace detail

// Cells run in parallel under per-cell derived seeds; a failing cell is
// recorded and the remaining cells still report. Deterministic for a fixed
// config and seed regardless of scheduling: every random draw descends from a
// cell-index-derived seed and rows are assembled in cell order.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const Topology topo =
        generate_topology(cfg.n_nodes, cfg.out_degree, cfg.countries,
                          derive_seed(cfg.seed, detail::kTopologyStream));

    std::vector<int> sources(static_cast<std::size_t>(topo.node_count()));
    std::iota(sources.begin(), sources.end(), 0);
    const std::vector<std::vector<int>> hops = true_hop_matrix(topo, sources);

    struct Cell {
        std::int64_t block_size;
        VarianceScenario scenario;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (std::size_t bi = 0; bi < cfg.block_sizes_bytes.size(); ++bi)
        for (std::size_t si = 0; si < cfg.scenarios.size(); ++si)
            cells.push_back(Cell{cfg.block_sizes_bytes[bi], cfg.scenarios[si],
                                 derive_seed(cfg.seed, detail::kCellStreamBase +
                                                           bi * cfg.scenarios.size() + si)});

    std::vector<std::future<std::vector<ReportRow>>> futures;
    futures.reserve(cells.size());
    for (const Cell& cell : cells)
        futures.push_back(std::async(std::launch::async, [&cfg, &topo, &hops, cell] {
            return detail::run_cell(cfg, topo, hops, cell.block_size, cell.scenario, cell.seed);
        }));

    ExperimentReport report;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        try {
            std::vector<ReportRow> rows = futures[i].get();
            report.rows.insert(report.rows.end(), rows.begin(), rows.end());
        } catch (const std::exception& e) {
            report.errors.push_back(CellError{cells[i].block_size, cells[i].scenario, e.what()});
        }
    }
    return report;
}

}  // namespace topoinfer
