#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "topoinfer/errors.hpp"
#include "topoinfer/params.hpp"
#include "topoinfer/rng.hpp"
#include "topoinfer/topology.hpp"

namespace topoinfer {

// One synthetic timing measurement: the adjusted arrival-time difference the
// vantage point would record between the source's and the relay's block
// announcements. Vantage legs cancel under the half-RTT adjustment, so they
// never enter delta. true_hops is the unweighted shortest-path distance.
struct SyntheticObservation {
    int source = 0;
    int relay = 0;
    std::int64_t block_size_bytes = 0;
    double delta_ms = 0.0;
    int repetition = 0;
    int true_hops = 0;
};

struct SimDiagnostics {
    std::int64_t disconnected_pairs = 0;
};

struct SimOptions {
    std::int64_t block_size_bytes = 0;
    int repetitions = 1;
    double relay_factor = 1.5;
    bool include_processing = true;
    std::uint64_t seed = 0;
};

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

namespace detail {

using Adjacency = std::vector<std::vector<std::pair<int, double>>>;

inline Adjacency adjacency(const Topology& topo) {
    Adjacency adj(static_cast<std::size_t>(topo.node_count()));
    for (const Edge& e : topo.edges) {
        adj[static_cast<std::size_t>(e.a)].push_back({e.b, e.weight_ms});
        adj[static_cast<std::size_t>(e.b)].push_back({e.a, e.weight_ms});
    }
    return adj;
}

inline std::vector<double> dijkstra(const Adjacency& adj, std::span<const double> processing_ms,
                                    int source) {
    std::vector<double> dist(adj.size(), kUnreachable);
    dist[static_cast<std::size_t>(source)] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.push({0.0, source});
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[static_cast<std::size_t>(u)]) continue;
        for (const auto& [v, w] : adj[static_cast<std::size_t>(u)]) {
            const double step =
                w + (processing_ms.empty() ? 0.0 : processing_ms[static_cast<std::size_t>(v)]);
            const double cand = d + step;
            if (cand < dist[static_cast<std::size_t>(v)]) {
                dist[static_cast<std::size_t>(v)] = cand;
                heap.push({cand, v});
            }
        }
    }
    return dist;
}

}  // namespace detail

// Minimum accumulated relay cost from source to every node, where traversing
// an edge into v costs weight(u,v) + processing[v]: every receiving node on
// the path validates the block before re-announcing, the sender does not.
// Unreachable nodes get kUnreachable. An empty processing span means zero
// processing delay everywhere.
inline std::vector<double> shortest_delays(const Topology& topo,
                                           std::span<const double> processing_ms, int source) {
    const int n = topo.node_count();
    if (source < 0 || source >= n) throw std::invalid_argument("source out of range");
    if (!processing_ms.empty() && static_cast<int>(processing_ms.size()) != n)
        throw std::invalid_argument("processing delay vector size mismatch");
    return detail::dijkstra(detail::adjacency(topo), processing_ms, source);
}

// Unweighted shortest-path hop counts from source; -1 where unreachable.
inline std::vector<int> hop_distances(const Topology& topo, int source) {
    const int n = topo.node_count();
    if (source < 0 || source >= n) throw std::invalid_argument("source out of range");
    const auto adj = detail::adjacency(topo);
    std::vector<int> dist(static_cast<std::size_t>(n), -1);
    dist[static_cast<std::size_t>(source)] = 0;
    std::queue<int> frontier;
    frontier.push(source);
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (const auto& [v, w] : adj[static_cast<std::size_t>(u)]) {
            if (dist[static_cast<std::size_t>(v)] < 0) {
                dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
                frontier.push(v);
            }
        }
    }
    return dist;
}

// Per-node validation delay samples for one repetition, clamped at 0.
inline std::vector<double> draw_processing_delays(int n, const NormalParams& params, Rng& rng) {
    std::vector<double> delays(static_cast<std::size_t>(n));
    const double sd = std::sqrt(params.var_ms2);
    for (double& d : delays) d = std::max(rng.gaussian(params.mean_ms, sd), 0.0);
    return delays;
}

// Seed streams per repetition. Shared by synthesize_repetition and the
// experiment runner so a repetition's draws can be reproduced independently.
inline std::uint64_t weights_seed(std::uint64_t base, int repetition) {
    return derive_seed(base, 1 + 2 * static_cast<std::uint64_t>(repetition));
}
inline std::uint64_t processing_seed(std::uint64_t base, int repetition) {
    return derive_seed(base, 2 + 2 * static_cast<std::uint64_t>(repetition));
}

// Ground-truth hop counts from every source, aligned with `sources`. Computed
// once per topology; repetitions only redraw delays, never structure.
inline std::vector<std::vector<int>> true_hop_matrix(const Topology& topo,
                                                     std::span<const int> sources) {
    std::vector<std::vector<int>> hops;
    hops.reserve(sources.size());
    for (int s : sources) hops.push_back(hop_distances(topo, s));
    return hops;
}

// One repetition: redraw edge weights and per-node processing delays, then
// record the shortest combined delay from every source to every other node.
// `hops` must come from true_hop_matrix(topo, sources).
inline std::vector<SyntheticObservation> synthesize_repetition(
    const Topology& topo, const LatencyModel& latency_model, const NormalParams& processing,
    const SimOptions& options, std::span<const int> sources,
    const std::vector<std::vector<int>>& hops, int repetition, SimDiagnostics& diagnostics) {
    const int n = topo.node_count();
    const Topology weighted = assign_edge_latencies(topo, latency_model, options.relay_factor,
                                                    weights_seed(options.seed, repetition));
    const detail::Adjacency adj = detail::adjacency(weighted);

    std::vector<double> delays;
    if (options.include_processing) {
        Rng rng(processing_seed(options.seed, repetition));
        delays = draw_processing_delays(n, processing, rng);
    }

    std::vector<SyntheticObservation> out;
    out.reserve(sources.size() * static_cast<std::size_t>(n > 0 ? n - 1 : 0));
    for (std::size_t si = 0; si < sources.size(); ++si) {
        const int source = sources[si];
        if (source < 0 || source >= n) throw ConfigError("source node out of range");
        const std::vector<double> cost = detail::dijkstra(adj, delays, source);
        for (int relay = 0; relay < n; ++relay) {
            if (relay == source) continue;
            if (cost[static_cast<std::size_t>(relay)] == kUnreachable) {
                ++diagnostics.disconnected_pairs;
                continue;
            }
            out.push_back(SyntheticObservation{source, relay, options.block_size_bytes,
                                               cost[static_cast<std::size_t>(relay)], repetition,
                                               hops[si][static_cast<std::size_t>(relay)]});
        }
    }
    return out;
}

struct SynthesisResult {
    std::vector<SyntheticObservation> observations;
    SimDiagnostics diagnostics;
};

// Full synthesis: repetitions are independent given their derived seeds, and
// the output is ordered by (repetition, source, relay).
inline SynthesisResult synthesize_observations(const Topology& topo,
                                               const LatencyModel& latency_model,
                                               const NormalParams& processing,
                                               const SimOptions& options,
                                               std::span<const int> sources) {
    if (options.repetitions < 1) throw ConfigError("repetitions must be >= 1");
    const std::vector<std::vector<int>> hops = true_hop_matrix(topo, sources);
    SynthesisResult result;
    for (int rep = 0; rep < options.repetitions; ++rep) {
        std::vector<SyntheticObservation> batch = synthesize_repetition(
            topo, latency_model, processing, options, sources, hops, rep, result.diagnostics);
        result.observations.insert(result.observations.end(), batch.begin(), batch.end());
    }
    return result;
}

}  // namespace topoinfer
