#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "topoinfer/errors.hpp"
#include "topoinfer/params.hpp"
#include "topoinfer/rng.hpp"

namespace topoinfer {

struct CountryShare {
    std::string code;
    double share = 0.0;
};

struct CountryDistribution {
    std::vector<CountryShare> entries;
};

inline void validate(const CountryDistribution& dist) {
    if (dist.entries.empty()) throw ConfigError("country distribution is empty");
    double total = 0.0;
    std::set<std::string> seen;
    for (const CountryShare& e : dist.entries) {
        if (!(e.share > 0.0)) throw ConfigError("country share must be > 0: " + e.code);
        if (!seen.insert(e.code).second) throw ConfigError("duplicate country code: " + e.code);
        total += e.share;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("country shares must sum to 1");
}

// Undirected edge, stored with a < b. weight_ms is one sampled relay delay for
// the hop (latency of the full three-way exchange).
struct Edge {
    int a = 0;
    int b = 0;
    double weight_ms = 1.0;
};

// Simple undirected overlay graph with country-tagged nodes. Node ids are
// dense 0..N-1; edges are unique, self-loop free, and sorted by (a, b).
struct Topology {
    std::vector<std::string> node_country;
    std::vector<Edge> edges;
    std::uint64_t seed = 0;

    int node_count() const { return static_cast<int>(node_country.size()); }
};

inline void validate(const Topology& topo) {
    const int n = topo.node_count();
    std::set<std::pair<int, int>> seen;
    for (const Edge& e : topo.edges) {
        if (e.a < 0 || e.b < 0 || e.a >= n || e.b >= n) throw DataError("edge endpoint out of range");
        if (e.a >= e.b) throw DataError("edges must be stored with a < b");
        if (!(e.weight_ms > 0.0)) throw DataError("edge weights must be > 0");
        if (!seen.insert({e.a, e.b}).second) throw DataError("duplicate edge");
    }
}

inline double mean_degree(const Topology& topo) {
    if (topo.node_country.empty()) return 0.0;
    return 2.0 * static_cast<double>(topo.edges.size()) / static_cast<double>(topo.node_count());
}

// Each node opens out_degree connections to uniformly chosen distinct targets;
// attempts that duplicate an existing undirected edge are merged, so the
// realized mean degree is at most 2*out_degree and approaches it for
// n >> out_degree. Countries are sampled per node from dist. Deterministic
// given the seed: countries are drawn first (node order), then targets.
inline Topology generate_topology(int n, int out_degree, const CountryDistribution& dist,
                                  std::uint64_t seed) {
    validate(dist);
    if (out_degree < 1) throw ConfigError("out_degree must be >= 1");
    if (n < out_degree + 1) throw ConfigError("need n >= out_degree + 1");

    Rng rng(seed);
    Topology topo;
    topo.seed = seed;
    topo.node_country.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        double cum = 0.0;
        std::string code = dist.entries.back().code;
        for (const CountryShare& e : dist.entries) {
            cum += e.share;
            if (u < cum) {
                code = e.code;
                break;
            }
        }
        topo.node_country.push_back(std::move(code));
    }

    std::set<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u) {
        std::set<int> targets;
        while (static_cast<int>(targets.size()) < out_degree) {
            const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            if (t != u) targets.insert(t);
        }
        for (int t : targets) edges.insert({std::min(u, t), std::max(u, t)});
    }

    topo.edges.reserve(edges.size());
    for (const auto& [a, b] : edges) topo.edges.push_back(Edge{a, b, 1.0});
    return topo;
}

// Redraw every edge weight from the endpoint-country-pair distribution, scale
// by relay_factor to cover the three-way exchange, and clamp below at 1 ms.
// Edges are visited in their canonical (a, b) order, so the draw sequence is a
// pure function of (topology, seed).
inline Topology assign_edge_latencies(const Topology& topo, const LatencyModel& model,
                                      double relay_factor, std::uint64_t seed) {
    if (!(relay_factor > 0.0)) throw ConfigError("relay factor must be > 0");
    Rng rng(seed);
    Topology out = topo;
    for (Edge& e : out.edges) {
        const NormalParams& params =
            model.at(topo.node_country[static_cast<std::size_t>(e.a)],
                     topo.node_country[static_cast<std::size_t>(e.b)]);
        const double draw = rng.gaussian(params.mean_ms, std::sqrt(params.var_ms2));
        e.weight_ms = std::max(draw * relay_factor, 1.0);
    }
    return out;
}

}  // namespace topoinfer
