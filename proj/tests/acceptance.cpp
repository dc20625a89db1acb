// Acceptance suite: one pass/fail line per criterion, non-zero exit when any
// criterion fails. The determinism criterion drives the installed CLI and
// needs TOPOINFER_CLI; the sweep criteria read the bundled sample inputs via
// TOPOINFER_SRC. Both are set by ctest.

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "topoinfer/eval.hpp"
#include "topoinfer/experiment.hpp"
#include "topoinfer/inference.hpp"
#include "topoinfer/ingest.hpp"
#include "topoinfer/io.hpp"
#include "topoinfer/prob.hpp"
#include "topoinfer/rng.hpp"
#include "topoinfer/simulate.hpp"
#include "topoinfer/topology.hpp"

namespace fs = std::filesystem;
using namespace topoinfer;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define ACC(cond, msg)                                     \
    do {                                                   \
        if (!(cond)) throw Failure(std::string("") + msg); \
    } while (0)

int failures = 0;

void criterion(const std::string& name, const std::function<void()>& body) {
    try {
        body();
        std::cout << "[PASS] " << name << "\n";
    } catch (const std::exception& e) {
        ++failures;
        std::cout << "[FAIL] " << name << ": " << e.what() << "\n";
    }
    std::cout.flush();
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

// --------------------------------------------------------------------------

void table_one_arithmetic() {
    const ClassScore main_net = score_counts(33, 33, 7);
    ACC(std::abs(main_net.precision.value() - 0.500) < 1e-12, "main-net precision");
    ACC(std::abs(main_net.recall.value() - 0.825) < 1e-12, "main-net recall");
    const ClassScore gervais = score_counts(18, 18, 22);
    ACC(std::abs(gervais.precision.value() - 0.500) < 1e-12, "gervais precision");
    ACC(std::abs(gervais.recall.value() - 0.450) < 1e-12, "gervais recall");
    const ClassScore test_net = score_counts(30, 26, 10);
    ACC(std::abs(test_net.precision.value() - 0.5357) < 1e-4, "test-net precision");
    ACC(std::abs(test_net.recall.value() - 0.750) < 1e-4, "test-net recall");
}

void normalization_property() {
    Rng rng(20240901);
    int informative = 0;
    for (int i = 0; i < 10000; ++i) {
        const int n = 5 + static_cast<int>(rng.below(995));
        const double deg = 0.5 + rng.uniform() * (n - 2.2);
        const HopPrior prior{deg, n};
        const double lat_mean = 2.0 + 400.0 * rng.uniform();
        const double lat_sd = lat_mean * (0.02 + 0.55 * rng.uniform());
        const double proc_mean = 900.0 * rng.uniform();
        const double proc_sd = proc_mean * 0.4 * rng.uniform();
        const double eps = 0.1 + 30.0 * rng.uniform();
        const int max_hops = 1 + static_cast<int>(rng.below(12));
        const LikelihoodParams params{NormalParams{lat_mean, lat_sd * lat_sd},
                                      NormalParams{proc_mean, proc_sd * proc_sd}, eps, max_hops};
        const int h = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_hops)));
        const double t =
            h * (lat_mean + proc_mean) + (rng.uniform() - 0.5) * 8.0 * lat_sd;
        const auto post = posterior(prior, params, t);
        if (!post) continue;
        ++informative;
        double sum = 0.0;
        for (double p : post->probs) {
            ACC(p >= 0.0 && p <= 1.0, "posterior entry outside [0,1]");
            sum += p;
        }
        ACC(std::abs(sum - 1.0) <= 1e-9, "posterior sum off by " + fmt(sum - 1.0));
    }
    ACC(informative >= 8000, "too few informative draws: " + fmt(informative));

    // Prior partial sums: monotone, matching the geometric identity.
    Rng prng(7);
    for (int i = 0; i < 50; ++i) {
        const int n = 5 + static_cast<int>(prng.below(995));
        const double deg = 0.5 + prng.uniform() * (n - 2.2);
        const HopPrior prior{deg, n};
        const double p = edge_probability(prior);
        double sum = 0.0;
        for (int h = 1; h <= 400; ++h) {
            const double next = sum + hop_prior_prob(prior, h);
            ACC(next >= sum, "partial sums must be monotone");
            sum = next;
            ACC(std::abs(sum - (1.0 - std::pow(1.0 - p, h))) <= 1e-12,
                "partial sum deviates from the geometric identity");
        }
        ACC(sum <= 1.0 + 1e-12, "partial sums exceeded 1");
    }
}

void convolution_oracle() {
    Rng rng(555);
    for (int i = 0; i < 100; ++i) {
        const double lat_mean = 5.0 + 295.0 * rng.uniform();
        const double lat_sd = lat_mean * (0.05 + 0.45 * rng.uniform());
        const double proc_mean = 500.0 * rng.uniform();
        const double proc_sd = rng.uniform() < 0.3 ? 0.0 : proc_mean * 0.4 * rng.uniform();
        const double eps = 0.5 + 24.5 * rng.uniform();
        const LikelihoodParams params{NormalParams{lat_mean, lat_sd * lat_sd},
                                      NormalParams{proc_mean, proc_sd * proc_sd}, eps, 9};
        for (int h = 1; h <= 3; ++h) {
            const double hop_mean = lat_mean + proc_mean;
            const double hop_sd = std::sqrt(h * (lat_sd * lat_sd + proc_sd * proc_sd));
            const double t = h * hop_mean + (rng.uniform() - 0.5) * 10.0 * hop_sd;
            const double closed = hop_likelihood(params, h, t);
            const double numeric =
                oracles::conv_likelihood(params.latency, params.processing, h, t, eps);
            ACC(std::abs(closed - numeric) <= 1e-6,
                "h=" + std::to_string(h) + " closed " + fmt(closed) + " vs numeric " +
                    fmt(numeric));
        }
    }
}

void path_oracle() {
    Rng rng(808);
    int graphs = 0;
    while (graphs < 200) {
        const int n = 2 + static_cast<int>(rng.below(9));
        Topology topo;
        topo.node_country.assign(static_cast<std::size_t>(n), "ZZ");
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.uniform() < 0.2 + 0.7 * rng.uniform())
                    topo.edges.push_back(Edge{i, j, 1.0 + 299.0 * rng.uniform()});
        std::vector<double> proc(static_cast<std::size_t>(n), 0.0);
        if (rng.uniform() < 0.7)
            for (double& d : proc) d = 100.0 * rng.uniform();
        ++graphs;
        for (int s = 0; s < n; ++s) {
            const auto dist = shortest_delays(topo, proc, s);
            for (int r = 0; r < n; ++r) {
                if (r == s) continue;
                const double expect = oracles::brute_force_min_delay(topo, proc, s, r);
                if (expect == std::numeric_limits<double>::infinity()) {
                    ACC(dist[static_cast<std::size_t>(r)] == kUnreachable,
                        "reachability mismatch");
                } else {
                    ACC(dist[static_cast<std::size_t>(r)] == expect,
                        "cost mismatch: " + fmt(dist[static_cast<std::size_t>(r)]) + " vs " +
                            fmt(expect));
                }
            }
        }
    }
}

void noise_free_recovery() {
    ExperimentConfig cfg;
    cfg.n_nodes = 300;
    cfg.out_degree = 8;
    cfg.countries = CountryDistribution{{{"ZZ", 1.0}}};
    cfg.block_sizes_bytes = {15678};
    cfg.scenarios = {VarianceScenario::empirical};
    cfg.repetitions = 1;
    cfg.constants = ProcessingModel{12.7357, 0.0};
    cfg.max_hops = 9;
    cfg.up_to_distance = 9;
    cfg.seed = 31;
    cfg.latency_data.records = {{"ZZ", "ZZ", 100.0}, {"ZZ", "ZZ", 100.0}};
    const ExperimentReport report = run_experiment(cfg);
    ACC(report.errors.empty(), "cells failed");
    ACC(report.rows.size() == 9, "expected 9 distance rows");
    for (const ReportRow& row : report.rows) {
        ACC(row.counts.fp == 0, "false positives at distance " + std::to_string(row.distance));
        ACC(row.counts.fn == 0, "false negatives at distance " + std::to_string(row.distance));
    }
    // Every connected pair must have been scored correctly.
    std::int64_t scored = 0;
    for (const ReportRow& row : report.rows) scored += row.counts.tp;
    ACC(scored == 300LL * 299 / 2, "not every pair scored");
}

void sweep_trend(const fs::path& src_root) {
    const ExperimentConfig cfg =
        io::read_config((src_root / "samples" / "experiment_block_sweep.json").string());
    const ExperimentReport report = run_experiment(cfg);
    ACC(report.errors.empty(), "cells failed");
    ACC(report.rows.size() == 27, "expected 3 block sizes x 3 scenarios x 3 distances");

    const auto row = [&](std::int64_t block, VarianceScenario scenario,
                         int distance) -> const ReportRow& {
        for (const ReportRow& r : report.rows)
            if (r.block_size == block && r.scenario == scenario && r.distance == distance)
                return r;
        throw Failure("missing report row");
    };
    const auto precision = [&](std::int64_t block, VarianceScenario s, int d) {
        return row(block, s, d).precision.value_or(0.0);
    };

    // (a) distance-1 recall for 2 MB under the small scenario.
    const double recall_2mb = row(2000000, VarianceScenario::small, 1).recall.value_or(0.0);
    std::cout << "  (a) recall@d1 2MB small = " << recall_2mb << " (need >= 0.8)\n";
    ACC(recall_2mb >= 0.8, "distance-1 recall for 2 MB below 0.8: " + fmt(recall_2mb));

    // (b) precision at distances 2-3: 2 MB at least as good as 1630 B.
    for (VarianceScenario s :
         {VarianceScenario::small, VarianceScenario::medium, VarianceScenario::large}) {
        for (int d : {2, 3}) {
            const double p_big = precision(2000000, s, d);
            const double p_small = precision(1630, s, d);
            std::cout << "  (b) precision@d" << d << " " << scenario_name(s) << ": 2MB " << p_big
                      << " vs 1630B " << p_small << "\n";
            ACC(p_big >= p_small, "2 MB precision below 1630 B at distance " + std::to_string(d));
        }
    }

    // (c) distance-1 precision: directionally larger-block-better, and the
    // large-block level within +-15 percentage points of ~0.4.
    const double p1_1630 = precision(1630, VarianceScenario::small, 1);
    const double p1_1mb = precision(1000000, VarianceScenario::small, 1);
    const double p1_2mb = precision(2000000, VarianceScenario::small, 1);
    std::cout << "  (c) precision@d1 small: 1630B " << p1_1630 << ", 1MB " << p1_1mb << ", 2MB "
              << p1_2mb << "\n";
    ACC(p1_1mb >= p1_1630 && p1_2mb >= p1_1630, "larger blocks must not lower precision@d1");
    ACC(std::abs(p1_2mb - 0.40) <= 0.15,
        "precision@d1 for 2 MB is " + fmt(p1_2mb) +
            ", outside 0.40 +- 0.15: with the matched model the hop classes sit >100 sigma "
            "apart at 2 MB, so false positives vanish and precision is ~1.0 (known "
            "irreproducible bar, see notes)");
}

void ingestion_round_trip() {
    // Known topology, zero variance everywhere: deltas are exact and the
    // capture is reconstructed from them.
    const CountryDistribution single{{{"ZZ", 1.0}}};
    const Topology topo = generate_topology(40, 4, single, 17);
    LatencyModel model;
    model.set("ZZ", "ZZ", NormalParams{100.0, 0.0});
    const ProcessingModel constants{12.7357, 0.0};
    const std::int64_t block_size = 15678;

    SimOptions options;
    options.block_size_bytes = block_size;
    options.repetitions = 1;
    options.seed = 23;
    std::vector<int> sources(10);
    std::iota(sources.begin(), sources.end(), 0);
    const SynthesisResult synth = synthesize_observations(
        topo, model, processing_params(constants, block_size), options, sources);
    ACC(synth.diagnostics.disconnected_pairs == 0, "graph must be connected");

    // Per-peer RTTs; every peer announces every block, the miner first.
    std::vector<double> rtt(static_cast<std::size_t>(topo.node_count()));
    for (std::size_t i = 0; i < rtt.size(); ++i) rtt[i] = 50.0 + static_cast<double>(i);

    struct Line {
        double ts;
        std::string text;
    };
    std::vector<Line> lines;
    for (std::size_t i = 0; i < rtt.size(); ++i) {
        std::ostringstream ss;
        ss << R"({"kind":"rtt_sample","peer":")" << i << R"(","rtt_ms":)" << rtt[i]
           << R"(,"ts_ms":0})";
        lines.push_back({0.0, ss.str()});
    }
    const int blocks_per_source = 6;
    std::map<std::pair<std::string, std::string>, double> expected_delta;
    double t_mine = 10000.0;
    int block_no = 0;
    for (int s : sources) {
        std::map<int, double> deltas;
        for (const SyntheticObservation& obs : synth.observations)
            if (obs.source == s) deltas[obs.relay] = obs.delta_ms;
        for (int b = 0; b < blocks_per_source; ++b) {
            const std::string block = "blk" + std::to_string(block_no++);
            {
                const double ts = t_mine + rtt[static_cast<std::size_t>(s)] / 2.0;
                std::ostringstream ss;
                ss.precision(17);
                ss << R"({"kind":"announce","peer":")" << s << R"(","block":")" << block
                   << R"(","ts_ms":)" << ts << R"(,"size_bytes":)" << block_size << "}";
                lines.push_back({ts, ss.str()});
            }
            for (const auto& [relay, delta] : deltas) {
                const double ts = t_mine + delta + rtt[static_cast<std::size_t>(relay)] / 2.0;
                std::ostringstream ss;
                ss.precision(17);
                ss << R"({"kind":"announce","peer":")" << relay << R"(","block":")" << block
                   << R"(","ts_ms":)" << ts << R"(,"size_bytes":)" << block_size << "}";
                lines.push_back({ts, ss.str()});
                expected_delta[{std::to_string(s), std::to_string(relay)}] = delta;
            }
            t_mine += 100000.0;
        }
    }
    std::stable_sort(lines.begin(), lines.end(),
                     [](const Line& a, const Line& b) { return a.ts < b.ts; });

    const fs::path dir = fs::temp_directory_path() / ("topoinfer_acc_" + std::to_string(getpid()));
    fs::create_directories(dir);
    const std::string log_path = (dir / "capture.ndjson").string();
    {
        std::ofstream out(log_path);
        for (const Line& line : lines) out << line.text << "\n";
    }

    const io::CaptureLog log = io::read_capture_log(log_path);
    ACC(log.skipped_clock_violation == 0, "capture must be clock-ordered");
    const IngestResult ingested = build_observations(log.announcements, log.rtt);
    ACC(ingested.observations.size() ==
            expected_delta.size() * static_cast<std::size_t>(blocks_per_source),
        "observation count mismatch");
    for (const Observation& obs : ingested.observations) {
        const auto it = expected_delta.find({obs.source, obs.relay});
        ACC(it != expected_delta.end(), "unexpected pair " + obs.source + "," + obs.relay);
        ACC(std::abs(obs.delta_ms - it->second) <= 1e-3,
            "delta off by " + fmt(obs.delta_ms - it->second) + " ms");
    }

    // Direct-edge recovery from the reconstructed observations.
    ParameterPack pack;
    pack.pairs = model;
    pack.constants = constants;
    pack.epsilon_ms = 5.0;
    pack.max_hops = 9;
    pack.relay_factor = 1.5;
    pack.prior = HopPrior{8.0, topo.node_count()};
    const InferenceResult inferred = infer_edges(
        ingested.observations, pack, [](const std::string&) { return std::string("ZZ"); });

    std::set<std::pair<std::string, std::string>> planted;
    for (int s : sources) {
        const std::vector<int> hops = hop_distances(topo, s);
        for (int r = 0; r < topo.node_count(); ++r)
            if (hops[static_cast<std::size_t>(r)] == 1)
                planted.insert({std::to_string(s), std::to_string(r)});
    }
    std::size_t recovered = 0;
    for (const auto& edge : planted) recovered += inferred.direct_edges.count(edge);
    const double rate = static_cast<double>(recovered) / static_cast<double>(planted.size());
    ACC(rate >= 0.95, "recovered only " + fmt(rate) + " of planted direct edges");
    fs::remove_all(dir);
}

// --------------------------------------------------------------------------
// Determinism of every CLI subcommand.

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    ACC(static_cast<bool>(in), "missing output file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void run_cli(const std::string& cli, const std::string& args) {
    const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    ACC(rc == 0, "command failed (" + std::to_string(rc) + "): " + cmd);
}

void determinism(const fs::path& src_root) {
    const char* cli_env = std::getenv("TOPOINFER_CLI");
    ACC(cli_env != nullptr, "TOPOINFER_CLI not set");
    const std::string cli = cli_env;

    const fs::path dir =
        fs::temp_directory_path() / ("topoinfer_det_" + std::to_string(getpid()));
    fs::remove_all(dir);
    const fs::path a = dir / "a";
    const fs::path b = dir / "b";
    fs::create_directories(a);
    fs::create_directories(b);

    const std::string latency = (src_root / "samples" / "latency_7country.csv").string();

    const fs::path cfg_path = dir / "experiment.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({
  "n_nodes": 60, "out_degree": 4,
  "countries": [{"code": "US", "share": 0.5}, {"code": "DE", "share": 0.5}],
  "block_sizes_bytes": [1630, 2000000],
  "scenarios": ["small", "large"],
  "repetitions": 4, "epsilon_ms": 5.0, "max_hops": 9,
  "constants_preset": "gervais", "seed": 77,
  "latency_csv": ")" << latency
            << R"("
})";
    }

    const fs::path log_path = dir / "capture.ndjson";
    {
        std::ofstream log(log_path);
        log << R"({"kind":"rtt_sample","peer":"p1","rtt_ms":60,"ts_ms":0})" << "\n"
            << R"({"kind":"rtt_sample","peer":"p2","rtt_ms":100,"ts_ms":1})" << "\n";
        for (int blk = 1; blk <= 6; ++blk)
            log << R"({"kind":"announce","peer":"p1","block":"b)" << blk << R"(","ts_ms":)"
                << 1000 * blk << R"(,"size_bytes":15678})" << "\n"
                << R"({"kind":"announce","peer":"p2","block":"b)" << blk << R"(","ts_ms":)"
                << 1000 * blk + 420 << R"(,"size_bytes":15678})" << "\n";
    }

    for (const fs::path& out : {a, b}) {
        const std::string o = out.string();
        run_cli(cli, "fit --dataset " + latency +
                         " --scenario small --preset gervais --deg 8 --nodes 60 --out " + o +
                         "/pack.json");
        run_cli(cli, "generate --nodes 60 --degree 4 --countries US:0.5,DE:0.5 --seed 41 --pack " +
                         o + "/pack.json --out " + o + "/topology.json");
        run_cli(cli, "simulate --topology " + o + "/topology.json --pack " + o +
                         "/pack.json --block-size 2000000 --repetitions 6 --seed 42 --out " + o +
                         "/observations.csv");
        run_cli(cli, "infer --observations " + o + "/observations.csv --pack " + o +
                         "/pack.json --topology " + o + "/topology.json --min-blocks 5 --out " +
                         o + "/edges.csv");
        run_cli(cli, "score --estimates " + o + "/edges.csv --truth " + o +
                         "/observations.csv --up-to 3 --out " + o + "/scores.csv");
        run_cli(cli, "ingest --log " + log_path.string() + " --out " + o + "/ingested.csv");
        run_cli(cli, "experiment --config " + cfg_path.string() + " --out " + o + "/report.csv");
    }

    for (const char* name : {"pack.json", "topology.json", "observations.csv", "edges.csv",
                             "scores.csv", "ingested.csv", "report.csv"}) {
        const std::string xa = slurp(a / name);
        const std::string xb = slurp(b / name);
        ACC(!xa.empty(), std::string(name) + " is empty");
        ACC(xa == xb, std::string(name) + " differs between identical runs");
    }
    fs::remove_all(dir);
}

}  // namespace

int main() {
    const char* src_env = std::getenv("TOPOINFER_SRC");
    const fs::path src_root = src_env ? fs::path(src_env) : fs::path("..");

    criterion("table-one-arithmetic", table_one_arithmetic);
    criterion("prior-posterior-normalization", normalization_property);
    criterion("convolution-oracle", convolution_oracle);
    criterion("brute-force-path-oracle", path_oracle);
    criterion("noise-free-recovery", noise_free_recovery);
    criterion("block-size-sweep-trend", [&] { sweep_trend(src_root); });
    criterion("ingestion-round-trip", ingestion_round_trip);
    criterion("subcommand-determinism", [&] { determinism(src_root); });

    if (failures > 0) {
        std::cout << failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
