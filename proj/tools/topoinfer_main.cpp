// topoinfer command line: generate topologies, simulate block propagation
// timings, fit model parameters, ingest capture logs, infer connections,
// score estimates, and run full experiment sweeps.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "topoinfer/experiment.hpp"
#include "topoinfer/inference.hpp"
#include "topoinfer/ingest.hpp"
#include "topoinfer/io.hpp"
#include "topoinfer/params.hpp"
#include "topoinfer/simulate.hpp"
#include "topoinfer/topology.hpp"

namespace {

namespace fs = std::filesystem;
using namespace topoinfer;

// --out may name a directory; default file names land inside it.
std::string resolve_out(const std::string& out, const std::string& default_name) {
    if (out.empty()) return default_name;
    if (fs::is_directory(out) || out.back() == '/') return (fs::path(out) / default_name).string();
    return out;
}

CountryDistribution parse_countries(const std::string& list) {
    // "US:0.30,RU:0.20,..."
    CountryDistribution dist;
    std::istringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        const std::size_t colon = item.find(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 >= item.size())
            throw ConfigError("bad country entry '" + item + "' (want CODE:share)");
        dist.entries.push_back(
            CountryShare{item.substr(0, colon), std::stod(item.substr(colon + 1))});
    }
    validate(dist);
    return dist;
}

std::vector<int> parse_sources(const std::string& list, int n) {
    std::vector<int> sources;
    if (list == "all") {
        sources.resize(static_cast<std::size_t>(n));
        std::iota(sources.begin(), sources.end(), 0);
        return sources;
    }
    std::istringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) sources.push_back(std::stoi(item));
    if (sources.empty()) throw ConfigError("empty source list");
    return sources;
}

int run(int argc, char** argv) {
    CLI::App app{"Passive topology inference for block-flooding peer-to-peer networks"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    std::string out;
    std::string config;
    app.add_option("--seed", seed, "Base seed for all randomness");
    app.add_option("--out", out, "Output file or directory");
    app.add_option("--config", config, "Config JSON (used by the experiment subcommand)");

    // generate
    auto* generate = app.add_subcommand("generate", "Generate a random country-tagged topology");
    int gen_nodes = 300;
    int gen_degree = 8;
    std::string gen_countries = "US:0.30,RU:0.20,CA:0.10,CN:0.10,FR:0.10,DE:0.10,JP:0.10";
    std::string gen_pack;
    generate->add_option("--nodes", gen_nodes, "Node count");
    generate->add_option("--degree", gen_degree, "Outgoing connections per node");
    generate->add_option("--countries", gen_countries, "CODE:share list, shares sum to 1");
    generate->add_option("--pack", gen_pack,
                         "Parameter pack JSON; when given, edge weights are drawn from it");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a parameter pack from a latency dataset");
    std::string fit_dataset;
    std::string fit_scenario = "small";
    std::string fit_preset;
    double fit_k_mu = -1.0, fit_k_sigma2 = -1.0;
    double fit_epsilon = 5.0;
    int fit_max_hops = 9;
    double fit_deg = 16.0;
    int fit_nodes = 300;
    double fit_relay_factor = 1.5;
    std::string fit_rtt_convention = "half";
    fit->add_option("--dataset", fit_dataset, "Latency CSV (country_a,country_b,rtt_ms)")
        ->required();
    fit->add_option("--scenario", fit_scenario, "small|medium|large|empirical");
    fit->add_option("--preset", fit_preset, "Constants preset: gervais|testnet|mainnet");
    fit->add_option("--k-mu", fit_k_mu, "Validation mean constant, us per byte");
    fit->add_option("--k-sigma2", fit_k_sigma2, "Validation variance constant, us^2 per byte");
    fit->add_option("--epsilon", fit_epsilon, "Tolerance half-width, ms");
    fit->add_option("--max-hops", fit_max_hops, "Largest hop count scored");
    fit->add_option("--deg", fit_deg, "Assumed mean degree for the hop prior");
    fit->add_option("--nodes", fit_nodes, "Assumed network size for the hop prior");
    fit->add_option("--relay-factor", fit_relay_factor, "One-way latency relay factor");
    fit->add_option("--rtt-convention", fit_rtt_convention, "half|full RTT to one-way conversion");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Synthesize timing observations");
    std::string sim_topology, sim_pack;
    std::int64_t sim_block_size = 0;
    int sim_repetitions = 50;
    std::string sim_sources = "all";
    bool sim_no_processing = false;
    simulate->add_option("--topology", sim_topology, "Topology JSON")->required();
    simulate->add_option("--pack", sim_pack, "Parameter pack JSON")->required();
    simulate->add_option("--block-size", sim_block_size, "Block size in bytes")->required();
    simulate->add_option("--repetitions", sim_repetitions, "Independent weight redraws");
    simulate->add_option("--sources", sim_sources, "'all' or comma-separated node ids");
    simulate->add_flag("--no-processing", sim_no_processing,
                       "Accumulate edge weights only, no per-hop validation delay");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Convert a capture log into observations");
    std::string ingest_log;
    double ingest_alpha = 0.125;
    std::string ingest_first = "adjusted";
    ingest->add_option("--log", ingest_log, "NDJSON capture log")->required();
    ingest->add_option("--alpha", ingest_alpha, "EWMA smoothing factor");
    ingest->add_option("--first-announcer", ingest_first,
                       "adjusted|raw clock for picking the block source");

    // infer
    auto* infer = app.add_subcommand("infer", "Estimate per-pair distances and direct edges");
    std::string infer_observations, infer_pack, infer_topology, infer_peer_countries;
    int infer_min_blocks = 5;
    std::string infer_mode = "mean";
    infer->add_option("--observations", infer_observations, "Observations CSV")->required();
    infer->add_option("--pack", infer_pack, "Parameter pack JSON")->required();
    infer->add_option("--topology", infer_topology, "Topology JSON for node countries");
    infer->add_option("--peer-countries", infer_peer_countries, "peer,country CSV");
    infer->add_option("--min-blocks", infer_min_blocks, "Miner filter threshold");
    infer->add_option("--mode", infer_mode, "Aggregation: mean|bayes");

    // score
    auto* score_cmd = app.add_subcommand("score", "Score estimates against ground truth");
    std::string score_estimates, score_truth;
    int score_up_to = 3;
    score_cmd->add_option("--estimates", score_estimates, "Inferred edges CSV")->required();
    score_cmd->add_option("--truth", score_truth,
                          "Observations CSV with true_hops, or source,relay,true_hops CSV")
        ->required();
    score_cmd->add_option("--up-to", score_up_to, "Largest distance class scored");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Run the full simulation sweep");

    CLI11_PARSE(app, argc, argv);

    if (generate->parsed()) {
        Topology topo = generate_topology(gen_nodes, gen_degree, parse_countries(gen_countries),
                                          seed);
        if (!gen_pack.empty()) {
            const ParameterPack pack = io::read_pack(gen_pack);
            topo = assign_edge_latencies(topo, pack.pairs, pack.relay_factor,
                                         derive_seed(seed, 1));
        }
        io::write_topology(resolve_out(out, "topology.json"), topo);
        return 0;
    }

    if (fit->parsed()) {
        const LatencyDataset data = io::read_latency_dataset(fit_dataset);
        ParameterPack pack;
        pack.pairs = fit_latency_model(data, parse_scenario(fit_scenario),
                                       parse_rtt_convention(fit_rtt_convention));
        if (!fit_preset.empty()) pack.constants = preset_constants(fit_preset);
        if (fit_k_mu >= 0.0) pack.constants.k_mu_us_per_byte = fit_k_mu;
        if (fit_k_sigma2 >= 0.0) pack.constants.k_sigma2_us2_per_byte = fit_k_sigma2;
        pack.epsilon_ms = fit_epsilon;
        pack.max_hops = fit_max_hops;
        pack.relay_factor = fit_relay_factor;
        pack.prior = HopPrior{fit_deg, fit_nodes};
        validate(pack);
        io::write_pack(resolve_out(out, "pack.json"), pack);
        return 0;
    }

    if (simulate->parsed()) {
        const Topology topo = io::read_topology(sim_topology);
        const ParameterPack pack = io::read_pack(sim_pack);
        SimOptions options;
        options.block_size_bytes = sim_block_size;
        options.repetitions = sim_repetitions;
        options.relay_factor = pack.relay_factor;
        options.include_processing = !sim_no_processing;
        options.seed = seed;
        const std::vector<int> sources = parse_sources(sim_sources, topo.node_count());
        const SynthesisResult result =
            synthesize_observations(topo, pack.pairs,
                                    processing_params(pack.constants, sim_block_size), options,
                                    sources);
        io::write_observations(resolve_out(out, "observations.csv"), result.observations);
        if (result.diagnostics.disconnected_pairs > 0)
            std::cerr << "skipped " << result.diagnostics.disconnected_pairs
                      << " disconnected pairs\n";
        return 0;
    }

    if (ingest->parsed()) {
        const io::CaptureLog log = io::read_capture_log(ingest_log, ingest_alpha);
        const FirstAnnouncer convention = [&] {
            if (ingest_first == "adjusted") return FirstAnnouncer::adjusted_time;
            if (ingest_first == "raw") return FirstAnnouncer::raw_time;
            throw ConfigError("unknown --first-announcer: " + ingest_first);
        }();
        const IngestResult result = build_observations(log.announcements, log.rtt, convention);
        io::write_observations(resolve_out(out, "observations.csv"), result.observations);
        std::cerr << "observations: " << result.observations.size()
                  << ", skipped_no_rtt: " << result.stats.skipped_no_rtt
                  << ", clock_violations: " << log.skipped_clock_violation
                  << ", single_announcer_blocks: " << result.stats.single_announcer_blocks
                  << ", negative_delta: " << result.stats.negative_delta << "\n";
        return 0;
    }

    if (infer->parsed()) {
        const std::vector<Observation> observations = io::read_observations(infer_observations);
        const ParameterPack pack = io::read_pack(infer_pack);

        CountryLookup lookup;
        if (!infer_topology.empty()) {
            const Topology topo = io::read_topology(infer_topology);
            lookup = [topo](const std::string& id) {
                const int node = std::stoi(id);
                if (node < 0 || node >= topo.node_count())
                    throw DataError("node id out of range: " + id);
                return topo.node_country[static_cast<std::size_t>(node)];
            };
        } else if (!infer_peer_countries.empty()) {
            const auto countries = io::read_peer_countries(infer_peer_countries);
            lookup = [countries](const std::string& peer) {
                const auto it = countries.find(peer);
                if (it == countries.end()) throw DataError("no country for peer: " + peer);
                return it->second;
            };
        } else if (pack.pairs.pairs().size() == 1) {
            const auto& key = pack.pairs.pairs().begin()->first;
            lookup = [key](const std::string&) { return key.first; };
        } else {
            throw ConfigError(
                "need --topology or --peer-countries (or a single-pair pack) to map peers to "
                "countries");
        }

        InferOptions options;
        options.min_blocks = infer_min_blocks;
        options.mode = parse_aggregation_mode(infer_mode);
        const InferenceResult result = infer_edges(observations, pack, lookup, options);
        io::write_edges(resolve_out(out, "edges.csv"), result);
        std::cerr << "pairs: " << result.estimates.size()
                  << ", direct: " << result.direct_edges.size()
                  << ", uninformative_observations: " << result.uninformative_observations
                  << "\n";
        return 0;
    }

    if (score_cmd->parsed()) {
        const auto estimates = io::read_edge_estimates(score_estimates);
        const auto full_truth = io::read_truth(score_truth);
        // The scored universe is the estimated pairs; every one needs a truth.
        std::map<std::pair<std::string, std::string>, int> truth;
        for (const auto& [key, est] : estimates) {
            const auto it = full_truth.find(key);
            if (it == full_truth.end())
                throw DataError("no ground truth for pair (" + key.first + ", " + key.second +
                                ")");
            truth[key] = it->second;
        }
        const auto scores = score(estimates, truth, score_up_to);
        io::detail::write_file(resolve_out(out, "scores.csv"), io::scores_to_csv(scores));
        return 0;
    }

    if (experiment->parsed()) {
        if (config.empty()) throw ConfigError("experiment needs --config <json>");
        ExperimentConfig cfg = io::read_config(config);
        if (app.count("--seed") > 0) cfg.seed = seed;
        const ExperimentReport report = run_experiment(cfg);
        io::write_report(resolve_out(out, "report.csv"), report);
        for (const CellError& err : report.errors)
            std::cerr << "cell (" << err.block_size << ", " << scenario_name(err.scenario)
                      << ") failed: " << err.message << "\n";
        return report.errors.empty() ? 0 : 2;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const topoinfer::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const topoinfer::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
