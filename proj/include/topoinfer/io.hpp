#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "topoinfer/errors.hpp"
#include "topoinfer/experiment.hpp"
#include "topoinfer/inference.hpp"
#include "topoinfer/ingest.hpp"
#include "topoinfer/params.hpp"
#include "topoinfer/simulate.hpp"
#include "topoinfer/topology.hpp"

namespace topoinfer::io {

using json = nlohmann::ordered_json;

namespace detail {

inline std::string fixed(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
    if (!out) throw DataError("write failed: " + path);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("bad " + what + " value: '" + s + "'");
    }
}

inline std::int64_t parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const std::int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("bad " + what + " value: '" + s + "'");
    }
}

// Lines of a CSV file after validating the exact header.
inline std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                                      const std::string& header) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header)
        throw DataError("unexpected CSV header in " + path + ": got '" + line + "', want '" +
                        header + "'");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Topology JSON: {nodes:[{id,country}], edges:[{a,b,weight_ms}], seed}

inline std::string topology_to_json(const Topology& topo) {
    json j;
    j["nodes"] = json::array();
    for (int i = 0; i < topo.node_count(); ++i)
        j["nodes"].push_back({{"id", i}, {"country", topo.node_country[static_cast<std::size_t>(i)]}});
    j["edges"] = json::array();
    for (const Edge& e : topo.edges)
        j["edges"].push_back({{"a", e.a}, {"b", e.b}, {"weight_ms", e.weight_ms}});
    j["seed"] = topo.seed;
    return j.dump(2) + "\n";
}

inline Topology topology_from_json(const std::string& text) {
    Topology topo;
    try {
        const json j = json::parse(text);
        const auto& nodes = j.at("nodes");
        topo.node_country.resize(nodes.size());
        for (const auto& node : nodes) {
            const int id = node.at("id").get<int>();
            if (id < 0 || id >= static_cast<int>(nodes.size()))
                throw DataError("node ids must be dense 0..N-1");
            topo.node_country[static_cast<std::size_t>(id)] = node.at("country").get<std::string>();
        }
        for (const auto& edge : j.at("edges"))
            topo.edges.push_back(Edge{edge.at("a").get<int>(), edge.at("b").get<int>(),
                                      edge.at("weight_ms").get<double>()});
        topo.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw DataError(std::string("bad topology JSON: ") + e.what());
    }
    validate(topo);
    return topo;
}

inline void write_topology(const std::string& path, const Topology& topo) {
    detail::write_file(path, topology_to_json(topo));
}

inline Topology read_topology(const std::string& path) {
    return topology_from_json(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Observations CSV, shared by the simulator and the ingester. true_hops is
// empty when ground truth is unknown.

inline constexpr const char* kObservationsHeader =
    "source,relay,block_size_bytes,delta_ms,repetition,true_hops";

inline std::string observation_row(const std::string& source, const std::string& relay,
                                   std::int64_t block_size, double delta_ms,
                                   std::int64_t repetition, int true_hops) {
    std::string row = source + "," + relay + "," + std::to_string(block_size) + "," +
                      detail::fixed(delta_ms, 6) + "," + std::to_string(repetition) + ",";
    if (true_hops >= 0) row += std::to_string(true_hops);
    return row + "\n";
}

inline void write_observations(const std::string& path,
                               const std::vector<SyntheticObservation>& observations) {
    std::string out{kObservationsHeader};
    out += "\n";
    for (const SyntheticObservation& obs : observations)
        out += observation_row(std::to_string(obs.source), std::to_string(obs.relay),
                               obs.block_size_bytes, obs.delta_ms, obs.repetition, obs.true_hops);
    detail::write_file(path, out);
}

inline void write_observations(const std::string& path,
                               const std::vector<Observation>& observations) {
    std::string out{kObservationsHeader};
    out += "\n";
    for (const Observation& obs : observations)
        out += observation_row(obs.source, obs.relay, obs.block_size_bytes, obs.delta_ms,
                               obs.block_index, obs.true_hops);
    detail::write_file(path, out);
}

inline std::vector<Observation> read_observations(const std::string& path) {
    std::vector<Observation> out;
    for (const auto& row : detail::read_csv(path, kObservationsHeader)) {
        if (row.size() != 6) throw DataError("bad observation row in " + path);
        Observation obs;
        obs.source = row[0];
        obs.relay = row[1];
        obs.block_size_bytes = detail::parse_int(row[2], "block_size_bytes");
        obs.delta_ms = detail::parse_double(row[3], "delta_ms");
        obs.block_index = detail::parse_int(row[4], "repetition");
        obs.true_hops = row[5].empty() ? -1 : static_cast<int>(detail::parse_int(row[5], "true_hops"));
        out.push_back(std::move(obs));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Latency dataset CSV: country_a,country_b,rtt_ms

inline constexpr const char* kLatencyHeader = "country_a,country_b,rtt_ms";

inline LatencyDataset read_latency_dataset(const std::string& path) {
    LatencyDataset data;
    for (const auto& row : detail::read_csv(path, kLatencyHeader)) {
        if (row.size() != 3) throw DataError("bad latency row in " + path);
        data.records.push_back(
            LatencyRecord{row[0], row[1], detail::parse_double(row[2], "rtt_ms")});
    }
    return data;
}

// ---------------------------------------------------------------------------
// Parameter pack JSON:
// {pairs:[{a,b,mean_ms,var_ms2}], k_mu_us_per_byte, k_sigma2_us2_per_byte,
//  epsilon_ms, max_hops, relay_factor, mean_degree, node_count}

inline std::string pack_to_json(const ParameterPack& pack) {
    json j;
    j["pairs"] = json::array();
    for (const auto& [key, params] : pack.pairs.pairs())
        j["pairs"].push_back({{"a", key.first},
                              {"b", key.second},
                              {"mean_ms", params.mean_ms},
                              {"var_ms2", params.var_ms2}});
    j["k_mu_us_per_byte"] = pack.constants.k_mu_us_per_byte;
    j["k_sigma2_us2_per_byte"] = pack.constants.k_sigma2_us2_per_byte;
    j["epsilon_ms"] = pack.epsilon_ms;
    j["max_hops"] = pack.max_hops;
    j["relay_factor"] = pack.relay_factor;
    j["mean_degree"] = pack.prior.mean_degree;
    j["node_count"] = pack.prior.node_count;
    return j.dump(2) + "\n";
}

inline ParameterPack pack_from_json(const std::string& text) {
    ParameterPack pack;
    try {
        const json j = json::parse(text);
        for (const auto& entry : j.at("pairs"))
            pack.pairs.set(entry.at("a").get<std::string>(), entry.at("b").get<std::string>(),
                           NormalParams{entry.at("mean_ms").get<double>(),
                                        entry.at("var_ms2").get<double>()});
        pack.constants.k_mu_us_per_byte = j.at("k_mu_us_per_byte").get<double>();
        pack.constants.k_sigma2_us2_per_byte = j.at("k_sigma2_us2_per_byte").get<double>();
        pack.epsilon_ms = j.at("epsilon_ms").get<double>();
        pack.max_hops = j.at("max_hops").get<int>();
        pack.relay_factor = j.value("relay_factor", 1.5);
        pack.prior.mean_degree = j.value("mean_degree", 16.0);
        pack.prior.node_count = j.value("node_count", 300);
    } catch (const json::exception& e) {
        throw DataError(std::string("bad parameter pack JSON: ") + e.what());
    }
    validate(pack);
    return pack;
}

inline void write_pack(const std::string& path, const ParameterPack& pack) {
    detail::write_file(path, pack_to_json(pack));
}

inline ParameterPack read_pack(const std::string& path) {
    return pack_from_json(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Capture log: newline-delimited JSON records in capture order, either
// {kind:"announce",peer,block,ts_ms,size_bytes} or
// {kind:"rtt_sample",peer,rtt_ms,ts_ms}. Timestamps must be monotone
// non-decreasing; violating records are skipped and counted.

struct CaptureLog {
    std::vector<AnnouncementRecord> announcements;
    RttEstimator rtt;
    std::int64_t skipped_clock_violation = 0;

    explicit CaptureLog(double alpha = 0.125) : rtt(alpha) {}
};

inline CaptureLog read_capture_log(const std::string& path, double alpha = 0.125) {
    CaptureLog log(alpha);
    std::istringstream in(detail::read_file(path));
    std::string line;
    double prev_ts = -std::numeric_limits<double>::infinity();
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("bad JSON on line " + std::to_string(line_no) + " of " + path + ": " +
                            e.what());
        }
        try {
            const std::string kind = j.at("kind").get<std::string>();
            const double ts = j.at("ts_ms").get<double>();
            if (ts < prev_ts) {
                ++log.skipped_clock_violation;
                continue;
            }
            prev_ts = ts;
            if (kind == "announce") {
                log.announcements.push_back(AnnouncementRecord{
                    j.at("peer").get<std::string>(), j.at("block").get<std::string>(), ts,
                    j.at("size_bytes").get<std::int64_t>()});
            } else if (kind == "rtt_sample") {
                log.rtt.update(j.at("peer").get<std::string>(), j.at("rtt_ms").get<double>());
            } else {
                throw DataError("unknown record kind '" + kind + "' on line " +
                                std::to_string(line_no) + " of " + path);
            }
        } catch (const json::exception& e) {
            throw DataError("bad record on line " + std::to_string(line_no) + " of " + path +
                            ": " + e.what());
        }
    }
    return log;
}

// ---------------------------------------------------------------------------
// Inferred edges CSV.

inline constexpr const char* kEdgesHeader =
    "source,relay,estimated_hops,mean_posterior_at_argmax,observation_count,flag";

inline void write_edges(const std::string& path, const InferenceResult& result) {
    std::string out{kEdgesHeader};
    out += "\n";
    for (const EdgeEstimate& e : result.estimates) {
        out += e.source + "," + e.relay + ",";
        if (e.estimated_hops > 0)
            out += std::to_string(e.estimated_hops) + "," + detail::fixed(e.mean_posterior, 9);
        else
            out += ",";
        out += "," + std::to_string(e.observation_count) + "," + e.flag + "\n";
    }
    detail::write_file(path, out);
}

// Pair -> estimated hops (0 where the estimate column is empty).
inline std::map<std::pair<std::string, std::string>, int> read_edge_estimates(
    const std::string& path) {
    std::map<std::pair<std::string, std::string>, int> out;
    for (const auto& row : detail::read_csv(path, kEdgesHeader)) {
        if (row.size() != 6) throw DataError("bad edge row in " + path);
        const int est = row[2].empty() ? 0 : static_cast<int>(detail::parse_int(row[2], "estimated_hops"));
        out[{row[0], row[1]}] = est;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Truth extraction for scoring: per-pair ground-truth hop counts from an
// observations CSV (true_hops column) or a plain source,relay,true_hops CSV.

inline std::map<std::pair<std::string, std::string>, int> read_truth(const std::string& path) {
    std::istringstream in(detail::read_file(path));
    std::string header;
    if (!std::getline(in, header)) throw DataError("empty CSV file: " + path);
    if (!header.empty() && header.back() == '\r') header.pop_back();

    std::map<std::pair<std::string, std::string>, int> out;
    const auto insert = [&](const std::string& source, const std::string& relay, int hops) {
        const auto [it, fresh] = out.emplace(std::make_pair(source, relay), hops);
        if (!fresh && it->second != hops)
            throw DataError("conflicting true_hops for pair (" + source + ", " + relay + ")");
    };

    if (header == kObservationsHeader) {
        for (const Observation& obs : read_observations(path))
            if (obs.true_hops >= 0) insert(obs.source, obs.relay, obs.true_hops);
        return out;
    }
    if (header == "source,relay,true_hops") {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line == "\r") continue;
            const auto row = detail::split_csv_line(line);
            if (row.size() != 3) throw DataError("bad truth row in " + path);
            insert(row[0], row[1], static_cast<int>(detail::parse_int(row[2], "true_hops")));
        }
        return out;
    }
    throw DataError("unexpected truth CSV header in " + path);
}

// ---------------------------------------------------------------------------
// Score CSV (per distance class) and experiment report CSV.

inline constexpr const char* kScoreHeader = "distance,tp,fp,fn,precision,recall";

inline std::string scores_to_csv(const std::map<int, ClassScore>& scores) {
    std::string out{kScoreHeader};
    out += "\n";
    for (const auto& [distance, cls] : scores) {
        out += std::to_string(distance) + "," + std::to_string(cls.counts.tp) + "," +
               std::to_string(cls.counts.fp) + "," + std::to_string(cls.counts.fn) + ",";
        if (cls.precision) out += detail::fixed(*cls.precision, 6);
        out += ",";
        if (cls.recall) out += detail::fixed(*cls.recall, 6);
        out += "\n";
    }
    return out;
}

inline constexpr const char* kReportHeader = "block_size,scenario,distance,precision,recall,stderr";

inline std::string report_to_csv(const ExperimentReport& report) {
    std::string out{kReportHeader};
    out += "\n";
    for (const ReportRow& row : report.rows) {
        out += std::to_string(row.block_size) + "," + scenario_name(row.scenario) + "," +
               std::to_string(row.distance) + ",";
        if (row.precision) out += detail::fixed(*row.precision, 6);
        out += ",";
        if (row.recall) out += detail::fixed(*row.recall, 6);
        out += ",";
        if (row.stderr_precision) out += detail::fixed(*row.stderr_precision, 6);
        out += "\n";
    }
    return out;
}

inline void write_report(const std::string& path, const ExperimentReport& report) {
    detail::write_file(path, report_to_csv(report));
}

// ---------------------------------------------------------------------------
// Peer -> country map CSV: peer,country

inline std::map<std::string, std::string> read_peer_countries(const std::string& path) {
    std::map<std::string, std::string> out;
    for (const auto& row : detail::read_csv(path, "peer,country")) {
        if (row.size() != 2) throw DataError("bad peer-country row in " + path);
        out[row[0]] = row[1];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiment config JSON.

inline ExperimentConfig config_from_json(const std::string& text, const std::string& base_dir) {
    ExperimentConfig cfg;
    try {
        const json j = json::parse(text);
        cfg.n_nodes = j.value("n_nodes", cfg.n_nodes);
        cfg.out_degree = j.value("out_degree", cfg.out_degree);
        for (const auto& entry : j.at("countries"))
            cfg.countries.entries.push_back(CountryShare{entry.at("code").get<std::string>(),
                                                         entry.at("share").get<double>()});
        for (const auto& b : j.at("block_sizes_bytes"))
            cfg.block_sizes_bytes.push_back(b.get<std::int64_t>());
        for (const auto& s : j.at("scenarios"))
            cfg.scenarios.push_back(parse_scenario(s.get<std::string>()));
        cfg.repetitions = j.value("repetitions", cfg.repetitions);
        cfg.epsilon_ms = j.value("epsilon_ms", cfg.epsilon_ms);
        cfg.max_hops = j.value("max_hops", cfg.max_hops);
        if (j.contains("constants_preset"))
            cfg.constants = preset_constants(j.at("constants_preset").get<std::string>());
        if (j.contains("k_mu_us_per_byte"))
            cfg.constants.k_mu_us_per_byte = j.at("k_mu_us_per_byte").get<double>();
        if (j.contains("k_sigma2_us2_per_byte"))
            cfg.constants.k_sigma2_us2_per_byte = j.at("k_sigma2_us2_per_byte").get<double>();
        cfg.relay_factor = j.value("relay_factor", cfg.relay_factor);
        if (j.contains("rtt_convention"))
            cfg.rtt_convention = parse_rtt_convention(j.at("rtt_convention").get<std::string>());
        cfg.include_processing = j.value("include_processing", cfg.include_processing);
        cfg.up_to_distance = j.value("up_to_distance", cfg.up_to_distance);
        cfg.prior_mean_degree = j.value("prior_mean_degree", cfg.prior_mean_degree);
        if (j.contains("aggregation"))
            cfg.aggregation = parse_aggregation_mode(j.at("aggregation").get<std::string>());
        cfg.seed = j.value("seed", cfg.seed);

        if (j.contains("latency_pairs")) {
            for (const auto& entry : j.at("latency_pairs"))
                cfg.latency_data.records.push_back(
                    LatencyRecord{entry.at("a").get<std::string>(),
                                  entry.at("b").get<std::string>(),
                                  entry.at("rtt_ms").get<double>()});
        } else if (j.contains("latency_csv")) {
            std::string path = j.at("latency_csv").get<std::string>();
            if (!path.empty() && path.front() != '/' && !base_dir.empty())
                path = base_dir + "/" + path;
            cfg.latency_data = read_latency_dataset(path);
        } else {
            throw ConfigError("config needs latency_pairs or latency_csv");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad experiment config: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

inline ExperimentConfig read_config(const std::string& path) {
    std::string dir;
    const std::size_t slash = path.find_last_of('/');
    if (slash != std::string::npos) dir = path.substr(0, slash);
    return config_from_json(detail::read_file(path), dir);
}

}  // namespace topoinfer::io
