#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "topoinfer/errors.hpp"

namespace topoinfer {

// One recorded block announcement as seen by the vantage point.
struct AnnouncementRecord {
    std::string peer;
    std::string block;
    double ts_ms = 0.0;
    std::int64_t size_bytes = 0;
};

// Smoothed per-peer round-trip time, RFC 6298 style:
// srtt <- (1 - alpha) * srtt + alpha * sample, first sample initializes.
class RttEstimator {
public:
    explicit RttEstimator(double alpha = 0.125) : alpha_(alpha) {
        if (!(alpha > 0.0) || !(alpha <= 1.0))
            throw std::invalid_argument("alpha must be in (0, 1]");
    }

    void update(const std::string& peer, double sample_ms) {
        if (!(sample_ms > 0.0)) throw std::invalid_argument("rtt sample must be > 0");
        const auto it = srtt_.find(peer);
        if (it == srtt_.end())
            srtt_.emplace(peer, sample_ms);
        else
            it->second = (1.0 - alpha_) * it->second + alpha_ * sample_ms;
    }

    std::optional<double> smoothed(const std::string& peer) const {
        const auto it = srtt_.find(peer);
        if (it == srtt_.end()) return std::nullopt;
        return it->second;
    }

    double alpha() const { return alpha_; }

private:
    double alpha_;
    std::map<std::string, double> srtt_;
};

// One usable timing measurement extracted from a capture. block_index is
// distinct per block and backs the minimum-blocks miner filter; true_hops is
// -1 for real captures (ground truth unknown).
struct Observation {
    std::string source;
    std::string relay;
    std::int64_t block_size_bytes = 0;
    double delta_ms = 0.0;
    std::int64_t block_index = 0;
    int true_hops = -1;
};

// Which clock decides the block's first announcer. Arrival times are always
// half-RTT adjusted before delta is computed; this switch only controls the
// source selection.
enum class FirstAnnouncer { adjusted_time, raw_time };

struct IngestStats {
    std::int64_t skipped_no_rtt = 0;
    std::int64_t skipped_clock_violation = 0;
    std::int64_t single_announcer_blocks = 0;
    std::int64_t negative_delta = 0;
};

struct IngestResult {
    std::vector<Observation> observations;
    IngestStats stats;
};

// Turn announcements into observations. Per block: every announcer's arrival
// time is adjusted by subtracting half its smoothed RTT, the earliest adjusted
// (or raw, per `convention`) announcer becomes the source, and each later
// announcer yields delta = adjusted_relay - adjusted_source. Announcers
// without an RTT estimate are skipped and counted; blocks with fewer than two
// usable announcers yield nothing. Ties on the source pick the smaller peer
// id. Repeated announcements of one block by the same peer keep the first.
inline IngestResult build_observations(const std::vector<AnnouncementRecord>& records,
                                       const RttEstimator& rtt,
                                       FirstAnnouncer convention = FirstAnnouncer::adjusted_time) {
    IngestResult result;

    struct Entry {
        std::string peer;
        double raw_ms;
        double adjusted_ms;
        std::int64_t size_bytes;
    };
    std::vector<std::string> block_order;
    std::map<std::string, std::vector<Entry>> blocks;

    for (const AnnouncementRecord& rec : records) {
        auto it = blocks.find(rec.block);
        if (it == blocks.end()) {
            block_order.push_back(rec.block);
            it = blocks.emplace(rec.block, std::vector<Entry>{}).first;
        }
        auto& entries = it->second;
        const bool repeated = std::any_of(entries.begin(), entries.end(),
                                          [&](const Entry& e) { return e.peer == rec.peer; });
        if (repeated) continue;
        const std::optional<double> srtt = rtt.smoothed(rec.peer);
        if (!srtt) {
            ++result.stats.skipped_no_rtt;
            continue;
        }
        entries.push_back(Entry{rec.peer, rec.ts_ms, rec.ts_ms - *srtt / 2.0, rec.size_bytes});
    }

    std::int64_t block_index = 0;
    for (const std::string& block : block_order) {
        auto& entries = blocks[block];
        if (entries.size() < 2) {
            if (entries.size() == 1) ++result.stats.single_announcer_blocks;
            ++block_index;
            continue;
        }
        const auto earliest = [&](const Entry& a, const Entry& b) {
            const double ta = convention == FirstAnnouncer::adjusted_time ? a.adjusted_ms : a.raw_ms;
            const double tb = convention == FirstAnnouncer::adjusted_time ? b.adjusted_ms : b.raw_ms;
            if (ta != tb) return ta < tb;
            return a.peer < b.peer;
        };
        const Entry& source = *std::min_element(entries.begin(), entries.end(), earliest);
        for (const Entry& e : entries) {
            if (e.peer == source.peer) continue;
            const double delta = e.adjusted_ms - source.adjusted_ms;
            if (delta <= 0.0) ++result.stats.negative_delta;
            result.observations.push_back(
                Observation{source.peer, e.peer, source.size_bytes, delta, block_index, -1});
        }
        ++block_index;
    }
    return result;
}

// Peers that announced at least min_blocks distinct blocks first.
inline std::set<std::string> filter_miners(const std::vector<Observation>& observations,
                                           int min_blocks) {
    if (min_blocks < 1) throw std::invalid_argument("min_blocks must be >= 1");
    std::map<std::string, std::set<std::int64_t>> blocks_by_source;
    for (const Observation& obs : observations)
        blocks_by_source[obs.source].insert(obs.block_index);
    std::set<std::string> miners;
    for (const auto& [peer, blocks] : blocks_by_source)
        if (static_cast<int>(blocks.size()) >= min_blocks) miners.insert(peer);
    return miners;
}

}  // namespace topoinfer
