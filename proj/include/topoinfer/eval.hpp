#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>

#include "topoinfer/errors.hpp"

namespace topoinfer {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
};

struct ClassScore {
    ConfusionCounts counts;
    std::optional<double> precision;  // absent when tp + fp == 0
    std::optional<double> recall;     // absent when tp + fn == 0
};

// Per-distance-class confusion counts over identically keyed estimate and
// truth maps. An estimate of 0 means "no estimate" and can only produce false
// negatives; estimates above up_to count against the true class's recall but
// are no class's positive prediction. The direct-connection task is scoring
// with up_to = 1.
template <typename Key>
std::map<int, ClassScore> score(const std::map<Key, int>& estimates,
                                const std::map<Key, int>& truth, int up_to) {
    if (up_to < 1) throw std::invalid_argument("up_to must be >= 1");
    if (estimates.size() != truth.size())
        throw DataError("estimate and truth maps must be keyed identically");
    auto et = estimates.begin();
    auto tt = truth.begin();
    for (; et != estimates.end(); ++et, ++tt)
        if (et->first != tt->first)
            throw DataError("estimate and truth maps must be keyed identically");

    std::map<int, ClassScore> out;
    for (int c = 1; c <= up_to; ++c) out[c] = ClassScore{};

    for (const auto& [key, est] : estimates) {
        const int tru = truth.at(key);
        if (tru < 1) throw DataError("truth distances must be >= 1");
        for (int c = 1; c <= up_to; ++c) {
            ConfusionCounts& counts = out[c].counts;
            if (est == c && tru == c) ++counts.tp;
            if (est == c && tru != c) ++counts.fp;
            if (est != c && tru == c) ++counts.fn;
        }
    }

    for (auto& [c, cls] : out) {
        const auto& k = cls.counts;
        if (k.tp + k.fp > 0)
            cls.precision = static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fp);
        if (k.tp + k.fn > 0)
            cls.recall = static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fn);
    }
    return out;
}

inline ClassScore score_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    if (tp < 0 || fp < 0 || fn < 0) throw std::invalid_argument("counts must be >= 0");
    ClassScore cls;
    cls.counts = ConfusionCounts{tp, fp, fn};
    if (tp + fp > 0) cls.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) cls.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return cls;
}

// Binomial standard error of a proportion estimate over n predictions.
inline std::optional<double> proportion_stderr(std::optional<double> p, std::int64_t n) {
    if (!p || n <= 0) return std::nullopt;
    return std::sqrt(*p * (1.0 - *p) / static_cast<double>(n));
}

}  // namespace topoinfer
