// -*- c++ -*-
#ifndef WITS_REPORT_HPP
#define WITS_REPORT_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace wits {

/// One checked inequality "observed <= bound" (or ">=" when lower is set).
/// margin = bound - observed for upper bounds and observed - bound for lower
/// bounds, so pass <=> margin >= 0. A vacuous record has an infinite bound and
/// always passes.
struct BoundRecord {
    std::string name;
    int k = 0;
    double bound = 0.0;
    double observed = 0.0;
    double margin = 0.0;
    bool pass = true;
    bool vacuous = false;
};

inline BoundRecord upper_bound_record(std::string name, int k, double observed, double bound) {
    BoundRecord r{std::move(name), k, bound, observed, bound - observed, false, false};
    r.vacuous = std::isinf(bound) && bound > 0.0;
    r.pass = r.vacuous || r.margin >= 0.0;
    return r;
}

inline BoundRecord lower_bound_record(std::string name, int k, double observed, double bound) {
    BoundRecord r{std::move(name), k, bound, observed, observed - bound, false, false};
    r.vacuous = std::isinf(bound) && bound < 0.0;
    r.pass = r.vacuous || r.margin >= 0.0;
    return r;
}

inline BoundRecord vacuous_record(std::string name, int k, double observed) {
    return BoundRecord{std::move(name), k, std::numeric_limits<double>::infinity(), observed,
                       std::numeric_limits<double>::infinity(), true, true};
}

struct BoundReport {
    std::vector<BoundRecord> records;

    void add(BoundRecord r) { records.push_back(std::move(r)); }
    void append(const BoundReport& other) {
        records.insert(records.end(), other.records.begin(), other.records.end());
    }
    bool all_pass() const {
        return std::all_of(records.begin(), records.end(), [](const BoundRecord& r) { return r.pass; });
    }
    /// Smallest relative margin (margin / max(|bound|, tiny)) among non-vacuous records.
    const BoundRecord* worst() const {
        const BoundRecord* w = nullptr;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& r : records) {
            if (r.vacuous)
                continue;
            const double rel = r.margin / std::max(std::abs(r.bound), 1e-300);
            if (rel < best) {
                best = rel;
                w = &r;
            }
        }
        return w;
    }
    /// Records sorted by relative margin, most negative first.
    std::vector<BoundRecord> sorted_by_margin() const {
        std::vector<BoundRecord> out = records;
        auto rel = [](const BoundRecord& r) {
            return r.vacuous ? std::numeric_limits<double>::infinity()
                             : r.margin / std::max(std::abs(r.bound), 1e-300);
        };
        std::stable_sort(out.begin(), out.end(),
                         [&](const BoundRecord& a, const BoundRecord& b) { return rel(a) < rel(b); });
        return out;
    }
};

} // namespace wits

#endif
