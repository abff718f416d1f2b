#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgm/error.hpp"

#include <json.hpp>

// Decomposition of the complete temporal graph on T frames into disjoint
// edge subsets. Edge e(i, j) carries information from frame j to frame i, so
// row i of a mask (or adjacency matrix) lists the in-neighbors of frame i and
// i - j > 0 means "aggregating from an earlier frame".
//
// The directional grouping as commonly written places i == j in both the
// backward and forward local sets; to keep the subsets disjoint we assign
// self-loops to local-backward and make local-forward strict (0 < i-j <= tau).
// The convention is recorded on every EdgeMaskSet for reproducibility.

namespace sgm {

enum class PartitionVariant { Full, LocalGlobal, LocalGlobalDirectional, FullReplicated };

struct PartitionScheme {
    PartitionVariant variant = PartitionVariant::Full;
    int replicas = 1; // FullReplicated only

    static PartitionScheme full() { return {PartitionVariant::Full, 1}; }
    static PartitionScheme local_global() { return {PartitionVariant::LocalGlobal, 1}; }
    static PartitionScheme directional() { return {PartitionVariant::LocalGlobalDirectional, 1}; }
    static PartitionScheme full_replicated(int n) {
        if (n < 1) throw ParamError("full_replicated: replica count must be >= 1, got " + std::to_string(n));
        return {PartitionVariant::FullReplicated, n};
    }

    int mask_count() const {
        switch (variant) {
            case PartitionVariant::Full: return 1;
            case PartitionVariant::LocalGlobal: return 2;
            case PartitionVariant::LocalGlobalDirectional: return 4;
            case PartitionVariant::FullReplicated: return replicas;
        }
        return 0;
    }

    std::string name() const {
        switch (variant) {
            case PartitionVariant::Full: return "full";
            case PartitionVariant::LocalGlobal: return "local-global";
            case PartitionVariant::LocalGlobalDirectional: return "directional";
            case PartitionVariant::FullReplicated: return "fullx" + std::to_string(replicas);
        }
        return "?";
    }

    bool operator==(const PartitionScheme& o) const {
        return variant == o.variant && (variant != PartitionVariant::FullReplicated || replicas == o.replicas);
    }
};

inline PartitionScheme parse_scheme(const std::string& s) {
    if (s == "full") return PartitionScheme::full();
    if (s == "local-global" || s == "lg") return PartitionScheme::local_global();
    if (s == "directional" || s == "lg-directional") return PartitionScheme::directional();
    if (s.rfind("fullx", 0) == 0) {
        const std::string n = s.substr(5);
        if (!n.empty() && n.find_first_not_of("0123456789") == std::string::npos)
            return PartitionScheme::full_replicated(std::stoi(n));
    }
    throw ParamError("parse_scheme: unknown scheme '" + s +
                     "' (expected full, local-global, directional, or fullxN)");
}

struct TemporalThreshold {
    int frames = 1;
};

// Separation between local and global edges defaults to T/8, clamped to at
// least one frame.
inline TemporalThreshold default_tau(int t) {
    if (t < 2) throw ParamError("default_tau: need at least 2 frames, got " + std::to_string(t));
    return {std::max(1, t / 8)};
}

struct EdgeMask {
    int T = 0;
    std::vector<std::uint8_t> cells; // row-major T*T

    explicit EdgeMask(int t = 0) : T(t), cells(static_cast<std::size_t>(t) * t, 0) {}

    bool at(int i, int j) const { return cells[static_cast<std::size_t>(i) * T + j] != 0; }
    void set(int i, int j, bool v) { cells[static_cast<std::size_t>(i) * T + j] = v ? 1 : 0; }

    int count() const {
        int n = 0;
        for (std::uint8_t c : cells) n += c;
        return n;
    }

    // In-degree of frame i within this subgraph.
    int row_count(int i) const {
        int n = 0;
        for (int j = 0; j < T; ++j) n += cells[static_cast<std::size_t>(i) * T + j];
        return n;
    }

    bool operator==(const EdgeMask& o) const { return T == o.T && cells == o.cells; }
};

inline EdgeMask mask_or(const EdgeMask& a, const EdgeMask& b) {
    EdgeMask out(a.T);
    for (std::size_t i = 0; i < out.cells.size(); ++i) out.cells[i] = a.cells[i] | b.cells[i];
    return out;
}

struct EdgeMaskSet {
    int T = 0;
    std::vector<EdgeMask> masks;
    std::vector<std::string> names;
    PartitionScheme scheme;
    int tau = 0;
    // Boundary rule applied when direction splits the local band.
    std::string self_loop_convention = "self-loops-in-local-backward";

    int count() const { return static_cast<int>(masks.size()); }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json doc;
        doc["frames"] = T;
        doc["scheme"] = scheme.name();
        doc["tau"] = tau;
        doc["self_loop_convention"] = self_loop_convention;
        doc["subgraphs"] = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < masks.size(); ++k) {
            nlohmann::ordered_json sub;
            sub["name"] = names[k];
            auto rows = nlohmann::ordered_json::array();
            for (int i = 0; i < T; ++i) {
                auto row = nlohmann::ordered_json::array();
                for (int j = 0; j < T; ++j) row.push_back(masks[k].at(i, j) ? 1 : 0);
                rows.push_back(row);
            }
            sub["mask"] = rows;
            doc["subgraphs"].push_back(sub);
        }
        return doc;
    }
};

inline void check_tau(int t, TemporalThreshold tau) {
    if (tau.frames < 1)
        throw ParamError("temporal threshold must be >= 1, got " + std::to_string(tau.frames));
    if (t >= 2 && tau.frames > t - 1)
        throw ParamError("temporal threshold " + std::to_string(tau.frames) +
                         " exceeds T-1 = " + std::to_string(t - 1));
}

inline EdgeMaskSet build_masks(int t, TemporalThreshold tau, const PartitionScheme& scheme) {
    if (t < 1) throw ParamError("build_masks: frame count must be >= 1, got " + std::to_string(t));
    check_tau(t, tau);

    EdgeMaskSet set;
    set.T = t;
    set.scheme = scheme;
    set.tau = tau.frames;

    const int n = scheme.mask_count();
    set.masks.assign(static_cast<std::size_t>(n), EdgeMask(t));

    switch (scheme.variant) {
        case PartitionVariant::Full:
            set.names = {"full"};
            for (auto& c : set.masks[0].cells) c = 1;
            break;
        case PartitionVariant::FullReplicated:
            for (int k = 0; k < n; ++k) {
                set.names.push_back("full-" + std::to_string(k));
                for (auto& c : set.masks[k].cells) c = 1;
            }
            break;
        case PartitionVariant::LocalGlobal:
            set.names = {"local", "global"};
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < t; ++j)
                    set.masks[std::abs(i - j) <= tau.frames ? 0 : 1].set(i, j, true);
            break;
        case PartitionVariant::LocalGlobalDirectional:
            set.names = {"global-backward", "local-backward", "local-forward", "global-forward"};
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < t; ++j) {
                    const int d = i - j;
                    int k;
                    if (d < -tau.frames)
                        k = 0;
                    else if (d <= 0)
                        k = 1;
                    else if (d <= tau.frames)
                        k = 2;
                    else
                        k = 3;
                    set.masks[k].set(i, j, true);
                }
            break;
    }
    return set;
}

struct ValidationReport {
    struct Overlap {
        int mask_a, mask_b, i, j;
    };
    std::vector<std::pair<int, int>> coverage_holes;
    std::vector<Overlap> overlaps;

    bool ok() const { return coverage_holes.empty() && overlaps.empty(); }
};

// Checks the union/disjointness structure of a mask set. Violations are
// reported as data, never thrown.
inline ValidationReport validate_partition(const EdgeMaskSet& set) {
    ValidationReport report;
    const int t = set.T;
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < t; ++j) {
            int members = 0;
            for (const EdgeMask& m : set.masks)
                if (m.at(i, j)) ++members;
            if (members == 0) report.coverage_holes.emplace_back(i, j);
        }
    for (std::size_t a = 0; a < set.masks.size(); ++a)
        for (std::size_t b = a + 1; b < set.masks.size(); ++b)
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < t; ++j)
                    if (set.masks[a].at(i, j) && set.masks[b].at(i, j))
                        report.overlaps.push_back({static_cast<int>(a), static_cast<int>(b), i, j});
    return report;
}

} // namespace sgm
