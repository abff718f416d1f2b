#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/rng.hpp"
#include "sgm/tensor.hpp"
#include "sgm/partition.hpp"

#include <json.hpp>

// Synthetic clip generators. Every task is built so that reversing a clip's
// frame order flips its label while leaving the multiset of frame vectors
// unchanged, so any model that only sees time-pooled per-frame statistics is
// provably stuck at chance. This is what makes them usable as probes for
// temporal reasoning.

namespace sgm {

enum class TaskVariant { Direction, IntervalOrder, LocalMotion };

inline std::string task_name(TaskVariant v) {
    switch (v) {
    case TaskVariant::Direction: return "direction";
    case TaskVariant::IntervalOrder: return "interval-order";
    case TaskVariant::LocalMotion: return "local-motion";
    }
    throw ParamError("task_name: bad variant");
}

inline TaskVariant parse_task(const std::string& s) {
    if (s == "direction") return TaskVariant::Direction;
    if (s == "interval-order") return TaskVariant::IntervalOrder;
    if (s == "local-motion") return TaskVariant::LocalMotion;
    throw ParamError("parse_task: unknown task '" + s + "'");
}

struct SyntheticTask {
    TaskVariant variant = TaskVariant::Direction;
    int frames = 8;
    int feature_dim = 8;
    double noise_std = 0.0;
    // interval-order only: force the event gap to this many frames (0 means
    // any gap larger than the default threshold).
    int fixed_gap = 0;

    void validate() const {
        if (frames < 2) throw ParamError("task: frames must be >= 2");
        if (noise_std < 0.0) throw ParamError("task: noise_std must be >= 0");
        switch (variant) {
        case TaskVariant::Direction:
        case TaskVariant::LocalMotion:
            // with 2 channels, +1 and -1 steps coincide mod feature_dim
            if (feature_dim < 3)
                throw ParamError("task: " + task_name(variant) + " needs feature_dim >= 3");
            break;
        case TaskVariant::IntervalOrder: {
            if (feature_dim < 2) throw ParamError("task: interval-order needs feature_dim >= 2");
            const int tau = default_tau(frames).frames;
            if (tau + 1 > frames - 1)
                throw ParamError("task: interval-order needs a frame span wider than the local band");
            if (fixed_gap != 0 && (fixed_gap <= tau || fixed_gap > frames - 1))
                throw ParamError("task: fixed_gap " + std::to_string(fixed_gap) +
                                 " outside (" + std::to_string(tau) + ", " +
                                 std::to_string(frames - 1) + "]");
            break;
        }
        }
    }
};

struct Sample {
    std::vector<double> frames; // frames x feature_dim, row-major
    int label = 0;
};

struct SyntheticDataset {
    SyntheticTask task;
    std::uint64_t seed = 0;
    std::vector<Sample> samples;

    int num_classes() const { return 2; }
};

namespace detail {

// direction: a one-hot bump walks the channel axis circularly, starting at
// channel s; label 0 walks +1 per frame, label 1 walks -1.
inline Sample make_direction(const SyntheticTask& t, int s, int label) {
    Sample smp;
    smp.label = label;
    smp.frames.assign(static_cast<std::size_t>(t.frames) * t.feature_dim, 0.0);
    for (int f = 0; f < t.frames; ++f) {
        const int step = label == 0 ? f : -f;
        const int c = ((s + step) % t.feature_dim + t.feature_dim) % t.feature_dim;
        smp.frames[static_cast<std::size_t>(f) * t.feature_dim + c] = 1.0;
    }
    return smp;
}

// interval-order: marker bumps on channels 0 and 1 at frames i < j; label 0
// puts channel 0 first, label 1 puts channel 1 first.
inline Sample make_interval(const SyntheticTask& t, int i, int j, int label) {
    Sample smp;
    smp.label = label;
    smp.frames.assign(static_cast<std::size_t>(t.frames) * t.feature_dim, 0.0);
    const int first_chan = label == 0 ? 0 : 1;
    smp.frames[static_cast<std::size_t>(i) * t.feature_dim + first_chan] = 1.0;
    smp.frames[static_cast<std::size_t>(j) * t.feature_dim + (1 - first_chan)] = 1.0;
    return smp;
}

// local-motion: a dot rests at channel p, then at the frame pair (w, w+1)
// shifts one channel up (label 0) or down (label 1) and stays there.
inline Sample make_local_motion(const SyntheticTask& t, int p, int w, int label) {
    Sample smp;
    smp.label = label;
    smp.frames.assign(static_cast<std::size_t>(t.frames) * t.feature_dim, 0.0);
    const int q = ((p + (label == 0 ? 1 : -1)) % t.feature_dim + t.feature_dim) % t.feature_dim;
    for (int f = 0; f < t.frames; ++f) {
        const int c = f <= w ? p : q;
        smp.frames[static_cast<std::size_t>(f) * t.feature_dim + c] = 1.0;
    }
    return smp;
}

// all (i, j) pairs an interval-order event may occupy
inline std::vector<std::pair<int, int>> interval_pairs(const SyntheticTask& t) {
    const int tau = default_tau(t.frames).frames;
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < t.frames; ++i)
        for (int j = i + tau + 1; j < t.frames; ++j)
            if (t.fixed_gap == 0 || j - i == t.fixed_gap) pairs.emplace_back(i, j);
    if (pairs.empty()) throw ParamError("interval-order: no feasible event placement");
    return pairs;
}

} // namespace detail

// One sample for every possible placement of every label, noise-free. Used
// to verify that label-conditional statistics carry no label information.
inline std::vector<Sample> enumerate_placements(const SyntheticTask& task) {
    task.validate();
    std::vector<Sample> all;
    switch (task.variant) {
    case TaskVariant::Direction:
        for (int label = 0; label < 2; ++label)
            for (int s = 0; s < task.feature_dim; ++s)
                all.push_back(detail::make_direction(task, s, label));
        break;
    case TaskVariant::IntervalOrder:
        for (int label = 0; label < 2; ++label)
            for (const auto& [i, j] : detail::interval_pairs(task))
                all.push_back(detail::make_interval(task, i, j, label));
        break;
    case TaskVariant::LocalMotion:
        for (int label = 0; label < 2; ++label)
            for (int p = 0; p < task.feature_dim; ++p)
                for (int w = 0; w + 1 < task.frames; ++w)
                    all.push_back(detail::make_local_motion(task, p, w, label));
        break;
    }
    return all;
}

inline SyntheticDataset generate(const SyntheticTask& task, int n, std::uint64_t seed) {
    task.validate();
    if (n < 2) throw ParamError("generate: need at least 2 samples, got " + std::to_string(n));
    SyntheticDataset ds;
    ds.task = task;
    ds.seed = seed;
    ds.samples.reserve(static_cast<std::size_t>(n));
    Rng rng(mix_seed(seed, 0x64617461ULL));
    const std::vector<std::pair<int, int>> pairs =
        task.variant == TaskVariant::IntervalOrder ? detail::interval_pairs(task)
                                                   : std::vector<std::pair<int, int>>{};
    for (int idx = 0; idx < n; ++idx) {
        const int label = idx % 2; // alternating keeps classes balanced to +-1
        Sample smp;
        switch (task.variant) {
        case TaskVariant::Direction:
            smp = detail::make_direction(task, rng.uniform_int(0, task.feature_dim - 1), label);
            break;
        case TaskVariant::IntervalOrder: {
            const auto& [i, j] = pairs[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<int>(pairs.size()) - 1))];
            smp = detail::make_interval(task, i, j, label);
            break;
        }
        case TaskVariant::LocalMotion:
            smp = detail::make_local_motion(task, rng.uniform_int(0, task.feature_dim - 1),
                                            rng.uniform_int(0, task.frames - 2), label);
            break;
        }
        if (task.noise_std > 0.0)
            for (double& v : smp.frames) v += task.noise_std * rng.normal();
        ds.samples.push_back(std::move(smp));
    }
    return ds;
}

// Label-stratified split; both sides keep every class non-empty.
inline std::pair<SyntheticDataset, SyntheticDataset> split(const SyntheticDataset& ds,
                                                           double train_fraction,
                                                           std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ParamError("split: train_fraction must lie in (0, 1)");
    SyntheticDataset train, val;
    train.task = val.task = ds.task;
    train.seed = val.seed = ds.seed;
    for (int label = 0; label < ds.num_classes(); ++label) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < ds.samples.size(); ++i)
            if (ds.samples[i].label == label) idx.push_back(i);
        Rng rng(mix_seed(seed, 0x73706c6974ULL + static_cast<std::uint64_t>(label)));
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        const std::size_t n_train =
            static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(idx.size())));
        if (n_train == 0 || n_train == idx.size())
            throw ParamError("split: class " + std::to_string(label) +
                             " would leave one side empty");
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_train ? train : val).samples.push_back(ds.samples[idx[i]]);
    }
    return {std::move(train), std::move(val)};
}

// Pack samples [first, first + count) into a batch tensor plus labels.
inline std::pair<Tensor, std::vector<int>> to_batch(const SyntheticDataset& ds,
                                                    const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw ParamError("to_batch: empty index list");
    const int t = ds.task.frames;
    const int f = ds.task.feature_dim;
    std::vector<double> data;
    data.reserve(indices.size() * static_cast<std::size_t>(t) * f);
    std::vector<int> labels;
    labels.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= ds.samples.size())
            throw IndexError("to_batch: sample index " + std::to_string(i) + " out of range");
        const Sample& s = ds.samples[i];
        data.insert(data.end(), s.frames.begin(), s.frames.end());
        labels.push_back(s.label);
    }
    Tensor batch = Tensor::from_data({static_cast<int>(indices.size()), t, f}, std::move(data));
    return {batch, labels};
}

// JSON-lines export: a header object on the first line, one sample object
// per following line.
inline void export_jsonl(const SyntheticDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("export_jsonl: cannot open '" + path + "' for writing");
    nlohmann::ordered_json head;
    head["format"] = "sgm-dataset-v1";
    head["task"] = task_name(ds.task.variant);
    head["frames"] = ds.task.frames;
    head["feature_dim"] = ds.task.feature_dim;
    head["noise_std"] = ds.task.noise_std;
    head["fixed_gap"] = ds.task.fixed_gap;
    head["seed"] = ds.seed;
    head["count"] = ds.samples.size();
    out << head.dump() << "\n";
    for (const Sample& s : ds.samples) {
        nlohmann::ordered_json row;
        row["label"] = s.label;
        auto frames = nlohmann::ordered_json::array();
        for (int f = 0; f < ds.task.frames; ++f) {
            auto frame = nlohmann::ordered_json::array();
            for (int c = 0; c < ds.task.feature_dim; ++c)
                frame.push_back(s.frames[static_cast<std::size_t>(f) * ds.task.feature_dim + c]);
            frames.push_back(frame);
        }
        row["frames"] = frames;
        out << row.dump() << "\n";
    }
    if (!out) throw IoError("export_jsonl: write to '" + path + "' failed");
}

inline SyntheticDataset import_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("import_jsonl: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError("import_jsonl: empty file '" + path + "'");
    nlohmann::ordered_json head = nlohmann::ordered_json::parse(line);
    if (head.value("format", "") != "sgm-dataset-v1")
        throw IoError("import_jsonl: unknown or missing format tag");
    SyntheticDataset ds;
    ds.task.variant = parse_task(head.at("task").get<std::string>());
    ds.task.frames = head.at("frames").get<int>();
    ds.task.feature_dim = head.at("feature_dim").get<int>();
    ds.task.noise_std = head.at("noise_std").get<double>();
    ds.task.fixed_gap = head.value("fixed_gap", 0);
    ds.seed = head.at("seed").get<std::uint64_t>();
    ds.task.validate();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::ordered_json row = nlohmann::ordered_json::parse(line);
        Sample s;
        s.label = row.at("label").get<int>();
        const auto& frames = row.at("frames");
        if (static_cast<int>(frames.size()) != ds.task.frames)
            throw IoError("import_jsonl: sample with wrong frame count");
        for (const auto& frame : frames) {
            if (static_cast<int>(frame.size()) != ds.task.feature_dim)
                throw IoError("import_jsonl: frame with wrong channel count");
            for (const auto& v : frame) s.frames.push_back(v.get<double>());
        }
        ds.samples.push_back(std::move(s));
    }
    const std::size_t expect = head.at("count").get<std::size_t>();
    if (ds.samples.size() != expect)
        throw IoError("import_jsonl: sample count " + std::to_string(ds.samples.size()) +
                      " does not match header count " + std::to_string(expect));
    return ds;
}

} // namespace sgm
