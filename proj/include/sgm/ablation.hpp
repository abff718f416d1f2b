#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/model.hpp"
#include "sgm/train.hpp"

// Experiment presets: fixed sets of model variants trained with matched
// data, budgets and seeds, reported as per-seed accuracies plus the median.
// Medians over 3 seeds because single runs on small synthetic tasks are too
// noisy to rank architectures.

namespace sgm {

struct AblationRowSpec {
    std::string name;
    int num_blocks = 1;
    PartitionScheme scheme = PartitionScheme::full();
    Paradigm paradigm = Paradigm::Transductive;
    FusionMode fusion = FusionMode::Sum;
    int tau = 0; // 0 means default_tau(frames)
};

struct AblationPreset {
    std::string name;
    std::vector<TaskVariant> tasks;
    std::vector<AblationRowSpec> rows;
    TrainConfig base;                      // shared budget; row fields override
    std::vector<std::uint64_t> seeds = {1, 2, 3};
};

struct AblationResult {
    std::string row;
    TaskVariant task = TaskVariant::Direction;
    AblationRowSpec spec;
    std::size_t param_count = 0;
    std::vector<double> seed_accs;
    double median_acc = 0.0;
    std::vector<double> first_epoch_losses; // per seed, median train_loss over the head window
    std::vector<double> last_epoch_losses;  // per seed, median train_loss over the tail window
};

struct AblationReport {
    std::string preset;
    std::vector<AblationResult> results;

    const AblationResult& find(const std::string& row, TaskVariant task) const {
        for (const AblationResult& r : results)
            if (r.row == row && r.task == task) return r;
        throw ParamError("ablation report: no result for row '" + row + "' on task " +
                         task_name(task));
    }

    // mean of per-task medians, the score rows are ranked by
    double combined_score(const std::string& row) const {
        double sum = 0.0;
        int n = 0;
        for (const AblationResult& r : results)
            if (r.row == row) {
                sum += r.median_acc;
                ++n;
            }
        if (n == 0) throw ParamError("ablation report: unknown row '" + row + "'");
        return sum / n;
    }
};

inline double median(std::vector<double> v) {
    if (v.empty()) throw ParamError("median of empty list");
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

// The shared desk-scale budget. Deliberately tight: six epochs sit right in
// the window where graph structure decides whether the direction signal is
// picked up at all, which is what the structure preset measures. The noise
// level keeps weaker decompositions from coasting to the same optimum.
inline TrainConfig ablation_base_config() {
    TrainConfig base;
    base.task.frames = 8;
    base.task.feature_dim = 8;
    base.task.noise_std = 0.1;
    base.hidden = 16;
    base.num_blocks = 2;
    base.train_samples = 2000;
    base.val_samples = 500;
    base.epochs = 6;
    base.warmup_epochs = 1;
    base.base_lr = 0.1;
    base.momentum = 0.9;
    base.batch_size = 32;
    return base;
}

inline AblationPreset get_preset(const std::string& name) {
    AblationPreset p;
    p.name = name;
    p.base = ablation_base_config();
    if (name == "graph-structure") {
        p.tasks = {TaskVariant::Direction, TaskVariant::IntervalOrder};
        p.rows = {
            {"2d-backbone", 0, PartitionScheme::full(), Paradigm::Transductive, FusionMode::Sum, 0},
            {"full-transductive", 2, PartitionScheme::full(), Paradigm::Transductive, FusionMode::Sum, 0},
            {"full-inductive", 2, PartitionScheme::full(), Paradigm::Inductive, FusionMode::Sum, 0},
            {"localglobal-transductive", 2, PartitionScheme::local_global(), Paradigm::Transductive, FusionMode::Sum, 0},
            {"localglobal-inductive", 2, PartitionScheme::local_global(), Paradigm::Inductive, FusionMode::Sum, 0},
            {"directional-transductive", 2, PartitionScheme::directional(), Paradigm::Transductive, FusionMode::Sum, 0},
            {"directional-inductive", 2, PartitionScheme::directional(), Paradigm::Inductive, FusionMode::Sum, 0},
            {"fullx4-transductive", 2, PartitionScheme::full_replicated(4), Paradigm::Transductive, FusionMode::Sum, 0},
        };
        return p;
    }
    if (name == "tau-sweep") {
        p.tasks = {TaskVariant::IntervalOrder};
        p.base.task.fixed_gap = 4; // half the clip length
        p.rows = {
            {"tau-1", 1, PartitionScheme::directional(), Paradigm::Transductive, FusionMode::Sum, 1},
            {"tau-2", 1, PartitionScheme::directional(), Paradigm::Transductive, FusionMode::Sum, 2},
            {"tau-4", 1, PartitionScheme::directional(), Paradigm::Transductive, FusionMode::Sum, 4},
        };
        return p;
    }
    if (name == "fusion") {
        p.tasks = {TaskVariant::Direction};
        p.rows = {
            {"sum", 2, PartitionScheme::directional(), Paradigm::Transductive, FusionMode::Sum, 0},
            {"concat-conv", 2, PartitionScheme::directional(), Paradigm::Transductive, FusionMode::ConcatConv, 0},
        };
        return p;
    }
    throw ParamError("unknown ablation preset '" + name +
                     "' (expected graph-structure, tau-sweep or fusion)");
}

inline TrainConfig row_config(const AblationPreset& preset, const AblationRowSpec& row,
                              TaskVariant task, std::uint64_t seed, const std::string& out_dir) {
    TrainConfig cfg = preset.base;
    cfg.task.variant = task;
    cfg.num_blocks = row.num_blocks;
    cfg.scheme = row.scheme;
    cfg.paradigm = row.paradigm;
    cfg.fusion = row.fusion;
    cfg.tau = row.tau;
    cfg.seed = seed;
    cfg.output_dir = out_dir + "/runs/" + row.name + "/" + task_name(task) + "/seed-" +
                     std::to_string(seed);
    return cfg;
}

inline std::string ablation_report_to_csv(const AblationReport& report) {
    // rank rows by combined score, then alphabetically for stability
    std::vector<std::string> row_names;
    for (const AblationResult& r : report.results)
        if (std::find(row_names.begin(), row_names.end(), r.row) == row_names.end())
            row_names.push_back(r.row);
    std::stable_sort(row_names.begin(), row_names.end(), [&](const auto& a, const auto& b) {
        const double sa = report.combined_score(a);
        const double sb = report.combined_score(b);
        if (sa != sb) return sa > sb;
        return a < b;
    });

    std::string csv = "preset,row,task,scheme,paradigm,fusion,tau,params";
    std::size_t n_seeds = 0;
    for (const AblationResult& r : report.results) n_seeds = std::max(n_seeds, r.seed_accs.size());
    for (std::size_t s = 0; s < n_seeds; ++s) csv += ",acc_seed" + std::to_string(s);
    csv += ",acc_median\n";

    for (const std::string& name : row_names)
        for (const AblationResult& r : report.results) {
            if (r.row != name) continue;
            csv += report.preset + ',' + r.row + ',' + task_name(r.task) + ',' +
                   r.spec.scheme.name() + ',' + paradigm_name(r.spec.paradigm) + ',' +
                   fusion_name(r.spec.fusion) + ',' + std::to_string(r.spec.tau) + ',' +
                   std::to_string(r.param_count);
            for (double acc : r.seed_accs) csv += ',' + detail::format_g17(acc);
            csv += ',' + detail::format_g17(r.median_acc) + '\n';
        }
    return csv;
}

// Trains every (row, task, seed) combination, writes per-run artifacts under
// out_dir/runs/..., dumps the first block's adjacency for transductive rows,
// and writes the ranked report.csv.
inline AblationReport run_ablation(const AblationPreset& preset, const std::string& out_dir,
                                   std::ostream* progress = nullptr) {
    AblationReport report;
    report.preset = preset.name;
    for (const AblationRowSpec& row : preset.rows)
        for (TaskVariant task : preset.tasks) {
            AblationResult res;
            res.row = row.name;
            res.task = task;
            res.spec = row;
            for (std::uint64_t seed : preset.seeds) {
                TrainConfig cfg = row_config(preset, row, task, seed, out_dir);
                if (progress)
                    (*progress) << "[ablate] " << preset.name << " " << row.name << " "
                                << task_name(task) << " seed " << seed << "\n" << std::flush;
                SgnMini model;
                MetricsLog log = train(cfg, &model);
                res.param_count = model.parameter_count();
                res.seed_accs.push_back(log.rows.back().val_acc);

                // non-overlapping head/tail windows even on short runs
                const std::size_t k =
                    std::max<std::size_t>(1, std::min<std::size_t>(5, log.rows.size() / 2));
                std::vector<double> first, last;
                for (std::size_t i = 0; i < k; ++i) first.push_back(log.rows[i].train_loss);
                for (std::size_t i = log.rows.size() - k; i < log.rows.size(); ++i)
                    last.push_back(log.rows[i].train_loss);
                res.first_epoch_losses.push_back(median(first));
                res.last_epoch_losses.push_back(median(last));

                if (row.paradigm == Paradigm::Transductive && row.num_blocks > 0)
                    detail::write_file(cfg.output_dir + "/adjacency.json",
                                       export_adjacency(model.blocks[0], row.name + "/block-0").dump(2) +
                                           "\n");
            }
            res.median_acc = median(res.seed_accs);
            report.results.push_back(std::move(res));
        }
    detail::write_file(out_dir + "/report.csv", ablation_report_to_csv(report));
    return report;
}

} // namespace sgm
