// Command-line front end: training runs, ablation presets, dataset
// generation, checkpoint inspection and the gradient-check suite.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sgm/sgm.hpp"

namespace {

int cmd_train(const std::string& config_path) {
    sgm::TrainConfig cfg = sgm::load_train_config(config_path);
    sgm::MetricsLog log = sgm::train(cfg);
    const sgm::EpochRow& last = log.rows.back();
    std::printf("trained %d epochs: train_loss %.4f train_acc %.4f val_acc %.4f\n",
                static_cast<int>(log.rows.size()), last.train_loss, last.train_acc, last.val_acc);
    std::printf("artifacts in %s (metrics.csv, timing.csv, config.json, checkpoint.json)\n",
                cfg.output_dir.c_str());
    return 0;
}

int cmd_ablate(const std::string& preset_name, const std::string& out_dir) {
    sgm::AblationPreset preset = sgm::get_preset(preset_name);
    sgm::AblationReport report = sgm::run_ablation(preset, out_dir, &std::cerr);
    std::printf("%-28s %-16s %8s %10s\n", "row", "task", "params", "median");
    for (const sgm::AblationResult& r : report.results)
        std::printf("%-28s %-16s %8zu %10.4f\n", r.row.c_str(), sgm::task_name(r.task).c_str(),
                    r.param_count, r.median_acc);
    std::printf("report written to %s/report.csv\n", out_dir.c_str());
    return 0;
}

int cmd_dump_adjacency(const std::string& checkpoint_path) {
    std::ifstream in(checkpoint_path);
    if (!in) throw sgm::IoError("cannot open checkpoint '" + checkpoint_path + "'");
    nlohmann::ordered_json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw sgm::IoError("checkpoint '" + checkpoint_path + "' is not valid JSON: " + e.what());
    }
    sgm::SgnMini model = sgm::model_from_json(doc);
    if (model.blocks.empty())
        throw sgm::ParamError("checkpoint has no graph blocks to dump");
    auto out = nlohmann::ordered_json::array();
    for (std::size_t b = 0; b < model.blocks.size(); ++b)
        out.push_back(sgm::export_adjacency(model.blocks[b], "block-" + std::to_string(b)));
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_gen_data(const std::string& task_name, int n, std::uint64_t seed, const std::string& out,
                 int frames, int feature_dim, double noise, int fixed_gap) {
    sgm::SyntheticTask task;
    task.variant = sgm::parse_task(task_name);
    task.frames = frames;
    task.feature_dim = feature_dim;
    task.noise_std = noise;
    task.fixed_gap = fixed_gap;
    sgm::SyntheticDataset ds = sgm::generate(task, n, seed);
    sgm::export_jsonl(ds, out);
    std::printf("wrote %zu samples to %s\n", ds.samples.size(), out.c_str());
    return 0;
}

int cmd_gradcheck(int frames, int hidden, int blocks, int batch, double tol) {
    int failures = 0;
    auto doc = nlohmann::ordered_json::array();
    for (sgm::Paradigm paradigm : {sgm::Paradigm::Transductive, sgm::Paradigm::Inductive}) {
        sgm::oracle::ModelGradCheck gc;
        gc.frames = frames;
        gc.feature_dim = frames;
        gc.hidden = hidden;
        gc.num_blocks = blocks;
        gc.batch = batch;
        gc.paradigm = paradigm;
        gc.tolerance = tol;
        for (const sgm::oracle::GradCheckReport& r : sgm::oracle::run_model_gradcheck(gc)) {
            nlohmann::ordered_json row;
            row["paradigm"] = sgm::paradigm_name(paradigm);
            row["param"] = r.name;
            row["entries"] = r.count;
            row["max_rel_err"] = r.max_rel_err;
            row["max_abs_err"] = r.max_abs_err;
            row["pass"] = r.pass(tol);
            doc.push_back(row);
            if (!r.pass(tol)) ++failures;
        }
    }
    std::cout << doc.dump(2) << "\n";
    if (failures > 0) {
        std::cerr << failures << " parameter(s) exceeded tolerance " << tol << "\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"structured temporal-graph layer toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    CLI::App* train = app.add_subcommand("train", "run one training config");
    train->add_option("--config", config_path, "JSON config file")->required();

    std::string preset_name, ablate_out;
    CLI::App* ablate = app.add_subcommand("ablate", "run an ablation preset");
    ablate->add_option("--preset", preset_name, "graph-structure, tau-sweep or fusion")->required();
    ablate->add_option("--out", ablate_out, "output directory")->required();

    std::string checkpoint_path;
    CLI::App* dump = app.add_subcommand("dump-adjacency", "print a checkpoint's adjacency matrices");
    dump->add_option("--checkpoint", checkpoint_path, "checkpoint.json path")->required();

    std::string task_name, data_out;
    int gen_n = 0, gen_frames = 8, gen_feature_dim = 8, gen_fixed_gap = 0;
    std::uint64_t gen_seed = 1;
    double gen_noise = 0.0;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset as JSON lines");
    gen->add_option("--task", task_name, "direction, interval-order or local-motion")->required();
    gen->add_option("--n", gen_n, "sample count")->required();
    gen->add_option("--seed", gen_seed, "generator seed")->required();
    gen->add_option("--out", data_out, "output path")->required();
    gen->add_option("--frames", gen_frames, "frames per clip");
    gen->add_option("--feature-dim", gen_feature_dim, "channels per frame");
    gen->add_option("--noise", gen_noise, "gaussian noise stddev");
    gen->add_option("--fixed-gap", gen_fixed_gap, "interval-order: force this event gap");

    int gc_frames = 8, gc_hidden = 8, gc_blocks = 2, gc_batch = 2;
    double gc_tol = 1e-5;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck->add_option("--frames", gc_frames, "frames per clip");
    gradcheck->add_option("--hidden", gc_hidden, "hidden width");
    gradcheck->add_option("--blocks", gc_blocks, "graph block count");
    gradcheck->add_option("--batch", gc_batch, "batch size");
    gradcheck->add_option("--tol", gc_tol, "max relative error allowed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(config_path);
        if (ablate->parsed()) return cmd_ablate(preset_name, ablate_out);
        if (dump->parsed()) return cmd_dump_adjacency(checkpoint_path);
        if (gen->parsed())
            return cmd_gen_data(task_name, gen_n, gen_seed, data_out, gen_frames, gen_feature_dim,
                                gen_noise, gen_fixed_gap);
        if (gradcheck->parsed())
            return cmd_gradcheck(gc_frames, gc_hidden, gc_blocks, gc_batch, gc_tol);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}
