#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/model.hpp"
#include "sgm/rng.hpp"
#include "sgm/synthdata.hpp"
#include "sgm/tensor.hpp"

#include <json.hpp>

// Training loop pieces: cosine schedule with linear warmup, SGD with
// momentum, and a deterministic epoch loop that writes metrics as CSV.
// Wall-clock timings go to a separate file so the metrics CSV stays
// byte-reproducible across reruns of the same seed.

namespace sgm {

struct TrainConfig {
    SyntheticTask task;
    int hidden = 16;
    int num_blocks = 1;
    PartitionScheme scheme = PartitionScheme::directional();
    int tau = 0; // 0 means default_tau(frames)
    Paradigm paradigm = Paradigm::Transductive;
    FusionMode fusion = FusionMode::Sum;
    int train_samples = 2000;
    int val_samples = 500;
    int epochs = 40;
    int warmup_epochs = 10;
    double base_lr = 0.01;
    double momentum = 0.9;
    int batch_size = 32;
    std::uint64_t seed = 1;
    std::string output_dir = "runs/default";

    int resolved_tau() const { return tau == 0 ? default_tau(task.frames).frames : tau; }

    void validate() const {
        task.validate();
        if (hidden < 1) throw ParamError("train config: hidden must be >= 1");
        if (num_blocks < 0) throw ParamError("train config: num_blocks must be >= 0");
        if (train_samples < 2 || val_samples < 2)
            throw ParamError("train config: need at least 2 samples per split");
        if (epochs < 1) throw ParamError("train config: epochs must be >= 1");
        if (warmup_epochs < 0 || warmup_epochs >= epochs)
            throw ParamError("train config: need 0 <= warmup_epochs < epochs");
        if (!(base_lr > 0.0)) throw ParamError("train config: base_lr must be > 0");
        if (momentum < 0.0 || momentum >= 1.0)
            throw ParamError("train config: momentum must lie in [0, 1)");
        if (batch_size < 1) throw ParamError("train config: batch_size must be >= 1");
        check_tau(task.frames, TemporalThreshold{resolved_tau()});
    }

    SgnMiniConfig model_config() const {
        SgnMiniConfig m;
        m.frames = task.frames;
        m.in_channels = task.feature_dim;
        m.hidden = hidden;
        m.classes = 2;
        m.num_blocks = num_blocks;
        m.scheme = scheme;
        m.tau = TemporalThreshold{resolved_tau()};
        m.paradigm = paradigm;
        m.fusion = fusion;
        m.seed = mix_seed(seed, 0x6d6f64656cULL);
        return m;
    }
};

// Config files are flat JSON; every key maps to one field above. Unknown
// keys are rejected so typos fail loudly instead of training the default.
inline TrainConfig train_config_from_json(const nlohmann::ordered_json& j) {
    TrainConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "task") c.task.variant = parse_task(value.get<std::string>());
        else if (key == "frames") c.task.frames = value.get<int>();
        else if (key == "feature_dim") c.task.feature_dim = value.get<int>();
        else if (key == "noise_std") c.task.noise_std = value.get<double>();
        else if (key == "fixed_gap") c.task.fixed_gap = value.get<int>();
        else if (key == "hidden") c.hidden = value.get<int>();
        else if (key == "num_blocks") c.num_blocks = value.get<int>();
        else if (key == "scheme") c.scheme = parse_scheme(value.get<std::string>());
        else if (key == "tau") c.tau = value.get<int>();
        else if (key == "paradigm") c.paradigm = parse_paradigm(value.get<std::string>());
        else if (key == "fusion") c.fusion = parse_fusion(value.get<std::string>());
        else if (key == "train_samples") c.train_samples = value.get<int>();
        else if (key == "val_samples") c.val_samples = value.get<int>();
        else if (key == "epochs") c.epochs = value.get<int>();
        else if (key == "warmup_epochs") c.warmup_epochs = value.get<int>();
        else if (key == "base_lr") c.base_lr = value.get<double>();
        else if (key == "momentum") c.momentum = value.get<double>();
        else if (key == "batch_size") c.batch_size = value.get<int>();
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "output_dir") c.output_dir = value.get<std::string>();
        else throw ParamError("train config: unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

inline nlohmann::ordered_json train_config_to_json(const TrainConfig& c) {
    nlohmann::ordered_json j;
    j["task"] = task_name(c.task.variant);
    j["frames"] = c.task.frames;
    j["feature_dim"] = c.task.feature_dim;
    j["noise_std"] = c.task.noise_std;
    j["fixed_gap"] = c.task.fixed_gap;
    j["hidden"] = c.hidden;
    j["num_blocks"] = c.num_blocks;
    j["scheme"] = c.scheme.name();
    j["tau"] = c.tau;
    j["paradigm"] = paradigm_name(c.paradigm);
    j["fusion"] = fusion_name(c.fusion);
    j["train_samples"] = c.train_samples;
    j["val_samples"] = c.val_samples;
    j["epochs"] = c.epochs;
    j["warmup_epochs"] = c.warmup_epochs;
    j["base_lr"] = c.base_lr;
    j["momentum"] = c.momentum;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    return j;
}

inline TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("config: '" + path + "' is not valid JSON: " + e.what());
    }
    return train_config_from_json(j);
}

// Linear ramp to base_lr over the warmup epochs, cosine decay to zero after.
inline double lr_schedule(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.epochs)
        throw ParamError("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " +
                         std::to_string(cfg.epochs) + ")");
    if (epoch < cfg.warmup_epochs) return cfg.base_lr * (epoch + 1) / cfg.warmup_epochs;
    const double progress = static_cast<double>(epoch - cfg.warmup_epochs) /
                            static_cast<double>(cfg.epochs - cfg.warmup_epochs);
    return cfg.base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

// v <- momentum v + g; p <- p - lr v; gradients zeroed afterwards.
inline void sgd_momentum_step(const std::vector<std::pair<std::string, Tensor>>& params,
                              std::vector<std::vector<double>>& velocity, double lr,
                              double momentum) {
    if (velocity.size() != params.size())
        throw ShapeError("sgd step: velocity count " + std::to_string(velocity.size()) +
                         " does not match parameter count " + std::to_string(params.size()));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor t = params[p].second;
        if (!t.requires_grad())
            throw ContractError("sgd step: parameter '" + params[p].first + "' has no gradient");
        std::vector<double>& v = velocity[p];
        if (v.size() != t.numel())
            throw ShapeError("sgd step: velocity for '" + params[p].first + "' has " +
                             std::to_string(v.size()) + " entries, parameter has " +
                             std::to_string(t.numel()));
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = momentum * v[i] + t.grad()[i];
            t.data()[i] -= lr * v[i];
            t.grad()[i] = 0.0;
        }
    }
}

class SgdMomentum {
  public:
    SgdMomentum(std::vector<std::pair<std::string, Tensor>> params, double momentum)
        : params_(std::move(params)), momentum_(momentum) {
        velocity_.reserve(params_.size());
        for (const auto& [name, t] : params_) velocity_.emplace_back(t.numel(), 0.0);
    }

    void step(double lr) { sgd_momentum_step(params_, velocity_, lr, momentum_); }

    void zero_grad() {
        for (auto& [name, t] : params_) t.zero_grad();
    }

  private:
    std::vector<std::pair<std::string, Tensor>> params_;
    std::vector<std::vector<double>> velocity_;
    double momentum_;
};

struct EpochRow {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double wall_time = 0.0; // seconds; kept out of metrics.csv
};

struct MetricsLog {
    std::vector<EpochRow> rows;
};

inline int argmax_row(const Tensor& logits, int row) {
    const int k = logits.extent(1);
    int best = 0;
    double best_v = logits.data()[static_cast<std::size_t>(row) * k];
    for (int c = 1; c < k; ++c) {
        const double v = logits.data()[static_cast<std::size_t>(row) * k + c];
        if (v > best_v) {
            best_v = v;
            best = c;
        }
    }
    return best;
}

inline double evaluate_accuracy(const SgnMini& model, const SyntheticDataset& ds, int batch_size) {
    if (ds.samples.empty()) throw ParamError("evaluate: empty dataset");
    std::size_t correct = 0;
    std::vector<std::size_t> idx(ds.samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(idx.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                       idx.begin() + static_cast<std::ptrdiff_t>(stop));
        auto [batch, labels] = to_batch(ds, chunk);
        const Tensor logits = forward_batch(model, batch);
        for (std::size_t r = 0; r < labels.size(); ++r)
            if (argmax_row(logits, static_cast<int>(r)) == labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.samples.size());
}

namespace detail {

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoError("write to '" + path + "' failed");
}

} // namespace detail

inline std::string metrics_to_csv(const MetricsLog& log) {
    std::string csv = "epoch,lr,train_loss,train_acc,val_acc\n";
    for (const EpochRow& r : log.rows) {
        csv += std::to_string(r.epoch);
        csv += ',';
        csv += detail::format_g17(r.lr);
        csv += ',';
        csv += detail::format_g17(r.train_loss);
        csv += ',';
        csv += detail::format_g17(r.train_acc);
        csv += ',';
        csv += detail::format_g17(r.val_acc);
        csv += '\n';
    }
    return csv;
}

inline std::string timings_to_csv(const MetricsLog& log) {
    std::string csv = "epoch,wall_time_s\n";
    for (const EpochRow& r : log.rows) {
        csv += std::to_string(r.epoch);
        csv += ',';
        csv += detail::format_g17(r.wall_time);
        csv += '\n';
    }
    return csv;
}

// Full deterministic run: data, init, epoch loop, artifacts. Returns the log
// and leaves metrics.csv, timing.csv, config.json and checkpoint.json in
// output_dir. The trained model is written through the out-parameter when
// the caller wants to keep it.
inline MetricsLog train(const TrainConfig& cfg, SgnMini* trained = nullptr) {
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output dir '" + cfg.output_dir + "': " + ec.message());

    const int total = cfg.train_samples + cfg.val_samples;
    SyntheticDataset all = generate(cfg.task, total, mix_seed(cfg.seed, 0x64736574ULL));
    auto [train_ds, val_ds] =
        split(all, static_cast<double>(cfg.train_samples) / total, mix_seed(cfg.seed, 0x73706cULL));

    SgnMini model = build_model(cfg.model_config());
    SgdMomentum opt(model.parameters(), cfg.momentum);

    MetricsLog log;
    std::vector<std::size_t> order(train_ds.samples.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_schedule(epoch, cfg);

        Rng shuffle_rng(mix_seed(cfg.seed, 0x65706f6368ULL + static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1],
                      order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1))]);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
            auto [batch, labels] = to_batch(train_ds, chunk);

            Tape tape;
            Tensor loss;
            Tensor logits;
            {
                TapeScope scope(tape);
                logits = forward_batch(model, batch);
                loss = cross_entropy_logits(logits, labels);
            }
            loss_sum += loss.value() * static_cast<double>(labels.size());
            for (std::size_t r = 0; r < labels.size(); ++r)
                if (argmax_row(logits, static_cast<int>(r)) == labels[r]) ++correct;
            backward(loss, tape);
            opt.step(lr);
        }

        EpochRow row;
        row.epoch = epoch;
        row.lr = lr;
        row.train_loss = loss_sum / static_cast<double>(train_ds.samples.size());
        row.train_acc = static_cast<double>(correct) / static_cast<double>(train_ds.samples.size());
        row.val_acc = evaluate_accuracy(model, val_ds, cfg.batch_size);
        row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.rows.push_back(row);
    }

    detail::write_file(cfg.output_dir + "/metrics.csv", metrics_to_csv(log));
    detail::write_file(cfg.output_dir + "/timing.csv", timings_to_csv(log));
    detail::write_file(cfg.output_dir + "/config.json", train_config_to_json(cfg).dump(2) + "\n");
    detail::write_file(cfg.output_dir + "/checkpoint.json", model_to_json(model).dump() + "\n");
    if (trained) *trained = std::move(model);
    return log;
}

} // namespace sgm
