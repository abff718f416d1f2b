#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/layer.hpp"
#include "sgm/model.hpp"
#include "sgm/partition.hpp"
#include "sgm/synthdata.hpp"
#include "sgm/tensor.hpp"

// Reference implementations kept deliberately naive so the fast paths have
// something independent to be checked against. Nothing here records onto a
// tape or shares loop structure with the library code.

namespace sgm {
namespace oracle {

// Membership of edge (j -> i) decided straight from the signed frame gap.
// Self-loops count as local-backward; the forward local band is strict.
inline std::string classify_edge(int i, int j, int t, TemporalThreshold tau, PartitionScheme scheme) {
    if (i < 0 || i >= t || j < 0 || j >= t)
        throw IndexError("classify_edge: frame pair (" + std::to_string(i) + ", " +
                         std::to_string(j) + ") outside [0, " + std::to_string(t) + ")");
    check_tau(t, tau);
    const int gap = i - j;
    switch (scheme.variant) {
    case PartitionVariant::Full:
        return "full";
    case PartitionVariant::LocalGlobal:
        return std::abs(gap) <= tau.frames ? "local" : "global";
    case PartitionVariant::LocalGlobalDirectional:
        if (gap < -tau.frames) return "global-backward";
        if (gap <= 0) return "local-backward";
        if (gap <= tau.frames) return "local-forward";
        return "global-forward";
    case PartitionVariant::FullReplicated:
        break;
    }
    throw ParamError("classify_edge: replicated full graphs have overlapping membership");
}

// Layer forward with plain quadruple loops: per subgraph, transform channels,
// aggregate neighbors through the (masked or attention) adjacency, clamp at
// zero, then fuse.
inline std::vector<double> layer_forward(const SgmLayer& layer, const std::vector<double>& x) {
    const int t = layer.masks.T;
    const int ci = layer.c_in;
    const int co = layer.c_out;
    if (static_cast<int>(x.size()) != t * ci)
        throw ShapeError("oracle layer_forward: input size " + std::to_string(x.size()) +
                         ", expected " + std::to_string(t * ci));
    const int n = layer.num_subgraphs();

    std::vector<std::vector<double>> branch(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const EdgeMask& mask = layer.masks.masks[k];
        const std::vector<double>& w = layer.channel_weights[k].data();

        // h = x W_k
        std::vector<double> h(static_cast<std::size_t>(t) * co, 0.0);
        for (int i = 0; i < t; ++i)
            for (int c = 0; c < co; ++c) {
                double acc = 0.0;
                for (int d = 0; d < ci; ++d)
                    acc += x[static_cast<std::size_t>(i) * ci + d] * w[static_cast<std::size_t>(d) * co + c];
                h[static_cast<std::size_t>(i) * co + c] = acc;
            }

        // adjacency, dense t x t with masked-out cells at zero
        std::vector<double> adj(static_cast<std::size_t>(t) * t, 0.0);
        if (layer.paradigm == Paradigm::Transductive) {
            const std::vector<double>& raw = layer.adjacency[k].data();
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < t; ++j)
                    if (mask.at(i, j)) adj[static_cast<std::size_t>(i) * t + j] = raw[static_cast<std::size_t>(i) * t + j];
        } else {
            const std::vector<double>& a = layer.attention[k].data();
            for (int i = 0; i < t; ++i) {
                double row_max = -1e300;
                std::vector<double> score(static_cast<std::size_t>(t), 0.0);
                bool any = false;
                for (int j = 0; j < t; ++j) {
                    if (!mask.at(i, j)) continue;
                    double s = 0.0;
                    for (int c = 0; c < co; ++c)
                        s += a[c] * h[static_cast<std::size_t>(i) * co + c] +
                             a[co + c] * h[static_cast<std::size_t>(j) * co + c];
                    if (s < 0.0) s *= kAttentionLeakySlope;
                    score[static_cast<std::size_t>(j)] = s;
                    if (s > row_max) row_max = s;
                    any = true;
                }
                if (!any) continue;
                double denom = 0.0;
                for (int j = 0; j < t; ++j)
                    if (mask.at(i, j)) denom += std::exp(score[static_cast<std::size_t>(j)] - row_max);
                for (int j = 0; j < t; ++j)
                    if (mask.at(i, j))
                        adj[static_cast<std::size_t>(i) * t + j] =
                            std::exp(score[static_cast<std::size_t>(j)] - row_max) / denom;
            }
        }

        // y = relu(adj h)
        std::vector<double> y(static_cast<std::size_t>(t) * co, 0.0);
        for (int i = 0; i < t; ++i)
            for (int c = 0; c < co; ++c) {
                double acc = 0.0;
                for (int j = 0; j < t; ++j)
                    acc += adj[static_cast<std::size_t>(i) * t + j] * h[static_cast<std::size_t>(j) * co + c];
                y[static_cast<std::size_t>(i) * co + c] = acc > 0.0 ? acc : 0.0;
            }
        branch[static_cast<std::size_t>(k)] = std::move(y);
    }

    if (layer.fusion == FusionMode::Sum) {
        std::vector<double> out = branch[0];
        for (int k = 1; k < n; ++k)
            for (std::size_t idx = 0; idx < out.size(); ++idx) out[idx] += branch[static_cast<std::size_t>(k)][idx];
        return out;
    }

    // concat along channels, then project
    const std::vector<double>& p = layer.concat_proj.data();
    std::vector<double> out(static_cast<std::size_t>(t) * co, 0.0);
    for (int i = 0; i < t; ++i)
        for (int c = 0; c < co; ++c) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k)
                for (int d = 0; d < co; ++d)
                    acc += branch[static_cast<std::size_t>(k)][static_cast<std::size_t>(i) * co + d] *
                           p[(static_cast<std::size_t>(k) * co + d) * co + c];
            out[static_cast<std::size_t>(i) * co + c] = acc;
        }
    return out;
}

// Central differences on a scalar function of one parameter tensor. The
// tensor is mutated in place and restored before returning.
inline std::vector<double> finite_diff_grad(const std::function<double()>& f, Tensor param,
                                            double h = 1e-6) {
    std::vector<double> grad(param.numel());
    for (std::size_t i = 0; i < param.numel(); ++i) {
        const double saved = param.data()[i];
        param.data()[i] = saved + h;
        const double fp = f();
        param.data()[i] = saved - h;
        const double fm = f();
        param.data()[i] = saved;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

struct GradCheckReport {
    std::string name;
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::size_t worst_index = 0;
    std::size_t count = 0;
    bool pass(double tol) const { return max_rel_err <= tol; }
};

// Relative error per entry, with the denominator floored at one thousandth
// of the tensor's largest gradient magnitude (and 1e-8 overall). Central
// differences carry roundoff noise of order eps*|loss|/h regardless of the
// entry's own size, so near-zero entries are judged against the tensor's
// scale instead of their own.
inline GradCheckReport compare_grads(const std::string& name, const std::vector<double>& analytic,
                                     const std::vector<double>& numeric) {
    if (analytic.size() != numeric.size())
        throw ContractError("compare_grads: size mismatch " + std::to_string(analytic.size()) +
                            " vs " + std::to_string(numeric.size()));
    GradCheckReport r;
    r.name = name;
    r.count = analytic.size();
    double scale = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
        scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    const double floor = std::max(1e-3 * scale, 1e-8);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i];
        const double b = numeric[i];
        const double abs_err = std::abs(a - b);
        const double rel = abs_err / std::max({std::abs(a), std::abs(b), floor});
        if (rel > r.max_rel_err) {
            r.max_rel_err = rel;
            r.worst_index = i;
        }
        if (abs_err > r.max_abs_err) r.max_abs_err = abs_err;
    }
    return r;
}

// End-to-end gradient check of the full classifier: analytic gradients from
// one backward pass against central differences on the scalar loss, one
// report per named parameter.

struct ModelGradCheck {
    int batch = 2;
    int frames = 8;
    int feature_dim = 8;
    int hidden = 8;
    int num_blocks = 2;
    PartitionScheme scheme = PartitionScheme::directional();
    Paradigm paradigm = Paradigm::Transductive;
    FusionMode fusion = FusionMode::Sum;
    std::uint64_t seed = 7;
    double fd_step = 1e-6;
    double tolerance = 1e-5;
};

inline std::vector<GradCheckReport> run_model_gradcheck(const ModelGradCheck& gc) {
    SgnMiniConfig mc;
    mc.frames = gc.frames;
    mc.in_channels = gc.feature_dim;
    mc.hidden = gc.hidden;
    mc.classes = 2;
    mc.num_blocks = gc.num_blocks;
    mc.scheme = gc.scheme;
    mc.tau = default_tau(gc.frames);
    mc.paradigm = gc.paradigm;
    mc.fusion = gc.fusion;
    mc.seed = mix_seed(gc.seed, 0x6763ULL);
    SgnMini model = build_model(mc);

    SyntheticTask task;
    task.variant = TaskVariant::Direction;
    task.frames = gc.frames;
    task.feature_dim = gc.feature_dim;
    task.noise_std = 0.1; // perturbs inputs away from repeated values
    SyntheticDataset ds = generate(task, gc.batch, mix_seed(gc.seed, 0x64ULL));
    std::vector<std::size_t> idx(ds.samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto [batch, labels] = to_batch(ds, idx);

    const auto loss_value = [&]() {
        return cross_entropy_logits(forward_batch(model, batch), labels).value();
    };

    // analytic pass
    for (auto& [name, t] : model.parameters()) t.zero_grad();
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = cross_entropy_logits(forward_batch(model, batch), labels);
    }
    backward(loss, tape);

    std::vector<GradCheckReport> reports;
    for (auto& [name, t] : model.parameters()) {
        const std::vector<double> analytic = t.grad();
        const std::vector<double> numeric = finite_diff_grad(loss_value, t, gc.fd_step);
        reports.push_back(compare_grads(name, analytic, numeric));
    }
    return reports;
}

} // namespace oracle
} // namespace sgm
