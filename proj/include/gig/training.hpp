#pragma once

// Training harness: sample preparation (GIG construction runs once, up
// front), losses, the AdamW optimiser, the cosine annealing schedule and
// the fit/evaluate loops. Everything is deterministic given the seed.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gig/datasets.hpp"
#include "gig/graph.hpp"
#include "gig/gsg.hpp"
#include "gig/layers.hpp"
#include "gig/rng.hpp"
#include "gig/tensor.hpp"

namespace gig {

enum class Schedule { constant, cosine_annealing };

inline std::string to_string(Schedule s) {
    return s == Schedule::constant ? "constant" : "cosine_annealing";
}

inline Schedule schedule_from_string(const std::string& s) {
    if (s == "constant") return Schedule::constant;
    if (s == "cosine_annealing") return Schedule::cosine_annealing;
    throw std::invalid_argument("unknown schedule '" + s + "'");
}

enum class LossKind { cross_entropy, l1 };

inline std::string to_string(LossKind l) {
    return l == LossKind::cross_entropy ? "cross_entropy" : "l1";
}

inline LossKind loss_kind_from_string(const std::string& s) {
    if (s == "cross_entropy") return LossKind::cross_entropy;
    if (s == "l1") return LossKind::l1;
    throw std::invalid_argument("unknown loss kind '" + s + "'");
}

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t samples_per_gig = 8;  // GIG vertices per GIG sample when the data does not pin it
    double learning_rate = 1e-3;
    double weight_decay = 1e-2;
    Schedule schedule = Schedule::cosine_annealing;
    LossKind loss = LossKind::cross_entropy;
    std::uint64_t seed = 1;
    NetworkConfig network;
    GsgConfig gsg;

    void validate() const {
        if (samples_per_gig == 0) throw std::invalid_argument("train: samples_per_gig must be positive");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
        if (weight_decay < 0.0) throw std::invalid_argument("train: weight_decay must be non-negative");
        gsg.validate();
    }
};

// min_lr + (base - min_lr) * (1 + cos(pi * epoch / total)) / 2
inline double cosine_anneal_lr(double base_lr, std::size_t epoch, std::size_t total_epochs,
                               double min_lr) {
    if (total_epochs == 0 || epoch > total_epochs)
        throw std::invalid_argument("cosine_anneal_lr: epoch " + std::to_string(epoch) +
                                    " outside [0, " + std::to_string(total_epochs) + "]");
    const double cosine =
        std::cos(3.14159265358979323846 * static_cast<double>(epoch) / static_cast<double>(total_epochs));
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + cosine);
}

// Decoupled weight decay: the decay shrinks the parameter directly and the
// adaptive step uses the raw gradient moments.
class AdamW {
public:
    AdamW(std::vector<std::pair<std::string, Tensor>> params, double lr, double weight_decay,
          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), weight_decay_(weight_decay), beta1_(beta1),
          beta2_(beta2), eps_(eps) {
        moments_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            moments_[i].m.assign(params_[i].second.size(), 0.0);
            moments_[i].v.assign(params_[i].second.size(), 0.0);
        }
    }

    void set_learning_rate(double lr) { lr_ = lr; }
    double learning_rate() const { return lr_; }
    std::size_t step_count() const { return t_; }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t p = 0; p < params_.size(); ++p) {
            Tensor& param = params_[p].second;
            auto& theta = param.raw_values();
            const bool has_grad = param.has_grad();
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double g = has_grad ? param.grad()[i] : 0.0;
                theta[i] -= lr_ * weight_decay_ * theta[i];
                double& m = moments_[p].m[i];
                double& v = moments_[p].v[i];
                m = beta1_ * m + (1.0 - beta1_) * g;
                v = beta2_ * v + (1.0 - beta2_) * g * g;
                theta[i] -= lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_);
            }
        }
    }

    void zero_grad() {
        for (auto& [name, p] : params_) p.zero_grad();
    }

private:
    struct Moments {
        std::vector<double> m, v;
    };
    std::vector<std::pair<std::string, Tensor>> params_;
    std::vector<Moments> moments_;
    double lr_, weight_decay_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

// One GIG sample ready for the network: wiring, adjacency and the labels of
// whatever the task predicts.
struct PreparedSample {
    GIGSample sample;
    AdjacencyIndex adj;
    std::vector<std::size_t> graph_classes;
    std::vector<double> graph_targets;
    std::optional<std::size_t> clip_class;
    std::vector<std::size_t> vertex_classes;
    std::vector<std::size_t> edge_classes;
};

namespace detail {

inline PreparedSample prepare_one(std::vector<Graph> batch, TaskType task, const GsgConfig& gsg_cfg,
                                  std::uint64_t gsg_seed, std::optional<long> clip_label) {
    PreparedSample ps;
    for (const Graph& g : batch) {
        switch (task) {
            case TaskType::graph_class:
                if (!g.class_label) throw std::invalid_argument("prepare: graph is missing its class label");
                ps.graph_classes.push_back(static_cast<std::size_t>(*g.class_label));
                break;
            case TaskType::graph_reg:
                if (!g.target) throw std::invalid_argument("prepare: graph is missing its target");
                ps.graph_targets.push_back(*g.target);
                break;
            case TaskType::vertex_class:
                if (!g.vertex_labels || g.vertex_labels->size() != g.vertex_count())
                    throw std::invalid_argument("prepare: graph is missing per-vertex labels");
                for (long l : *g.vertex_labels) ps.vertex_classes.push_back(static_cast<std::size_t>(l));
                break;
            case TaskType::edge_class:
                if (!g.edge_labels || g.edge_labels->size() != g.edge_count())
                    throw std::invalid_argument("prepare: graph is missing per-edge labels");
                for (long l : *g.edge_labels) ps.edge_classes.push_back(static_cast<std::size_t>(l));
                break;
            case TaskType::clip_class:
                break;
        }
    }
    if (task == TaskType::clip_class) {
        if (!clip_label) throw std::invalid_argument("prepare: clip is missing its label");
        ps.clip_class = static_cast<std::size_t>(*clip_label);
    }
    ps.sample = generate_gig_sample(batch, gsg_cfg, gsg_seed);
    ps.adj = build_adjacency(ps.sample);
    return ps;
}

} // namespace detail

// GIG construction seed for one split, derived from the training seed the
// same way for fit and standalone evaluation so wirings agree.
inline std::uint64_t gsg_seed_for_split(std::uint64_t seed, const std::string& split) {
    SplitMix64 root(seed);
    SplitMix64 gsg = root.split();
    for (const std::string& name : split_names()) {
        const std::uint64_t s = gsg.next();
        if (name == split) return s;
    }
    throw std::invalid_argument("gsg_seed_for_split: unknown split '" + split + "'");
}

// Groups a split into GIG samples and runs GIG construction once per
// sample. Graph tasks group consecutive records, either by the dataset's
// own grouping (when the labels depend on it) or by samples_per_gig; clip
// tasks map one clip to one GIG sample.
inline std::vector<PreparedSample> prepare_split(const Dataset& ds, const std::string& split,
                                                 const GsgConfig& gsg_cfg, std::size_t samples_per_gig,
                                                 std::uint64_t seed) {
    std::vector<PreparedSample> out;
    SplitMix64 rng(seed);
    if (ds.is_clip_task()) {
        auto it = ds.clip_splits.find(split);
        if (it == ds.clip_splits.end()) throw std::invalid_argument("prepare: no split named '" + split + "'");
        out.reserve(it->second.size());
        for (const ClipSample& clip : it->second)
            out.push_back(detail::prepare_one(clip.frames, ds.meta.task_type, gsg_cfg, rng.next(),
                                              clip.label));
        return out;
    }
    auto it = ds.graph_splits.find(split);
    if (it == ds.graph_splits.end()) throw std::invalid_argument("prepare: no split named '" + split + "'");
    const std::size_t group =
        ds.meta.graphs_per_sample > 0 ? ds.meta.graphs_per_sample : samples_per_gig;
    const auto& graphs = it->second;
    for (std::size_t start = 0; start < graphs.size(); start += group) {
        const std::size_t end = std::min(graphs.size(), start + group);
        std::vector<Graph> batch(graphs.begin() + static_cast<std::ptrdiff_t>(start),
                                 graphs.begin() + static_cast<std::ptrdiff_t>(end));
        out.push_back(detail::prepare_one(std::move(batch), ds.meta.task_type, gsg_cfg, rng.next(),
                                          std::nullopt));
    }
    return out;
}

// Loss and headline metric (accuracy for classification, mean absolute
// error for regression) of one prediction tensor.
struct SampleScore {
    Tensor loss;
    double correct = 0.0;  // or absolute error summed
    std::size_t count = 0;
};

inline SampleScore score_sample(const Tensor& preds, const PreparedSample& ps, TaskType task,
                                LossKind loss_kind) {
    SampleScore sc;
    auto accuracy_of = [&](const Tensor& logits, const std::vector<std::size_t>& targets) {
        const std::size_t c = logits.cols();
        for (std::size_t r = 0; r < targets.size(); ++r) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < c; ++j)
                if (logits.at(r, j) > logits.at(r, best)) best = j;
            if (best == targets[r]) sc.correct += 1.0;
        }
        sc.count = targets.size();
    };
    if (task != TaskType::graph_reg && loss_kind != LossKind::cross_entropy)
        throw std::invalid_argument("train: classification tasks require the cross_entropy loss");
    switch (task) {
        case TaskType::graph_class: {
            sc.loss = cross_entropy_loss(preds, ps.graph_classes);
            accuracy_of(preds, ps.graph_classes);
            break;
        }
        case TaskType::clip_class: {
            std::vector<std::size_t> target{*ps.clip_class};
            sc.loss = cross_entropy_loss(preds, target);
            accuracy_of(preds, target);
            break;
        }
        case TaskType::graph_reg: {
            Tensor target({ps.graph_targets.size(), 1}, std::vector<double>(ps.graph_targets));
            if (loss_kind != LossKind::l1)
                throw std::invalid_argument("train: regression tasks require the l1 loss");
            sc.loss = l1_loss(preds, target);
            for (std::size_t r = 0; r < ps.graph_targets.size(); ++r)
                sc.correct += std::abs(preds.at(r, 0) - ps.graph_targets[r]);
            sc.count = ps.graph_targets.size();
            break;
        }
        case TaskType::vertex_class: {
            sc.loss = cross_entropy_loss(preds, ps.vertex_classes);
            accuracy_of(preds, ps.vertex_classes);
            break;
        }
        case TaskType::edge_class: {
            sc.loss = cross_entropy_loss(preds, ps.edge_classes);
            accuracy_of(preds, ps.edge_classes);
            break;
        }
    }
    return sc;
}

struct EpochStats {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_metric = 0.0;
    double val_loss = 0.0;
    double val_metric = 0.0;
};

struct SplitStats {
    double loss = 0.0;
    double metric = 0.0;
    std::size_t samples = 0;
};

struct FitResult {
    std::vector<EpochStats> history;
};

inline Tensor task_forward(const GigNetwork& net, const PreparedSample& ps, TaskType task) {
    return task == TaskType::clip_class ? net.forward_clip(ps.sample, ps.adj)
                                        : net.forward(ps.sample, ps.adj);
}

inline SplitStats evaluate(const GigNetwork& net, const std::vector<PreparedSample>& samples,
                           TaskType task, LossKind loss_kind) {
    SplitStats st;
    st.samples = samples.size();
    double correct = 0.0;
    std::size_t count = 0;
    for (const PreparedSample& ps : samples) {
        Tensor preds = task_forward(net, ps, task);
        SampleScore sc = score_sample(preds, ps, task, loss_kind);
        st.loss += sc.loss.item();
        correct += sc.correct;
        count += sc.count;
    }
    if (!samples.empty()) st.loss /= static_cast<double>(samples.size());
    st.metric = count == 0 ? 0.0 : correct / static_cast<double>(count);
    return st;
}

// One optimiser step per GIG sample: the GIG sample already is the batch.
inline FitResult fit(GigNetwork& net, const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    const TaskType task = ds.meta.task_type;
    SplitMix64 root(cfg.seed);
    root.split();  // reserved for the per-split GIG construction stream
    SplitMix64 shuffle_rng = root.split();
    auto train = prepare_split(ds, "train", cfg.gsg, cfg.samples_per_gig,
                               gsg_seed_for_split(cfg.seed, "train"));
    auto val = prepare_split(ds, "val", cfg.gsg, cfg.samples_per_gig,
                             gsg_seed_for_split(cfg.seed, "val"));
    if (train.empty()) throw std::invalid_argument("fit: empty training split");

    AdamW opt(net.named_params(), cfg.learning_rate, cfg.weight_decay);
    FitResult result;
    result.history.reserve(cfg.epochs);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.schedule == Schedule::cosine_annealing
                              ? cosine_anneal_lr(cfg.learning_rate, epoch, cfg.epochs,
                                                 cfg.learning_rate / 100.0)
                              : cfg.learning_rate;
        opt.set_learning_rate(lr);
        shuffle(order, shuffle_rng);
        double loss_sum = 0.0, correct = 0.0;
        std::size_t count = 0;
        for (std::size_t s : order) {
            const PreparedSample& ps = train[s];
            opt.zero_grad();
            {
                Tape tape;
                Tensor preds = task_forward(net, ps, task);
                SampleScore sc = score_sample(preds, ps, task, cfg.loss);
                loss_sum += sc.loss.item();
                correct += sc.correct;
                count += sc.count;
                tape.backward(sc.loss);
            }
            opt.step();
        }
        SplitStats vs = evaluate(net, val, task, cfg.loss);
        EpochStats es;
        es.epoch = epoch;
        es.lr = lr;
        es.train_loss = loss_sum / static_cast<double>(train.size());
        es.train_metric = count == 0 ? 0.0 : correct / static_cast<double>(count);
        es.val_loss = vs.loss;
        es.val_metric = vs.metric;
        result.history.push_back(es);
    }
    return result;
}

} // namespace gig
