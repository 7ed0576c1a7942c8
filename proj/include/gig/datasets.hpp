#pragma once

// Synthetic desk-scale tasks. Every generator is a pure function of its
// parameters and seed: regenerating with the same arguments yields a
// byte-identical dataset.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "gig/graph.hpp"
#include "gig/rng.hpp"

namespace gig {

enum class TaskType { graph_class, graph_reg, vertex_class, edge_class, clip_class };

inline std::string to_string(TaskType t) {
    switch (t) {
        case TaskType::graph_class: return "graph_class";
        case TaskType::graph_reg: return "graph_reg";
        case TaskType::vertex_class: return "vertex_class";
        case TaskType::edge_class: return "edge_class";
        case TaskType::clip_class: return "clip_class";
    }
    return "?";
}

inline TaskType task_type_from_string(const std::string& s) {
    if (s == "graph_class") return TaskType::graph_class;
    if (s == "graph_reg") return TaskType::graph_reg;
    if (s == "vertex_class") return TaskType::vertex_class;
    if (s == "edge_class") return TaskType::edge_class;
    if (s == "clip_class") return TaskType::clip_class;
    throw std::invalid_argument("unknown task type '" + s + "'");
}

struct DatasetMeta {
    TaskType task_type = TaskType::graph_class;
    std::size_t num_classes = 2;
    std::size_t vertex_feat_dim = 0;
    std::size_t edge_feat_dim = 0;
    // When positive, records group into GIG samples of exactly this many
    // consecutive graphs; the grouping is part of the data (labels can
    // depend on it), not a training knob.
    std::size_t graphs_per_sample = 0;
    std::map<std::string, std::size_t> counts;
};

struct ClipSample {
    std::vector<Graph> frames;
    long label = 0;
};

struct Dataset {
    DatasetMeta meta;
    std::map<std::string, std::vector<Graph>> graph_splits;
    std::map<std::string, std::vector<ClipSample>> clip_splits;

    bool is_clip_task() const { return meta.task_type == TaskType::clip_class; }
};

inline const std::vector<std::string>& split_names() {
    static const std::vector<std::string> names{"train", "val", "test"};
    return names;
}

// Above-the-median indicator for each value; the median itself is labelled 0.
inline std::vector<long> median_labels(const std::vector<double>& values) {
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    std::vector<long> labels(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) labels[i] = values[i] > median ? 1 : 0;
    return labels;
}

namespace detail {

// Random connected-ish structure: every vertex draws one undirected partner,
// duplicates dropped, both directions stored.
inline void add_random_edges(Graph& g, SplitMix64& rng) {
    const std::size_t n = g.vertex_count();
    if (n < 2) return;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t v = 0; v < n; ++v) {
        std::size_t p = rng.below(n - 1);
        if (p >= v) ++p;
        const auto key = std::minmax(v, p);
        if (!seen.insert({key.first, key.second}).second) continue;
        g.edges.emplace_back(key.first, key.second);
        g.edges.emplace_back(key.second, key.first);
    }
}

} // namespace detail

// Batch-median task: each sample is an odd-sized set of graphs whose vertex
// features are Normal(mu_i, 1). The per-sample means are a shared offset
// c ~ U(-3, 3) plus an evenly spaced ladder of per-graph offsets on
// [-0.8, 0.8], randomly assigned to graphs; the label marks graphs whose
// mean lies above the sample median. A graph's own features never reveal
// where it sits in the ladder (the offset c is unknown), so the labels are
// only recoverable by ranking a graph against the others in its sample.
inline Dataset gen_batch_median_task(std::size_t n_samples, std::size_t graphs_per_sample,
                                     std::uint64_t seed) {
    if (graphs_per_sample % 2 == 0 || graphs_per_sample < 3)
        throw std::invalid_argument("gen_batch_median_task: graphs_per_sample must be odd and >= 3, got " +
                                    std::to_string(graphs_per_sample));
    constexpr std::size_t kFeatureDim = 16;
    Dataset ds;
    ds.meta.task_type = TaskType::graph_class;
    ds.meta.num_classes = 2;
    ds.meta.vertex_feat_dim = kFeatureDim;
    ds.meta.edge_feat_dim = 0;
    ds.meta.graphs_per_sample = graphs_per_sample;
    SplitMix64 root(seed);
    for (const std::string& split : split_names()) {
        SplitMix64 rng = root.split();
        const std::size_t count = split == "train" ? n_samples : std::max<std::size_t>(1, n_samples / 2);
        ds.meta.counts[split] = count * graphs_per_sample;
        auto& graphs = ds.graph_splits[split];
        graphs.reserve(count * graphs_per_sample);
        for (std::size_t s = 0; s < count; ++s) {
            const double offset = rng.uniform(-3.0, 3.0);
            std::vector<double> ladder(graphs_per_sample);
            for (std::size_t i = 0; i < graphs_per_sample; ++i)
                ladder[i] = -0.8 + 1.6 * static_cast<double>(i) / static_cast<double>(graphs_per_sample - 1);
            shuffle(ladder, rng);
            std::vector<double> mus(graphs_per_sample);
            for (std::size_t i = 0; i < graphs_per_sample; ++i) mus[i] = offset + ladder[i];
            const std::vector<long> labels = median_labels(mus);
            for (std::size_t i = 0; i < graphs_per_sample; ++i) {
                Graph g;
                const std::size_t n = 10 + rng.below(7);
                g.vertex_features.resize(n);
                for (auto& feat : g.vertex_features) {
                    feat.resize(kFeatureDim);
                    for (auto& x : feat) x = rng.normal(mus[i], 1.0);
                }
                detail::add_random_edges(g, rng);
                g.class_label = labels[i];
                graphs.push_back(std::move(g));
            }
        }
    }
    return ds;
}

// Clip-direction task: frames over a fixed 5-vertex chain; a unit activation
// moves one position per frame, wrapping, left-to-right (label 0) or
// right-to-left (label 1) from a random start. Each vertex carries the
// activation indicator, its chain position and the frame's normalised
// timestamp. The position channel identifies the joints; without it the
// chain's reflection maps either direction onto the other and no
// isomorphism-invariant model could beat chance. A frame in isolation is
// still uninformative about direction: the start position is uniform, so
// (position, time) pairs are equally likely under both labels.
inline Dataset gen_clip_direction_task(std::size_t n_clips, std::size_t frames_per_clip,
                                       std::uint64_t seed) {
    if (frames_per_clip < 3)
        throw std::invalid_argument("gen_clip_direction_task: need at least 3 frames, got " +
                                    std::to_string(frames_per_clip));
    constexpr std::size_t kChain = 5;
    Dataset ds;
    ds.meta.task_type = TaskType::clip_class;
    ds.meta.num_classes = 2;
    ds.meta.vertex_feat_dim = 3;
    ds.meta.edge_feat_dim = 0;
    SplitMix64 root(seed);
    for (const std::string& split : split_names()) {
        SplitMix64 rng = root.split();
        const std::size_t count = split == "train" ? n_clips : std::max<std::size_t>(1, n_clips / 2);
        ds.meta.counts[split] = count;
        auto& clips = ds.clip_splits[split];
        clips.reserve(count);
        for (std::size_t s = 0; s < count; ++s) {
            const std::size_t start = rng.below(kChain);
            const long direction = static_cast<long>(s % 2);  // exactly balanced labels
            ClipSample clip;
            clip.label = direction;
            clip.frames.reserve(frames_per_clip);
            for (std::size_t t = 0; t < frames_per_clip; ++t) {
                const std::size_t pos =
                    direction == 0 ? (start + t) % kChain
                                   : (start + kChain * frames_per_clip - t) % kChain;
                Graph frame;
                frame.vertex_features.resize(kChain);
                for (std::size_t v = 0; v < kChain; ++v)
                    frame.vertex_features[v] = {v == pos ? 1.0 : 0.0,
                                                static_cast<double>(v) / (kChain - 1.0),
                                                static_cast<double>(t) /
                                                    static_cast<double>(frames_per_clip - 1)};
                for (std::size_t v = 0; v + 1 < kChain; ++v) {
                    frame.edges.emplace_back(v, v + 1);
                    frame.edges.emplace_back(v + 1, v);
                }
                clip.frames.push_back(std::move(frame));
            }
            clips.push_back(std::move(clip));
        }
    }
    return ds;
}

// Convergence smoke test: fixed-size random graphs, target = sum of all
// vertex features.
inline Dataset gen_sum_regression_task(std::size_t n_samples, std::uint64_t seed) {
    constexpr std::size_t kVertices = 6;
    Dataset ds;
    ds.meta.task_type = TaskType::graph_reg;
    ds.meta.num_classes = 1;
    ds.meta.vertex_feat_dim = 1;
    ds.meta.edge_feat_dim = 0;
    SplitMix64 root(seed);
    for (const std::string& split : split_names()) {
        SplitMix64 rng = root.split();
        const std::size_t count = split == "train" ? n_samples : std::max<std::size_t>(1, n_samples / 2);
        ds.meta.counts[split] = count;
        auto& graphs = ds.graph_splits[split];
        graphs.reserve(count);
        for (std::size_t s = 0; s < count; ++s) {
            Graph g;
            g.vertex_features.resize(kVertices);
            double total = 0.0;
            for (auto& feat : g.vertex_features) {
                feat = {rng.uniform(-1.0, 1.0)};
                total += feat[0];
            }
            detail::add_random_edges(g, rng);
            g.target = total;
            graphs.push_back(std::move(g));
        }
    }
    return ds;
}

} // namespace gig
