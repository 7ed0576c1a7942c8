#pragma once

// Finite-difference verification of a complete GIG network: builds a small
// random sample, wires a two-hidden-layer gated network over it and checks
// the autodiff gradient of a cross-entropy readout against central
// differences for every parameter tensor.

#include <cstdint>
#include <vector>

#include "gig/grad_check.hpp"
#include "gig/graph.hpp"
#include "gig/gsg.hpp"
#include "gig/layers.hpp"
#include "gig/rng.hpp"
#include "gig/tensor.hpp"

namespace gig {

inline std::vector<Graph> selfcheck_batch(std::uint64_t seed, std::size_t count = 3,
                                          std::size_t max_vertices = 6, std::size_t vertex_dim = 3,
                                          std::size_t edge_dim = 2) {
    SplitMix64 rng(seed);
    std::vector<Graph> batch(count);
    for (Graph& g : batch) {
        const std::size_t n = 3 + rng.below(max_vertices - 2);
        g.vertex_features.resize(n);
        for (auto& f : g.vertex_features) {
            f.resize(vertex_dim);
            for (auto& x : f) x = rng.uniform(-1.0, 1.0);
        }
        for (std::size_t v = 0; v + 1 < n; ++v) {
            g.edges.emplace_back(v, v + 1);
            g.edges.emplace_back(v + 1, v);
        }
        g.edge_features.resize(g.edges.size());
        for (auto& f : g.edge_features) {
            f.resize(edge_dim);
            for (auto& x : f) x = rng.uniform(-1.0, 1.0);
        }
    }
    return batch;
}

// The objective averages the cross entropy of three independent samples and
// scales the result down by a hundred. Three samples keep every relu channel
// live in at least one forward pass, so no parameter element is left with an
// exactly zero gradient by a single activation pattern. The small magnitude
// keeps the rounding noise of the central differences, about
// eps * |loss| / (2h), below tol times the relative-error floor, so elements
// whose true gradient is zero or near the floor compare cleanly; a wrong
// gradient rule still shows an O(1) relative error at any scale.
inline GradCheckReport run_network_grad_check(std::uint64_t seed, double tol = 1e-4,
                                              double h_scale = 1e-5) {
    constexpr std::size_t kSamples = 3;
    GsgConfig gsg_cfg;
    std::vector<GIGSample> samples;
    std::vector<AdjacencyIndex> adjs;
    std::vector<std::vector<std::size_t>> labels;
    samples.reserve(kSamples);
    for (std::size_t s = 0; s < kSamples; ++s) {
        const auto batch = selfcheck_batch(seed + 101 * s);
        samples.push_back(generate_gig_sample(batch, gsg_cfg, seed + 101 * s));
        adjs.push_back(build_adjacency(samples.back()));
        std::vector<std::size_t> l(batch.size());
        for (std::size_t i = 0; i < l.size(); ++i) l[i] = (i + s) % 2;
        labels.push_back(std::move(l));
    }

    NetworkConfig cfg;
    cfg.num_hidden_layers = 2;
    cfg.hidden_dim = 4;
    cfg.updater = UpdaterKind::gatedgcn;
    cfg.readout = Readout::graph_class;
    cfg.num_classes = 2;
    cfg.vertex_feat_dim = 3;
    cfg.edge_feat_dim = 2;
    GigNetwork net(cfg, seed + 1);

    auto make_loss = [&] {
        Tensor total = cross_entropy_loss(net.forward(samples[0], adjs[0]), labels[0]);
        for (std::size_t s = 1; s < kSamples; ++s)
            total = add(total, cross_entropy_loss(net.forward(samples[s], adjs[s]), labels[s]));
        return scale(total, 1.0 / (100.0 * static_cast<double>(kSamples)));
    };
    return grad_check(make_loss, net.named_params(), h_scale, tol);
}

} // namespace gig
