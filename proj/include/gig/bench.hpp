#pragma once

// Wall-clock measurements of GIG construction and forward/backward passes
// across requested (gig vertices, graph vertices, feature dim) sizes, next
// to the closed-form construction cost estimate.

#include <array>
#include <chrono>
#include <cstdint>
#include <vector>

#include "gig/gsg.hpp"
#include "gig/layers.hpp"
#include "gig/rng.hpp"
#include "gig/tensor.hpp"
#include "gig/training.hpp"

namespace gig {

struct BenchRow {
    std::size_t gig_vertices = 0;
    std::size_t graph_vertices = 0;
    std::size_t dim = 0;
    double gsg_seconds = 0.0;
    double forward_seconds = 0.0;
    double forward_backward_seconds = 0.0;
    std::uint64_t estimate = 0;
};

namespace detail {

template <typename F>
double best_of(std::size_t repeats, F&& body) {
    double best = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto start = std::chrono::steady_clock::now();
        body();
        const auto stop = std::chrono::steady_clock::now();
        const double sec = std::chrono::duration<double>(stop - start).count();
        if (r == 0 || sec < best) best = sec;
    }
    return best;
}

inline std::vector<Graph> bench_batch(std::size_t count, std::size_t vertices, std::size_t dim,
                                      SplitMix64& rng) {
    std::vector<Graph> batch(count);
    for (Graph& g : batch) {
        g.vertex_features.resize(vertices);
        for (auto& f : g.vertex_features) {
            f.resize(dim);
            for (auto& x : f) x = rng.uniform(-1.0, 1.0);
        }
        for (std::size_t v = 0; v + 1 < vertices; ++v) {
            g.edges.emplace_back(v, v + 1);
            g.edges.emplace_back(v + 1, v);
        }
    }
    return batch;
}

} // namespace detail

inline std::vector<BenchRow> run_bench(const TrainConfig& base,
                                       const std::vector<std::array<std::size_t, 3>>& sizes,
                                       std::size_t repeats = 5) {
    std::vector<BenchRow> rows;
    rows.reserve(sizes.size());
    SplitMix64 rng(base.seed);
    for (const auto& [I, N, d] : sizes) {
        BenchRow row;
        row.gig_vertices = I;
        row.graph_vertices = N;
        row.dim = d;
        row.estimate = estimate_gsg_complexity(I, N, d);
        const auto batch = detail::bench_batch(I, N, d, rng);
        GsgConfig gsg_cfg = base.gsg;
        row.gsg_seconds = detail::best_of(repeats, [&] { generate_gig_sample(batch, gsg_cfg, 7); });

        NetworkConfig net_cfg = base.network;
        net_cfg.vertex_feat_dim = d;
        net_cfg.edge_feat_dim = 0;
        net_cfg.hidden_dim = d;
        net_cfg.readout = Readout::graph_class;
        GigNetwork net(net_cfg, 11);
        const GIGSample sample = generate_gig_sample(batch, gsg_cfg, 7);
        const AdjacencyIndex adj = build_adjacency(sample);
        row.forward_seconds = detail::best_of(repeats, [&] { net.forward(sample, adj); });
        const auto params = net.named_params();
        row.forward_backward_seconds = detail::best_of(repeats, [&] {
            for (const auto& [name, p] : params) p.impl()->grad.clear();
            Tape tape;
            Tensor loss = sum(net.forward(sample, adj));
            tape.backward(loss);
        });
        rows.push_back(row);
    }
    return rows;
}

} // namespace gig
