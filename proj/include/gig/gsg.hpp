#pragma once

// GIG sample generation: turns a batch of graphs (or the frames of a clip)
// into a wired GIG sample. Construction runs exactly once per sample and is
// pure given (batch, config, seed); the resulting wiring never changes
// during training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "gig/graph.hpp"
#include "gig/rng.hpp"

namespace gig {

enum class ProxyInit { mean, random_vertex, max_l2, min_l2 };

inline std::string to_string(ProxyInit p) {
    switch (p) {
        case ProxyInit::mean: return "mean";
        case ProxyInit::random_vertex: return "random_vertex";
        case ProxyInit::max_l2: return "max_l2";
        case ProxyInit::min_l2: return "min_l2";
    }
    return "?";
}

inline ProxyInit proxy_init_from_string(const std::string& s) {
    if (s == "mean") return ProxyInit::mean;
    if (s == "random_vertex") return ProxyInit::random_vertex;
    if (s == "max_l2") return ProxyInit::max_l2;
    if (s == "min_l2") return ProxyInit::min_l2;
    throw std::invalid_argument("unknown proxy init mode '" + s + "'");
}

struct GsgConfig {
    double rho_proxy = 0.10;        // fraction of graph vertices wired per proxy direction
    std::size_t k_gig = 8;          // GIG-edge neighbour count, capped at I - 1
    double similar_fraction = 0.5;  // fraction of k taken from the most similar proxies
    Metric metric = Metric::cosine;
    ProxyInit proxy_init = ProxyInit::mean;

    void validate() const {
        if (!(rho_proxy > 0.0) || rho_proxy > 1.0)
            throw std::invalid_argument("gsg: rho_proxy must lie in (0, 1], got " + std::to_string(rho_proxy));
        if (k_gig < 1) throw std::invalid_argument("gsg: k_gig must be at least 1");
        if (similar_fraction < 0.0 || similar_fraction > 1.0)
            throw std::invalid_argument("gsg: similar_fraction must lie in [0, 1], got " +
                                        std::to_string(similar_fraction));
    }
};

inline std::vector<double> init_local_proxy(const Graph& g, ProxyInit mode, std::uint64_t seed) {
    const std::size_t n = g.vertex_count();
    if (n == 0) throw std::invalid_argument("init_local_proxy: empty graph");
    const std::size_t dv = g.vertex_dim();
    switch (mode) {
        case ProxyInit::mean: {
            std::vector<double> p(dv, 0.0);
            for (const auto& v : g.vertex_features)
                for (std::size_t j = 0; j < dv; ++j) p[j] += v[j];
            for (auto& x : p) x /= static_cast<double>(n);
            return p;
        }
        case ProxyInit::random_vertex: {
            SplitMix64 rng(seed);
            return g.vertex_features[rng.below(n)];
        }
        case ProxyInit::max_l2:
        case ProxyInit::min_l2: {
            std::size_t best = 0;
            double best_sq = 0.0;
            for (std::size_t j = 0; j < dv; ++j) best_sq += g.vertex_features[0][j] * g.vertex_features[0][j];
            for (std::size_t i = 1; i < n; ++i) {
                double sq = 0.0;
                for (std::size_t j = 0; j < dv; ++j) sq += g.vertex_features[i][j] * g.vertex_features[i][j];
                const bool better = mode == ProxyInit::max_l2 ? sq > best_sq : sq < best_sq;
                if (better) {
                    best = i;
                    best_sq = sq;
                }
            }
            return g.vertex_features[best];
        }
    }
    throw std::logic_error("init_local_proxy: unhandled mode");
}

namespace detail {

// Vertex indices ordered by similarity to the reference vector. Ties break
// by ascending index so the ordering is total and deterministic.
inline std::vector<std::size_t> rank_by_similarity(const std::vector<std::vector<double>>& vectors,
                                                   const std::vector<double>& reference, Metric metric,
                                                   bool most_similar_first) {
    std::vector<double> score(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) score[i] = similarity(vectors[i], reference, metric);
    std::vector<std::size_t> order(vectors.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) return most_similar_first ? score[a] > score[b] : score[a] < score[b];
        return a < b;
    });
    return order;
}

} // namespace detail

// Wires max(1, ceil(rho * N)) proxy edges per direction: inbound from the
// vertices least similar to the local proxy, outbound from the global proxy
// to the vertices most similar to it. Edge features start as zero vectors
// of the graph's edge feature width. When 2m > N the two selections may
// overlap; each is independently capped at N.
inline std::pair<std::vector<ProxyEdge>, std::vector<ProxyEdge>> build_proxy_edges(
    const Graph& g, const std::vector<double>& local_proxy, const GsgConfig& cfg) {
    cfg.validate();
    const std::size_t n = g.vertex_count();
    if (n == 0) throw std::invalid_argument("build_proxy_edges: empty graph");
    if (local_proxy.size() != g.vertex_dim())
        throw std::invalid_argument("build_proxy_edges: proxy length " + std::to_string(local_proxy.size()) +
                                    " does not match vertex feature length " + std::to_string(g.vertex_dim()));
    const std::size_t m = std::min<std::size_t>(
        n, std::max<std::size_t>(1, static_cast<std::size_t>(
                                        std::ceil(cfg.rho_proxy * static_cast<double>(n)))));
    const std::vector<double> zero_feature(g.edge_dim(), 0.0);
    const auto least = detail::rank_by_similarity(g.vertex_features, local_proxy, cfg.metric, false);
    const auto most = detail::rank_by_similarity(g.vertex_features, local_proxy, cfg.metric, true);
    std::vector<ProxyEdge> inbound, outbound;
    inbound.reserve(m);
    outbound.reserve(m);
    for (std::size_t r = 0; r < m; ++r) {
        inbound.push_back({least[r], zero_feature});
        outbound.push_back({most[r], zero_feature});
    }
    return {std::move(inbound), std::move(outbound)};
}

// For each GIG vertex, selects k = min(k_gig, I-1) peers: round(similar_fraction * k)
// most similar local proxies and the remaining least similar ones, ties by
// ascending index. Every selection adds the directed pair (i -> j) and
// (j -> i); pairs selected from both ends are deduplicated, so per-proxy
// degree is bounded above rather than exact.
inline std::vector<GigEdge> build_gig_edges(const std::vector<std::vector<double>>& local_proxies,
                                            const GsgConfig& cfg, std::size_t edge_feature_dim) {
    cfg.validate();
    const std::size_t I = local_proxies.size();
    if (I == 0) throw std::invalid_argument("build_gig_edges: no local proxies");
    std::vector<GigEdge> edges;
    if (I == 1) return edges;
    const std::size_t k = std::min(cfg.k_gig, I - 1);
    const std::size_t n_similar =
        std::min<std::size_t>(k, static_cast<std::size_t>(std::llround(cfg.similar_fraction * static_cast<double>(k))));
    const std::vector<double> zero_feature(edge_feature_dim, 0.0);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t i = 0; i < I; ++i) {
        std::vector<std::vector<double>> others;
        std::vector<std::size_t> other_index;
        others.reserve(I - 1);
        for (std::size_t j = 0; j < I; ++j)
            if (j != i) {
                others.push_back(local_proxies[j]);
                other_index.push_back(j);
            }
        const auto most = detail::rank_by_similarity(others, local_proxies[i], cfg.metric, true);
        const auto least = detail::rank_by_similarity(others, local_proxies[i], cfg.metric, false);
        std::vector<std::size_t> selected;
        selected.reserve(k);
        std::vector<bool> taken(others.size(), false);
        for (std::size_t r = 0; r < n_similar; ++r) {
            selected.push_back(other_index[most[r]]);
            taken[most[r]] = true;
        }
        // the least-similar picks come from the candidates not already taken;
        // under ties both rankings start at the same indices
        for (std::size_t r = 0, picked = 0; r < least.size() && picked < k - n_similar; ++r) {
            if (taken[least[r]]) continue;
            selected.push_back(other_index[least[r]]);
            ++picked;
        }
        for (std::size_t j : selected) {
            if (seen.insert({i, j}).second) edges.push_back({i, j, zero_feature});
            if (seen.insert({j, i}).second) edges.push_back({j, i, zero_feature});
        }
    }
    return edges;
}

// Composes proxy initialisation, proxy-edge wiring and GIG-edge wiring into
// a complete GIG sample. Global proxies start as zero vectors.
inline GIGSample generate_gig_sample(const std::vector<Graph>& batch, const GsgConfig& cfg,
                                     std::uint64_t seed) {
    cfg.validate();
    if (batch.empty()) throw std::invalid_argument("generate_gig_sample: empty batch");
    const std::size_t dv = batch[0].vertex_dim();
    std::size_t de = 0;
    for (const Graph& g : batch)
        if (g.edge_count() > 0) {
            de = g.edge_dim();
            break;
        }
    SplitMix64 rng(seed);
    GIGSample sample;
    sample.gig_vertices = batch;
    sample.local_proxies.reserve(batch.size());
    sample.proxy_edges_in.reserve(batch.size());
    sample.proxy_edges_out.reserve(batch.size());
    for (const Graph& g : batch) {
        validate_graph(g);
        if (g.vertex_dim() != dv)
            throw std::invalid_argument("generate_gig_sample: vertex feature width varies across the batch");
        if (g.edge_count() > 0 && g.edge_dim() != de)
            throw std::invalid_argument("generate_gig_sample: edge feature width varies across the batch");
        SplitMix64 graph_rng = rng.split();
        sample.local_proxies.push_back(init_local_proxy(g, cfg.proxy_init, graph_rng.next()));
        auto [inbound, outbound] = build_proxy_edges(g, sample.local_proxies.back(), cfg);
        sample.proxy_edges_in.push_back(std::move(inbound));
        sample.proxy_edges_out.push_back(std::move(outbound));
    }
    sample.global_proxies.assign(batch.size(), std::vector<double>(dv, 0.0));
    sample.gig_edges = build_gig_edges(sample.local_proxies, cfg, de);
    return sample;
}

// Dominant-term unit-operation estimate for GIG sample construction:
// I * max_vs * n proxy-edge similarity work plus I^2 * n for the pairwise
// proxy similarity matrix behind the GIG edges.
inline std::uint64_t estimate_gsg_complexity(std::uint64_t gig_vertices, std::uint64_t max_graph_vertices,
                                             std::uint64_t feature_dim) {
    if (gig_vertices == 0 || max_graph_vertices == 0 || feature_dim == 0)
        throw std::invalid_argument("estimate_gsg_complexity: all sizes must be positive");
    return gig_vertices * max_graph_vertices * feature_dim + gig_vertices * gig_vertices * feature_dim;
}

} // namespace gig
