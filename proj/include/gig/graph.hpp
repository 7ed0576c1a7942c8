#pragma once

// Domain model: inner graphs, GIG samples (graphs of graphs wired through
// proxy vertices), and the similarity primitives used to wire them. All
// types are plain data and immutable after construction by convention.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gig {

// One inner graph: the content of a single GIG vertex. Edges are stored
// directed; an undirected input edge appears as both directions.
struct Graph {
    std::vector<std::vector<double>> vertex_features;              // N x d_v
    std::vector<std::pair<std::size_t, std::size_t>> edges;        // (src, dst)
    std::vector<std::vector<double>> edge_features;                // empty or parallel to edges

    std::optional<long> class_label;                 // graph-level class
    std::optional<double> target;                    // graph-level regression target
    std::optional<std::vector<long>> vertex_labels;  // per-vertex classes
    std::optional<std::vector<long>> edge_labels;    // per-edge classes

    std::size_t vertex_count() const { return vertex_features.size(); }
    std::size_t edge_count() const { return edges.size(); }
    std::size_t vertex_dim() const { return vertex_features.empty() ? 0 : vertex_features[0].size(); }
    std::size_t edge_dim() const { return edge_features.empty() ? 0 : edge_features[0].size(); }
};

// Directed edge between a graph vertex and one of its proxies. For inbound
// edges the vertex is the source (graph vertex -> local proxy); for outbound
// edges it is the destination (global proxy -> graph vertex).
struct ProxyEdge {
    std::size_t vertex;
    std::vector<double> feature;
};

// Directed edge from the local proxy of GIG vertex src to the global proxy
// of GIG vertex dst. Always created in (i,j)/(j,i) pairs.
struct GigEdge {
    std::size_t src;
    std::size_t dst;
    std::vector<double> feature;
};

struct GIGSample {
    std::vector<Graph> gig_vertices;
    std::vector<std::vector<double>> local_proxies;       // I x d_v
    std::vector<std::vector<double>> global_proxies;      // I x d_v, zero after construction
    std::vector<std::vector<ProxyEdge>> proxy_edges_in;   // per GIG vertex
    std::vector<std::vector<ProxyEdge>> proxy_edges_out;  // per GIG vertex
    std::vector<GigEdge> gig_edges;

    std::size_t size() const { return gig_vertices.size(); }
};

// Returns normally iff all Graph invariants hold: rectangular vertex and
// edge feature lists, every edge endpoint in range, no self-loops.
inline void validate_graph(const Graph& g) {
    const std::size_t n = g.vertex_count();
    const std::size_t dv = g.vertex_dim();
    for (std::size_t i = 0; i < n; ++i)
        if (g.vertex_features[i].size() != dv)
            throw std::invalid_argument("graph: ragged vertex features at vertex " + std::to_string(i) +
                                        ": length " + std::to_string(g.vertex_features[i].size()) +
                                        " vs " + std::to_string(dv));
    if (!g.edge_features.empty() && g.edge_features.size() != g.edges.size())
        throw std::invalid_argument("graph: " + std::to_string(g.edge_features.size()) +
                                    " edge feature rows for " + std::to_string(g.edges.size()) + " edges");
    const std::size_t de = g.edge_dim();
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const auto& [src, dst] = g.edges[e];
        if (src >= n || dst >= n)
            throw std::out_of_range("graph: edge " + std::to_string(e) + " (" + std::to_string(src) +
                                    " -> " + std::to_string(dst) + ") references a vertex outside [0, " +
                                    std::to_string(n) + ")");
        if (src == dst)
            throw std::invalid_argument("graph: edge " + std::to_string(e) + " is a self-loop on vertex " +
                                        std::to_string(src));
        if (!g.edge_features.empty() && g.edge_features[e].size() != de)
            throw std::invalid_argument("graph: ragged edge features at edge " + std::to_string(e));
    }
}

enum class Metric { cosine, l1, l2 };

inline std::string to_string(Metric m) {
    switch (m) {
        case Metric::cosine: return "cosine";
        case Metric::l1: return "l1";
        case Metric::l2: return "l2";
    }
    return "?";
}

inline Metric metric_from_string(const std::string& s) {
    if (s == "cosine") return Metric::cosine;
    if (s == "l1") return Metric::l1;
    if (s == "l2") return Metric::l2;
    throw std::invalid_argument("unknown similarity metric '" + s + "'");
}

// Larger result means more similar for every metric: cosine as-is (defined
// as 0 when either norm is below 1e-12), l1/l2 as negated distances.
inline double similarity(const std::vector<double>& a, const std::vector<double>& b, Metric metric) {
    if (a.size() != b.size())
        throw std::invalid_argument("similarity: vector lengths differ: " + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()));
    switch (metric) {
        case Metric::cosine: {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                dot += a[i] * b[i];
                na += a[i] * a[i];
                nb += b[i] * b[i];
            }
            na = std::sqrt(na);
            nb = std::sqrt(nb);
            if (na < 1e-12 || nb < 1e-12) return 0.0;
            return dot / (na * nb);
        }
        case Metric::l1: {
            double d = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
            return -d;
        }
        case Metric::l2: {
            double d = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
            return -std::sqrt(d);
        }
    }
    throw std::logic_error("similarity: unhandled metric");
}

// One in-neighbour entry: the edge that delivers the message and its source.
struct InNeighbor {
    std::size_t edge;
    std::size_t src;
};

// Precomputed index structure over a GIG sample. Flat src/dst arrays drive
// the batched gather/scatter forward passes; in-neighbour lists (ordered by
// ascending edge index) serve per-vertex aggregation and the round-trip
// consistency checks.
struct AdjacencyIndex {
    // Per GIG vertex, parallel to the inner graph's edge list.
    std::vector<std::vector<std::size_t>> edge_src;
    std::vector<std::vector<std::size_t>> edge_dst;
    // Per GIG vertex, per graph vertex: incoming graph edges.
    std::vector<std::vector<std::vector<InNeighbor>>> graph_in;
    // Per GIG vertex: graph-vertex endpoints of the proxy edges, in list order.
    std::vector<std::vector<std::size_t>> proxy_in_vertex;
    std::vector<std::vector<std::size_t>> proxy_out_vertex;
    // Parallel to the GIG edge list.
    std::vector<std::size_t> gig_src;
    std::vector<std::size_t> gig_dst;
    // Per GIG vertex: incoming GIG edges (source is the peer GIG vertex).
    std::vector<std::vector<InNeighbor>> gig_in;
};

inline AdjacencyIndex build_adjacency(const GIGSample& sample) {
    const std::size_t I = sample.size();
    AdjacencyIndex adj;
    adj.edge_src.resize(I);
    adj.edge_dst.resize(I);
    adj.graph_in.resize(I);
    adj.proxy_in_vertex.resize(I);
    adj.proxy_out_vertex.resize(I);
    adj.gig_in.resize(I);
    for (std::size_t i = 0; i < I; ++i) {
        const Graph& g = sample.gig_vertices[i];
        adj.edge_src[i].reserve(g.edges.size());
        adj.edge_dst[i].reserve(g.edges.size());
        adj.graph_in[i].resize(g.vertex_count());
        for (std::size_t e = 0; e < g.edges.size(); ++e) {
            adj.edge_src[i].push_back(g.edges[e].first);
            adj.edge_dst[i].push_back(g.edges[e].second);
            adj.graph_in[i][g.edges[e].second].push_back({e, g.edges[e].first});
        }
        for (const ProxyEdge& pe : sample.proxy_edges_in[i]) adj.proxy_in_vertex[i].push_back(pe.vertex);
        for (const ProxyEdge& pe : sample.proxy_edges_out[i]) adj.proxy_out_vertex[i].push_back(pe.vertex);
    }
    adj.gig_src.reserve(sample.gig_edges.size());
    adj.gig_dst.reserve(sample.gig_edges.size());
    for (std::size_t e = 0; e < sample.gig_edges.size(); ++e) {
        const GigEdge& ge = sample.gig_edges[e];
        adj.gig_src.push_back(ge.src);
        adj.gig_dst.push_back(ge.dst);
        adj.gig_in[ge.dst].push_back({e, ge.src});
    }
    return adj;
}

} // namespace gig
