#pragma once

// Pluggable differentiable edge/vertex updating functions. One Updater
// instance holds the parameters for one layer role and is applied to every
// edge kind (graph, proxy, GIG) and every vertex kind (graph vertex, local
// proxy, global proxy) within that role.
//
// gatedgcn:
//   edge:   e + relu(norm(src W_s + dst W_d + e W_e))
//   vertex: v + relu(norm(v W_self + sum_m gate_m * (src_m W_nb) / (sum_m gate_m + eps)))
//           with gate_m = sigmoid(updated edge m); empty neighbourhoods
//           contribute a zero aggregate.
// gcn:
//   edge:   identity
//   vertex: relu(mean(neighbours and self) W_self); edge features are ignored.

#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gig/rng.hpp"
#include "gig/tensor.hpp"

namespace gig {

enum class UpdaterKind { gatedgcn, gcn };

inline std::string to_string(UpdaterKind k) {
    return k == UpdaterKind::gatedgcn ? "gatedgcn" : "gcn";
}

inline UpdaterKind updater_kind_from_string(const std::string& s) {
    if (s == "gatedgcn") return UpdaterKind::gatedgcn;
    if (s == "gcn") return UpdaterKind::gcn;
    throw std::invalid_argument("unknown updater kind '" + s + "'");
}

inline constexpr double kGateEps = 1e-6;   // denominator guard in the gated mean
inline constexpr double kNormEps = 1e-5;   // layer-norm variance guard

namespace detail {

inline Tensor glorot(std::size_t rows, std::size_t cols, SplitMix64& rng, bool requires_grad = true) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::vector<double> data(rows * cols);
    for (auto& v : data) v = rng.uniform(-a, a);
    return Tensor({rows, cols}, std::move(data), requires_grad);
}

inline Tensor uniform_vector(std::size_t n, double magnitude, SplitMix64& rng) {
    std::vector<double> data(n);
    for (auto& v : data) v = rng.uniform(-magnitude, magnitude);
    return Tensor({n}, std::move(data), true);
}

} // namespace detail

struct Updater {
    UpdaterKind kind = UpdaterKind::gatedgcn;
    std::size_t dim = 0;

    // Edge update (gatedgcn only).
    Tensor src_weight, dst_weight, edge_weight;  // [d x d]
    Tensor edge_norm_gain, edge_norm_bias;       // [d]
    // Vertex update. gcn uses self_weight only.
    Tensor self_weight, neighbor_weight;         // [d x d]
    Tensor vertex_norm_gain, vertex_norm_bias;   // [d]

    static Updater create(UpdaterKind kind, std::size_t dim, SplitMix64& rng) {
        Updater u;
        u.kind = kind;
        u.dim = dim;
        u.self_weight = detail::glorot(dim, dim, rng);
        if (kind == UpdaterKind::gatedgcn) {
            u.src_weight = detail::glorot(dim, dim, rng);
            u.dst_weight = detail::glorot(dim, dim, rng);
            u.edge_weight = detail::glorot(dim, dim, rng);
            u.neighbor_weight = detail::glorot(dim, dim, rng);
            u.edge_norm_gain = Tensor({dim}, 1.0, true);
            u.edge_norm_bias = Tensor({dim}, 0.0, true);
            u.vertex_norm_gain = Tensor({dim}, 1.0, true);
            u.vertex_norm_bias = Tensor({dim}, 0.0, true);
        }
        return u;
    }

    void collect_params(const std::string& prefix,
                        std::vector<std::pair<std::string, Tensor>>& out) const {
        out.emplace_back(prefix + ".self_weight", self_weight);
        if (kind == UpdaterKind::gatedgcn) {
            out.emplace_back(prefix + ".src_weight", src_weight);
            out.emplace_back(prefix + ".dst_weight", dst_weight);
            out.emplace_back(prefix + ".edge_weight", edge_weight);
            out.emplace_back(prefix + ".neighbor_weight", neighbor_weight);
            out.emplace_back(prefix + ".edge_norm_gain", edge_norm_gain);
            out.emplace_back(prefix + ".edge_norm_bias", edge_norm_bias);
            out.emplace_back(prefix + ".vertex_norm_gain", vertex_norm_gain);
            out.emplace_back(prefix + ".vertex_norm_bias", vertex_norm_bias);
        }
    }
};

// Batched edge update over parallel rows: edges[r] with endpoints src[r],
// dst[r]. gcn returns the edge tensor unchanged.
inline Tensor edge_update_batch(const Updater& u, const Tensor& edges, const Tensor& src,
                                const Tensor& dst) {
    if (u.kind == UpdaterKind::gcn) return edges;
    Tensor pre = add(add(matmul(src, u.src_weight), matmul(dst, u.dst_weight)),
                     matmul(edges, u.edge_weight));
    return add(edges, relu(layer_norm_rows(pre, u.edge_norm_gain, u.edge_norm_bias, kNormEps)));
}

// Batched vertex update. Message r carries (msg_edges[r], msg_sources[r])
// and lands on vertex msg_dst[r]; vertices with no messages follow the
// empty-neighbourhood rule of their kind.
inline Tensor vertex_update_batch(const Updater& u, const Tensor& vertices, const Tensor& msg_edges,
                                  const Tensor& msg_sources, const std::vector<std::size_t>& msg_dst,
                                  std::size_t n) {
    if (u.kind == UpdaterKind::gatedgcn) {
        Tensor gates = sigmoid(msg_edges);
        Tensor numer = scatter_sum_rows(mul(gates, matmul(msg_sources, u.neighbor_weight)), msg_dst, n);
        Tensor denom = add_scalar(scatter_sum_rows(gates, msg_dst, n), kGateEps);
        Tensor aggregate = divide(numer, denom);
        Tensor pre = add(matmul(vertices, u.self_weight), aggregate);
        return add(vertices, relu(layer_norm_rows(pre, u.vertex_norm_gain, u.vertex_norm_bias, kNormEps)));
    }
    // gcn: mean over the neighbourhood plus the vertex itself.
    Tensor summed = add(scatter_sum_rows(msg_sources, msg_dst, n), vertices);
    std::vector<double> inv_count(n, 1.0);
    {
        std::vector<std::size_t> indeg(n, 0);
        for (std::size_t r : msg_dst) ++indeg[r];
        for (std::size_t i = 0; i < n; ++i) inv_count[i] = 1.0 / static_cast<double>(indeg[i] + 1);
    }
    return relu(matmul(scale_rows(summed, std::move(inv_count)), u.self_weight));
}

// Single-edge form: all vectors have length d.
inline Tensor edge_update(const Updater& u, const Tensor& edge, const Tensor& v_src,
                          const Tensor& v_dst) {
    const std::size_t d = u.dim;
    Tensor out = edge_update_batch(u, reshape(edge, {1, d}), reshape(v_src, {1, d}),
                                   reshape(v_dst, {1, d}));
    return reshape(out, {d});
}

struct Message {
    Tensor edge;    // updated edge feature, length d
    Tensor source;  // neighbour vertex feature, length d
};

// Single-vertex form: aggregates every message onto one vertex.
inline Tensor vertex_update(const Updater& u, const Tensor& vertex,
                            const std::vector<Message>& messages) {
    const std::size_t d = u.dim;
    std::vector<Tensor> edge_rows, source_rows;
    edge_rows.reserve(messages.size());
    source_rows.reserve(messages.size());
    for (const Message& m : messages) {
        edge_rows.push_back(reshape(m.edge, {1, d}));
        source_rows.push_back(reshape(m.source, {1, d}));
    }
    Tensor msg_edges = messages.empty() ? Tensor({0, d}) : concat_rows(edge_rows);
    Tensor msg_sources = messages.empty() ? Tensor({0, d}) : concat_rows(source_rows);
    std::vector<std::size_t> dst(messages.size(), 0);
    Tensor out = vertex_update_batch(u, reshape(vertex, {1, d}), msg_edges, msg_sources, dst, 1);
    return reshape(out, {d});
}

// Input embedding applied exactly once, before the first GIG layer. Maps
// raw vertex features d_v -> d and raw edge features d_e -> d; zero-width
// edge features collapse to the learned bias vector.
struct Embedding {
    Tensor vertex_weight;  // [d_v x d]
    Tensor vertex_bias;    // [d]
    Tensor edge_weight;    // [d_e x d]
    Tensor edge_bias;      // [d]

    // Biases are random, not zero: zero-initialised proxies and edge
    // features pass through them, and all-zero embedded rows would leave
    // whole parameter paths without gradient signal.
    static Embedding create(std::size_t vertex_dim, std::size_t edge_dim, std::size_t hidden_dim,
                            SplitMix64& rng) {
        Embedding e;
        e.vertex_weight = detail::glorot(vertex_dim, hidden_dim, rng);
        e.vertex_bias = detail::uniform_vector(hidden_dim, 0.5, rng);
        e.edge_weight = detail::glorot(edge_dim, hidden_dim, rng);
        e.edge_bias = detail::uniform_vector(hidden_dim, 0.5, rng);
        return e;
    }

    Tensor embed_vertices(const Tensor& raw) const {
        return add(matmul(raw, vertex_weight), broadcast_rows(vertex_bias, raw.rows()));
    }

    Tensor embed_edges(const Tensor& raw) const {
        return add(matmul(raw, edge_weight), broadcast_rows(edge_bias, raw.rows()));
    }

    void collect_params(std::vector<std::pair<std::string, Tensor>>& out) const {
        out.emplace_back("embed.vertex_weight", vertex_weight);
        out.emplace_back("embed.vertex_bias", vertex_bias);
        out.emplace_back("embed.edge_weight", edge_weight);
        out.emplace_back("embed.edge_bias", edge_bias);
    }
};

} // namespace gig
