#pragma once

// The GIG network: per-GIG-vertex local updating (GVU), cross-GIG-vertex
// global updating through proxies (GGU), the hidden layer (GVU then GGU),
// the output layer (GVU then GGU plus the final edge/vertex sweep), network
// assembly and readout heads.
//
// A GigState is the per-forward copy of all feature tensors. Wiring (the
// index structure) lives in the GIGSample/AdjacencyIndex and never changes
// during a forward pass; only feature values are replaced.

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gig/graph.hpp"
#include "gig/rng.hpp"
#include "gig/tensor.hpp"
#include "gig/updaters.hpp"

namespace gig {

enum class Readout { graph_class, graph_reg, vertex_class, edge_class };

inline std::string to_string(Readout r) {
    switch (r) {
        case Readout::graph_class: return "graph_class";
        case Readout::graph_reg: return "graph_reg";
        case Readout::vertex_class: return "vertex_class";
        case Readout::edge_class: return "edge_class";
    }
    return "?";
}

inline Readout readout_from_string(const std::string& s) {
    if (s == "graph_class") return Readout::graph_class;
    if (s == "graph_reg") return Readout::graph_reg;
    if (s == "vertex_class") return Readout::vertex_class;
    if (s == "edge_class") return Readout::edge_class;
    throw std::invalid_argument("unknown readout kind '" + s + "'");
}

struct NetworkConfig {
    std::size_t num_hidden_layers = 2;
    std::size_t hidden_dim = 16;
    UpdaterKind updater = UpdaterKind::gatedgcn;
    bool disable_ggu = false;  // ablation: local updating only
    bool disable_gvu = false;  // ablation: global updating only
    bool ggu_first = false;    // swap module order inside hidden layers
    Readout readout = Readout::graph_class;
    // Shape-determining fields; saved with every checkpoint.
    std::size_t num_classes = 2;
    std::size_t vertex_feat_dim = 1;
    std::size_t edge_feat_dim = 0;

    std::size_t head_width() const { return readout == Readout::graph_reg ? 1 : num_classes; }
    std::size_t head_input_dim() const {
        return readout == Readout::edge_class ? 3 * hidden_dim : hidden_dim;
    }
};

// Per-forward feature tensors over a fixed wiring.
struct GigState {
    const GIGSample* sample = nullptr;
    const AdjacencyIndex* adj = nullptr;
    std::vector<Tensor> vertices;     // per GIG vertex, [N_i x d]
    std::vector<Tensor> graph_edges;  // per GIG vertex, [E_i x d]
    std::vector<Tensor> proxy_in;     // per GIG vertex, [m_i x d]
    std::vector<Tensor> proxy_out;    // per GIG vertex, [m_i x d]
    Tensor local_proxies;             // [I x d]
    Tensor global_proxies;            // [I x d]
    Tensor gig_edges;                 // [|E_G| x d]

    std::size_t size() const { return vertices.size(); }
};

namespace detail {

inline Tensor const_matrix(const std::vector<std::vector<double>>& rows, std::size_t width) {
    std::vector<double> flat;
    flat.reserve(rows.size() * width);
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return Tensor({rows.size(), width}, std::move(flat));
}

inline std::vector<std::size_t> iota_index(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

} // namespace detail

// Embeds the raw GIG sample features to hidden width d. Proxies embed with
// the vertex map, all edge kinds with the edge map.
inline GigState make_state(const GIGSample& sample, const AdjacencyIndex& adj, const Embedding& embed) {
    GigState st;
    st.sample = &sample;
    st.adj = &adj;
    const std::size_t I = sample.size();
    const std::size_t dv = sample.gig_vertices.empty() ? 0 : sample.gig_vertices[0].vertex_dim();
    std::size_t de = 0;
    for (const Graph& g : sample.gig_vertices)
        if (g.edge_count() > 0) {
            de = g.edge_dim();
            break;
        }
    st.vertices.reserve(I);
    st.graph_edges.reserve(I);
    st.proxy_in.reserve(I);
    st.proxy_out.reserve(I);
    for (std::size_t i = 0; i < I; ++i) {
        const Graph& g = sample.gig_vertices[i];
        st.vertices.push_back(embed.embed_vertices(detail::const_matrix(g.vertex_features, dv)));
        if (g.edge_features.empty()) {
            st.graph_edges.push_back(embed.embed_edges(Tensor({g.edge_count(), de})));
        } else {
            st.graph_edges.push_back(embed.embed_edges(detail::const_matrix(g.edge_features, de)));
        }
        std::vector<std::vector<double>> pin, pout;
        for (const ProxyEdge& pe : sample.proxy_edges_in[i]) pin.push_back(pe.feature);
        for (const ProxyEdge& pe : sample.proxy_edges_out[i]) pout.push_back(pe.feature);
        st.proxy_in.push_back(embed.embed_edges(detail::const_matrix(pin, de)));
        st.proxy_out.push_back(embed.embed_edges(detail::const_matrix(pout, de)));
    }
    st.local_proxies = embed.embed_vertices(detail::const_matrix(sample.local_proxies, dv));
    st.global_proxies = embed.embed_vertices(detail::const_matrix(sample.global_proxies, dv));
    std::vector<std::vector<double>> gig_feats;
    for (const GigEdge& ge : sample.gig_edges) gig_feats.push_back(ge.feature);
    st.gig_edges = embed.embed_edges(detail::const_matrix(gig_feats, de));
    return st;
}

// Local updating, per GIG vertex: (a) graph edges from pre-update endpoint
// values, (b) graph vertices from updated edges and pre-update neighbour
// values, (c) inbound proxy edges from updated vertices and the current
// local proxy, (d) the local proxy from its inbound messages. Global
// proxies, outbound proxy edges and GIG edges are untouched.
inline void gvu_forward(GigState& st, const Updater& u) {
    const AdjacencyIndex& adj = *st.adj;
    const std::size_t I = st.size();
    std::vector<Tensor> new_local;
    new_local.reserve(I);
    for (std::size_t i = 0; i < I; ++i) {
        const std::size_t n = st.vertices[i].rows();
        Tensor v_src = gather_rows(st.vertices[i], adj.edge_src[i]);
        Tensor v_dst = gather_rows(st.vertices[i], adj.edge_dst[i]);
        Tensor edges_hat = edge_update_batch(u, st.graph_edges[i], v_src, v_dst);
        Tensor vertices_hat =
            vertex_update_batch(u, st.vertices[i], edges_hat, v_src, adj.edge_dst[i], n);
        const auto& pin_vertex = adj.proxy_in_vertex[i];
        Tensor local = gather_rows(st.local_proxies, {i});
        Tensor pin_src = gather_rows(vertices_hat, pin_vertex);
        Tensor pin_dst = broadcast_rows(local, pin_vertex.size());
        Tensor pin_hat = edge_update_batch(u, st.proxy_in[i], pin_src, pin_dst);
        Tensor local_hat = vertex_update_batch(u, local, pin_hat, pin_src,
                                               std::vector<std::size_t>(pin_vertex.size(), 0), 1);
        st.graph_edges[i] = edges_hat;
        st.vertices[i] = vertices_hat;
        st.proxy_in[i] = pin_hat;
        new_local.push_back(local_hat);
    }
    st.local_proxies = concat_rows(new_local);
}

// Global updating: (a) GIG edges from (updated local proxy of the source,
// carried global proxy of the target), (b) global proxies from incoming GIG
// messages, (c) outbound proxy edges from the updated global proxy and the
// locally updated vertex, (d) exactly the vertices wired to their global
// proxy, each from its single proxy message. Graph edges and the remaining
// vertices are untouched.
inline void ggu_forward(GigState& st, const Updater& u) {
    const AdjacencyIndex& adj = *st.adj;
    const std::size_t I = st.size();
    Tensor gig_src = gather_rows(st.local_proxies, adj.gig_src);
    Tensor gig_dst = gather_rows(st.global_proxies, adj.gig_dst);
    Tensor gig_bar = edge_update_batch(u, st.gig_edges, gig_src, gig_dst);
    Tensor global_bar = vertex_update_batch(u, st.global_proxies, gig_bar, gig_src, adj.gig_dst, I);
    st.gig_edges = gig_bar;
    st.global_proxies = global_bar;
    for (std::size_t i = 0; i < I; ++i) {
        const auto& pout_vertex = adj.proxy_out_vertex[i];
        const std::size_t m = pout_vertex.size();
        Tensor global = gather_rows(st.global_proxies, {i});
        Tensor pout_src = broadcast_rows(global, m);
        Tensor pout_dst = gather_rows(st.vertices[i], pout_vertex);
        Tensor pout_bar = edge_update_batch(u, st.proxy_out[i], pout_src, pout_dst);
        Tensor touched = vertex_update_batch(u, pout_dst, pout_bar, pout_src,
                                             detail::iota_index(m), m);
        st.vertices[i] = row_replace(st.vertices[i], pout_vertex, touched);
        st.proxy_out[i] = pout_bar;
    }
}

// One hidden layer: GVU then GGU, order swapped by ggu_first, modules
// skipped by the disable flags.
inline void hidden_layer_forward(GigState& st, const Updater& gvu, const Updater& ggu,
                                 const NetworkConfig& cfg) {
    if (cfg.ggu_first) {
        if (!cfg.disable_ggu) ggu_forward(st, ggu);
        if (!cfg.disable_gvu) gvu_forward(st, gvu);
    } else {
        if (!cfg.disable_gvu) gvu_forward(st, gvu);
        if (!cfg.disable_ggu) ggu_forward(st, ggu);
    }
}

// Output layer: GVU, then the extended GGU, which after the usual four
// steps re-updates every graph edge from its latest endpoint values and
// then updates the vertices not wired to a global proxy under the plain
// local rule, so every vertex and edge ends both locally and globally
// updated. Vertices already updated through their proxy keep their values.
inline void output_layer_forward(GigState& st, const Updater& gvu, const Updater& ggu,
                                 const NetworkConfig& cfg) {
    if (!cfg.disable_gvu) gvu_forward(st, gvu);
    if (cfg.disable_ggu) return;
    ggu_forward(st, ggu);
    const AdjacencyIndex& adj = *st.adj;
    for (std::size_t i = 0; i < st.size(); ++i) {
        const std::size_t n = st.vertices[i].rows();
        Tensor v_src = gather_rows(st.vertices[i], adj.edge_src[i]);
        Tensor v_dst = gather_rows(st.vertices[i], adj.edge_dst[i]);
        Tensor edges_final = edge_update_batch(gvu, st.graph_edges[i], v_src, v_dst);
        Tensor all_updated =
            vertex_update_batch(gvu, st.vertices[i], edges_final, v_src, adj.edge_dst[i], n);
        const auto& connected = adj.proxy_out_vertex[i];
        Tensor kept = gather_rows(st.vertices[i], connected);
        st.vertices[i] = row_replace(all_updated, connected, kept);
        st.graph_edges[i] = edges_final;
    }
}

struct LayerParams {
    Updater gvu;
    Updater ggu;
};

// Full parameter set: embedding, per-layer updater pairs, readout head.
class GigNetwork {
public:
    GigNetwork() = default;

    GigNetwork(NetworkConfig cfg, std::uint64_t seed) : cfg_(cfg) {
        SplitMix64 rng(seed);
        embed_ = Embedding::create(cfg.vertex_feat_dim, cfg.edge_feat_dim, cfg.hidden_dim, rng);
        hidden_.reserve(cfg.num_hidden_layers);
        for (std::size_t l = 0; l < cfg.num_hidden_layers; ++l) {
            LayerParams lp;
            lp.gvu = Updater::create(cfg.updater, cfg.hidden_dim, rng);
            lp.ggu = Updater::create(cfg.updater, cfg.hidden_dim, rng);
            hidden_.push_back(std::move(lp));
        }
        output_.gvu = Updater::create(cfg.updater, cfg.hidden_dim, rng);
        output_.ggu = Updater::create(cfg.updater, cfg.hidden_dim, rng);
        head_weight_ = detail::glorot(cfg.head_input_dim(), cfg.head_width(), rng);
        head_bias_ = Tensor({cfg.head_width()}, 0.0, true);
    }

    const NetworkConfig& config() const { return cfg_; }
    const Embedding& embedding() const { return embed_; }
    const std::vector<LayerParams>& hidden_layers() const { return hidden_; }
    const LayerParams& output_layer() const { return output_; }

    // Runs the full network on a pre-generated GIG sample. Returns, by
    // readout kind:
    //   graph_class / graph_reg: [I x width], one row per GIG vertex
    //                            (mean-pooled vertices through a linear map)
    //   vertex_class:            [sum N_i x classes]
    //   edge_class:              [sum E_i x classes] on concat(src, dst, edge)
    Tensor forward(const GIGSample& sample, const AdjacencyIndex& adj) const {
        GigState st = make_state(sample, adj, embed_);
        for (const LayerParams& lp : hidden_) hidden_layer_forward(st, lp.gvu, lp.ggu, cfg_);
        output_layer_forward(st, output_.gvu, output_.ggu, cfg_);
        return readout(st);
    }

    // Clip-level prediction: one logit row for the whole GIG sample, read
    // from the mean of the final global proxies. The global proxies are
    // where cross-GIG-vertex context accumulates, so this is the sample
    // summary the architecture itself maintains; a variant without global
    // updating has nothing to read there and cannot separate clips.
    Tensor forward_clip(const GIGSample& sample, const AdjacencyIndex& adj) const {
        GigState st = make_state(sample, adj, embed_);
        for (const LayerParams& lp : hidden_) hidden_layer_forward(st, lp.gvu, lp.ggu, cfg_);
        output_layer_forward(st, output_.gvu, output_.ggu, cfg_);
        return apply_head(reshape(mean_axis(st.global_proxies, 0), {1, cfg_.hidden_dim}));
    }

    Tensor readout(const GigState& st) const {
        const AdjacencyIndex& adj = *st.adj;
        switch (cfg_.readout) {
            case Readout::graph_class:
            case Readout::graph_reg: {
                std::vector<Tensor> pooled;
                pooled.reserve(st.size());
                for (std::size_t i = 0; i < st.size(); ++i)
                    pooled.push_back(reshape(mean_axis(st.vertices[i], 0), {1, cfg_.hidden_dim}));
                return apply_head(concat_rows(pooled));
            }
            case Readout::vertex_class:
                return apply_head(concat_rows(st.vertices));
            case Readout::edge_class: {
                std::vector<Tensor> parts;
                parts.reserve(st.size());
                for (std::size_t i = 0; i < st.size(); ++i) {
                    if (st.graph_edges[i].rows() == 0) continue;
                    Tensor v_src = gather_rows(st.vertices[i], adj.edge_src[i]);
                    Tensor v_dst = gather_rows(st.vertices[i], adj.edge_dst[i]);
                    parts.push_back(concat_cols({v_src, v_dst, st.graph_edges[i]}));
                }
                if (parts.empty()) return Tensor({0, cfg_.head_width()});
                return apply_head(concat_rows(parts));
            }
        }
        throw std::logic_error("readout: unhandled kind");
    }

    // Sorted by name, so checkpoint layout and optimiser state order are
    // reproducible.
    std::vector<std::pair<std::string, Tensor>> named_params() const {
        std::vector<std::pair<std::string, Tensor>> out;
        embed_.collect_params(out);
        for (std::size_t l = 0; l < hidden_.size(); ++l) {
            const std::string p = "hidden" + std::to_string(l);
            hidden_[l].gvu.collect_params(p + ".gvu", out);
            hidden_[l].ggu.collect_params(p + ".ggu", out);
        }
        output_.gvu.collect_params("output.gvu", out);
        output_.ggu.collect_params("output.ggu", out);
        out.emplace_back("head.weight", head_weight_);
        out.emplace_back("head.bias", head_bias_);
        std::sort(out.begin(), out.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        return out;
    }

private:
    Tensor apply_head(const Tensor& features) const {
        return add(matmul(features, head_weight_), broadcast_rows(head_bias_, features.rows()));
    }

    NetworkConfig cfg_;
    Embedding embed_;
    std::vector<LayerParams> hidden_;
    LayerParams output_;
    Tensor head_weight_, head_bias_;
};

} // namespace gig
