#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "gig/gsg.hpp"
#include "gig/rng.hpp"

using namespace gig;

namespace {

Graph graph_of(std::vector<std::vector<double>> features) {
    Graph g;
    g.vertex_features = std::move(features);
    for (std::size_t v = 0; v + 1 < g.vertex_count(); ++v) {
        g.edges.emplace_back(v, v + 1);
        g.edges.emplace_back(v + 1, v);
    }
    return g;
}

std::vector<Graph> random_batch(std::size_t count, SplitMix64& rng, std::size_t max_n = 15,
                                std::size_t dv = 4) {
    std::vector<Graph> batch(count);
    for (Graph& g : batch) {
        const std::size_t n = 1 + rng.below(max_n);
        g.vertex_features.resize(n);
        for (auto& f : g.vertex_features) {
            f.resize(dv);
            for (auto& x : f) x = rng.uniform(-2, 2);
        }
        for (std::size_t v = 0; v + 1 < n; ++v) {
            g.edges.emplace_back(v, v + 1);
            g.edges.emplace_back(v + 1, v);
        }
    }
    return batch;
}

} // namespace

TEST_CASE("init_local_proxy modes") {
    Graph g = graph_of({{1, 2}, {3, 4}});
    CHECK(init_local_proxy(g, ProxyInit::mean, 0) == std::vector<double>{2, 3});

    Graph single = graph_of({{5, 6}});
    for (ProxyInit mode : {ProxyInit::mean, ProxyInit::random_vertex, ProxyInit::max_l2, ProxyInit::min_l2})
        CHECK(init_local_proxy(single, mode, 3) == std::vector<double>{5, 6});

    Graph two = graph_of({{3, 4}, {1, 1}});
    CHECK(init_local_proxy(two, ProxyInit::max_l2, 0) == std::vector<double>{3, 4});
    CHECK(init_local_proxy(two, ProxyInit::min_l2, 0) == std::vector<double>{1, 1});

    CHECK_THROWS_AS(init_local_proxy(Graph{}, ProxyInit::mean, 0), std::invalid_argument);

    // random_vertex is seed-deterministic
    Graph many = graph_of({{1, 0}, {2, 0}, {3, 0}, {4, 0}});
    CHECK(init_local_proxy(many, ProxyInit::random_vertex, 9) ==
          init_local_proxy(many, ProxyInit::random_vertex, 9));
}

TEST_CASE("proxy edge count follows ceil(rho * N) with a floor of one") {
    GsgConfig cfg;
    Graph g;
    g.vertex_features.assign(23, {1.0, 0.0});
    g.vertex_features[5] = {0.0, 1.0};
    auto [inbound, outbound] = build_proxy_edges(g, init_local_proxy(g, ProxyInit::mean, 0), cfg);
    CHECK(inbound.size() == 3);  // ceil(2.3)
    CHECK(outbound.size() == 3);

    Graph one = graph_of({{1, 1}});
    auto [in1, out1] = build_proxy_edges(one, {1, 1}, cfg);
    REQUIRE(in1.size() == 1);
    REQUIRE(out1.size() == 1);
    CHECK(in1[0].vertex == 0);
    CHECK(out1[0].vertex == 0);
}

TEST_CASE("proxy edges pick least similar inbound and most similar outbound") {
    GsgConfig cfg;
    cfg.rho_proxy = 0.34;  // ceil(1.02) = 2 per direction on three vertices
    Graph g = graph_of({{1, 0}, {0, 1}, {-1, 0}});
    auto [inbound, outbound] = build_proxy_edges(g, {1, 0}, cfg);
    REQUIRE(inbound.size() == 2);
    REQUIRE(outbound.size() == 2);
    CHECK(inbound[0].vertex == 2);   // cosine -1, least similar first
    CHECK(inbound[1].vertex == 1);   // cosine 0
    CHECK(outbound[0].vertex == 0);  // cosine 1, most similar first
    CHECK(outbound[1].vertex == 1);
    for (const ProxyEdge& e : inbound) CHECK(e.feature.empty());  // zero-width edge features
}

TEST_CASE("gig edges: three vertices and k_gig 8 give the complete directed graph") {
    GsgConfig cfg;
    std::vector<std::vector<double>> proxies{{1, 0}, {0, 1}, {1, 1}};
    auto edges = build_gig_edges(proxies, cfg, 0);
    CHECK(edges.size() == 6);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const GigEdge& e : edges) {
        CHECK(e.src != e.dst);
        seen.insert({e.src, e.dst});
    }
    CHECK(seen.size() == 6);
}

TEST_CASE("gig edges: a single vertex yields none") {
    GsgConfig cfg;
    CHECK(build_gig_edges({{1, 2}}, cfg, 0).empty());
}

TEST_CASE("gig edges select nearest and farthest halves") {
    GsgConfig cfg;
    cfg.k_gig = 4;
    cfg.similar_fraction = 0.5;
    SplitMix64 rng(31);
    std::vector<std::vector<double>> proxies(5, std::vector<double>(3));
    for (auto& p : proxies)
        for (auto& x : p) x = rng.uniform(-1, 1);
    auto edges = build_gig_edges(proxies, cfg, 0);

    // brute-force similarity matrix oracle
    for (std::size_t i = 0; i < proxies.size(); ++i) {
        std::vector<std::pair<double, std::size_t>> sims;
        for (std::size_t j = 0; j < proxies.size(); ++j)
            if (j != i) sims.push_back({similarity(proxies[i], proxies[j], Metric::cosine), j});
        std::sort(sims.begin(), sims.end());
        std::set<std::size_t> expected{sims[0].second, sims[1].second, sims[2].second, sims[3].second};
        // k = 4 of 4 candidates: the selection is everything, so each ordered
        // pair touching i must exist
        for (std::size_t j : expected) {
            CHECK(std::count_if(edges.begin(), edges.end(), [&](const GigEdge& e) {
                      return e.src == i && e.dst == j;
                  }) == 1);
        }
    }

    // with more candidates than k, the 2 nearest and 2 farthest are selected
    std::vector<std::vector<double>> seven(7, std::vector<double>(3));
    for (auto& p : seven)
        for (auto& x : p) x = rng.uniform(-1, 1);
    auto edges7 = build_gig_edges(seven, cfg, 0);
    for (std::size_t i = 0; i < seven.size(); ++i) {
        std::vector<std::pair<double, std::size_t>> sims;
        for (std::size_t j = 0; j < seven.size(); ++j)
            if (j != i) sims.push_back({similarity(seven[i], seven[j], Metric::cosine), j});
        std::sort(sims.begin(), sims.end());
        const std::set<std::size_t> expected{sims[0].second, sims[1].second,
                                             sims[sims.size() - 1].second, sims[sims.size() - 2].second};
        for (std::size_t j : expected)
            CHECK(std::count_if(edges7.begin(), edges7.end(), [&](const GigEdge& e) {
                      return e.src == i && e.dst == j;
                  }) == 1);
    }
}

TEST_CASE("generate_gig_sample on identical single-vertex graphs") {
    GsgConfig cfg;
    std::vector<Graph> batch(3, graph_of({{2, 5}}));
    GIGSample sample = generate_gig_sample(batch, cfg, 1);
    CHECK(sample.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(sample.local_proxies[i] == std::vector<double>{2, 5});
        CHECK(sample.global_proxies[i] == std::vector<double>{0, 0});
    }
    CHECK(sample.gig_edges.size() == 6);
    CHECK_THROWS_AS(generate_gig_sample({}, cfg, 1), std::invalid_argument);
}

TEST_CASE("gsg invariants over random batches") {
    GsgConfig cfg;
    SplitMix64 rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t I = 2 + rng.below(8);
        auto batch = random_batch(I, rng);
        GIGSample sample = generate_gig_sample(batch, cfg, rng.next());

        std::set<std::pair<std::size_t, std::size_t>> pairs;
        for (const GigEdge& e : sample.gig_edges) {
            CHECK(e.src != e.dst);
            pairs.insert({e.src, e.dst});
            for (double x : e.feature) CHECK(x == 0.0);
        }
        for (const auto& [s, d] : pairs) CHECK(pairs.count({d, s}) == 1);

        std::vector<std::size_t> indegree(I, 0);
        for (const GigEdge& e : sample.gig_edges) ++indegree[e.dst];
        for (std::size_t deg : indegree) CHECK(deg <= std::min<std::size_t>(cfg.k_gig, I - 1) * 2);

        for (std::size_t i = 0; i < I; ++i) {
            const std::size_t n = batch[i].vertex_count();
            const auto expected =
                std::min<std::size_t>(n, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(
                                                                      cfg.rho_proxy * double(n)))));
            CHECK(sample.proxy_edges_in[i].size() == expected);
            CHECK(sample.proxy_edges_out[i].size() == expected);
            // mean proxies match a direct recount
            std::vector<double> mean(batch[i].vertex_dim(), 0.0);
            for (const auto& f : batch[i].vertex_features)
                for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += f[j];
            for (std::size_t j = 0; j < mean.size(); ++j) {
                mean[j] /= double(n);
                CHECK(std::abs(sample.local_proxies[i][j] - mean[j]) <= 1e-12);
            }
            for (double x : sample.global_proxies[i]) CHECK(x == 0.0);
        }
    }
}

TEST_CASE("generate_gig_sample is deterministic and permutation-equivariant") {
    GsgConfig cfg;
    SplitMix64 rng(5);
    auto batch = random_batch(6, rng, 10);
    GIGSample a = generate_gig_sample(batch, cfg, 99);
    GIGSample b = generate_gig_sample(batch, cfg, 99);
    CHECK(a.local_proxies == b.local_proxies);
    CHECK(a.gig_edges.size() == b.gig_edges.size());

    // reversal permutation; random features make ties impossible in practice
    std::vector<Graph> reversed(batch.rbegin(), batch.rend());
    GIGSample r = generate_gig_sample(reversed, cfg, 99);
    const std::size_t I = batch.size();
    auto perm = [&](std::size_t i) { return I - 1 - i; };
    for (std::size_t i = 0; i < I; ++i) {
        CHECK(r.local_proxies[perm(i)] == a.local_proxies[i]);
        REQUIRE(r.proxy_edges_in[perm(i)].size() == a.proxy_edges_in[i].size());
        for (std::size_t e = 0; e < a.proxy_edges_in[i].size(); ++e)
            CHECK(r.proxy_edges_in[perm(i)][e].vertex == a.proxy_edges_in[i][e].vertex);
        for (std::size_t e = 0; e < a.proxy_edges_out[i].size(); ++e)
            CHECK(r.proxy_edges_out[perm(i)][e].vertex == a.proxy_edges_out[i][e].vertex);
    }
    std::set<std::pair<std::size_t, std::size_t>> orig, mapped;
    for (const GigEdge& e : a.gig_edges) orig.insert({perm(e.src), perm(e.dst)});
    for (const GigEdge& e : r.gig_edges) mapped.insert({e.src, e.dst});
    CHECK(orig == mapped);
}

TEST_CASE("complexity estimate") {
    CHECK(estimate_gsg_complexity(4, 5, 8) == 288);
    CHECK(estimate_gsg_complexity(1, 1, 1) == 2);
    // quadratic term: doubling I more than doubles the estimate
    SplitMix64 rng(13);
    for (int t = 0; t < 50; ++t) {
        const std::uint64_t I = 1 + rng.below(40), n = 1 + rng.below(30), d = 1 + rng.below(60);
        CHECK(estimate_gsg_complexity(I, n, d) == I * n * d + I * I * d);
        CHECK(estimate_gsg_complexity(2 * I, n, d) > 2 * estimate_gsg_complexity(I, n, d));
    }
    CHECK_THROWS_AS(estimate_gsg_complexity(0, 1, 1), std::invalid_argument);
}

TEST_CASE("gsg config bounds are enforced") {
    GsgConfig cfg;
    cfg.rho_proxy = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.rho_proxy = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.rho_proxy = 0.1;
    cfg.k_gig = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.k_gig = 8;
    cfg.similar_fraction = 1.2;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.similar_fraction = 0.5;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("alternative similarity metrics drive the wiring consistently") {
    SplitMix64 rng(41);
    auto batch = random_batch(5, rng, 8, 4);
    for (Metric metric : {Metric::l1, Metric::l2}) {
        GsgConfig cfg;
        cfg.metric = metric;
        GIGSample sample = generate_gig_sample(batch, cfg, 2);
        // inbound picks the vertex at the largest distance from the proxy
        for (std::size_t i = 0; i < sample.size(); ++i) {
            const Graph& g = batch[i];
            REQUIRE(!sample.proxy_edges_in[i].empty());
            const std::size_t chosen = sample.proxy_edges_in[i][0].vertex;
            for (std::size_t v = 0; v < g.vertex_count(); ++v)
                CHECK(similarity(g.vertex_features[chosen], sample.local_proxies[i], metric) <=
                      similarity(g.vertex_features[v], sample.local_proxies[i], metric) + 1e-12);
        }
        std::set<std::pair<std::size_t, std::size_t>> pairs;
        for (const GigEdge& e : sample.gig_edges) pairs.insert({e.src, e.dst});
        for (const auto& [s, d] : pairs) CHECK(pairs.count({d, s}) == 1);
    }
}
