// Command-line surface of the GIG engine: dataset generation, training,
// evaluation, gradient self-check, construction inspection and benchmarks.
// Metrics and reports print as JSON on standard output.

#include <array>
#include <chrono>
#include <cstdint>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gig/bench.hpp"
#include "gig/datasets.hpp"
#include "gig/io.hpp"
#include "gig/layers.hpp"
#include "gig/selfcheck.hpp"
#include "gig/training.hpp"

namespace {

using gig::json;

gig::Readout readout_for_task(gig::TaskType task) {
    switch (task) {
        case gig::TaskType::graph_class: return gig::Readout::graph_class;
        case gig::TaskType::graph_reg: return gig::Readout::graph_reg;
        case gig::TaskType::vertex_class: return gig::Readout::vertex_class;
        case gig::TaskType::edge_class: return gig::Readout::edge_class;
        case gig::TaskType::clip_class: return gig::Readout::graph_class;
    }
    throw std::logic_error("unhandled task type");
}

json history_to_json(const gig::FitResult& result) {
    json rows = json::array();
    for (const gig::EpochStats& es : result.history) {
        json row;
        row["epoch"] = es.epoch;
        row["lr"] = es.lr;
        row["train_loss"] = es.train_loss;
        row["train_metric"] = es.train_metric;
        row["val_loss"] = es.val_loss;
        row["val_metric"] = es.val_metric;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::array<std::size_t, 3>> parse_sizes(const std::string& text) {
    std::vector<std::array<std::size_t, 3>> sizes;
    std::stringstream groups(text);
    std::string group;
    while (std::getline(groups, group, ';')) {
        if (group.empty()) continue;
        std::array<std::size_t, 3> triple{};
        std::stringstream fields(group);
        std::string field;
        std::size_t k = 0;
        while (std::getline(fields, field, ',')) {
            if (k >= 3) break;
            triple[k++] = static_cast<std::size_t>(std::stoull(field));
        }
        if (k != 3)
            throw std::invalid_argument("--sizes: expected I,N,d triples separated by ';', got '" +
                                        group + "'");
        sizes.push_back(triple);
    }
    if (sizes.empty()) throw std::invalid_argument("--sizes: no sizes given");
    return sizes;
}

int cmd_gen(const std::string& task, const std::string& out_dir, std::size_t n, std::uint64_t seed,
            std::size_t graphs_per_sample, std::size_t frames) {
    gig::Dataset ds;
    if (task == "batch-median") ds = gig::gen_batch_median_task(n, graphs_per_sample, seed);
    else if (task == "clip-direction") ds = gig::gen_clip_direction_task(n, frames, seed);
    else if (task == "sum-reg") ds = gig::gen_sum_regression_task(n, seed);
    else throw std::invalid_argument("unknown task '" + task + "'");
    gig::save_dataset(out_dir, ds);
    json report;
    report["task"] = gig::to_string(ds.meta.task_type);
    report["out"] = out_dir;
    report["counts"] = ds.meta.counts;
    std::cout << report.dump() << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir, const std::string& out_path,
              bool seed_given, std::uint64_t seed) {
    gig::TrainConfig cfg = gig::load_train_config(config_path);
    if (seed_given) cfg.seed = seed;
    const gig::Dataset ds = gig::load_dataset(data_dir);
    const gig::Readout derived = readout_for_task(ds.meta.task_type);
    if (cfg.network.readout != derived && cfg.network.readout != gig::Readout::graph_class)
        throw std::invalid_argument("config readout '" + gig::to_string(cfg.network.readout) +
                                    "' does not fit a " + gig::to_string(ds.meta.task_type) + " dataset");
    cfg.network.readout = derived;
    cfg.network.num_classes = ds.meta.num_classes;
    cfg.network.vertex_feat_dim = ds.meta.vertex_feat_dim;
    cfg.network.edge_feat_dim = ds.meta.edge_feat_dim;

    gig::GigNetwork net(cfg.network, cfg.seed);
    const gig::FitResult result = gig::fit(net, ds, cfg);
    gig::save_checkpoint(out_path, net, cfg);

    json report;
    report["task"] = gig::to_string(ds.meta.task_type);
    report["seed"] = cfg.seed;
    report["epochs"] = cfg.epochs;
    report["history"] = history_to_json(result);
    if (!result.history.empty()) {
        const auto& last = result.history.back();
        report["final"] = {{"train_loss", last.train_loss},
                           {"train_metric", last.train_metric},
                           {"val_loss", last.val_loss},
                           {"val_metric", last.val_metric}};
    }
    report["checkpoint"] = out_path;
    std::cout << report.dump() << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& split) {
    auto [net, cfg] = gig::load_checkpoint(ckpt_path);
    const gig::Dataset ds = gig::load_dataset(data_dir);
    if (ds.meta.vertex_feat_dim != cfg.network.vertex_feat_dim ||
        ds.meta.edge_feat_dim != cfg.network.edge_feat_dim ||
        ds.meta.num_classes != cfg.network.num_classes)
        throw std::invalid_argument(
            "checkpoint was trained for vertex/edge/class dims " +
            std::to_string(cfg.network.vertex_feat_dim) + "/" + std::to_string(cfg.network.edge_feat_dim) +
            "/" + std::to_string(cfg.network.num_classes) + " but the dataset declares " +
            std::to_string(ds.meta.vertex_feat_dim) + "/" + std::to_string(ds.meta.edge_feat_dim) + "/" +
            std::to_string(ds.meta.num_classes));
    const auto samples = gig::prepare_split(ds, split, cfg.gsg, cfg.samples_per_gig,
                                            gig::gsg_seed_for_split(cfg.seed, split));
    const gig::SplitStats stats = gig::evaluate(net, samples, ds.meta.task_type, cfg.loss);
    json report;
    report["split"] = split;
    report["samples"] = stats.samples;
    report["loss"] = stats.loss;
    report["metric"] = stats.metric;
    std::cout << report.dump() << "\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, double tol) {
    const auto start = std::chrono::steady_clock::now();
    const gig::GradCheckReport report = gig::run_network_grad_check(seed, tol);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json out;
    out["seed"] = seed;
    out["tolerance"] = tol;
    out["passed"] = report.passed;
    out["max_rel_err"] = report.max_rel_err;
    out["seconds"] = seconds;
    json tensors = json::array();
    for (const gig::GradCheckEntry& e : report.tensors) {
        tensors.push_back({{"name", e.name},
                           {"elements", e.checked},
                           {"max_rel_err", e.max_rel_err},
                           {"passed", e.passed}});
    }
    out["tensors"] = std::move(tensors);
    std::cout << out.dump(2) << "\n";
    return report.passed ? 0 : 1;
}

int cmd_inspect_gsg(const std::string& data_dir, const std::string& config_path) {
    const gig::TrainConfig cfg = gig::load_train_config(config_path);
    const gig::Dataset ds = gig::load_dataset(data_dir);
    const auto samples = gig::prepare_split(ds, "train", cfg.gsg, cfg.samples_per_gig,
                                            gig::gsg_seed_for_split(cfg.seed, "train"));
    json rows = json::array();
    std::uint64_t total_estimate = 0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const gig::GIGSample& sample = samples[s].sample;
        json row;
        row["sample"] = s;
        row["gig_vertices"] = sample.size();
        json proxy_counts = json::array();
        std::size_t max_vertices = 0;
        for (std::size_t i = 0; i < sample.size(); ++i) {
            proxy_counts.push_back(sample.proxy_edges_in[i].size());
            max_vertices = std::max(max_vertices, sample.gig_vertices[i].vertex_count());
        }
        row["proxy_edges_per_direction"] = std::move(proxy_counts);
        std::map<std::size_t, std::size_t> degree_hist;
        {
            std::vector<std::size_t> indeg(sample.size(), 0);
            for (const gig::GigEdge& e : sample.gig_edges) ++indeg[e.dst];
            for (std::size_t d : indeg) ++degree_hist[d];
        }
        json hist;
        for (const auto& [deg, count] : degree_hist) hist[std::to_string(deg)] = count;
        row["gig_degree_histogram"] = std::move(hist);
        const std::uint64_t estimate = gig::estimate_gsg_complexity(
            sample.size(), max_vertices, ds.meta.vertex_feat_dim);
        row["complexity_estimate"] = estimate;
        total_estimate += estimate;
        rows.push_back(std::move(row));
    }
    json report;
    report["samples"] = std::move(rows);
    report["total_complexity_estimate"] = total_estimate;
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_bench(const std::string& config_path, const std::string& sizes_spec) {
    gig::TrainConfig cfg = gig::load_train_config(config_path);
    const auto sizes = parse_sizes(sizes_spec);
    const auto rows = gig::run_bench(cfg, sizes);
    json out = json::array();
    for (const gig::BenchRow& r : rows) {
        out.push_back({{"gig_vertices", r.gig_vertices},
                       {"graph_vertices", r.graph_vertices},
                       {"dim", r.dim},
                       {"gsg_seconds", r.gsg_seconds},
                       {"forward_seconds", r.forward_seconds},
                       {"forward_backward_seconds", r.forward_backward_seconds},
                       {"gsg_estimate", r.estimate}});
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-in-graph network engine"};
    app.require_subcommand(1);

    std::string task, out_dir;
    std::size_t gen_n = 100, graphs_per_sample = 9, frames = 8;
    std::uint64_t gen_seed = 1;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
    gen->add_option("--task", task, "batch-median | clip-direction | sum-reg")
        ->required()
        ->check(CLI::IsMember({"batch-median", "clip-direction", "sum-reg"}));
    gen->add_option("--out", out_dir, "Output directory")->required();
    gen->add_option("--n", gen_n, "Training samples (val/test get half each)")->required();
    gen->add_option("--seed", gen_seed, "Generator seed")->required();
    gen->add_option("--graphs-per-sample", graphs_per_sample, "Graphs per sample (batch-median)");
    gen->add_option("--frames", frames, "Frames per clip (clip-direction)");

    std::string config_path, data_dir, ckpt_out;
    std::uint64_t train_seed = 0;
    auto* train = app.add_subcommand("train", "Train a network");
    train->add_option("--config", config_path, "Config JSON")->required();
    train->add_option("--data", data_dir, "Dataset directory")->required();
    train->add_option("--out", ckpt_out, "Checkpoint output path")->required();
    auto* train_seed_opt = train->add_option("--seed", train_seed, "Overrides the config seed");

    std::string eval_ckpt, eval_data, eval_split = "test";
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("--ckpt", eval_ckpt, "Checkpoint path")->required();
    eval->add_option("--data", eval_data, "Dataset directory")->required();
    eval->add_option("--split", eval_split, "train | val | test")
        ->required()
        ->check(CLI::IsMember({"train", "val", "test"}));

    std::uint64_t gc_seed = 1;
    double gc_tol = 1e-4;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    gradcheck->add_option("--seed", gc_seed, "Sample and parameter seed");
    gradcheck->add_option("--tol", gc_tol, "Relative tolerance");

    std::string inspect_data, inspect_config;
    auto* inspect = app.add_subcommand("inspect-gsg", "Inspect GIG sample construction");
    inspect->add_option("--data", inspect_data, "Dataset directory")->required();
    inspect->add_option("--config", inspect_config, "Config JSON")->required();

    std::string bench_config, bench_sizes;
    auto* bench = app.add_subcommand("bench", "Timing across sizes");
    bench->add_option("--config", bench_config, "Config JSON")->required();
    bench->add_option("--sizes", bench_sizes, "I,N,d triples separated by ';'")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(task, out_dir, gen_n, gen_seed, graphs_per_sample, frames);
        if (train->parsed())
            return cmd_train(config_path, data_dir, ckpt_out, train_seed_opt->count() > 0, train_seed);
        if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_split);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_tol);
        if (inspect->parsed()) return cmd_inspect_gsg(inspect_data, inspect_config);
        if (bench->parsed()) return cmd_bench(bench_config, bench_sizes);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
