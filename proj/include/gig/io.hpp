#pragma once

// File formats and persistence.
//
// Datasets: a directory holding meta.json plus {train,val,test}.jsonl with
// one record per line. Graph records carry vertex features, directed edges,
// optional edge features and a label whose JSON type follows the task; clip
// records wrap a frame list and one label. Loading validates every record
// against meta.json and fails on the first inconsistency, naming file and
// line.
//
// Checkpoints: a single JSON document holding the format version, the full
// training configuration and every parameter tensor with its shape and flat
// data. Floats in the parameter section are written as decimal text with 17
// significant digits, which round-trips IEEE doubles bit-exactly.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gig/datasets.hpp"
#include "gig/graph.hpp"
#include "gig/layers.hpp"
#include "gig/training.hpp"

namespace gig {

using json = nlohmann::json;

inline constexpr int kCheckpointFormatVersion = 1;

// ---------------------------------------------------------------------------
// Config <-> JSON
// ---------------------------------------------------------------------------

inline json train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["rho_proxy"] = cfg.gsg.rho_proxy;
    j["k_gig"] = cfg.gsg.k_gig;
    j["similar_fraction"] = cfg.gsg.similar_fraction;
    j["metric"] = to_string(cfg.gsg.metric);
    j["proxy_init"] = to_string(cfg.gsg.proxy_init);
    j["num_hidden_layers"] = cfg.network.num_hidden_layers;
    j["hidden_dim"] = cfg.network.hidden_dim;
    j["updater"] = to_string(cfg.network.updater);
    j["disable_ggu"] = cfg.network.disable_ggu;
    j["disable_gvu"] = cfg.network.disable_gvu;
    j["ggu_first"] = cfg.network.ggu_first;
    j["readout"] = to_string(cfg.network.readout);
    j["num_classes"] = cfg.network.num_classes;
    j["vertex_feat_dim"] = cfg.network.vertex_feat_dim;
    j["edge_feat_dim"] = cfg.network.edge_feat_dim;
    j["epochs"] = cfg.epochs;
    j["samples_per_gig"] = cfg.samples_per_gig;
    j["learning_rate"] = cfg.learning_rate;
    j["weight_decay"] = cfg.weight_decay;
    j["schedule"] = to_string(cfg.schedule);
    j["loss"] = to_string(cfg.loss);
    j["seed"] = cfg.seed;
    return j;
}

// Parses a config document onto defaults. Unknown keys are errors. The
// shape-determining keys (num_classes, vertex_feat_dim, edge_feat_dim) are
// managed by training and checkpoints; allow_derived admits them there.
inline TrainConfig train_config_from_json(const json& j, bool allow_derived = false) {
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    TrainConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "rho_proxy") cfg.gsg.rho_proxy = value.get<double>();
        else if (key == "k_gig") cfg.gsg.k_gig = value.get<std::size_t>();
        else if (key == "similar_fraction") cfg.gsg.similar_fraction = value.get<double>();
        else if (key == "metric") cfg.gsg.metric = metric_from_string(value.get<std::string>());
        else if (key == "proxy_init") cfg.gsg.proxy_init = proxy_init_from_string(value.get<std::string>());
        else if (key == "num_hidden_layers") cfg.network.num_hidden_layers = value.get<std::size_t>();
        else if (key == "hidden_dim") cfg.network.hidden_dim = value.get<std::size_t>();
        else if (key == "updater") cfg.network.updater = updater_kind_from_string(value.get<std::string>());
        else if (key == "disable_ggu") cfg.network.disable_ggu = value.get<bool>();
        else if (key == "disable_gvu") cfg.network.disable_gvu = value.get<bool>();
        else if (key == "ggu_first") cfg.network.ggu_first = value.get<bool>();
        else if (key == "readout") cfg.network.readout = readout_from_string(value.get<std::string>());
        else if (key == "num_classes" && allow_derived) cfg.network.num_classes = value.get<std::size_t>();
        else if (key == "vertex_feat_dim" && allow_derived) cfg.network.vertex_feat_dim = value.get<std::size_t>();
        else if (key == "edge_feat_dim" && allow_derived) cfg.network.edge_feat_dim = value.get<std::size_t>();
        else if (key == "epochs") cfg.epochs = value.get<std::size_t>();
        else if (key == "samples_per_gig") cfg.samples_per_gig = value.get<std::size_t>();
        else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
        else if (key == "weight_decay") cfg.weight_decay = value.get<double>();
        else if (key == "schedule") cfg.schedule = schedule_from_string(value.get<std::string>());
        else if (key == "loss") cfg.loss = loss_kind_from_string(value.get<std::string>());
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    return cfg;
}

inline TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config: " + path + ": " + e.what());
    }
    return train_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Dataset records
// ---------------------------------------------------------------------------

namespace detail {

inline json graph_to_json(const Graph& g, TaskType task, bool in_clip) {
    json j;
    j["vertex_features"] = g.vertex_features;
    json edges = json::array();
    for (const auto& [s, d] : g.edges) edges.push_back({s, d});
    j["edges"] = edges;
    if (!g.edge_features.empty()) j["edge_features"] = g.edge_features;
    if (!in_clip) {
        switch (task) {
            case TaskType::graph_class: j["label"] = *g.class_label; break;
            case TaskType::graph_reg: j["label"] = *g.target; break;
            case TaskType::vertex_class: j["label"] = *g.vertex_labels; break;
            case TaskType::edge_class: j["label"] = *g.edge_labels; break;
            case TaskType::clip_class: break;
        }
    }
    return j;
}

inline Graph graph_from_json(const json& j, const DatasetMeta& meta, bool in_clip) {
    if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "vertex_features" && key != "edges" && key != "edge_features" && key != "label")
            throw std::invalid_argument("unknown record key '" + key + "'");
    }
    Graph g;
    g.vertex_features = j.at("vertex_features").get<std::vector<std::vector<double>>>();
    for (const auto& row : j.at("edges")) {
        if (!row.is_array() || row.size() != 2)
            throw std::invalid_argument("edges must be [src, dst] pairs");
        g.edges.emplace_back(row[0].get<std::size_t>(), row[1].get<std::size_t>());
    }
    if (j.contains("edge_features"))
        g.edge_features = j.at("edge_features").get<std::vector<std::vector<double>>>();
    validate_graph(g);
    if (g.vertex_dim() != meta.vertex_feat_dim)
        throw std::invalid_argument("vertex feature width " + std::to_string(g.vertex_dim()) +
                                    " does not match meta vertex_feat_dim " +
                                    std::to_string(meta.vertex_feat_dim));
    const std::size_t de = g.edge_features.empty() ? 0 : g.edge_dim();
    if (g.edge_count() > 0 && de != meta.edge_feat_dim)
        throw std::invalid_argument("edge feature width " + std::to_string(de) +
                                    " does not match meta edge_feat_dim " +
                                    std::to_string(meta.edge_feat_dim));
    if (in_clip) return g;
    if (!j.contains("label")) throw std::invalid_argument("record is missing its label");
    const json& label = j.at("label");
    switch (meta.task_type) {
        case TaskType::graph_class: {
            const long cls = label.get<long>();
            if (cls < 0 || static_cast<std::size_t>(cls) >= meta.num_classes)
                throw std::invalid_argument("class label " + std::to_string(cls) + " outside [0, " +
                                            std::to_string(meta.num_classes) + ")");
            g.class_label = cls;
            break;
        }
        case TaskType::graph_reg: g.target = label.get<double>(); break;
        case TaskType::vertex_class: {
            auto labels = label.get<std::vector<long>>();
            if (labels.size() != g.vertex_count())
                throw std::invalid_argument("per-vertex label count " + std::to_string(labels.size()) +
                                            " does not match " + std::to_string(g.vertex_count()) +
                                            " vertices");
            g.vertex_labels = std::move(labels);
            break;
        }
        case TaskType::edge_class: {
            auto labels = label.get<std::vector<long>>();
            if (labels.size() != g.edge_count())
                throw std::invalid_argument("per-edge label count " + std::to_string(labels.size()) +
                                            " does not match " + std::to_string(g.edge_count()) + " edges");
            g.edge_labels = std::move(labels);
            break;
        }
        case TaskType::clip_class:
            throw std::invalid_argument("clip datasets hold clip records, not bare graphs");
    }
    return g;
}

} // namespace detail

inline json dataset_meta_to_json(const DatasetMeta& meta) {
    json j;
    j["task_type"] = to_string(meta.task_type);
    j["num_classes"] = meta.num_classes;
    j["vertex_feat_dim"] = meta.vertex_feat_dim;
    j["edge_feat_dim"] = meta.edge_feat_dim;
    j["graphs_per_sample"] = meta.graphs_per_sample;
    j["counts"] = meta.counts;
    return j;
}

inline DatasetMeta dataset_meta_from_json(const json& j) {
    DatasetMeta meta;
    for (const auto& [key, value] : j.items()) {
        if (key == "task_type") meta.task_type = task_type_from_string(value.get<std::string>());
        else if (key == "num_classes") meta.num_classes = value.get<std::size_t>();
        else if (key == "vertex_feat_dim") meta.vertex_feat_dim = value.get<std::size_t>();
        else if (key == "edge_feat_dim") meta.edge_feat_dim = value.get<std::size_t>();
        else if (key == "graphs_per_sample") meta.graphs_per_sample = value.get<std::size_t>();
        else if (key == "counts") meta.counts = value.get<std::map<std::string, std::size_t>>();
        else throw std::invalid_argument("meta.json: unknown key '" + key + "'");
    }
    return meta;
}

inline void save_dataset(const std::string& dir, const Dataset& ds) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir + "/meta.json");
        if (!out) throw std::runtime_error("dataset: cannot write " + dir + "/meta.json");
        out << dataset_meta_to_json(ds.meta).dump(2) << "\n";
    }
    for (const std::string& split : split_names()) {
        const std::string path = dir + "/" + split + ".jsonl";
        std::ofstream out(path);
        if (!out) throw std::runtime_error("dataset: cannot write " + path);
        if (ds.is_clip_task()) {
            auto it = ds.clip_splits.find(split);
            if (it == ds.clip_splits.end()) continue;
            for (const ClipSample& clip : it->second) {
                json j;
                json frames = json::array();
                for (const Graph& f : clip.frames)
                    frames.push_back(detail::graph_to_json(f, ds.meta.task_type, true));
                j["frames"] = std::move(frames);
                j["label"] = clip.label;
                out << j.dump() << "\n";
            }
        } else {
            auto it = ds.graph_splits.find(split);
            if (it == ds.graph_splits.end()) continue;
            for (const Graph& g : it->second)
                out << detail::graph_to_json(g, ds.meta.task_type, false).dump() << "\n";
        }
    }
}

inline Dataset load_dataset(const std::string& dir) {
    Dataset ds;
    {
        const std::string path = dir + "/meta.json";
        std::ifstream in(path);
        if (!in) throw std::runtime_error("dataset: cannot open " + path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw std::runtime_error("dataset: " + path + ": " + e.what());
        }
        ds.meta = dataset_meta_from_json(j);
    }
    for (const std::string& split : split_names()) {
        const std::string path = dir + "/" + split + ".jsonl";
        std::ifstream in(path);
        if (!in) throw std::runtime_error("dataset: cannot open " + path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                const json j = json::parse(line);
                if (ds.is_clip_task()) {
                    if (!j.is_object() || !j.contains("frames") || !j.contains("label"))
                        throw std::invalid_argument("clip record needs 'frames' and 'label'");
                    ClipSample clip;
                    clip.label = j.at("label").get<long>();
                    if (clip.label < 0 || static_cast<std::size_t>(clip.label) >= ds.meta.num_classes)
                        throw std::invalid_argument("clip label " + std::to_string(clip.label) +
                                                    " outside [0, " + std::to_string(ds.meta.num_classes) +
                                                    ")");
                    for (const json& f : j.at("frames"))
                        clip.frames.push_back(detail::graph_from_json(f, ds.meta, true));
                    if (clip.frames.empty()) throw std::invalid_argument("clip has no frames");
                    ds.clip_splits[split].push_back(std::move(clip));
                } else {
                    ds.graph_splits[split].push_back(detail::graph_from_json(j, ds.meta, false));
                }
            } catch (const std::exception& e) {
                throw std::runtime_error(split + ".jsonl line " + std::to_string(line_no) + ": " +
                                         e.what());
            }
        }
        const std::size_t loaded =
            ds.is_clip_task() ? ds.clip_splits[split].size() : ds.graph_splits[split].size();
        auto it = ds.meta.counts.find(split);
        if (it != ds.meta.counts.end() && it->second != loaded)
            throw std::runtime_error(split + ".jsonl holds " + std::to_string(loaded) +
                                     " records but meta.json declares " + std::to_string(it->second));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double_17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline void save_checkpoint(const std::string& path, const GigNetwork& net, const TrainConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out << "{\n";
    out << "  \"format_version\": " << kCheckpointFormatVersion << ",\n";
    out << "  \"config\": " << train_config_to_json(cfg).dump(2) << ",\n";
    out << "  \"params\": [\n";
    const auto params = net.named_params();
    for (std::size_t p = 0; p < params.size(); ++p) {
        const auto& [name, tensor] = params[p];
        out << "    {\"name\": " << json(name).dump() << ", \"shape\": [";
        for (std::size_t i = 0; i < tensor.shape().size(); ++i)
            out << (i ? ", " : "") << tensor.shape()[i];
        out << "], \"data\": [";
        for (std::size_t i = 0; i < tensor.size(); ++i)
            out << (i ? ", " : "") << detail::format_double_17(tensor.values()[i]);
        out << "]}" << (p + 1 < params.size() ? "," : "") << "\n";
    }
    out << "  ]\n}\n";
    if (!out) throw std::runtime_error("checkpoint: write to " + path + " failed");
}

inline std::pair<GigNetwork, TrainConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("checkpoint: " + path + ": " + e.what());
    }
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kCheckpointFormatVersion)
        throw std::runtime_error("checkpoint: " + path + ": unsupported format version");
    const TrainConfig cfg = train_config_from_json(j.at("config"), true);
    GigNetwork net(cfg.network, 0);
    std::map<std::string, Tensor> by_name;
    for (auto& [name, tensor] : net.named_params()) by_name.emplace(name, tensor);
    std::size_t restored = 0;
    for (const json& entry : j.at("params")) {
        const std::string name = entry.at("name").get<std::string>();
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint: unexpected parameter '" + name + "'");
        const auto shape = entry.at("shape").get<Shape>();
        if (shape != it->second.shape())
            throw std::runtime_error("checkpoint: parameter '" + name + "' has shape " +
                                     shape_str(shape) + " but the configured network expects " +
                                     shape_str(it->second.shape()));
        const auto data = entry.at("data").get<std::vector<double>>();
        if (data.size() != it->second.size())
            throw std::runtime_error("checkpoint: parameter '" + name + "' holds " +
                                     std::to_string(data.size()) + " values, expected " +
                                     std::to_string(it->second.size()));
        it->second.raw_values() = data;
        ++restored;
    }
    if (restored != by_name.size())
        throw std::runtime_error("checkpoint: restored " + std::to_string(restored) + " of " +
                                 std::to_string(by_name.size()) + " parameter tensors");
    return {std::move(net), cfg};
}

} // namespace gig
