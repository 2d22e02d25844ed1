#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ingnn/graph.hpp"
#include "ingnn/model.hpp"
#include "ingnn/rng.hpp"
#include "ingnn/trainer.hpp"

namespace ingnn {
namespace io {

namespace fs = std::filesystem;
using nlohmann::json;

// Fixed-width round-trippable double formatting; every exporter uses this so
// identical values always serialize identically.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct DatasetBundle {
    Graph graph;
    DenseMatrix features;
    Labels labels;
    std::string name;
    std::optional<DataSplit> splits;
};

inline void validate_bundle(const DatasetBundle& bundle) {
    std::vector<std::string> violations = validate(bundle.graph);
    if (!violations.empty())
        throw std::invalid_argument("invalid graph: " + violations.front());
    validate_labels(bundle.labels, bundle.graph.num_nodes);
    if (bundle.features.rows != bundle.graph.num_nodes)
        throw std::invalid_argument("feature row count does not match node count");
    if (!all_finite(bundle.features))
        throw std::invalid_argument("non-finite feature value");
    if (bundle.splits.has_value()) validate_split(*bundle.splits, bundle.graph.num_nodes);
}

namespace detail {

inline std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing or unreadable file: " + path.string());
    return in;
}

inline std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);  // binary: no newline translation
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset bundle directory:
//   meta.json   {name, num_nodes, num_features, num_classes, sparse?}
//   edges.tsv   one undirected edge per line, either orientation
//   labels.csv  one class id per line
//   features.csv (dense) or features_sparse.tsv (row col value), per meta
//   splits.json optional {train:[...], valid:[...], test:[...]}
// ---------------------------------------------------------------------------
inline DatasetBundle load_bundle(const fs::path& dir) {
    std::ifstream meta_in = detail::open_input(dir / "meta.json");
    json meta = json::parse(meta_in);
    DatasetBundle bundle;
    bundle.name = meta.value("name", dir.filename().string());
    const auto n = meta.at("num_nodes").get<std::size_t>();
    const auto d = meta.at("num_features").get<std::size_t>();
    const auto c = meta.at("num_classes").get<int>();
    const bool sparse = meta.value("sparse", false);

    {
        std::ifstream in = detail::open_input(dir / "edges.tsv");
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            long long u, v;
            if (!(ls >> u >> v)) throw std::runtime_error("bad edge line: " + line);
            if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n ||
                static_cast<std::size_t>(v) >= n)
                throw std::runtime_error("edge endpoint out of range: " + line);
            edges.emplace_back(static_cast<std::size_t>(u), static_cast<std::size_t>(v));
        }
        bundle.graph = build_graph(n, edges);
    }

    bundle.features = DenseMatrix(n, d);
    if (sparse) {
        std::ifstream in = detail::open_input(dir / "features_sparse.tsv");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            long long r, col;
            double value;
            if (!(ls >> r >> col >> value))
                throw std::runtime_error("bad sparse feature line: " + line);
            if (r < 0 || col < 0 || static_cast<std::size_t>(r) >= n ||
                static_cast<std::size_t>(col) >= d)
                throw std::runtime_error("sparse feature index out of range: " + line);
            bundle.features(static_cast<std::size_t>(r), static_cast<std::size_t>(col)) = value;
        }
    } else {
        std::ifstream in = detail::open_input(dir / "features.csv");
        std::string line;
        std::size_t row = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (row >= n) throw std::runtime_error("features.csv has more rows than num_nodes");
            std::vector<std::string> fields = detail::split_csv_line(line);
            if (fields.size() != d)
                throw std::runtime_error("features.csv row " + std::to_string(row) + " has " +
                                         std::to_string(fields.size()) + " columns, expected " +
                                         std::to_string(d));
            for (std::size_t j = 0; j < d; ++j)
                bundle.features(row, j) = std::stod(fields[j]);
            ++row;
        }
        if (row != n) throw std::runtime_error("features.csv row count mismatch");
    }

    {
        std::ifstream in = detail::open_input(dir / "labels.csv");
        bundle.labels.num_classes = c;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            bundle.labels.values.push_back(std::stoi(line));
        }
        if (bundle.labels.values.size() != n)
            throw std::runtime_error("labels.csv row count mismatch");
    }

    if (fs::exists(dir / "splits.json")) {
        std::ifstream in = detail::open_input(dir / "splits.json");
        json splits = json::parse(in);
        DataSplit ds;
        ds.train = splits.at("train").get<std::vector<std::size_t>>();
        ds.valid = splits.at("valid").get<std::vector<std::size_t>>();
        ds.test = splits.at("test").get<std::vector<std::size_t>>();
        bundle.splits = std::move(ds);
    }

    validate_bundle(bundle);
    return bundle;
}

inline void save_bundle(const fs::path& dir, const DatasetBundle& bundle,
                        bool sparse_features = false) {
    validate_bundle(bundle);
    fs::create_directories(dir);
    {
        json meta;
        meta["name"] = bundle.name;
        meta["num_nodes"] = bundle.graph.num_nodes;
        meta["num_features"] = bundle.features.cols;
        meta["num_classes"] = bundle.labels.num_classes;
        meta["sparse"] = sparse_features;
        detail::open_output(dir / "meta.json") << meta.dump(2) << "\n";
    }
    {
        std::ofstream out = detail::open_output(dir / "edges.tsv");
        for (std::size_t u = 0; u < bundle.graph.num_nodes; ++u)
            for (const std::size_t* it = bundle.graph.neighbors_begin(u);
                 it != bundle.graph.neighbors_end(u); ++it)
                if (u < *it) out << u << "\t" << *it << "\n";
    }
    {
        std::ofstream out = detail::open_output(dir / "labels.csv");
        for (int v : bundle.labels.values) out << v << "\n";
    }
    if (sparse_features) {
        std::ofstream out = detail::open_output(dir / "features_sparse.tsv");
        for (std::size_t i = 0; i < bundle.features.rows; ++i)
            for (std::size_t j = 0; j < bundle.features.cols; ++j)
                if (bundle.features(i, j) != 0.0)
                    out << i << "\t" << j << "\t" << format_double(bundle.features(i, j))
                        << "\n";
    } else {
        std::ofstream out = detail::open_output(dir / "features.csv");
        for (std::size_t i = 0; i < bundle.features.rows; ++i) {
            for (std::size_t j = 0; j < bundle.features.cols; ++j) {
                if (j > 0) out << ",";
                out << format_double(bundle.features(i, j));
            }
            out << "\n";
        }
    }
    if (bundle.splits.has_value()) {
        json splits;
        splits["train"] = bundle.splits->train;
        splits["valid"] = bundle.splits->valid;
        splits["test"] = bundle.splits->test;
        detail::open_output(dir / "splits.json") << splits.dump(2) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Split sampling.
//   planetoid:  20 train nodes per class, then 500 validation and 1000 test
//               nodes from the remainder.
//   fractional: 50% / 25% / 25%.
// ---------------------------------------------------------------------------
enum class SplitPolicy { planetoid, fractional };

inline SplitPolicy split_policy_from_string(const std::string& s) {
    if (s == "planetoid") return SplitPolicy::planetoid;
    if (s == "fractional") return SplitPolicy::fractional;
    throw std::invalid_argument("unknown split policy: " + s);
}

inline DataSplit sample_splits(const Labels& labels, SplitPolicy policy, std::uint64_t seed) {
    const std::size_t n = labels.values.size();
    Rng rng(derive_seed(seed, stream::split));
    DataSplit split;
    if (policy == SplitPolicy::planetoid) {
        std::vector<std::vector<std::size_t>> by_class(
            static_cast<std::size_t>(labels.num_classes));
        for (std::size_t i = 0; i < n; ++i)
            by_class[static_cast<std::size_t>(labels.values[i])].push_back(i);
        std::vector<char> in_train(n, 0);
        for (auto& members : by_class) {
            if (members.size() < 20)
                throw std::invalid_argument(
                    "planetoid policy needs at least 20 nodes per class");
            rng.shuffle(members);
            for (std::size_t i = 0; i < 20; ++i) {
                split.train.push_back(members[i]);
                in_train[members[i]] = 1;
            }
        }
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < n; ++i)
            if (!in_train[i]) rest.push_back(i);
        if (rest.size() < 1500)
            throw std::invalid_argument(
                "planetoid policy needs 1500 nodes outside the train set");
        rng.shuffle(rest);
        split.valid.assign(rest.begin(), rest.begin() + 500);
        split.test.assign(rest.begin() + 500, rest.begin() + 1500);
    } else {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        std::size_t n_train = n / 2;
        std::size_t n_valid = n / 4;
        split.train.assign(order.begin(), order.begin() + n_train);
        split.valid.assign(order.begin() + n_train, order.begin() + n_train + n_valid);
        split.test.assign(order.begin() + n_train + n_valid, order.end());
    }
    validate_split(split, n);
    return split;
}

// ---------------------------------------------------------------------------
// CSV export (RFC-4180-style quoting, UTF-8, \n line ends).
// ---------------------------------------------------------------------------
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out += ch;
    }
    out += "\"";
    return out;
}

inline void export_csv(const Table& table, const fs::path& path) {
    std::ofstream out = detail::open_output(path);
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (j > 0) out << ",";
        out << csv_escape(table.header[j]);
    }
    out << "\n";
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw std::invalid_argument("csv row width does not match header");
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j > 0) out << ",";
            out << csv_escape(row[j]);
        }
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// RunRecord JSON (round-trips to an identical record; the wall-time field is
// the single mutable entry) and the per-epoch metrics CSV.
// ---------------------------------------------------------------------------
inline json run_to_json(const RunRecord& record) {
    json j;
    j["record_version"] = 1;
    j["config"] = record.config;
    j["seed"] = record.seed;
    j["status"] = record.status;
    j["best_epoch"] = record.best_epoch;
    j["best_valid_accuracy"] = record.best_valid_accuracy;
    j["test_accuracy"] = record.test_accuracy;  // NaN serializes as null
    j["final_fusion_logits"] = record.final_fusion_logits;
    j["final_importance"] = record.final_importance;
    j["importance_defined"] = record.importance_defined;
    j["wall_time_seconds"] = record.wall_time_seconds;
    json epochs = json::array();
    for (const EpochMetrics& m : record.epochs) {
        json e;
        e["epoch"] = m.epoch;
        e["phase"] = std::string(1, m.phase);
        e["train_loss"] = m.train_loss;
        e["train_acc"] = m.train_acc;
        e["valid_loss"] = m.valid_loss;
        e["valid_acc"] = m.valid_acc;
        epochs.push_back(std::move(e));
    }
    j["epochs"] = std::move(epochs);
    return j;
}

inline void export_run(const RunRecord& record, const fs::path& path) {
    detail::open_output(path) << run_to_json(record).dump(2) << "\n";
}

inline RunRecord import_run(const fs::path& path) {
    std::ifstream in = detail::open_input(path);
    json j = json::parse(in);
    RunRecord record;
    record.config = j.at("config").get<std::map<std::string, std::string>>();
    record.seed = j.at("seed").get<std::uint64_t>();
    record.status = j.at("status").get<std::string>();
    record.best_epoch = j.at("best_epoch").get<std::size_t>();
    record.best_valid_accuracy = j.at("best_valid_accuracy").get<double>();
    record.test_accuracy = j.at("test_accuracy").is_null()
                               ? std::numeric_limits<double>::quiet_NaN()
                               : j.at("test_accuracy").get<double>();
    auto logits = j.at("final_fusion_logits").get<std::vector<double>>();
    auto importance = j.at("final_importance").get<std::vector<double>>();
    for (int s = 0; s < 3; ++s) {
        record.final_fusion_logits[s] = logits.at(s);
        record.final_importance[s] = importance.at(s);
    }
    record.importance_defined = j.at("importance_defined").get<bool>();
    record.wall_time_seconds = j.at("wall_time_seconds").get<double>();
    for (const json& e : j.at("epochs")) {
        EpochMetrics m;
        m.epoch = e.at("epoch").get<std::size_t>();
        m.phase = e.at("phase").get<std::string>().at(0);
        m.train_loss = e.at("train_loss").get<double>();
        m.train_acc = e.at("train_acc").get<double>();
        m.valid_loss = e.at("valid_loss").get<double>();
        m.valid_acc = e.at("valid_acc").get<double>();
        record.epochs.push_back(m);
    }
    return record;
}

inline void export_metrics_csv(const RunRecord& record, const fs::path& path) {
    Table table;
    table.header = {"epoch", "phase", "train_loss", "train_acc", "valid_loss", "valid_acc"};
    for (const EpochMetrics& m : record.epochs)
        table.rows.push_back({std::to_string(m.epoch), std::string(1, m.phase),
                              format_double(m.train_loss), format_double(m.train_acc),
                              format_double(m.valid_loss), format_double(m.valid_acc)});
    export_csv(table, path);
}

// ---------------------------------------------------------------------------
// Parameter checkpoints: one-line JSON header naming the tensors, then the
// concatenated float64 little-endian payload.
// ---------------------------------------------------------------------------
static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

struct NamedTensor {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
};

inline void save_checkpoint(const fs::path& path, const std::vector<NamedTensor>& tensors) {
    json header;
    header["format"] = "ingnn-checkpoint-v1";
    header["tensors"] = json::array();
    for (const NamedTensor& t : tensors) {
        if (t.data.size() != t.rows * t.cols)
            throw std::invalid_argument("tensor size does not match its shape: " + t.name);
        json entry;
        entry["name"] = t.name;
        entry["rows"] = t.rows;
        entry["cols"] = t.cols;
        header["tensors"].push_back(std::move(entry));
    }
    std::ofstream out = detail::open_output(path);
    out << header.dump() << "\n";
    for (const NamedTensor& t : tensors)
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

inline std::vector<NamedTensor> load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("missing checkpoint: " + path.string());
    std::string header_line;
    if (!std::getline(in, header_line)) throw std::runtime_error("empty checkpoint file");
    json header = json::parse(header_line);
    if (header.value("format", "") != "ingnn-checkpoint-v1")
        throw std::runtime_error("unknown checkpoint format");
    std::vector<NamedTensor> tensors;
    for (const json& entry : header.at("tensors")) {
        NamedTensor t;
        t.name = entry.at("name").get<std::string>();
        t.rows = entry.at("rows").get<std::size_t>();
        t.cols = entry.at("cols").get<std::size_t>();
        t.data.resize(t.rows * t.cols);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (static_cast<std::size_t>(in.gcount()) != t.data.size() * sizeof(double))
            throw std::runtime_error("truncated checkpoint payload at tensor " + t.name);
        tensors.push_back(std::move(t));
    }
    return tensors;
}

inline std::vector<NamedTensor> params_to_tensors(const ModelParams& params) {
    std::vector<NamedTensor> out;
    auto push_matrix = [&out](const std::string& name, const DenseMatrix& m) {
        out.push_back({name, m.rows, m.cols, m.data});
    };
    auto push_vector = [&out](const std::string& name, const std::vector<double>& v) {
        out.push_back({name, 1, v.size(), v});
    };
    push_matrix("w_ego", params.w_ego.weight);
    push_matrix("w_strc", params.w_strc.weight);
    push_matrix("w_pred", params.w_pred.weight);
    for (std::size_t j = 0; j < params.bn_chain.size(); ++j) {
        const BatchNorm& bn = params.bn_chain[j];
        const std::string prefix = "bn" + std::to_string(j) + "_";
        push_vector(prefix + "gamma", bn.gamma);
        push_vector(prefix + "beta", bn.beta);
        push_vector(prefix + "running_mean", bn.running_mean);
        push_vector(prefix + "running_var", bn.running_var);
    }
    push_vector("fusion_logits", params.fusion_logits);
    return out;
}

inline void restore_params(ModelParams& params, const std::vector<NamedTensor>& tensors) {
    std::map<std::string, const NamedTensor*> by_name;
    for (const NamedTensor& t : tensors) by_name[t.name] = &t;
    auto fetch = [&by_name](const std::string& name) -> const NamedTensor& {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint missing tensor: " + name);
        return *it->second;
    };
    auto load_matrix = [&fetch](const std::string& name, DenseMatrix& m) {
        const NamedTensor& t = fetch(name);
        if (t.rows != m.rows || t.cols != m.cols)
            throw std::runtime_error("checkpoint tensor shape mismatch: " + name);
        m.data = t.data;
    };
    auto load_vector = [&fetch](const std::string& name, std::vector<double>& v) {
        const NamedTensor& t = fetch(name);
        if (t.rows != 1 || t.cols != v.size())
            throw std::runtime_error("checkpoint tensor shape mismatch: " + name);
        v = t.data;
    };
    load_matrix("w_ego", params.w_ego.weight);
    load_matrix("w_strc", params.w_strc.weight);
    load_matrix("w_pred", params.w_pred.weight);
    for (std::size_t j = 0; j < params.bn_chain.size(); ++j) {
        BatchNorm& bn = params.bn_chain[j];
        const std::string prefix = "bn" + std::to_string(j) + "_";
        load_vector(prefix + "gamma", bn.gamma);
        load_vector(prefix + "beta", bn.beta);
        load_vector(prefix + "running_mean", bn.running_mean);
        load_vector(prefix + "running_var", bn.running_var);
    }
    load_vector("fusion_logits", params.fusion_logits);
}

// Flat key=value config files (one pair per line, '#' comments).
inline std::map<std::string, std::string> read_kv_file(const fs::path& path) {
    std::ifstream in = detail::open_input(path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("bad config line (expected key=value): " + line);
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
        };
        trim(key);
        trim(value);
        kv[key] = value;
    }
    return kv;
}

inline void write_kv_file(const fs::path& path, const std::map<std::string, std::string>& kv) {
    std::ofstream out = detail::open_output(path);
    for (const auto& [key, value] : kv) out << key << "=" << value << "\n";
}

}  // namespace io
}  // namespace ingnn
