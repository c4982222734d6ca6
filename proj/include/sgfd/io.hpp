#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sgfd/corpus.hpp"
#include "sgfd/diffcore.hpp"
#include "sgfd/losses.hpp"

namespace sgfd {

// ---------------------------------------------------------------------------
// Interactions file: one record per line,
//   user_id<TAB>item_id[<TAB>rating[<TAB>timestamp]]
// Ratings are parsed but treated as implicit positives downstream.
// ---------------------------------------------------------------------------
struct InteractionRecord {
    std::string user;
    std::string item;
    double rating = 1.0;
    std::string timestamp;
};

std::vector<InteractionRecord> read_interactions_file(const std::string& path);
void write_interactions_file(const std::string& path,
                             const InteractionCorpus& corpus,
                             const std::vector<std::pair<int, int>>& pairs);

// Labels file: item_id<TAB>label_string
std::vector<std::pair<std::string, std::string>> read_labels_file(const std::string& path);
void write_labels_file(const std::string& path, const SemanticLabels& labels,
                       const std::vector<std::string>& item_order);

// ---------------------------------------------------------------------------
// Feature file. Header line:
//   SGFD-FEAT 1 <modality> <num_items> <dim>
// Text body: one line per item, `item_id` then <dim> decimal numbers.
// Binary body: <num_items> id lines, then num_items*dim little-endian f32,
// row-major, in id-table order. Readers accept both (a post-header line with
// a single field marks the binary variant).
// ---------------------------------------------------------------------------
GenericFeatureMatrix read_feature_file(const std::string& path);
void write_feature_file(const std::string& path, const GenericFeatureMatrix& features,
                        const std::vector<std::string>& item_order, bool binary = false);

// ---------------------------------------------------------------------------
// Parameter container. Header line:
//   SGFD-PARAMS 1 <count> <text|binary>
// Text body, per parameter: `<name> <rows> <cols>` then one line of
// rows*cols values, row-major. Binary body: <count> descriptor lines, then
// one little-endian f32 blob of all values in descriptor order.
// ---------------------------------------------------------------------------
struct NamedMatrix {
    std::string name;
    Eigen::MatrixXd value;
};

void write_param_container(const std::string& path, const ParamStore& params,
                           bool binary = false);
std::vector<NamedMatrix> read_param_container(const std::string& path);

// Loads a container into an existing store; every store entry must be present
// with a matching shape (ConfigError otherwise).
void load_param_container(const std::string& path, ParamStore& params);

// ---------------------------------------------------------------------------
// Run config: flat `key = value` lines, '#' comments.
// ---------------------------------------------------------------------------
std::map<std::string, std::string> read_kv_config(const std::string& path);
void write_kv_config(const std::string& path, const std::map<std::string, std::string>& kv);

// ---------------------------------------------------------------------------
// Metrics log: one JSON record per training step (step index, the six loss
// values, the lambda weights).
// ---------------------------------------------------------------------------
void write_metrics_log(const std::string& path, const std::vector<LossReport>& log);
std::vector<LossReport> read_metrics_log(const std::string& path);

// ---------------------------------------------------------------------------
// Run manifest (JSON): command, config snapshot, seed, input digests, output
// paths, version string.
// ---------------------------------------------------------------------------
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> input_digests;  // path -> fnv1a-64 hex
    std::vector<std::string> outputs;
    std::string version;
};

void write_manifest(const std::string& path, const RunManifest& manifest);

std::uint64_t fnv1a64(const std::string& bytes);
std::string file_digest(const std::string& path);

// Misc helpers.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
void ensure_parent_dir(const std::string& path);

extern const char* const kVersion;

}  // namespace sgfd
