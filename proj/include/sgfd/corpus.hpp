#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sgfd {

enum class Modality { Visual, Textual };

std::string modality_name(Modality m);
Modality modality_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// Implicit-feedback interaction corpus. Users and items are densified to
// contiguous indices; original string ids are retained for file round-trips.
// `train`/`test` partition `interactions` once split_corpus has run.
// ---------------------------------------------------------------------------
struct InteractionCorpus {
    std::vector<std::string> user_ids;  // dense user index -> id
    std::vector<std::string> item_ids;  // dense item index -> id
    std::unordered_map<std::string, int> user_index;
    std::unordered_map<std::string, int> item_index;

    std::vector<std::pair<int, int>> interactions;  // (user, item)
    std::vector<std::pair<int, int>> train;
    std::vector<std::pair<int, int>> test;

    int num_users() const { return int(user_ids.size()); }
    int num_items() const { return int(item_ids.size()); }
    bool has_split() const { return !train.empty() || !test.empty(); }

    std::vector<std::vector<int>> items_by_user() const;       // over all interactions
    std::vector<std::vector<int>> train_items_by_user() const;
    std::vector<std::vector<int>> test_items_by_user() const;
};

// Semantic labels: one dense class index per item, classes dense in [0, C).
struct SemanticLabels {
    std::unordered_map<std::string, int> labels;  // item id -> class index
    std::vector<std::string> class_names;         // class index -> original label

    int num_classes() const { return int(class_names.size()); }
    int label_of(const std::string& item_id) const;

    // Class index per dense corpus item; throws ValidationError if any item
    // lacks a label.
    std::vector<int> aligned(const InteractionCorpus& corpus) const;
};

// Per-modality generic item features.
struct GenericFeatureMatrix {
    Modality modality = Modality::Visual;
    int dim = 0;
    std::unordered_map<std::string, Eigen::VectorXd> rows;  // item id -> feature

    // Dense matrix (num_items x dim) in corpus item order; throws
    // ValidationError on a missing row or width mismatch.
    Eigen::MatrixXd aligned(const InteractionCorpus& corpus) const;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Parses the interactions + labels files (formats in io.hpp). Labels are
// densified to [0, C) by sorted label string. Every item must carry a label.
std::pair<InteractionCorpus, SemanticLabels> load_corpus(const std::string& interactions_path,
                                                         const std::string& labels_path);

// Maximal subgraph in which every user and item has degree >= k, obtained by
// iterative deletion to a fixed point. Indices are re-densified. Throws
// ValidationError when the result is empty.
InteractionCorpus k_core_filter(const InteractionCorpus& corpus, int k);

// Per-user split: each user keeps ceil(fraction * n_u) interactions in train,
// the rest go to test. Deterministic given seed. A user with one interaction
// contributes it to train.
InteractionCorpus split_corpus(const InteractionCorpus& corpus, double train_fraction,
                               std::uint64_t seed);

// Drops labels/features for items absent from the corpus (after filtering).
SemanticLabels restrict_labels(const SemanticLabels& labels, const InteractionCorpus& corpus);

// ---------------------------------------------------------------------------
// Synthetic corpus with planted category structure: items get class
// prototypes plus Gaussian noise per modality; each user prefers one or two
// classes and interacts mostly within them.
// ---------------------------------------------------------------------------
struct SynthConfig {
    int num_users = 500;
    int num_items = 300;
    int num_classes = 8;
    int visual_dim = 64;
    int textual_dim = 64;
    double noise = 0.5;
    double proto_scale = 0.7;      // stddev of prototype entries
    int interactions_per_user = 15;
    double in_class_prob = 0.9;    // chance an interaction stays in a preferred class
    double popularity_skew = 0.0;  // Zipf exponent for within-class item popularity
    // Leading feature dims carrying no class signal, only per-item noise
    // scaled by noise * distractor_boost (style dims of real generic
    // features). Zero keeps every dim class-informative.
    int distractor_dims = 0;
    double distractor_boost = 6.0;
    double train_fraction = 0.8;   // per-user split applied to the result
    std::uint64_t seed = 1;
};

struct SynthCorpus {
    InteractionCorpus corpus;
    SemanticLabels labels;
    GenericFeatureMatrix visual;
    GenericFeatureMatrix textual;
};

SynthCorpus synth_corpus(const SynthConfig& config);

}  // namespace sgfd
