#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sgfd/backbone.hpp"
#include "sgfd/corpus.hpp"
#include "sgfd/losses.hpp"
#include "sgfd/model.hpp"

namespace sgfd {

enum class TeacherMode { PretrainFreeze, Joint };

// Ablation variants: full keeps every component; ld_only / fd_only keep a
// single distillation loss; no_fusion trains a teacher without the fusion
// branch; shallow_teacher uses a single-layer teacher; no_kd disables both
// lambda terms (the bare backbone + student extractors).
enum class AblationVariant { Full, LdOnly, FdOnly, NoFusion, ShallowTeacher, NoKd };

std::string variant_name(AblationVariant variant);
AblationVariant variant_from_name(const std::string& name);
const std::vector<AblationVariant>& all_variants();

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    int batch_size = 1024;
    int embed_dim = 128;    // user/item embedding size e
    int feature_dim = 128;  // extractor output width d
    double tau_transfer = 10.0;
    int delta = 4;
    double lambda1 = 1.0;
    double lambda2 = 0.1;
    std::uint64_t seed = 1;
    int max_epochs = 200;
    int teacher_max_epochs = 200;
    int patience = 20;
    TeacherMode teacher_mode = TeacherMode::PretrainFreeze;
    std::string backbone = "pairwise";
    bool grid_mode = false;     // restrict values to the documented search grids
    double val_fraction = 0.1;  // per-user slice of train used for early stopping
    int eval_k = 20;

    static TrainConfig from_kv(const std::map<std::string, std::string>& kv);
    std::map<std::string, std::string> to_kv() const;
    // Range checks; in grid mode also enforces the search-space memberships.
    void validate() const;
};

std::string teacher_mode_name(TeacherMode mode);
TeacherMode teacher_mode_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// Stage 1: teacher pretraining on L_TCE (+ L_FCE when the fusion branch is
// present) over the corpus items, early-stopped on a validation slice of the
// items when the head accuracy plateaus.
// ---------------------------------------------------------------------------
struct TeacherTrainResult {
    TeacherModel model;
    std::vector<LossReport> log;  // one record per step
    double best_val_accuracy = 0.0;
    double final_train_accuracy = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
    bool diverged = false;  // aborted; model holds the last good parameters
};

TeacherTrainResult train_teacher(const InteractionCorpus& corpus, const SemanticLabels& labels,
                                 const GenericFeatureMatrix& visual,
                                 const GenericFeatureMatrix& textual, const TrainConfig& config,
                                 bool with_fusion = true, bool shallow = false);

// ---------------------------------------------------------------------------
// Stage 2: joint student + backbone training on the composite objective with
// the variant's masks, early-stopped on validation recall@k; restores the
// best epoch's parameters.
// ---------------------------------------------------------------------------
struct JointTrainResult {
    StudentModel student;
    std::unique_ptr<Backbone> backbone;
    TeacherModel teacher;  // copy; updated in place under teacher_mode=joint
    std::vector<LossReport> log;
    double best_val_recall = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
    bool diverged = false;
    double fd_initial = 0.0;  // mean teacher-student feature distance, all items, at init
    double fd_final = 0.0;    // same after the best checkpoint is restored
};

JointTrainResult train_joint(const InteractionCorpus& corpus, const SemanticLabels& labels,
                             const GenericFeatureMatrix& visual,
                             const GenericFeatureMatrix& textual, const TeacherModel& teacher,
                             AblationVariant variant, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Ablation suite: per seed, trains the standard / no-fusion / shallow
// teachers once each and reuses them across the variants that need them;
// reports test-set metrics per variant averaged over seeds.
// ---------------------------------------------------------------------------
struct AblationRow {
    AblationVariant variant = AblationVariant::Full;
    std::vector<double> recalls;  // per seed
    std::vector<double> ndcgs;
    double mean_recall = 0.0;
    double mean_ndcg = 0.0;
    std::string failure;  // non-empty when this variant's runs failed
};

struct AblationTable {
    std::vector<AblationRow> rows;  // one per variant, fixed order
    std::vector<std::uint64_t> seeds;
    int k = 20;
};

AblationTable run_ablation_suite(const InteractionCorpus& corpus, const SemanticLabels& labels,
                                 const GenericFeatureMatrix& visual,
                                 const GenericFeatureMatrix& textual, const TrainConfig& config,
                                 int num_seeds);

std::string ablation_table_tsv(const AblationTable& table);

}  // namespace sgfd
