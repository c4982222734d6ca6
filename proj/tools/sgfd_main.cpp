// sgfd: command-line entry point wiring the corpus, training, evaluation and
// projection pipelines. Every command is deterministic given (inputs, config,
// seed) and writes a run manifest next to its outputs.
//
// Exit codes: 0 success, 1 missing/invalid input, 2 validation/dimension
// failure, 3 numerical divergence.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "sgfd/backbone.hpp"
#include "sgfd/corpus.hpp"
#include "sgfd/errors.hpp"
#include "sgfd/evaluation.hpp"
#include "sgfd/io.hpp"
#include "sgfd/model.hpp"
#include "sgfd/projection.hpp"
#include "sgfd/training.hpp"

namespace fs = std::filesystem;
using namespace sgfd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;

struct DataDir {
    InteractionCorpus corpus;
    SemanticLabels labels;
    GenericFeatureMatrix visual;
    GenericFeatureMatrix textual;
};

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

DataDir load_data_dir(const std::string& dir, bool need_features) {
    DataDir data;
    const std::string train_path = join(dir, "train.tsv");
    const std::string test_path = join(dir, "test.tsv");
    const std::string labels_path = join(dir, "labels.tsv");

    auto train_records = read_interactions_file(train_path);
    auto test_records = read_interactions_file(test_path);
    auto& corpus = data.corpus;
    auto intern = [&](const InteractionRecord& rec) {
        auto [uit, unew] = corpus.user_index.try_emplace(rec.user, corpus.num_users());
        if (unew) corpus.user_ids.push_back(rec.user);
        auto [iit, inew] = corpus.item_index.try_emplace(rec.item, corpus.num_items());
        if (inew) corpus.item_ids.push_back(rec.item);
        return std::make_pair(uit->second, iit->second);
    };
    for (const auto& rec : train_records) {
        auto p = intern(rec);
        corpus.interactions.push_back(p);
        corpus.train.push_back(p);
    }
    for (const auto& rec : test_records) {
        auto p = intern(rec);
        corpus.interactions.push_back(p);
        corpus.test.push_back(p);
    }

    auto raw_labels = read_labels_file(labels_path);
    std::map<std::string, std::string> by_item(raw_labels.begin(), raw_labels.end());
    std::map<std::string, int> class_index;
    for (const auto& [item, cls] : by_item) class_index.emplace(cls, 0);
    int next = 0;
    for (auto& [cls, idx] : class_index) {
        idx = next++;
        data.labels.class_names.push_back(cls);
    }
    for (const auto& [item, cls] : by_item) data.labels.labels[item] = class_index[cls];
    for (const auto& id : corpus.item_ids)
        if (!data.labels.labels.count(id))
            throw ValidationError("item '" + id + "' has no label in " + labels_path);

    if (need_features) {
        data.visual = read_feature_file(join(dir, "features_visual.feat"));
        data.textual = read_feature_file(join(dir, "features_textual.feat"));
        if (data.visual.modality != Modality::Visual || data.textual.modality != Modality::Textual)
            throw ValidationError(dir + ": feature files carry the wrong modality tags");
    }
    return data;
}

TrainConfig load_config(const std::string& config_path) {
    if (config_path.empty()) return TrainConfig{};
    return TrainConfig::from_kv(read_kv_config(config_path));
}

RunManifest base_manifest(const std::string& command, const TrainConfig& config) {
    RunManifest m;
    m.command = command;
    m.version = kVersion;
    m.seed = config.seed;
    m.config = config.to_kv();
    return m;
}

void add_input(RunManifest& m, const std::string& path) {
    m.input_digests[path] = file_digest(path);
}

void write_data_dir(const std::string& out, const SynthCorpus& synth) {
    const auto& corpus = synth.corpus;
    fs::create_directories(out);
    write_interactions_file(join(out, "interactions.tsv"), corpus, corpus.interactions);
    write_interactions_file(join(out, "train.tsv"), corpus, corpus.train);
    write_interactions_file(join(out, "test.tsv"), corpus, corpus.test);
    write_labels_file(join(out, "labels.tsv"), synth.labels, corpus.item_ids);
    write_feature_file(join(out, "features_visual.feat"), synth.visual, corpus.item_ids);
    write_feature_file(join(out, "features_textual.feat"), synth.textual, corpus.item_ids);
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int cmd_synth(const SynthConfig& sc, const std::string& out) {
    SynthCorpus synth = synth_corpus(sc);
    write_data_dir(out, synth);

    RunManifest manifest;
    manifest.command = "synth";
    manifest.version = kVersion;
    manifest.seed = sc.seed;
    manifest.config["num_users"] = std::to_string(sc.num_users);
    manifest.config["num_items"] = std::to_string(sc.num_items);
    manifest.config["num_classes"] = std::to_string(sc.num_classes);
    manifest.config["visual_dim"] = std::to_string(sc.visual_dim);
    manifest.config["textual_dim"] = std::to_string(sc.textual_dim);
    manifest.config["noise"] = std::to_string(sc.noise);
    manifest.config["proto_scale"] = std::to_string(sc.proto_scale);
    manifest.config["interactions_per_user"] = std::to_string(sc.interactions_per_user);
    manifest.config["in_class_prob"] = std::to_string(sc.in_class_prob);
    manifest.config["popularity_skew"] = std::to_string(sc.popularity_skew);
    manifest.config["train_fraction"] = std::to_string(sc.train_fraction);
    for (const char* name : {"interactions.tsv", "train.tsv", "test.tsv", "labels.tsv",
                             "features_visual.feat", "features_textual.feat"})
        manifest.outputs.push_back(join(out, name));
    write_manifest(join(out, "manifest.json"), manifest);

    std::cout << "synth: " << synth.corpus.num_users() << " users, " << synth.corpus.num_items()
              << " items, " << synth.corpus.interactions.size() << " interactions ("
              << synth.corpus.train.size() << " train / " << synth.corpus.test.size()
              << " test) -> " << out << "\n";
    return kExitOk;
}

int cmd_prepare(const std::string& interactions_path, const std::string& labels_path,
                const std::string& visual_path, const std::string& textual_path, int core,
                double train_frac, std::uint64_t seed, const std::string& out) {
    auto [raw, labels] = load_corpus(interactions_path, labels_path);
    InteractionCorpus filtered = k_core_filter(raw, core);
    InteractionCorpus split = split_corpus(filtered, train_frac, seed);
    SemanticLabels kept = restrict_labels(labels, split);

    fs::create_directories(out);
    write_interactions_file(join(out, "interactions.tsv"), split, split.interactions);
    write_interactions_file(join(out, "train.tsv"), split, split.train);
    write_interactions_file(join(out, "test.tsv"), split, split.test);
    write_labels_file(join(out, "labels.tsv"), kept, split.item_ids);

    RunManifest manifest;
    manifest.command = "prepare";
    manifest.version = kVersion;
    manifest.seed = seed;
    manifest.config["core"] = std::to_string(core);
    manifest.config["train_fraction"] = std::to_string(train_frac);
    add_input(manifest, interactions_path);
    add_input(manifest, labels_path);

    if (!visual_path.empty()) {
        GenericFeatureMatrix fm = read_feature_file(visual_path);
        write_feature_file(join(out, "features_visual.feat"), fm, split.item_ids);
        add_input(manifest, visual_path);
        manifest.outputs.push_back(join(out, "features_visual.feat"));
    }
    if (!textual_path.empty()) {
        GenericFeatureMatrix fm = read_feature_file(textual_path);
        write_feature_file(join(out, "features_textual.feat"), fm, split.item_ids);
        add_input(manifest, textual_path);
        manifest.outputs.push_back(join(out, "features_textual.feat"));
    }
    for (const char* name : {"interactions.tsv", "train.tsv", "test.tsv", "labels.tsv"})
        manifest.outputs.push_back(join(out, name));
    write_manifest(join(out, "manifest.json"), manifest);

    std::cout << "prepare: " << split.num_users() << " users, " << split.num_items() << " items, "
              << split.interactions.size() << " interactions after " << core << "-core ("
              << split.train.size() << " train / " << split.test.size() << " test) -> " << out
              << "\n";
    return kExitOk;
}

int cmd_train_teacher(const std::string& data_dir, const TrainConfig& config, bool no_fusion,
                      bool shallow, const std::string& out) {
    DataDir data = load_data_dir(data_dir, true);
    TeacherTrainResult result = train_teacher(data.corpus, data.labels, data.visual, data.textual,
                                              config, !no_fusion, shallow);

    fs::create_directories(out);
    result.model.save(join(out, "teacher.params"));
    write_metrics_log(join(out, "metrics_teacher.jsonl"), result.log);
    write_kv_config(join(out, "config.used"), config.to_kv());

    RunManifest manifest = base_manifest("train-teacher", config);
    manifest.config["with_fusion"] = no_fusion ? "false" : "true";
    manifest.config["shallow"] = shallow ? "true" : "false";
    for (const char* name :
         {"train.tsv", "test.tsv", "labels.tsv", "features_visual.feat", "features_textual.feat"})
        add_input(manifest, join(data_dir, name));
    manifest.outputs = {join(out, "teacher.params"), join(out, "metrics_teacher.jsonl"),
                        join(out, "config.used")};
    write_manifest(join(out, "manifest.json"), manifest);

    std::printf(
        "train-teacher: %d epochs, best val accuracy %.4f (epoch %d), train accuracy %.4f%s\n",
        result.epochs_run, result.best_val_accuracy, result.best_epoch,
        result.final_train_accuracy, result.diverged ? " [DIVERGED]" : "");
    return result.diverged ? kExitDivergence : kExitOk;
}

int cmd_train(const std::string& data_dir, const std::string& teacher_path,
              const std::string& variant_str, const TrainConfig& config, const std::string& out) {
    DataDir data = load_data_dir(data_dir, true);
    const AblationVariant variant = variant_from_name(variant_str);
    TeacherModel teacher = load_teacher_checkpoint(teacher_path);
    JointTrainResult result =
        train_joint(data.corpus, data.labels, data.visual, data.textual, teacher, variant, config);

    fs::create_directories(out);
    ParamStore store;
    result.student.collect_params(store);
    result.backbone->collect_params(store);
    write_param_container(join(out, "model.params"), store);
    if (config.teacher_mode == TeacherMode::Joint)
        result.teacher.save(join(out, "teacher_updated.params"));
    write_metrics_log(join(out, "metrics.jsonl"), result.log);
    write_kv_config(join(out, "config.used"), config.to_kv());

    RunManifest manifest = base_manifest("train", config);
    manifest.config["variant"] = variant_str;
    add_input(manifest, teacher_path);
    for (const char* name :
         {"train.tsv", "test.tsv", "labels.tsv", "features_visual.feat", "features_textual.feat"})
        add_input(manifest, join(data_dir, name));
    manifest.outputs = {join(out, "model.params"), join(out, "metrics.jsonl"),
                        join(out, "config.used")};
    write_manifest(join(out, "manifest.json"), manifest);

    std::printf("train[%s]: %d epochs, best val recall@%d %.4f (epoch %d), fd %.4f -> %.4f%s\n",
                variant_str.c_str(), result.epochs_run, config.eval_k, result.best_val_recall,
                result.best_epoch, result.fd_initial, result.fd_final,
                result.diverged ? " [DIVERGED]" : "");
    return result.diverged ? kExitDivergence : kExitOk;
}

int cmd_eval(const std::string& data_dir, const std::string& model_dir, int k,
             const std::string& out) {
    TrainConfig config = TrainConfig::from_kv(read_kv_config(join(model_dir, "config.used")));
    DataDir data = load_data_dir(data_dir, true);

    StudentConfig sc;
    sc.visual_dim = data.visual.dim;
    sc.textual_dim = data.textual.dim;
    sc.feature_dim = config.feature_dim;
    StudentModel student(sc);
    auto backbone = make_backbone(config.backbone);
    Rng rng(config.seed);
    student.init(rng);
    backbone->init(data.corpus.num_users(), data.corpus.num_items(), 2 * config.feature_dim,
                   config.embed_dim, rng);
    ParamStore store;
    student.collect_params(store);
    backbone->collect_params(store);
    load_param_container(join(model_dir, "model.params"), store);

    Matrix x_visual = data.visual.aligned(data.corpus);
    Matrix x_textual = data.textual.aligned(data.corpus);
    MetricReport report = evaluate(*backbone, student, data.corpus, x_visual, x_textual, k);

    fs::create_directories(out);
    write_text_file(join(out, "metrics.tsv"), metric_report_tsv(report));
    write_text_file(join(out, "metrics.json"), metric_report_json(report));

    RunManifest manifest = base_manifest("eval", config);
    manifest.config["k"] = std::to_string(k);
    add_input(manifest, join(model_dir, "model.params"));
    for (const char* name :
         {"train.tsv", "test.tsv", "labels.tsv", "features_visual.feat", "features_textual.feat"})
        add_input(manifest, join(data_dir, name));
    manifest.outputs = {join(out, "metrics.tsv"), join(out, "metrics.json")};
    write_manifest(join(out, "manifest.json"), manifest);

    std::cout << metric_report_tsv(report);
    std::printf("(%d users evaluated, %d skipped)\n", report.users_evaluated,
                report.users_skipped);
    return kExitOk;
}

int cmd_ablate(const std::string& data_dir, const TrainConfig& config, int num_seeds,
               const std::string& out) {
    DataDir data = load_data_dir(data_dir, true);
    AblationTable table =
        run_ablation_suite(data.corpus, data.labels, data.visual, data.textual, config, num_seeds);

    fs::create_directories(out);
    const std::string tsv = ablation_table_tsv(table);
    write_text_file(join(out, "ablation.tsv"), tsv);

    // Per-seed detail plus the paired test of full vs no_kd.
    const AblationRow* full_row = nullptr;
    const AblationRow* nokd_row = nullptr;
    for (const auto& row : table.rows) {
        if (row.variant == AblationVariant::Full) full_row = &row;
        if (row.variant == AblationVariant::NoKd) nokd_row = &row;
    }
    std::ostringstream detail;
    detail << "variant";
    for (auto seed : table.seeds) detail << "\tseed" << seed;
    detail << '\n';
    char buf[32];
    for (const auto& row : table.rows) {
        detail << variant_name(row.variant);
        for (double r : row.recalls) {
            std::snprintf(buf, sizeof buf, "\t%.4f", 100.0 * r);
            detail << buf;
        }
        detail << '\n';
    }
    if (full_row && nokd_row && full_row->recalls.size() == nokd_row->recalls.size() &&
        full_row->recalls.size() >= 2) {
        const double p = paired_t_test_pvalue(full_row->recalls, nokd_row->recalls);
        std::snprintf(buf, sizeof buf, "%.4f", p);
        detail << "# paired t-test (full vs no_kd recall): p = " << buf << '\n';
    }
    write_text_file(join(out, "ablation_per_seed.tsv"), detail.str());

    RunManifest manifest = base_manifest("ablate", config);
    manifest.config["seeds"] = std::to_string(num_seeds);
    for (const char* name :
         {"train.tsv", "test.tsv", "labels.tsv", "features_visual.feat", "features_textual.feat"})
        add_input(manifest, join(data_dir, name));
    manifest.outputs = {join(out, "ablation.tsv"), join(out, "ablation_per_seed.tsv")};
    write_manifest(join(out, "manifest.json"), manifest);

    std::cout << tsv;
    for (const auto& row : table.rows)
        if (!row.failure.empty()) return kExitValidation;
    return kExitOk;
}

int cmd_project(const std::string& data_dir, const std::string& teacher_path,
                const std::string& model_dir, const std::string& method_str, std::uint64_t seed,
                const std::string& out) {
    DataDir data = load_data_dir(data_dir, true);
    const ProjectionMethod method = projection_method_from_name(method_str);
    Matrix x_visual = data.visual.aligned(data.corpus);
    Matrix x_textual = data.textual.aligned(data.corpus);
    std::vector<int> y = data.labels.aligned(data.corpus);

    struct Slice {
        std::string source;
        std::string modality;
        Matrix features;
    };
    std::vector<Slice> slices;
    slices.push_back({"raw", "visual", x_visual});
    slices.push_back({"raw", "textual", x_textual});

    if (!teacher_path.empty()) {
        TeacherModel teacher = load_teacher_checkpoint(teacher_path);
        slices.push_back({"teacher", "visual", teacher_extract(teacher.visual, x_visual)});
        slices.push_back({"teacher", "textual", teacher_extract(teacher.textual, x_textual)});
    }
    if (!model_dir.empty()) {
        TrainConfig config = TrainConfig::from_kv(read_kv_config(join(model_dir, "config.used")));
        StudentConfig sc;
        sc.visual_dim = data.visual.dim;
        sc.textual_dim = data.textual.dim;
        sc.feature_dim = config.feature_dim;
        StudentModel student(sc);
        auto backbone = make_backbone(config.backbone);
        Rng rng(config.seed);
        student.init(rng);
        backbone->init(data.corpus.num_users(), data.corpus.num_items(), 2 * config.feature_dim,
                       config.embed_dim, rng);
        ParamStore store;
        student.collect_params(store);
        backbone->collect_params(store);
        load_param_container(join(model_dir, "model.params"), store);
        slices.push_back({"student", "visual", student_extract(student.visual, x_visual)});
        slices.push_back({"student", "textual", student_extract(student.textual, x_textual)});
    }

    fs::create_directories(out);
    std::vector<ProjectionRecord> bundle;
    std::ostringstream quality;
    quality << "source\tmodality\tsilhouette\n";
    char buf[32];
    RunManifest manifest;
    for (const auto& slice : slices) {
        Matrix coords = project_features(slice.features, method, seed);
        std::vector<ProjectionRecord> records;
        for (int i = 0; i < data.corpus.num_items(); ++i) {
            ProjectionRecord r;
            r.item_id = data.corpus.item_ids[std::size_t(i)];
            r.source = slice.source;
            r.modality = slice.modality;
            r.x = coords(i, 0);
            r.y = coords(i, 1);
            r.label = y[std::size_t(i)];
            records.push_back(std::move(r));
        }
        bundle.insert(bundle.end(), records.begin(), records.end());
        const double sil = cluster_quality(slice.features, y);
        std::snprintf(buf, sizeof buf, "%.4f", sil);
        quality << slice.source << '\t' << slice.modality << '\t' << buf << '\n';
        const std::string svg_path =
            join(out, "scatter_" + slice.source + "_" + slice.modality + ".svg");
        write_text_file(svg_path, scatter_svg(records, data.labels.num_classes()));
        manifest.outputs.push_back(svg_path);
    }
    write_projection_bundle(join(out, "bundle.tsv"), bundle);
    write_text_file(join(out, "silhouettes.tsv"), quality.str());

    manifest.command = "project";
    manifest.version = kVersion;
    manifest.seed = seed;
    manifest.config["method"] = method_str;
    for (const char* name :
         {"train.tsv", "test.tsv", "labels.tsv", "features_visual.feat", "features_textual.feat"})
        add_input(manifest, join(data_dir, name));
    if (!teacher_path.empty()) add_input(manifest, teacher_path);
    manifest.outputs.push_back(join(out, "bundle.tsv"));
    manifest.outputs.push_back(join(out, "silhouettes.tsv"));
    write_manifest(join(out, "manifest.json"), manifest);

    std::cout << quality.str();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic-guided feature distillation for multimodal recommendation"};
    app.require_subcommand(1);

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted classes");
    SynthConfig sc;
    std::string synth_out = "data";
    synth->add_option("--users", sc.num_users, "Number of users");
    synth->add_option("--items", sc.num_items, "Number of items");
    synth->add_option("--classes", sc.num_classes, "Number of semantic classes");
    synth->add_option("--visual-dim", sc.visual_dim, "Generic visual feature width");
    synth->add_option("--textual-dim", sc.textual_dim, "Generic textual feature width");
    synth->add_option("--noise", sc.noise, "Feature noise stddev");
    synth->add_option("--proto-scale", sc.proto_scale, "Class prototype stddev");
    synth->add_option("--interactions-per-user", sc.interactions_per_user, "Interactions per user");
    synth->add_option("--in-class-prob", sc.in_class_prob,
                      "Probability an interaction stays in a preferred class");
    synth->add_option("--popularity-skew", sc.popularity_skew,
                      "Zipf exponent for within-class item popularity");
    synth->add_option("--distractor-dims", sc.distractor_dims,
                      "Leading dims with per-item noise only (no class signal)");
    synth->add_option("--distractor-boost", sc.distractor_boost,
                      "Noise multiplier on distractor dims");
    synth->add_option("--train-frac", sc.train_fraction, "Per-user train fraction");
    synth->add_option("--seed", sc.seed, "Random seed");
    synth->add_option("--out", synth_out, "Output directory")->required();

    // --- prepare ---
    auto* prepare = app.add_subcommand("prepare", "Filter, densify and split a raw corpus");
    std::string p_inter, p_labels, p_visual, p_textual, p_out;
    int p_core = 5;
    double p_frac = 0.8;
    std::uint64_t p_seed = 1;
    prepare->add_option("--interactions", p_inter, "Interactions file")->required();
    prepare->add_option("--labels", p_labels, "Labels file")->required();
    prepare->add_option("--features-visual", p_visual, "Visual feature file (copied through)");
    prepare->add_option("--features-textual", p_textual, "Textual feature file (copied through)");
    prepare->add_option("--core", p_core, "k-core threshold");
    prepare->add_option("--train-frac", p_frac, "Per-user train fraction");
    prepare->add_option("--seed", p_seed, "Random seed");
    prepare->add_option("--out", p_out, "Output directory")->required();

    // --- train-teacher ---
    auto* tt = app.add_subcommand("train-teacher", "Pretrain the teacher on semantic labels");
    std::string tt_data, tt_config, tt_out;
    bool tt_no_fusion = false, tt_shallow = false;
    std::uint64_t tt_seed = 0;
    auto* tt_seed_opt = tt->add_option("--seed", tt_seed, "Seed override");
    tt->add_option("--data", tt_data, "Data directory")->required();
    tt->add_option("--config", tt_config, "Run config file");
    tt->add_flag("--no-fusion", tt_no_fusion, "Drop the fusion branch");
    tt->add_flag("--shallow", tt_shallow, "Single-layer teacher extractors");
    tt->add_option("--out", tt_out, "Output directory")->required();

    // --- train ---
    auto* tr = app.add_subcommand("train", "Jointly train the student and the backbone");
    std::string tr_data, tr_teacher, tr_config, tr_out, tr_backbone;
    std::string tr_variant = "full";
    std::uint64_t tr_seed = 0;
    auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "Seed override");
    tr->add_option("--data", tr_data, "Data directory")->required();
    tr->add_option("--teacher", tr_teacher, "Teacher checkpoint (teacher.params)")->required();
    tr->add_option("--variant", tr_variant, "full|ld_only|fd_only|no_fusion|shallow_teacher|no_kd");
    tr->add_option("--config", tr_config, "Run config file");
    tr->add_option("--backbone", tr_backbone, "Backbone override (pairwise|dot)");
    tr->add_option("--out", tr_out, "Output directory")->required();

    // --- eval ---
    auto* ev = app.add_subcommand("eval", "Top-N evaluation of a trained model");
    std::string ev_data, ev_model, ev_out;
    int ev_k = 20;
    ev->add_option("--data", ev_data, "Data directory")->required();
    ev->add_option("--model", ev_model, "Model run directory (model.params + config.used)")
        ->required();
    ev->add_option("--k", ev_k, "Ranking cutoff");
    ev->add_option("--out", ev_out, "Output directory")->required();

    // --- ablate ---
    auto* ab = app.add_subcommand("ablate", "Run the ablation variant suite");
    std::string ab_data, ab_config, ab_out;
    int ab_seeds = 5;
    std::uint64_t ab_seed = 0;
    auto* ab_seed_opt = ab->add_option("--seed", ab_seed, "Base seed override");
    ab->add_option("--data", ab_data, "Data directory")->required();
    ab->add_option("--config", ab_config, "Run config file");
    ab->add_option("--seeds", ab_seeds, "Number of seeds");
    ab->add_option("--out", ab_out, "Output directory")->required();

    // --- project ---
    auto* pj = app.add_subcommand("project", "Export 2-D projections of feature spaces");
    std::string pj_data, pj_teacher, pj_model, pj_out;
    std::string pj_method = "pca";
    std::uint64_t pj_seed = 1;
    pj->add_option("--data", pj_data, "Data directory")->required();
    pj->add_option("--teacher", pj_teacher, "Teacher checkpoint (optional)");
    pj->add_option("--model", pj_model, "Model run directory (optional)");
    pj->add_option("--method", pj_method, "pca|tsne");
    pj->add_option("--seed", pj_seed, "Random seed");
    pj->add_option("--out", pj_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            if (sc.num_users <= 0 || sc.num_items <= 0 || sc.num_classes <= 0 ||
                sc.visual_dim <= 0 || sc.textual_dim <= 0 || sc.interactions_per_user <= 0) {
                std::cerr << "synth: counts and dims must be positive\n";
                return kExitInput;
            }
            return cmd_synth(sc, synth_out);
        }
        if (prepare->parsed())
            return cmd_prepare(p_inter, p_labels, p_visual, p_textual, p_core, p_frac, p_seed,
                               p_out);
        if (tt->parsed()) {
            TrainConfig config = load_config(tt_config);
            if (tt_seed_opt->count() > 0) config.seed = tt_seed;
            return cmd_train_teacher(tt_data, config, tt_no_fusion, tt_shallow, tt_out);
        }
        if (tr->parsed()) {
            TrainConfig config = load_config(tr_config);
            if (tr_seed_opt->count() > 0) config.seed = tr_seed;
            if (!tr_backbone.empty()) config.backbone = tr_backbone;
            return cmd_train(tr_data, tr_teacher, tr_variant, config, tr_out);
        }
        if (ev->parsed()) return cmd_eval(ev_data, ev_model, ev_k, ev_out);
        if (ab->parsed()) {
            TrainConfig config = load_config(ab_config);
            if (ab_seed_opt->count() > 0) config.seed = ab_seed;
            return cmd_ablate(ab_data, config, ab_seeds, ab_out);
        }
        if (pj->parsed())
            return cmd_project(pj_data, pj_teacher, pj_model, pj_method, pj_seed, pj_out);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
