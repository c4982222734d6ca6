#pragma once

#include <string>

#include "sgfd/classifiers.hpp"
#include "sgfd/extractors.hpp"

namespace sgfd {

// ---------------------------------------------------------------------------
// Teacher: deep per-modality extractors, per-owner classifiers, and the
// fusion branch. The visual/textual classifiers are shared with the student
// path (same parameter objects).
// ---------------------------------------------------------------------------
struct TeacherConfig {
    int visual_dim = 0;
    int textual_dim = 0;
    int feature_dim = 128;
    int num_classes = 0;
    int delta = 4;
    bool with_fusion = true;  // off for the no_fusion ablation
    bool shallow = false;     // on for the shallow_teacher ablation
};

struct TeacherModel {
    TeacherConfig config;
    Extractor visual;
    Extractor textual;
    Classifier cls_visual;
    Classifier cls_textual;
    FusionBranch fusion;      // valid only when config.with_fusion
    Classifier cls_fusion;    // valid only when config.with_fusion

    TeacherModel() = default;
    explicit TeacherModel(const TeacherConfig& config);

    void init(Rng& rng);
    void zero_grad();

    // Extractor parameters only (what "freezing the teacher" freezes along
    // with the classifiers; collected separately so trainers can choose).
    void collect_extractor_params(ParamStore& store);
    void collect_classifier_params(ParamStore& store);
    void collect_params(ParamStore& store);  // both of the above

    void save(const std::string& path) const;
    void load(const std::string& path);
};

// Reconstructs a teacher from a checkpoint alone; the layer plan, class
// count, feature width, and fusion presence are all recovered from the
// stored parameter shapes.
TeacherModel load_teacher_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Student: shallow per-modality extractors embedded in the recommendation
// model. Classifiers are borrowed from the teacher.
// ---------------------------------------------------------------------------
struct StudentConfig {
    int visual_dim = 0;
    int textual_dim = 0;
    int feature_dim = 128;
};

struct StudentModel {
    StudentConfig config;
    Extractor visual;
    Extractor textual;

    StudentModel() = default;
    explicit StudentModel(const StudentConfig& config);

    void init(Rng& rng);
    void zero_grad();
    void collect_params(ParamStore& store);
};

}  // namespace sgfd
