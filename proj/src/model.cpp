#include "sgfd/model.hpp"

#include "sgfd/errors.hpp"
#include "sgfd/io.hpp"

namespace sgfd {

namespace {

ExtractorSpec teacher_spec(Modality m, int input_dim, const TeacherConfig& config) {
    if (config.shallow) {
        ExtractorSpec spec = make_student_spec(m, input_dim, config.feature_dim);
        spec.kind = ExtractorKind::TeacherDeep;  // role stays teacher
        spec.delta = config.delta;
        return spec;
    }
    return make_teacher_spec(m, input_dim, config.feature_dim, config.delta);
}

void add_extractor(ParamStore& store, const std::string& prefix, Extractor& ex) {
    for (std::size_t i = 0; i < ex.layers.size(); ++i)
        store.add_layer(prefix + ".layer" + std::to_string(i), ex.layers[i]);
}

}  // namespace

TeacherModel::TeacherModel(const TeacherConfig& cfg)
    : config(cfg),
      visual(teacher_spec(Modality::Visual, cfg.visual_dim, cfg)),
      textual(teacher_spec(Modality::Textual, cfg.textual_dim, cfg)),
      cls_visual(ClassifierOwner::Visual, cfg.num_classes, cfg.feature_dim),
      cls_textual(ClassifierOwner::Textual, cfg.num_classes, cfg.feature_dim) {
    if (cfg.num_classes < 2) throw ConfigError("TeacherModel: need at least 2 classes");
    if (cfg.with_fusion) {
        // Fused width d_u = d.
        fusion = FusionBranch(cfg.feature_dim, cfg.feature_dim);
        cls_fusion = Classifier(ClassifierOwner::Fusion, cfg.num_classes, cfg.feature_dim);
    }
}

void TeacherModel::init(Rng& rng) {
    visual.init(rng);
    textual.init(rng);
    cls_visual.affine.init_xavier(rng);
    cls_textual.affine.init_xavier(rng);
    if (config.with_fusion) {
        fusion.affine.init_xavier(rng);
        cls_fusion.affine.init_xavier(rng);
    }
}

void TeacherModel::zero_grad() {
    visual.zero_grad();
    textual.zero_grad();
    cls_visual.affine.zero_grad();
    cls_textual.affine.zero_grad();
    if (config.with_fusion) {
        fusion.affine.zero_grad();
        cls_fusion.affine.zero_grad();
    }
}

void TeacherModel::collect_extractor_params(ParamStore& store) {
    add_extractor(store, "teacher.visual", visual);
    add_extractor(store, "teacher.textual", textual);
}

void TeacherModel::collect_classifier_params(ParamStore& store) {
    store.add_layer("cls.visual", cls_visual.affine);
    store.add_layer("cls.textual", cls_textual.affine);
    if (config.with_fusion) {
        store.add_layer("cls.fusion", cls_fusion.affine);
        store.add_layer("fusion.affine", fusion.affine);
    }
}

void TeacherModel::collect_params(ParamStore& store) {
    collect_extractor_params(store);
    collect_classifier_params(store);
}

void TeacherModel::save(const std::string& path) const {
    ParamStore store;
    const_cast<TeacherModel*>(this)->collect_params(store);
    write_param_container(path, store);
}

void TeacherModel::load(const std::string& path) {
    ParamStore store;
    collect_params(store);
    load_param_container(path, store);
}

TeacherModel load_teacher_checkpoint(const std::string& path) {
    auto entries = read_param_container(path);
    auto find = [&](const std::string& name) -> const NamedMatrix* {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    };
    auto widths_of = [&](const std::string& prefix) {
        std::vector<int> widths;
        for (int layer = 0;; ++layer) {
            const auto* w = find(prefix + ".layer" + std::to_string(layer) + ".weight");
            if (!w) break;
            if (layer == 0) widths.push_back(int(w->value.cols()));
            widths.push_back(int(w->value.rows()));
        }
        if (widths.size() < 2)
            throw ConfigError(path + ": no layers found under '" + prefix + "'");
        return widths;
    };

    const auto* cls_v = find("cls.visual.weight");
    if (!cls_v) throw ConfigError(path + ": not a teacher checkpoint (no cls.visual.weight)");
    const int num_classes = int(cls_v->value.rows());
    const int feature_dim = int(cls_v->value.cols());
    const auto visual_widths = widths_of("teacher.visual");
    const auto textual_widths = widths_of("teacher.textual");
    const bool with_fusion = find("fusion.affine.weight") != nullptr;

    TeacherModel model;
    model.config.visual_dim = visual_widths.front();
    model.config.textual_dim = textual_widths.front();
    model.config.feature_dim = feature_dim;
    model.config.num_classes = num_classes;
    model.config.with_fusion = with_fusion;
    model.config.shallow = visual_widths.size() == 2 && textual_widths.size() == 2;

    auto build = [](Modality m, const std::vector<int>& widths) {
        ExtractorSpec spec;
        spec.modality = m;
        spec.kind = ExtractorKind::TeacherDeep;
        spec.input_dim = widths.front();
        spec.output_dim = widths.back();
        spec.widths = widths;
        return Extractor(spec);
    };
    model.visual = build(Modality::Visual, visual_widths);
    model.textual = build(Modality::Textual, textual_widths);
    model.cls_visual = Classifier(ClassifierOwner::Visual, num_classes, feature_dim);
    model.cls_textual = Classifier(ClassifierOwner::Textual, num_classes, feature_dim);
    if (with_fusion) {
        const auto* fw = find("fusion.affine.weight");
        const int fused_dim = int(fw->value.rows());
        if (fw->value.cols() != 2 * feature_dim)
            throw ConfigError(path + ": fusion input width is not twice the feature width");
        model.fusion = FusionBranch(fused_dim, feature_dim);
        model.cls_fusion = Classifier(ClassifierOwner::Fusion, num_classes, fused_dim);
    }
    model.load(path);
    return model;
}

StudentModel::StudentModel(const StudentConfig& cfg)
    : config(cfg),
      visual(make_student_spec(Modality::Visual, cfg.visual_dim, cfg.feature_dim)),
      textual(make_student_spec(Modality::Textual, cfg.textual_dim, cfg.feature_dim)) {}

void StudentModel::init(Rng& rng) {
    visual.init(rng);
    textual.init(rng);
}

void StudentModel::zero_grad() {
    visual.zero_grad();
    textual.zero_grad();
}

void StudentModel::collect_params(ParamStore& store) {
    add_extractor(store, "student.visual", visual);
    add_extractor(store, "student.textual", textual);
}

}  // namespace sgfd
