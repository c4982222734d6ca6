#include "sgfd/classifiers.hpp"

#include <sstream>

#include "sgfd/errors.hpp"

namespace sgfd {

std::string owner_name(ClassifierOwner owner) {
    switch (owner) {
        case ClassifierOwner::Visual: return "visual";
        case ClassifierOwner::Textual: return "textual";
        case ClassifierOwner::Fusion: return "fusion";
    }
    return "?";
}

Classifier::Classifier(ClassifierOwner o, Eigen::Index num_classes, Eigen::Index feature_dim)
    : owner(o), affine(num_classes, feature_dim, Activation::Identity) {}

Matrix Classifier::logits(const Matrix& features) const {
    return affine_forward(affine, features);
}

Matrix Classifier::logits_cached(const Matrix& features, AffineCache& cache) {
    return affine_forward_cached(affine, features, cache);
}

Matrix classify(const Classifier& classifier, const Matrix& features, double tau) {
    if (!(tau > 0.0)) throw DomainError("classify: temperature must be > 0");
    return temp_softmax_rows(classifier.logits(features), tau);
}

FusionBranch::FusionBranch(Eigen::Index fused_dim, Eigen::Index feature_dim)
    : affine(fused_dim, 2 * feature_dim, Activation::Relu) {}

Matrix concat_features(const Matrix& f_visual, const Matrix& f_textual) {
    if (f_visual.rows() != f_textual.rows()) {
        std::ostringstream msg;
        msg << "fuse: batch-size mismatch (" << f_visual.rows() << " vs " << f_textual.rows() << ")";
        throw DimensionError(msg.str());
    }
    Matrix cat(f_visual.rows(), f_visual.cols() + f_textual.cols());
    cat << f_visual, f_textual;
    return cat;
}

Matrix fuse(const FusionBranch& fusion, const Matrix& f_visual, const Matrix& f_textual) {
    return affine_forward(fusion.affine, concat_features(f_visual, f_textual));
}

Matrix fuse_cached(FusionBranch& fusion, const Matrix& f_visual, const Matrix& f_textual,
                   AffineCache& cache) {
    return affine_forward_cached(fusion.affine, concat_features(f_visual, f_textual), cache);
}

}  // namespace sgfd
