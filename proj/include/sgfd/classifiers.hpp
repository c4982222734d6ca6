#pragma once

#include <string>

#include "sgfd/diffcore.hpp"

namespace sgfd {

enum class ClassifierOwner { Visual, Textual, Fusion };

std::string owner_name(ClassifierOwner owner);

// Per-owner affine classifier over d-dim features; probabilities come from a
// temperature softmax over its logits. The visual/textual instances are
// shared between the teacher and student paths (one parameter object each).
struct Classifier {
    ClassifierOwner owner = ClassifierOwner::Visual;
    DenseLayer affine;  // C x d, identity activation

    Classifier() = default;
    Classifier(ClassifierOwner owner, Eigen::Index num_classes, Eigen::Index feature_dim);

    Eigen::Index num_classes() const { return affine.out_dim(); }
    Eigen::Index feature_dim() const { return affine.in_dim(); }

    Matrix logits(const Matrix& features) const;
    Matrix logits_cached(const Matrix& features, AffineCache& cache);
};

// P = temp_softmax((W f + b) / tau) row-wise. tau <= 0 -> DomainError.
Matrix classify(const Classifier& classifier, const Matrix& features, double tau);

// Fusion branch: f_u = ReLU(W_u [f_m ; f_e] + b_u), concatenation order
// visual-then-textual.
struct FusionBranch {
    DenseLayer affine;  // d_u x 2d, relu activation

    FusionBranch() = default;
    FusionBranch(Eigen::Index fused_dim, Eigen::Index feature_dim);

    Eigen::Index fused_dim() const { return affine.out_dim(); }
};

Matrix fuse(const FusionBranch& fusion, const Matrix& f_visual, const Matrix& f_textual);
Matrix fuse_cached(FusionBranch& fusion, const Matrix& f_visual, const Matrix& f_textual,
                   AffineCache& cache);

Matrix concat_features(const Matrix& f_visual, const Matrix& f_textual);

}  // namespace sgfd
