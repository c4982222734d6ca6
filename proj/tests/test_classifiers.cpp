#include <doctest.h>

#include "sgfd/classifiers.hpp"
#include "sgfd/errors.hpp"
#include "sgfd/model.hpp"
#include "test_helpers.hpp"

using namespace sgfd;

TEST_SUITE("classifiers") {

TEST_CASE("zero weights classify to the uniform distribution") {
    Classifier cls(ClassifierOwner::Visual, 5, 3);
    Rng rng(1);
    Matrix f = test::random_matrix(4, 3, rng);
    Matrix p = classify(cls, f, 1.0);
    for (int i = 0; i < 4; ++i)
        for (int c = 0; c < 5; ++c) CHECK(p(i, c) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("temperature preserves the argmax class") {
    Classifier cls(ClassifierOwner::Textual, 4, 6);
    Rng rng(2);
    cls.affine.init_xavier(rng);
    Matrix f = test::random_matrix(10, 6, rng, 2.0);
    Matrix p1 = classify(cls, f, 1.0);
    Matrix p5 = classify(cls, f, 5.0);
    for (int i = 0; i < 10; ++i) {
        Eigen::Index a1, a5;
        p1.row(i).maxCoeff(&a1);
        p5.row(i).maxCoeff(&a5);
        CHECK(a1 == a5);
    }
}

TEST_CASE("two-class classifier evaluates the softmax closed form") {
    Classifier cls(ClassifierOwner::Visual, 2, 1);
    cls.affine.weight << 2.0, 0.0;  // logits (2, 0) for f = (1)
    Matrix f = Matrix::Ones(1, 1);
    Matrix p = classify(cls, f, 1.0);
    CHECK(p(0, 0) == doctest::Approx(0.8808).epsilon(1e-4));
    CHECK(p(0, 1) == doctest::Approx(0.1192).epsilon(1e-4));
}

TEST_CASE("classify rejects non-positive temperature") {
    Classifier cls(ClassifierOwner::Visual, 2, 2);
    Matrix f = Matrix::Zero(1, 2);
    CHECK_THROWS_AS(classify(cls, f, 0.0), DomainError);
}

TEST_CASE("classify rows are valid distributions") {
    Classifier cls(ClassifierOwner::Fusion, 7, 4);
    Rng rng(3);
    cls.affine.init_xavier(rng);
    Matrix f = test::random_matrix(20, 4, rng, 3.0);
    Matrix p = classify(cls, f, 10.0);
    for (int i = 0; i < 20; ++i) {
        CHECK(p.row(i).minCoeff() >= 0.0);
        CHECK(std::abs(p.row(i).sum() - 1.0) <= 1e-9);
    }
}

TEST_CASE("fusion with zero weights and negative bias is the zero vector") {
    FusionBranch fusion(3, 2);
    fusion.affine.bias = Vector::Constant(3, -0.5);
    Rng rng(4);
    Matrix fm = test::random_matrix(4, 2, rng);
    Matrix fe = test::random_matrix(4, 2, rng);
    CHECK(fuse(fusion, fm, fe).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("block-symmetric fusion weights make the output swap invariant") {
    FusionBranch fusion(3, 2);
    Rng rng(5);
    Matrix block = test::random_matrix(3, 2, rng);
    fusion.affine.weight << block, block;  // [A A]
    fusion.affine.bias = test::random_matrix(3, 1, rng).col(0);
    Matrix fm = test::random_matrix(4, 2, rng);
    Matrix fe = test::random_matrix(4, 2, rng);
    CHECK((fuse(fusion, fm, fe) - fuse(fusion, fe, fm)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("fusion matches the concat-then-affine oracle") {
    FusionBranch fusion(4, 3);
    Rng rng(6);
    fusion.affine.init_xavier(rng);
    Matrix fm = test::random_matrix(5, 3, rng);
    Matrix fe = test::random_matrix(5, 3, rng);
    Matrix cat(5, 6);
    cat << fm, fe;
    Matrix expect = (cat * fusion.affine.weight.transpose()).rowwise() +
                    fusion.affine.bias.transpose();
    expect = expect.cwiseMax(0.0);
    CHECK((fuse(fusion, fm, fe) - expect).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("fusion rejects batch-size mismatches") {
    FusionBranch fusion(2, 2);
    CHECK_THROWS_AS(fuse(fusion, Matrix::Zero(3, 2), Matrix::Zero(4, 2)), DimensionError);
}

TEST_CASE("teacher and student paths share one classifier parameter object") {
    TeacherConfig tc;
    tc.visual_dim = 8;
    tc.textual_dim = 8;
    tc.feature_dim = 4;
    tc.num_classes = 3;
    tc.delta = 2;
    TeacherModel model(tc);
    Rng rng(7);
    model.init(rng);

    Matrix student_features = test::random_matrix(5, 4, rng);
    Matrix before = classify(model.cls_visual, student_features, 1.0);
    // Mutate through the teacher path; the student path sees the change.
    model.cls_visual.affine.weight.row(0).array() += 0.5;
    Matrix after = classify(model.cls_visual, student_features, 1.0);
    CHECK((before - after).cwiseAbs().maxCoeff() > 1e-6);
}

}  // TEST_SUITE
