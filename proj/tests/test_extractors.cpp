#include <doctest.h>

#include "sgfd/errors.hpp"
#include "sgfd/extractors.hpp"
#include "test_helpers.hpp"

using namespace sgfd;

TEST_SUITE("extractors") {

TEST_CASE("plan_depth reproduces exact powers") {
    auto plan = plan_depth(4096, 64, 4);
    CHECK(plan.depth == 3);
    CHECK(plan.widths == std::vector<int>{4096, 1024, 256, 64});
}

TEST_CASE("plan_depth ceils non-integer logs") {
    auto plan = plan_depth(4096, 128, 4);  // log_4(32) = 2.5
    CHECK(plan.depth == 3);
    CHECK(plan.widths.front() == 4096);
    CHECK(plan.widths.back() == 128);
}

TEST_CASE("plan_depth floors at one layer when D equals d") {
    auto plan = plan_depth(64, 64, 4);
    CHECK(plan.depth == 1);
    CHECK(plan.widths == std::vector<int>{64, 64});
}

TEST_CASE("plan_depth rejects d > D and delta < 2") {
    CHECK_THROWS_AS(plan_depth(16, 32, 4), ValidationError);
    CHECK_THROWS_AS(plan_depth(16, 8, 1), ValidationError);
}

TEST_CASE("widths strictly decrease between the endpoints") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        int d = 1 + int(rng.next(64));
        int D = d + int(rng.next(4096));
        int delta = 2 + 2 * int(rng.next(4));
        auto plan = plan_depth(D, d, delta);
        CHECK(plan.widths.front() == D);
        CHECK(plan.widths.back() == d);
        for (std::size_t i = 1; i + 1 < plan.widths.size(); ++i) {
            CHECK(plan.widths[i] < plan.widths[i - 1]);
            CHECK(plan.widths[i] > d);
        }
    }
}

TEST_CASE("depth is monotone in D and antitone in delta") {
    for (int d : {16, 64}) {
        for (int delta : {2, 4, 6, 8}) {
            int prev = 0;
            for (int D = d; D <= 4096; D += 64) {
                int k = plan_depth(D, d, delta).depth;
                CHECK(k >= prev);
                prev = k;
            }
        }
        for (int D : {512, 4096}) {
            int prev = 1 << 20;
            for (int delta : {2, 4, 6, 8}) {
                int k = plan_depth(D, d, delta).depth;
                CHECK(k <= prev);
                prev = k;
            }
        }
    }
}

TEST_CASE("zero-parameter teacher maps everything to zero") {
    auto spec = make_teacher_spec(Modality::Visual, 16, 4, 2);
    Extractor teacher(spec);  // weights default to zero
    Rng rng(2);
    Matrix x = test::random_matrix(3, 16, rng);
    CHECK(teacher_extract(teacher, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("teacher extraction is deterministic") {
    auto spec = make_teacher_spec(Modality::Textual, 12, 3, 2);
    Extractor teacher(spec);
    Rng rng(3);
    teacher.init(rng);
    Matrix x = test::random_matrix(4, 12, rng);
    CHECK(teacher_extract(teacher, x) == teacher_extract(teacher, x));
}

TEST_CASE("two-layer teacher matches layer-by-layer composition") {
    ExtractorSpec spec;
    spec.modality = Modality::Visual;
    spec.kind = ExtractorKind::TeacherDeep;
    spec.input_dim = 4;
    spec.output_dim = 2;
    spec.widths = {4, 3, 2};
    Extractor teacher(spec);
    Rng rng(4);
    teacher.init(rng);
    Matrix x = test::random_matrix(5, 4, rng);

    Matrix expect = affine_forward(teacher.layers[1], affine_forward(teacher.layers[0], x));
    CHECK((teacher_extract(teacher, x) - expect).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(teacher.layers[0].activation == Activation::Relu);
    CHECK(teacher.layers[1].activation == Activation::Identity);
}

TEST_CASE("identity-like square student reproduces its input") {
    auto spec = make_student_spec(Modality::Visual, 3, 3);
    Extractor student(spec);
    student.layers[0].weight = Matrix::Identity(3, 3);
    Rng rng(5);
    Matrix x = test::random_matrix(6, 3, rng);
    CHECK((student_extract(student, x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mismatched teacher/student widths are a configuration error") {
    Extractor teacher(make_teacher_spec(Modality::Visual, 16, 4, 2));
    Extractor student(make_student_spec(Modality::Visual, 16, 8));
    CHECK_THROWS_AS(check_paired_dims(teacher, student), ConfigError);
    Extractor ok(make_student_spec(Modality::Visual, 16, 4));
    CHECK_NOTHROW(check_paired_dims(teacher, ok));
}

TEST_CASE("student extraction matches the affine oracle") {
    auto spec = make_student_spec(Modality::Textual, 5, 3);
    Extractor student(spec);
    Rng rng(6);
    student.init(rng);
    Matrix x = test::random_matrix(4, 5, rng);
    CHECK((student_extract(student, x) - affine_forward(student.layers[0], x))
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK(student.layers.size() == 1);
    CHECK(student.layers[0].activation == Activation::Identity);
}

TEST_CASE("kind checks reject the wrong extractor role") {
    Extractor teacher(make_teacher_spec(Modality::Visual, 8, 2, 2));
    Extractor student(make_student_spec(Modality::Visual, 8, 2));
    Matrix x = Matrix::Zero(1, 8);
    CHECK_THROWS_AS(teacher_extract(student, x), ConfigError);
    CHECK_THROWS_AS(student_extract(teacher, x), ConfigError);
}

}  // TEST_SUITE
