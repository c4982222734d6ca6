#include <doctest.h>

#include <cmath>

#include "sgfd/classifiers.hpp"
#include "sgfd/errors.hpp"
#include "sgfd/extractors.hpp"
#include "sgfd/losses.hpp"
#include "test_helpers.hpp"

using namespace sgfd;

TEST_SUITE("losses") {

TEST_CASE("cross entropy of a one-hot correct prediction is zero") {
    Matrix p(2, 3);
    p << 1, 0, 0, 0, 0, 1;
    CHECK(cross_entropy(p, {0, 2}) == 0.0);
}

TEST_CASE("cross entropy closed forms") {
    Matrix half(1, 2);
    half << 0.5, 0.5;
    CHECK(cross_entropy(half, {0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Matrix uniform = Matrix::Constant(3, 7, 1.0 / 7.0);
    CHECK(cross_entropy(uniform, {0, 3, 6}) == doctest::Approx(std::log(7.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy rejects out-of-range labels") {
    Matrix p = Matrix::Constant(1, 3, 1.0 / 3.0);
    CHECK_THROWS_AS(cross_entropy(p, {3}), IndexError);
    CHECK_THROWS_AS(cross_entropy(p, {-1}), IndexError);
}

TEST_CASE("teacher_ce averages the two modality losses") {
    // Rows engineered so CE is exactly 0.2 and 0.6.
    Matrix pm(1, 2), pe(1, 2);
    pm << std::exp(-0.2), 1.0 - std::exp(-0.2);
    pe << std::exp(-0.6), 1.0 - std::exp(-0.6);
    CHECK(teacher_ce(pm, pe, {0}) == doctest::Approx(0.4).epsilon(1e-12));

    Matrix perfect(1, 2);
    perfect << 1, 0;
    CHECK(teacher_ce(perfect, perfect, {0}) == 0.0);
}

TEST_CASE("teacher_ce equals the termwise recomputation on random batches") {
    Rng rng(1);
    Matrix pm = test::random_prob_rows(6, 4, rng);
    Matrix pe = test::random_prob_rows(6, 4, rng);
    std::vector<int> y;
    for (int i = 0; i < 6; ++i) y.push_back(int(rng.next(4)));
    double expect = 0.0;
    for (int i = 0; i < 6; ++i)
        expect += -std::log(pm(i, y[std::size_t(i)])) - std::log(pe(i, y[std::size_t(i)]));
    expect /= 12.0;
    CHECK(teacher_ce(pm, pe, y) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("fused_ce is cross_entropy by definition") {
    Rng rng(2);
    Matrix pu = test::random_prob_rows(4, 8, rng);
    std::vector<int> y = {1, 0, 7, 3};
    CHECK(fused_ce(pu, y) == cross_entropy(pu, y));
    Matrix uniform = Matrix::Constant(2, 8, 1.0 / 8.0);
    CHECK(fused_ce(uniform, {0, 5}) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("ld_loss zero and closed-form cases") {
    Rng rng(3);
    Matrix same = test::random_prob_rows(3, 4, rng);
    CHECK(ld_loss(same, same, same, same) == 0.0);

    Matrix pt(1, 2), ps(1, 2), eq(1, 2);
    pt << 1, 0;
    ps << 0, 1;
    eq << 0.5, 0.5;
    CHECK(ld_loss(pt, ps, eq, eq) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("ld_loss matches the elementwise sum-of-squares oracle") {
    Rng rng(4);
    Matrix pmt = test::random_prob_rows(5, 3, rng);
    Matrix pms = test::random_prob_rows(5, 3, rng);
    Matrix pet = test::random_prob_rows(5, 3, rng);
    Matrix pes = test::random_prob_rows(5, 3, rng);
    double expect = 0.0;
    for (int i = 0; i < 5; ++i)
        for (int c = 0; c < 3; ++c)
            expect += std::pow(pmt(i, c) - pms(i, c), 2) + std::pow(pet(i, c) - pes(i, c), 2);
    expect /= 5.0;
    CHECK(ld_loss(pmt, pms, pet, pes) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("ld_loss never exceeds 4 for probability rows") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix a = test::random_prob_rows(4, 6, rng);
        Matrix b = test::random_prob_rows(4, 6, rng);
        Matrix c = test::random_prob_rows(4, 6, rng);
        Matrix d = test::random_prob_rows(4, 6, rng);
        const double v = ld_loss(a, b, c, d);
        CHECK(v >= 0.0);
        CHECK(v <= 4.0);
    }
}

TEST_CASE("fd_loss zero, closed-form, and non-negativity") {
    Rng rng(6);
    Matrix f = test::random_matrix(4, 3, rng);
    CHECK(fd_loss(f, f, f, f) == 0.0);

    Matrix ft(1, 2), fs(1, 2), eq(1, 2);
    ft << 1, 2;
    fs << 0, 0;
    eq << 3, 3;
    CHECK(fd_loss(ft, fs, eq, eq) == doctest::Approx(5.0).epsilon(1e-12));

    for (int trial = 0; trial < 20; ++trial) {
        Matrix a = test::random_matrix(3, 5, rng);
        Matrix b = test::random_matrix(3, 5, rng);
        CHECK(fd_loss(a, b, a, b) >= 0.0);
    }
}

TEST_CASE("fd_loss rejects width mismatches") {
    Matrix a = Matrix::Zero(2, 3), b = Matrix::Zero(2, 4);
    CHECK_THROWS_AS(fd_loss(a, b, a, a), DimensionError);
}

TEST_CASE("total_loss composes the weighted objective") {
    LossReport r = total_loss(1.0, 2.0, 1.0, 1.5, 0.5, {0.1, 0.01});
    CHECK(r.total == doctest::Approx(1.0 + 0.1 * 2.0 + 0.01 * 3.0).epsilon(1e-15));  // 1.23
    CHECK(r.total == doctest::Approx(1.23).epsilon(1e-12));

    LossReport zero = total_loss(0.7, 5.0, 5.0, 5.0, 5.0, {0.0, 0.0});
    CHECK(zero.total == 0.7);
}

TEST_CASE("total_loss is linear in lambda1") {
    Rng rng(7);
    const double rec = rng.uniform(), tce = rng.uniform(), fce = rng.uniform();
    const double ld = rng.uniform(), fd = rng.uniform();
    const double l1 = 0.3, l2 = 0.05;
    LossReport a = total_loss(rec, tce, fce, ld, fd, {l1, l2});
    LossReport b = total_loss(rec, tce, fce, ld, fd, {2.0 * l1, l2});
    CHECK(b.total - a.total == doctest::Approx(l1 * (ld + fd)).epsilon(1e-12));
}

TEST_CASE("total_loss names the non-finite term") {
    CHECK_THROWS_WITH_AS(
        total_loss(std::numeric_limits<double>::quiet_NaN(), 0, 0, 0, 0, {1, 1}),
        doctest::Contains("rec"), NumericError);
    CHECK_THROWS_WITH_AS(
        total_loss(0, 0, 0, std::numeric_limits<double>::infinity(), 0, {1, 1}),
        doctest::Contains("ld"), NumericError);
}

TEST_CASE("LossReport satisfies its arithmetic invariant") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        LossWeights w{rng.uniform() * 2.0, rng.uniform()};
        LossReport r = total_loss(rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(),
                                  rng.uniform(), w);
        const double recomposed =
            r.rec + r.weights.lambda1 * (r.ld + r.fd) + r.weights.lambda2 * (r.tce + r.fce);
        CHECK(std::abs(r.total - recomposed) <= 1e-9);
    }
}

// Gradient checks: each loss differentiated through the module stack it is
// computed from, against central finite differences.

TEST_CASE("ld/fd gradients flow to the student only; teacher grads stay zero") {
    Rng rng(9);
    const int d = 3, D = 5, C = 4, n = 4;
    Extractor teacher(make_teacher_spec(Modality::Visual, D, d, 2));
    Extractor student(make_student_spec(Modality::Visual, D, d));
    Classifier cls(ClassifierOwner::Visual, C, d);
    teacher.init(rng);
    student.init(rng);
    cls.affine.init_xavier(rng);
    Matrix x = test::random_matrix(n, D, rng);
    const double tau = 5.0;

    ParamStore student_params;
    for (std::size_t i = 0; i < student.layers.size(); ++i)
        student_params.add_layer("s" + std::to_string(i), student.layers[i]);

    auto eval = [&](bool with_grad) -> double {
        Matrix ft = teacher_extract(teacher, x);
        Matrix pt = classify(cls, ft, tau);
        if (!with_grad) {
            Matrix fs = student_extract(student, x);
            Matrix ps = classify(cls, fs, tau);
            return ld_loss(pt, ps, pt, ps) + fd_loss(ft, fs, ft, fs);
        }
        student.zero_grad();
        teacher.zero_grad();
        cls.affine.zero_grad();
        Matrix fs = student.forward_cached(x);
        AffineCache cls_cache;
        Matrix logits = cls.logits_cached(fs, cls_cache);
        Matrix ps = temp_softmax_rows(logits, tau);
        const double ld = ld_loss(pt, ps, pt, ps);
        const double fd = fd_loss(ft, fs, ft, fs);
        // Both modality slots use the same pair, hence the factor 2.
        Matrix dps = 2.0 * sq_dist_grad(ps, pt);
        Matrix dlogits = temp_softmax_backward(ps, dps, tau);
        Matrix d_fs = affine_backward(cls.affine, cls_cache, dlogits);
        d_fs += 2.0 * sq_dist_grad(fs, ft);
        student.backward(d_fs);
        return ld + fd;
    };

    auto report = grad_check(eval, student_params, 1e-3, 1e-4);
    CHECK(report.ok());

    // Stop-gradient contract: the implemented backward leaves teacher slots
    // untouched even though teacher values enter the loss.
    eval(true);
    for (const auto& layer : teacher.layers) {
        CHECK(layer.grad_weight.cwiseAbs().maxCoeff() == 0.0);
        CHECK(layer.grad_bias.cwiseAbs().maxCoeff() == 0.0);
    }
    // And perturbing the teacher does change the loss value.
    const double before = eval(false);
    teacher.layers[0].weight.array() += 0.05;
    CHECK(eval(false) != doctest::Approx(before).epsilon(1e-12));
}

}  // TEST_SUITE
