#include <doctest.h>

#include <random>

#include "hdlr/errors.hpp"
#include "hdlr/model.hpp"
#include "test_util.hpp"

using namespace hdlr;
using hdlr::testing::random_matrix;
using hdlr::testing::random_psd;

namespace {

// Projection formulas evaluated literally with dense inverses.
std::pair<MatrixXd, MatrixXd> brute_force_sscp(const LinearModel& m) {
    const MatrixXd xxt_inv = (m.X * m.X.transpose()).inverse();
    const MatrixXd inner = (m.C.transpose() * xxt_inv * m.C).inverse();
    const MatrixXd p1 = m.X.transpose() * xxt_inv * m.C * inner * m.C.transpose() * xxt_inv * m.X;
    const MatrixXd p2 = MatrixXd::Identity(m.n_total(), m.n_total()) - m.X.transpose() * xxt_inv * m.X;
    const int n2 = m.n_total() - m.m();
    return {m.Y * p1 * m.Y.transpose() / m.n1(), m.Y * p2 * m.Y.transpose() / n2};
}

}  // namespace

TEST_CASE("build_sscp on the one-dimensional toy model") {
    LinearModel m;
    m.Y = MatrixXd::Ones(1, 2);
    m.X = MatrixXd::Ones(1, 2);
    m.C = MatrixXd::Ones(1, 1);
    const SscpPair s = build_sscp(m);
    CHECK(s.W1(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(std::abs(s.W2(0, 0)) < 1e-14);
    CHECK(s.n1 == 1);
    CHECK(s.n2 == 1);
}

TEST_CASE("zero response gives zero SSCP matrices") {
    std::mt19937_64 rng(1);
    LinearModel m;
    m.Y = MatrixXd::Zero(3, 9);
    m.X = random_matrix(4, 9, rng);
    m.C = random_matrix(4, 2, rng);
    const SscpPair s = build_sscp(m);
    CHECK(s.W1.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.W2.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.w2_eigs.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_sscp matches the dense projection formulas") {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 5; ++rep) {
        LinearModel m;
        m.Y = random_matrix(3, 12, rng);
        m.X = random_matrix(4, 12, rng);
        m.C = random_matrix(4, 2, rng);
        const SscpPair s = build_sscp(m);
        const auto [w1, w2] = brute_force_sscp(m);
        CHECK((s.W1 - w1).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((s.W2 - w2).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(s.n2 == 8);
        for (int j = 1; j < 3; ++j) CHECK(s.w2_eigs(j) <= s.w2_eigs(j - 1));
    }
}

TEST_CASE("residual_factor reproduces W2") {
    std::mt19937_64 rng(3);
    LinearModel m;
    m.Y = random_matrix(5, 20, rng);
    m.X = random_matrix(6, 20, rng);
    m.C = random_matrix(6, 3, rng);
    const SscpPair s = build_sscp(m);
    const MatrixXd e = residual_factor(m);
    REQUIRE(e.cols() == 14);
    CHECK((e * e.transpose() / 14.0 - s.W2).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rank and estimability failures") {
    std::mt19937_64 rng(4);
    LinearModel m;
    m.Y = random_matrix(2, 10, rng);
    m.X = random_matrix(3, 10, rng);
    m.X.row(2) = m.X.row(0) + m.X.row(1);
    m.C = random_matrix(3, 1, rng);
    try {
        build_sscp(m);
        FAIL("expected RankDeficient");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RankDeficient);
    }

    m.X = random_matrix(3, 10, rng);
    m.C = MatrixXd::Ones(3, 2);
    try {
        build_sscp(m);
        FAIL("expected RankDeficient for C");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RankDeficient);
    }

    m.C = random_matrix(3, 1, rng);
    m.X = random_matrix(3, 3, rng);
    m.Y = random_matrix(2, 3, rng);
    CHECK_THROWS_AS(build_sscp(m), Error);
}

TEST_CASE("largest_root scalar and zero-numerator cases") {
    const SscpPair s = make_sscp(MatrixXd::Constant(1, 1, 2.0), MatrixXd::Zero(1, 1), 1, 1);
    CHECK(largest_root(s, 1.0).ell_max == doctest::Approx(2.0).epsilon(1e-14));

    std::mt19937_64 rng(5);
    const MatrixXd w2 = random_psd(4, 6, rng);
    const SscpPair z = make_sscp(MatrixXd::Zero(4, 4), w2, 2, 6);
    CHECK(largest_root(z, 0.3, 2).ell_max == 0.0);
    CHECK_THROWS_AS(largest_root(z, 0.0), Error);
    CHECK_THROWS_AS(largest_root(z, 1.0, 3), Error);
}

TEST_CASE("largest_root agrees with the nonsymmetric product") {
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 10; ++rep) {
        const MatrixXd w1 = random_psd(5, 3, rng);
        const MatrixXd w2 = random_psd(5, 8, rng);
        const double lambda = 0.2 + rep * 0.3;
        const SscpPair s = make_sscp(w1, w2, 3, 8);
        const LargestRootResult r = largest_root(s, lambda, 3);
        const MatrixXd f = w1 * (w2 + lambda * MatrixXd::Identity(5, 5)).inverse();
        Eigen::EigenSolver<MatrixXd> es(f);
        VectorXd ev = es.eigenvalues().real();
        std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
        for (int k = 0; k < 3; ++k) CHECK(std::abs(r.top_k(k) - ev(k)) < 1e-8 * std::max(1.0, ev(0)));
        CHECK(r.ell_max == r.top_k(0));
    }
}

TEST_CASE("largest_root is rotation invariant and nonincreasing in lambda") {
    std::mt19937_64 rng(7);
    const MatrixXd w1 = random_psd(6, 2, rng);
    const MatrixXd w2 = random_psd(6, 10, rng);
    Eigen::HouseholderQR<MatrixXd> qr(random_matrix(6, 6, rng));
    const MatrixXd o = qr.householderQ();
    const SscpPair a = make_sscp(w1, w2, 2, 10);
    const SscpPair b = make_sscp(o * w1 * o.transpose(), o * w2 * o.transpose(), 2, 10);
    double previous = std::numeric_limits<double>::infinity();
    for (double lambda : {0.01, 0.1, 0.5, 1.0, 3.0, 10.0}) {
        const double la = largest_root(a, lambda).ell_max;
        CHECK(std::abs(la - largest_root(b, lambda).ell_max) < 1e-8);
        CHECK(la <= previous + 1e-12);
        CHECK(la > 0.0);
        previous = la;
    }
}

TEST_CASE("make_sscp rejects asymmetric input") {
    MatrixXd w = MatrixXd::Identity(2, 2);
    w(0, 1) = 0.5;
    CHECK_THROWS_AS(make_sscp(w, MatrixXd::Identity(2, 2), 1, 1), Error);
}
