#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "isgfan/objectives.hpp"
#include "support.hpp"

using namespace isgfan;
using namespace isgfan::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_simplex_rows(Index n, Index c, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(1.0, 1.0);
  MatrixXd p(n, c);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < c; ++j) p(i, j) = g(rng) + 1e-3;
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

MatrixXd random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  MatrixXd m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Frobenius norm by explicit summation over entries of A * B^T.
double frob_of_product(const MatrixXd& a, const MatrixXd& b, bool minus_identity) {
  double s = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) {
      double dot = 0.0;
      for (Index k = 0; k < a.cols(); ++k) dot += a(i, k) * b(j, k);
      if (minus_identity && i == j) dot -= 1.0;
      s += dot * dot;
    }
  }
  return std::sqrt(s);
}

template <typename F>
double central_difference(MatrixXd& x, Index i, F&& f, double h = 1e-6) {
  const double saved = x.data()[i];
  x.data()[i] = saved + h;
  const double up = f();
  x.data()[i] = saved - h;
  const double down = f();
  x.data()[i] = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("cross_entropy examples") {
  MatrixXd onehot(1, 2);
  onehot << 1, 0;
  MatrixXd perfect(1, 2);
  perfect << 1, 0;
  CHECK(cross_entropy(perfect, onehot) == doctest::Approx(0.0).epsilon(1e-11));
  MatrixXd uniform = MatrixXd::Constant(1, 2, 0.5);
  CHECK(cross_entropy(uniform, onehot) == doctest::Approx(std::log(2.0)).epsilon(1e-11));
  MatrixXd p(1, 2);
  p << 0.7, 0.3;
  CHECK(cross_entropy(p, onehot) == doctest::Approx(0.356675).epsilon(1e-6));
  CHECK_THROWS_AS(cross_entropy(MatrixXd(0, 2), MatrixXd(0, 2)), std::invalid_argument);
}

TEST_CASE("cross_entropy matches a brute-force sum and is nonnegative") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const Index n = 1 + t % 7, c = 2 + t % 5;
    const MatrixXd p = random_simplex_rows(n, c, rng);
    MatrixXd y = MatrixXd::Zero(n, c);
    double oracle = 0.0;
    for (Index i = 0; i < n; ++i) {
      const Index k = (i * 3 + t) % c;
      y(i, k) = 1.0;
      oracle += -std::log(p(i, k) + 1e-12);
    }
    oracle /= double(n);
    CHECK(std::abs(cross_entropy(p, y) - oracle) < 1e-9);
    CHECK(cross_entropy(p, y) >= 0.0);
  }
}

TEST_CASE("softmax cross-entropy on logits equals cross_entropy of softmax and has correct gradient") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    MatrixXd z = random_matrix(4, 3, rng) * 3.0;
    const std::vector<int> labels{0, 2, 1, 2};
    MatrixXd y = MatrixXd::Zero(4, 3);
    for (Index i = 0; i < 4; ++i) y(i, labels[std::size_t(i)]) = 1.0;
    const auto r = softmax_cross_entropy<double>(z, labels);
    double oracle = 0.0;
    for (Index i = 0; i < 4; ++i) {
      double s = 0.0;
      for (Index k = 0; k < 3; ++k) s += std::exp(z(i, k));
      oracle += (std::log(s) - z(i, labels[std::size_t(i)])) / 4.0;
    }
    CHECK(std::abs(r.value - oracle) < 1e-9);
    CHECK(std::abs(r.value - cross_entropy(softmax_rows<double>(z), y)) < 1e-6);
    for (Index i = 0; i < z.size(); ++i) {
      const double num = central_difference(z, i, [&] { return softmax_cross_entropy<double>(z, labels).value; });
      CHECK(relative_error(r.grad.data()[i], num) < 1e-3);
    }
  }
  CHECK_THROWS(softmax_cross_entropy<double>(MatrixXd::Zero(2, 3), {0, 3}));
}

TEST_CASE("orthogonality examples") {
  MatrixXd e = MatrixXd::Identity(4, 4);
  FeatureMatrix<double> fr{e.topRows(2), true}, fi{e.bottomRows(2), true};
  auto t = orthogonality_loss(fr, fi);
  CHECK(t.l_co == doctest::Approx(0.0));
  CHECK(t.l_so == doctest::Approx(0.0));
  CHECK(t.l_orth == doctest::Approx(0.0));

  FeatureMatrix<double> one{MatrixXd::Constant(1, 1, 1.0), true};
  t = orthogonality_loss(one, one);
  CHECK(t.l_co == doctest::Approx(1.0));
  CHECK(t.l_so == doctest::Approx(0.0));
  CHECK(t.l_orth == doctest::Approx(1.0));

  FeatureMatrix<double> two{e.topRows(2), true};
  t = orthogonality_loss(two, two);
  CHECK(t.l_co == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(t.l_so == doctest::Approx(0.0));

  FeatureMatrix<double> raw{MatrixXd::Constant(2, 3, 1.0), false};
  CHECK_THROWS_WITH(orthogonality_loss(raw, raw), "rows must be unit norm");
}

TEST_CASE("orthogonality matches brute force, is symmetric and column-permutation invariant") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const Index ra = 1 + t % 4, rb = 1 + (t / 4) % 4, cols = 2 + t % 6;
    const auto a = normalize_rows<double>(random_matrix(ra, cols, rng));
    const auto b = normalize_rows<double>(random_matrix(rb, cols, rng));
    const auto terms = orthogonality_loss(a, b);
    const double co = frob_of_product(a.values, b.values, false);
    const double so = 0.5 * (frob_of_product(a.values, a.values, true) + frob_of_product(b.values, b.values, true));
    CHECK(std::abs(terms.l_co - co) < 1e-9);
    CHECK(std::abs(terms.l_so - so) < 1e-9);
    CHECK(std::abs(terms.l_orth - co - so) < 1e-9);
    const auto swapped = orthogonality_loss(b, a);
    CHECK(std::abs(swapped.l_orth - terms.l_orth) < 1e-12);

    Eigen::PermutationMatrix<Eigen::Dynamic> perm(cols);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + cols, rng);
    FeatureMatrix<double> pa{a.values * perm, true}, pb{b.values * perm, true};
    CHECK(std::abs(orthogonality_loss(pa, pb).l_co - terms.l_co) < 1e-12);
  }
}

TEST_CASE("orthogonality gradient through row normalization matches finite differences") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    MatrixXd ra = random_matrix(3, 5, rng), rb = random_matrix(2, 5, rng);
    auto value = [&] {
      return orthogonality_loss(normalize_rows<double>(ra), normalize_rows<double>(rb)).l_orth;
    };
    const auto na = normalize_rows<double>(ra), nb = normalize_rows<double>(rb);
    const auto g = orthogonality_loss_with_grad<double>(na.values, nb.values);
    const MatrixXd da = normalize_rows_backward<double>(ra, na.values, g.d_fr);
    const MatrixXd db = normalize_rows_backward<double>(rb, nb.values, g.d_fi);
    for (Index i = 0; i < ra.size(); ++i) CHECK(relative_error(da.data()[i], central_difference(ra, i, value)) < 1e-3);
    for (Index i = 0; i < rb.size(); ++i) CHECK(relative_error(db.data()[i], central_difference(rb, i, value)) < 1e-3);
  }
}

TEST_CASE("reconstruction examples, oracle and gradient") {
  MatrixXd x = MatrixXd::Random(2, 4);
  CHECK(reconstruction_loss(x, x) == 0.0);
  CHECK(reconstruction_loss(MatrixXd(MatrixXd::Zero(1, 4)), MatrixXd(MatrixXd::Ones(1, 4))) == doctest::Approx(1.0));
  MatrixXd a = MatrixXd::Zero(2, 4), b(2, 4);
  b << std::sqrt(0.5), std::sqrt(0.5), std::sqrt(0.5), std::sqrt(0.5), 0.5, 0.5, 0.5, 0.5;
  CHECK(reconstruction_loss(a, b) == doctest::Approx(0.75));
  CHECK_THROWS_WITH(reconstruction_loss(MatrixXd(MatrixXd::Zero(2, 4)), MatrixXd(MatrixXd::Zero(2, 3))), "reconstruction_loss: shape mismatch");

  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const Index n = 1 + t % 5, l = 1 + t % 9;
    const MatrixXd u = random_matrix(n, l, rng), v = random_matrix(n, l, rng);
    double oracle = 0.0;
    for (Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Index k = 0; k < l; ++k) s += (u(i, k) - v(i, k)) * (u(i, k) - v(i, k));
      oracle += s / double(l);
    }
    CHECK(std::abs(reconstruction_loss(u, v) - oracle) < 1e-9);
  }
  MatrixXd u = random_matrix(3, 6, rng), v = random_matrix(3, 6, rng);
  const auto g = reconstruction_loss_with_grad<double>(u, v);
  for (Index i = 0; i < v.size(); ++i) {
    CHECK(relative_error(g.grad.data()[i], central_difference(v, i, [&] { return reconstruction_loss(u, v); })) < 1e-3);
  }
}

TEST_CASE("domain_bce examples and oracle") {
  VectorXd s(1), t(1);
  s << 0.0;
  t << 1.0;
  CHECK(domain_bce(s, t) < 1e-11);
  CHECK(domain_bce(VectorXd(VectorXd::Constant(3, 0.5)), VectorXd(VectorXd::Constant(2, 0.5))) == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  s << 0.2;
  t << 0.9;
  CHECK(domain_bce(s, t) == doctest::Approx(0.164252).epsilon(1e-6));
  CHECK_THROWS(domain_bce(VectorXd(0), VectorXd(0)));

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int k = 0; k < 100; ++k) {
    VectorXd ds(1 + k % 5), dt(k % 4);
    double oracle = 0.0;
    for (Index i = 0; i < ds.size(); ++i) oracle -= std::log(1.0 - (ds(i) = u(rng)));
    for (Index i = 0; i < dt.size(); ++i) oracle -= std::log(dt(i) = u(rng));
    oracle /= double(ds.size() + dt.size());
    CHECK(std::abs(domain_bce(ds, dt) - oracle) < 1e-9);

    // Logit form agrees with the probability form.
    VectorXd zs = (ds.array() / (1.0 - ds.array())).log(), zt = (dt.array() / (1.0 - dt.array())).log();
    CHECK(std::abs(domain_bce_with_logits<double>(zs, zt).value - oracle) < 1e-9);
  }
}

TEST_CASE("domain_bce logit gradient matches finite differences and stays finite for large logits") {
  std::mt19937_64 rng(7);
  MatrixXd zs = random_matrix(4, 1, rng) * 2.0, zt = random_matrix(3, 1, rng) * 2.0;
  auto value = [&] { return domain_bce_with_logits<double>(zs.col(0), zt.col(0)).value; };
  const auto g = domain_bce_with_logits<double>(zs.col(0), zt.col(0));
  for (Index i = 0; i < zs.size(); ++i) CHECK(relative_error(g.d_source(i), central_difference(zs, i, value)) < 1e-3);
  for (Index i = 0; i < zt.size(); ++i) CHECK(relative_error(g.d_target(i), central_difference(zt, i, value)) < 1e-3);

  VectorXd big(2);
  big << 800.0, -800.0;
  const auto r = domain_bce_with_logits<double>(big, big);
  CHECK(std::isfinite(r.value));
  CHECK(r.value == doctest::Approx(400.0));
}

TEST_CASE("focal_domain_loss examples") {
  CHECK(focal_domain_loss({0.4, 0.8}, {0.5, 0.5}) == doctest::Approx(0.6));
  CHECK(focal_domain_loss({0.4, 0.8, 0.3}, {0.0, 1.0, 0.0}) == doctest::Approx(0.8));
  CHECK(focal_domain_loss({1.0, 0.2}, {0.25, 0.75}) == doctest::Approx(0.4));
  CHECK_THROWS_WITH(focal_domain_loss({1.0, 0.2}, {-0.25, 1.25}), "focal_domain_loss: negative weight");
}

TEST_CASE("loss bundle validity") {
  LossBundle b;
  CHECK(b.valid());
  b.l_gd = -1.0;
  CHECK_FALSE(b.valid());
  b.l_gd = std::nan("");
  CHECK_FALSE(b.valid());
}
