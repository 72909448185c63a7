#include <doctest.h>

#include <random>

#include "support.hpp"

using namespace isgfan;
using namespace isgfan::testing;
using Eigen::MatrixXd;

TEST_CASE("reversal layer: identity forward, scaled negation backward") {
  MatrixXd x(1, 2);
  x << 1.0, 2.0;
  CHECK(&grl_forward(x) == &x);
  MatrixXd g(1, 2);
  g << 0.5, -0.25;
  MatrixXd expect(1, 2);
  expect << -0.5, 0.25;
  CHECK(grl_backward(g, GrlCoefficient(1.0)) == expect);
  CHECK(grl_backward(g, GrlCoefficient(0.0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS(GrlCoefficient(-0.1));
}

TEST_CASE("parameters upstream of the reversal receive -lambda times the identity-control gradient") {
  Rng rng(1);
  Dense<double> trunk(6, 5, "trunk");
  MlpHead<double> head(HeadConfig::compressing(5, 3), "head");
  trunk.init(rng, WeightInit{true});
  head.init(rng, WeightInit{true});
  const MatrixXd x = MatrixXd::Random(4, 6);
  const MatrixXd seed = MatrixXd::Random(4, 3);

  auto run = [&](bool reversed, double lambda) {
    trunk.weight().zero_grad();
    trunk.bias().zero_grad();
    head.forward(grl_forward(trunk.forward(x)));
    MatrixXd d = head.backward(seed);
    if (reversed) d = grl_backward(d, GrlCoefficient(lambda));
    trunk.backward(d);
    return std::pair{trunk.weight().grad, trunk.bias().grad};
  };
  const auto control = run(false, 0.0);
  for (double lambda : {1.0, 0.37, 2.5}) {
    const auto rev = run(true, lambda);
    CHECK((rev.first + lambda * control.first).cwiseAbs().maxCoeff() <= 1e-12 * control.first.cwiseAbs().maxCoeff());
    CHECK((rev.second + lambda * control.second).cwiseAbs().maxCoeff() <= 1e-12 * control.second.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("extractor stage shapes at full scale") {
  Rng rng(2);
  FeatureExtractor<float> fe(ExtractorConfig{}, "FRFE");
  fe.init(rng);
  const auto stages = fe.forward_stages(as_sequences<float>(Matrix<float>::Random(2, 2048)));
  const std::vector<Index> lengths{512, 256, 128, 64}, channels{40, 80, 160, 320};
  REQUIRE(stages.size() == 4);
  for (std::size_t s = 0; s < 4; ++s) {
    CHECK(stages[s].length == lengths[s]);
    CHECK(stages[s].channels() == channels[s]);
    CHECK(stages[s].batch == 2);
    CHECK(stages[s].values.allFinite());
  }
  const auto small = fe.forward_stages(as_sequences<float>(Matrix<float>::Random(1, 1024)));
  CHECK(small[0].length == 256);
  CHECK(small[3].length == 32);
  CHECK_THROWS_WITH(fe.forward(as_sequences<float>(Matrix<float>::Random(1, 1000))), "invalid input length");
}

TEST_CASE("residual blocks preserve shape") {
  Rng rng(3);
  ExtractorBlock<double> block(8, 7, 4, "b");
  block.init(rng);
  SequenceBatch<double> x(MatrixXd::Random(8, 3 * 20), 3, 20);
  const auto y = block.forward(x);
  CHECK(y.channels() == 8);
  CHECK(y.batch == 3);
  CHECK(y.length == 20);
}

TEST_CASE("decoder restores the input length") {
  for (Index length : {1024, 2048, 2560}) {
    Rng rng(4);
    Decoder<float> dec(320, 7, "decoder");
    dec.init(rng);
    SequenceBatch<float> z(Matrix<float>::Random(640, length / 32), 1, length / 32);
    const auto out = dec.forward(z);
    CHECK(out.length == length);
    CHECK(out.channels() == 1);
  }
  Decoder<float> dec(320, 7, "decoder");
  SequenceBatch<float> wrong(Matrix<float>::Random(320, 64), 1, 64);
  CHECK_THROWS(dec.forward(wrong));
  CHECK(upsample_layers(32) == 5);
  CHECK(upsample_layers(16) == 4);
  CHECK_THROWS(upsample_layers(24));
}

TEST_CASE("heads: zero parameters, shapes, explicit weights") {
  MlpHead<double> head(HeadConfig::compressing(320, 10), "LC");
  const MatrixXd f = MatrixXd::Random(32, 320);
  const MatrixXd z = head.forward(f);
  CHECK(z.rows() == 32);
  CHECK(z.cols() == 10);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS(head.forward(MatrixXd::Random(2, 100)));
  CHECK(head.config().hidden_dims == std::vector<Index>{160, 80});

  HeadConfig id;
  id.in_dim = 3;
  id.out_dim = 3;
  id.hidden_dims.clear();
  MlpHead<double> linear(id, "toy");
  linear.layers().back().weight().value = MatrixXd::Identity(3, 3);
  const MatrixXd v = MatrixXd::Random(1, 3);
  CHECK(linear.forward(v) == v);
  HeadConfig bad = id;
  bad.out_dim = 0;
  CHECK_THROWS(MlpHead<double>(bad, "bad"));
}

TEST_CASE("subdomain classifiers are single affine maps") {
  SubdomainClassifiers<double> sdc(320, 4, "SDC");
  const MatrixXd f = MatrixXd::Random(5, 320);
  MatrixXd zero = sdc.forward(2, f);
  CHECK(zero.rows() == 5);
  CHECK(zero.cols() == 1);
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sigmoid(zero(0, 0)) == 0.5);

  ParameterList<double> params;
  sdc.collect(params);
  CHECK(params.size() == 8);
  Rng rng(5);
  sdc.init(rng);
  const MatrixXd w = params[2]->value;  // class 1 weight
  const double b = 0.3;
  params[3]->value(0, 0) = b;
  const MatrixXd z = sdc.forward(1, f);
  for (Index i = 0; i < 5; ++i) CHECK(z(i, 0) == doctest::Approx(f.row(i).dot(w.row(0)) + b).epsilon(1e-12));
}

TEST_CASE("initialization policy") {
  Rng rng(6);
  Dense<double> d(400, 300, "d");
  d.init(rng);
  const auto& w = d.weight().value;
  const double mean = w.mean();
  const double sd = std::sqrt((w.array() - mean).square().mean());
  CHECK(w.cwiseAbs().maxCoeff() <= 0.04);
  // A standard normal truncated at 2 sigma has sd 0.8796.
  CHECK(sd == doctest::Approx(0.02 * 0.8796).epsilon(0.02));
  CHECK(d.bias().value.cwiseAbs().maxCoeff() == 0.0);

  d.init(rng, WeightInit{true});
  CHECK(d.weight().value.cwiseAbs().maxCoeff() <= 2.0 / 20.0);
  CHECK(WeightInit{true}.std_for(400) == doctest::Approx(0.05));
}

TEST_CASE("forward evaluation is deterministic for a fixed seed") {
  auto build = [] {
    Rng rng(7);
    return IsgfanModel<double>(toy_model_config(AblationVariant::full), rng);
  };
  auto a = build(), b = build();
  const MatrixXd x = MatrixXd::Random(3, 64);
  CHECK(a.predict_logits(x) == b.predict_logits(x));
  CHECK(a.features(x) == b.features(x));
}

TEST_CASE("variants build exactly their parameter groups") {
  Rng rng(8);
  auto groups_of = [&](AblationVariant v) {
    IsgfanModel<double> m(toy_model_config(v), rng);
    std::vector<std::string> names;
    for (const auto& [k, _] : m.parameter_groups()) names.push_back(k);
    return names;
  };
  CHECK(groups_of(AblationVariant::isfa) == std::vector<std::string>{"FRFE", "GDC", "LC"});
  CHECK(groups_of(AblationVariant::source_only) == std::vector<std::string>{"FRFE", "LC"});
  CHECK(groups_of(AblationVariant::full) == std::vector<std::string>{"FIFE", "FRFE", "GDC", "LC", "LD", "SDC", "decoder"});
  CHECK(groups_of(AblationVariant::is) == std::vector<std::string>{"FRFE", "GDC", "LC", "SDC"});
  CHECK(groups_of(AblationVariant::fa) == std::vector<std::string>{"FIFE", "FRFE", "GDC", "LC", "LD", "decoder"});
  CHECK(groups_of(AblationVariant::fald) == std::vector<std::string>{"FIFE", "FRFE", "GDC", "LC", "decoder"});
  CHECK(active_loss_terms(AblationVariant::full).size() == 6);
  CHECK_THROWS(parse_variant("dann"));
}

TEST_CASE("checkpoint round trip and mismatch detection") {
  const auto dir = std::filesystem::temp_directory_path() / "isgfan_test_network";
  std::filesystem::create_directories(dir);
  Rng rng(9);
  IsgfanModel<double> a(toy_model_config(AblationVariant::full), rng);
  randomize_parameters(a, 3);
  write_checkpoint(dir / "a.isgc", a);
  Rng other(10);
  IsgfanModel<double> b(toy_model_config(AblationVariant::full), other);
  read_checkpoint(dir / "a.isgc", b);
  const auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);

  IsgfanModel<double> c(toy_model_config(AblationVariant::isfa), other);
  CHECK_THROWS(read_checkpoint(dir / "a.isgc", c));
  CHECK_THROWS(read_checkpoint(dir / "missing.isgc", c));
}
