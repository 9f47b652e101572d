#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "datom/conv.hpp"
#include "datom/model.hpp"
#include "datom/rng.hpp"
#include "datom/trainer.hpp"

#include <filesystem>
#include <sstream>

using namespace datom;

namespace {

DetectorSpec spec1(int kernel = 9, int channels = 1, int depth = 1, bool scalar = false) {
  DetectorSpec s;
  for (int i = 0; i < depth; ++i)
    s.layers.push_back({i == 0 ? 1 : channels, channels, kernel});
  s.final_scalar = scalar;
  return s;
}

Signal randsig(int t, Rng& rng) {
  Signal x(t);
  for (int i = 0; i < t; ++i) x(i) = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("detector spec validation") {
  DetectorSpec s;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.layers.push_back({2, 1, 3});  // first layer must read one channel
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.layers[0].in_channels = 1;
  s.validate();
  s.layers.push_back({3, 1, 3});  // adjacency broken
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("activations are non-negative and components sum to the reconstruction") {
  Rng rng(1);
  auto m = BasicDecomposer::init(3, spec1(7, 2, 2), 8, rng);
  Signal x = randsig(50, rng);

  Tape t;
  auto f = basic_forward(t, m, t.input_signal(x), true);
  REQUIRE(f.activations.size() == 3);
  REQUIRE(f.components.size() == 3);

  Eigen::ArrayXXd sum = Eigen::ArrayXXd::Zero(50, 1);
  for (const auto& z : f.activations) CHECK(t.value(z).minCoeff() >= 0.0);
  for (const auto& c : f.components) sum += t.value(c);
  CHECK((t.value(f.reconstruction) - sum).abs().maxCoeff() < 1e-12);
}

TEST_CASE("components are the causal atom convolution of the activations") {
  Rng rng(2);
  auto m = BasicDecomposer::init(2, spec1(), 6, rng);
  Signal x = randsig(40, rng);

  Tape t;
  auto f = basic_forward(t, m, t.input_signal(x), false);
  for (std::size_t n = 0; n < m.pairs.size(); ++n) {
    Signal z = t.value(f.activations[n]).col(0);
    Signal want = atom_conv(z, m.pairs[n].atom.value.col(0));
    CHECK((t.value(f.components[n]).col(0) - want).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("init is deterministic in the seed and uses the documented draw order") {
  Rng a(7), b(7);
  auto m1 = BasicDecomposer::init(2, spec1(5, 2, 2), 8, a);
  auto m2 = BasicDecomposer::init(2, spec1(5, 2, 2), 8, b);
  auto p1 = m1.parameters();
  auto p2 = m2.parameters();
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i]->id == p2[i]->id);
    CHECK((p1[i]->value - p2[i]->value).abs().maxCoeff() == 0.0);
  }

  // Bounds: atoms in (-1/sqrt(M), 1/sqrt(M)).
  Rng c(9);
  auto atom = init_atom("a", 16, c);
  CHECK(atom.value.abs().maxCoeff() < 0.25);
}

TEST_CASE("dead atom detection compares against the bank median") {
  Rng rng(3);
  auto m = BasicDecomposer::init(3, spec1(), 4, rng);
  m.pairs[0].atom.value.setConstant(0.5);   // norm 1
  m.pairs[1].atom.value.setConstant(0.5);   // norm 1
  m.pairs[2].atom.value.setConstant(5e-7);  // norm 1e-6
  auto dead = detect_dead_atoms(m.pairs, 1e-3);
  REQUIRE(dead.size() == 1);
  CHECK(dead[0] == 2);

  // All comparable: nothing dead.
  m.pairs[2].atom.value.setConstant(0.4);
  CHECK(detect_dead_atoms(m.pairs, 1e-3).empty());
}

TEST_CASE("atom reassignment splits the donor and copies its detector") {
  Rng rng(4);
  auto m = BasicDecomposer::init(2, spec1(5, 1, 1), 4, rng);
  m.pairs[0].atom.value.col(0) = Signal::Zero(4);  // the dead one
  Signal donor_atom(4);
  donor_atom << 1, 2, 3, 4;
  m.pairs[1].atom.value.col(0) = donor_atom;

  Signal x = randsig(30, rng);
  Tape t;
  Signal before = t.value(basic_forward(t, m, t.input_signal(x), false).reconstruction).col(0);

  atom_reassign(m.pairs, 0, 1);

  Signal k = m.pairs[0].atom.value.col(0);
  Signal r = m.pairs[1].atom.value.col(0);
  CHECK(k(0) == 1.0);
  CHECK(k(1) == 2.0);
  CHECK(k(2) == 0.0);
  CHECK(k(3) == 0.0);
  CHECK(r(0) == 0.0);
  CHECK(r(1) == 0.0);
  CHECK(r(2) == 3.0);
  CHECK(r(3) == 4.0);
  CHECK((k + r - donor_atom).abs().maxCoeff() == 0.0);

  // Detector copied verbatim.
  for (std::size_t l = 0; l < m.pairs[0].detector.taps.size(); ++l) {
    CHECK((m.pairs[0].detector.taps[l].value - m.pairs[1].detector.taps[l].value).abs().maxCoeff() == 0.0);
    CHECK((m.pairs[0].detector.biases[l].value - m.pairs[1].detector.biases[l].value).abs().maxCoeff() == 0.0);
  }

  // Same detectors + atoms summing to the donor atom: reconstruction intact.
  Tape t2;
  Signal after = t2.value(basic_forward(t2, m, t2.input_signal(x), false).reconstruction).col(0);
  CHECK((after - before).abs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(atom_reassign(m.pairs, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(atom_reassign(m.pairs, -1, 1), std::invalid_argument);
}

TEST_CASE("noise forward feeds the signal bank the residual") {
  Rng rng(5);
  auto m = NoiseDecomposer::init(2, 2, spec1(), 6, rng);
  Signal x = randsig(32, rng);

  Tape t;
  auto f = noise_forward(t, m, t.input_signal(x), true, false);
  CHECK((t.value(f.n_hat) - t.value(f.noise.reconstruction)).abs().maxCoeff() == 0.0);
  CHECK((t.value(f.s_hat) - t.value(f.signal.reconstruction)).abs().maxCoeff() == 0.0);

  // The signal bank's input is x - n_hat: recompute by hand.
  Signal residual = x - t.value(f.n_hat).col(0);
  Tape t2;
  auto sf = bank_forward(t2, m.signal_pairs, t2.input_signal(residual), false);
  CHECK((t2.value(sf.reconstruction) - t.value(f.s_hat)).abs().maxCoeff() < 1e-12);
}

TEST_CASE("cross_detach stops gradients between the banks") {
  Rng rng(6);
  auto m = NoiseDecomposer::init(1, 1, spec1(), 4, rng);
  Signal x = randsig(24, rng);

  // L = mean(s_hat^2) depends on the noise bank only through the residual;
  // with cross_detach the noise bank must receive no gradient from it.
  for (auto* p : m.parameters()) p->zero_grad();
  Tape t;
  auto f = noise_forward(t, m, t.input_signal(x), true, true);
  t.backward(mean_all(square(f.s_hat)));
  const double noise_grad =
      m.noise_pairs[0].detector.taps[0].grad.abs().sum() + m.noise_pairs[0].atom.grad.abs().sum();
  const double signal_grad = m.signal_pairs[0].detector.taps[0].grad.abs().sum();
  CHECK(noise_grad == 0.0);
  CHECK(signal_grad > 0.0);

  // Without the detach the same loss reaches the noise bank.
  for (auto* p : m.parameters()) p->zero_grad();
  Tape t2;
  auto f2 = noise_forward(t2, m, t2.input_signal(x), true, false);
  t2.backward(mean_all(square(f2.s_hat)));
  CHECK(m.noise_pairs[0].detector.taps[0].grad.abs().sum() > 0.0);
}

TEST_CASE("ssvep detectors share one atom") {
  Rng rng(8);
  auto m = SSVEPDecomposer::init(4, spec1(), 8, rng);
  CHECK(m.n_classes() == 4);
  Signal x = randsig(40, rng);

  for (auto* p : m.parameters()) p->zero_grad();
  Tape t;
  auto f = ssvep_forward(t, m, t.input_signal(x), true);
  REQUIRE(f.components.size() == 4);

  Eigen::ArrayXXd sum = Eigen::ArrayXXd::Zero(40, 1);
  for (const auto& c : f.components) sum += t.value(c);
  CHECK((t.value(f.reconstruction) - sum).abs().maxCoeff() < 1e-12);

  // One backward through a single component still reaches the shared atom;
  // the gradient through the reconstruction accumulates all four paths.
  t.backward(mean_all(square(f.components[2])));
  CHECK(m.atom.grad.abs().sum() > 0.0);

  // Each component is that detector's activation convolved with the shared atom.
  for (int l = 0; l < 4; ++l) {
    Signal z = t.value(f.activations[static_cast<std::size_t>(l)]).col(0);
    Signal want = atom_conv(z, m.atom.value.col(0));
    CHECK((t.value(f.components[static_cast<std::size_t>(l)]).col(0) - want).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("erp weights scale full-length atoms") {
  Rng rng(9);
  const int t_len = 20;
  auto m = ERPDecomposer::init(4, 2, spec1(5, 1, 1, true), t_len, rng);
  CHECK(m.input_length() == t_len);
  CHECK(m.pair_class == std::vector<int>{1, 1, 2, 2});

  Signal x = randsig(t_len, rng);
  Tape t;
  auto f = erp_forward(t, m, t.input_signal(x), true);
  REQUIRE(f.weights.size() == 4);

  Eigen::ArrayXXd sum = Eigen::ArrayXXd::Zero(t_len, 1);
  for (std::size_t p = 0; p < 4; ++p) {
    const double w = t.scalar_value(f.weights[p]);
    CHECK(w >= 0.0);
    Signal want = w * m.pairs[p].atom.value.col(0);
    CHECK((t.value(f.components[p]).col(0) - want).abs().maxCoeff() < 1e-12);
    sum += t.value(f.components[p]);
  }
  CHECK((t.value(f.reconstruction) - sum).abs().maxCoeff() < 1e-12);

  // Wrong input length is a compatibility error.
  Tape t2;
  CHECK_THROWS_AS(erp_forward(t2, m, t2.input_signal(randsig(t_len + 1, rng)), true), CompatibilityError);
}

TEST_CASE("erp class blocks cover uneven splits") {
  Rng rng(10);
  auto m = ERPDecomposer::init(5, 3, spec1(5, 1, 1, true), 8, rng);
  CHECK(m.pair_class == std::vector<int>{1, 1, 2, 2, 3});
}

TEST_CASE("decompose returns named plain-value components") {
  Rng rng(11);
  ModelVariant m = BasicDecomposer::init(2, spec1(), 6, rng);
  Signal x = randsig(30, rng);
  auto d = decompose(m, x);
  REQUIRE(d.components.size() == 2);
  REQUIRE(d.names.size() == 2);
  CHECK(!d.s_hat.has_value());

  Signal sum = Signal::Zero(30);
  for (const auto& c : d.components) sum += c;
  CHECK((d.reconstruction - sum).abs().maxCoeff() < 1e-12);

  ModelVariant nm = NoiseDecomposer::init(1, 1, spec1(), 4, rng);
  auto nd = decompose(nm, x);
  CHECK(nd.s_hat.has_value());
  CHECK(nd.n_hat.has_value());
  CHECK((*nd.s_hat + *nd.n_hat - nd.reconstruction).abs().maxCoeff() < 1e-12);

  ModelVariant em = ERPDecomposer::init(2, 2, spec1(5, 1, 1, true), 30, rng);
  auto ed = decompose(em, x);
  CHECK(ed.weights.size() == 2);
}

TEST_CASE("model files roundtrip exactly at float32") {
  Rng rng(12);
  std::vector<ModelVariant> models;
  models.push_back(BasicDecomposer::init(3, spec1(7, 2, 2), 8, rng));
  models.push_back(NoiseDecomposer::init(2, 1, spec1(), 6, rng));
  models.push_back(SSVEPDecomposer::init(4, spec1(), 8, rng));
  models.push_back(ERPDecomposer::init(4, 2, spec1(5, 1, 1, true), 24, rng));

  for (auto& m : models) {
    quantize_f32(m);
    std::stringstream ss;
    save_model(ss, m);
    ModelVariant back = load_model(ss);
    CHECK(arch_of(back) == arch_of(m));

    auto pa = parameters(m);
    auto pb = parameters(back);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i]->id == pb[i]->id);
      REQUIRE(pa[i]->value.rows() == pb[i]->value.rows());
      REQUIRE(pa[i]->value.cols() == pb[i]->value.cols());
      CHECK((pa[i]->value - pb[i]->value).abs().maxCoeff() == 0.0);
    }

    // Identical parameters mean identical decompositions, bit for bit.
    const int t_len = arch_of(m) == Arch::erp ? 24 : 40;
    Signal x = randsig(t_len, rng);
    auto d1 = decompose(m, x);
    auto d2 = decompose(back, x);
    CHECK((d1.reconstruction - d2.reconstruction).abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("erp metadata survives the file") {
  Rng rng(13);
  ModelVariant m = ERPDecomposer::init(5, 3, spec1(5, 1, 1, true), 16, rng);
  std::stringstream ss;
  save_model(ss, m);
  auto back = std::get<ERPDecomposer>(load_model(ss));
  CHECK(back.num_classes == 3);
  CHECK(back.pair_class == std::get<ERPDecomposer>(m).pair_class);
  CHECK(back.input_length() == 16);
}

TEST_CASE("model loader rejects junk") {
  std::stringstream ss("not a model file");
  CHECK_THROWS_AS(load_model(ss), IoError);

  // Truncation after a valid header.
  Rng rng(14);
  ModelVariant m = BasicDecomposer::init(1, spec1(), 4, rng);
  std::stringstream full;
  save_model(full, m);
  std::string bytes = full.str();
  std::stringstream cut(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_model(cut), IoError);

  CHECK_THROWS_AS(load_model("/nonexistent/model.bin"), IoError);
}

TEST_CASE("arch names map both ways") {
  for (Arch a : {Arch::basic, Arch::noise, Arch::ssvep, Arch::erp}) CHECK(arch_from_name(arch_name(a)) == a);
  CHECK_THROWS_AS(arch_from_name("transformer"), ConfigError);
}

TEST_CASE("build_model wires the configured shapes") {
  ModelConfig mc;
  mc.n_pairs = 3;
  mc.atom_length = 10;
  mc.detector_depth = 2;
  mc.detector_kernel = 7;
  mc.detector_channels = 2;
  mc.n_classes = 4;

  Rng rng(15);
  auto basic = std::get<BasicDecomposer>(build_model(Arch::basic, mc, 64, rng));
  CHECK(basic.pairs.size() == 3);
  CHECK(basic.atom_length() == 10);
  CHECK(basic.pairs[0].detector.spec.layers.size() == 2);
  CHECK(basic.pairs[0].detector.spec.layers[1].in_channels == 2);

  auto ssvep = std::get<SSVEPDecomposer>(build_model(Arch::ssvep, mc, 64, rng));
  CHECK(ssvep.n_classes() == 4);

  mc.n_classes = 2;  // erp needs at least one pair per class
  auto erp = std::get<ERPDecomposer>(build_model(Arch::erp, mc, 64, rng));
  CHECK(erp.input_length() == 64);
  CHECK(erp.pairs[0].detector.spec.final_scalar);
}
