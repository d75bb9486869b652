#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fq/nn/adam.hpp"
#include "fq/nn/checkpoint.hpp"
#include "fq/nn/gradcheck.hpp"
#include "fq/nn/layers.hpp"
#include "fq/nn/loss.hpp"
#include "fq/nn/network.hpp"
#include "oracles.hpp"

using namespace fq;
using namespace fq::nn;
using Md = Matrix<double>;

namespace {

Md random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Md m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

// Central difference of a scalar function of one matrix, entry by entry.
Md numeric_grad(Md& x, const std::function<double()>& f, double h = 1e-5) {
  Md g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double s = x.data()[i];
    x.data()[i] = s + h;
    const double up = f();
    x.data()[i] = s - h;
    const double dn = f();
    x.data()[i] = s;
    g.data()[i] = (up - dn) / (2 * h);
  }
  return g;
}

double max_rel(const Md& a, const Md& b) {
  double w = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) w = std::max(w, relative_error(a.data()[i], b.data()[i]));
  return w;
}

std::vector<int> random_labels(int n, int classes, Rng& rng) {
  std::vector<int> l;
  for (int i = 0; i < n; ++i) l.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
  return l;
}

}  // namespace

TEST_CASE("dense forward hand examples") {
  Md x(1, 2), w = Md::Identity(2, 2), b(1, 2);
  x << 1, 2;
  b << 3, -1;
  const Md y = dense_forward(x, w, b);
  CHECK(y(0, 0) == 4.0);
  CHECK(y(0, 1) == 1.0);
  CHECK(dense_forward(x, w, Md(Md::Zero(1, 2))) == x);
  CHECK_THROWS_AS(dense_forward(x, Md(Md::Identity(3, 3)), Md(Md::Zero(1, 3))), std::invalid_argument);
}

TEST_CASE("dense gradient of sum(y) is the broadcast input") {
  Rng rng(1);
  Md x = random_matrix(3, 4, rng), w = random_matrix(4, 5, rng), b = random_matrix(1, 5, rng);
  Md dw = Md::Zero(4, 5), db = Md::Zero(1, 5);
  const Md dx = dense_backward(x, w, Md(Md::Ones(3, 5)), dw, db);
  Md expect(4, 5);
  for (int i = 0; i < 4; ++i) expect.row(i).setConstant(x.col(i).sum());
  CHECK((dw - expect).cwiseAbs().maxCoeff() < 1e-14);
  auto f = [&] { return dense_forward(x, w, b).sum(); };
  CHECK(max_rel(dw, numeric_grad(w, f)) <= 1e-6);
  CHECK(max_rel(db, numeric_grad(b, f)) <= 1e-6);
  CHECK(max_rel(dx, numeric_grad(x, f)) <= 1e-6);
}

TEST_CASE("tanh and softmax values and gradients") {
  CHECK(tanh_forward<double>(Md::Zero(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  const Md u = softmax_forward<double>(Md::Constant(1, 16, 3.7));
  for (int c = 0; c < 16; ++c) CHECK(u(0, c) == doctest::Approx(1.0 / 16.0).epsilon(1e-15));
  Rng rng(2);
  Md big = random_matrix(50, 16, rng, 50.0);
  const Md p = softmax_forward(big);
  for (int r = 0; r < 50; ++r) CHECK(std::abs(p.row(r).sum() - 1.0) <= 1e-7);

  Md x = random_matrix(3, 5, rng, 2.0);
  const Md wt = random_matrix(3, 5, rng);
  auto ft = [&] { return (tanh_forward(x).array() * wt.array()).sum(); };
  CHECK(max_rel(tanh_backward(tanh_forward(x), wt), numeric_grad(x, ft)) <= 1e-6);
  auto fs = [&] { return (softmax_forward(x).array() * wt.array()).sum(); };
  CHECK(max_rel(softmax_backward(softmax_forward(x), wt), numeric_grad(x, fs)) <= 1e-6);
}

TEST_CASE("MSE loss values and gradient") {
  Md a(2, 2), t(2, 2);
  a << 1, 2, 3, 4;
  CHECK(mse_loss(a, a).value == 0.0);
  t = a.array() - 1.0;
  CHECK(mse_loss(a, t).value == 1.0);
  Rng rng(3);
  Md p = random_matrix(6, 2, rng), q = random_matrix(6, 2, rng);
  const auto r = mse_loss(p, q);
  CHECK(((r.grad - 2.0 * (p - q) / 12.0).cwiseAbs().maxCoeff()) < 1e-15);
  CHECK(max_rel(r.grad, numeric_grad(p, [&] { return mse_loss(p, q).value; })) <= 1e-6);
  CHECK_THROWS_AS(mse_loss(p, Md(3, 2)), std::invalid_argument);
}

TEST_CASE("CEL loss in bits") {
  std::vector<int> lab{0, 5, 15};
  Md onehot = Md::Constant(3, 16, -1e3);
  for (int r = 0; r < 3; ++r) onehot(r, lab[static_cast<std::size_t>(r)]) = 0.0;
  CHECK(cel_loss(onehot, std::span<const int>(lab)).value == doctest::Approx(0.0));
  CHECK(cel_loss<double>(Md::Zero(3, 16), lab).value == doctest::Approx(4.0).epsilon(1e-14));
  Rng rng(4);
  Md z = random_matrix(3, 16, rng, 3.0);
  const auto r = cel_loss(z, std::span<const int>(lab));
  Md expect = softmax_forward(z);
  for (int i = 0; i < 3; ++i) expect(i, lab[static_cast<std::size_t>(i)]) -= 1.0;
  expect /= 3.0 * std::log(2.0);
  CHECK((r.grad - expect).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(max_rel(r.grad, numeric_grad(z, [&] { return cel_loss(z, std::span<const int>(lab)).value; })) <= 1e-6);
  std::vector<int> bad{16, 0, 0};
  CHECK_THROWS_AS(cel_loss(z, std::span<const int>(bad)), std::invalid_argument);
}

TEST_CASE("fused CEL equals the naive softmax-then-log path") {
  Rng rng(5);
  const Md z = random_matrix(40, 16, rng, 30.0);
  const auto lab = random_labels(40, 16, rng);
  const Md p = softmax_forward(z);
  std::vector<double> probs(p.data(), p.data() + p.size());
  CHECK(std::abs(cel_loss(z, std::span<const int>(lab)).value - cel_from_probs(probs, lab, 16)) <= 1e-6);
}

TEST_CASE("biLSTM zero input with zero biases stays zero") {
  const Md wx = Md::Constant(4, 12, 0.3), wh = Md::Constant(3, 12, -0.2), b = Md::Zero(1, 12);
  BiLstmCache<double> cache;
  const Md out = bilstm_forward<double>(Md::Zero(2, 20), 5, 4, {wx, wh, b}, {wx, wh, b}, &cache);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& c : cache.dir[0].cell) CHECK(c.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("biLSTM time reversal swaps the direction halves") {
  Rng rng(6);
  const int steps = 5, feat = 4, h = 3;
  const Md wx1 = random_matrix(feat, 4 * h, rng), wh1 = random_matrix(h, 4 * h, rng), b1 = random_matrix(1, 4 * h, rng);
  const Md wx2 = random_matrix(feat, 4 * h, rng), wh2 = random_matrix(h, 4 * h, rng), b2 = random_matrix(1, 4 * h, rng);
  const Md x = random_matrix(2, steps * feat, rng);
  Md xr(2, steps * feat);
  for (int t = 0; t < steps; ++t) xr.middleCols((steps - 1 - t) * feat, feat) = x.middleCols(t * feat, feat);
  const Md a = bilstm_forward<double>(x, steps, feat, {wx1, wh1, b1}, {wx2, wh2, b2});
  const Md r = bilstm_forward<double>(xr, steps, feat, {wx2, wh2, b2}, {wx1, wh1, b1});
  for (int t = 0; t < steps; ++t) {
    const int tr = steps - 1 - t;
    CHECK((a.middleCols(t * 2 * h, h) - r.middleCols(tr * 2 * h + h, h)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((a.middleCols(t * 2 * h + h, h) - r.middleCols(tr * 2 * h, h)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("biLSTM BPTT matches finite differences on (B=2, M=5, Nh=3)") {
  Rng rng(7);
  const int steps = 5, feat = 4, h = 3;
  Md wx1 = random_matrix(feat, 4 * h, rng), wh1 = random_matrix(h, 4 * h, rng), b1 = random_matrix(1, 4 * h, rng);
  Md wx2 = random_matrix(feat, 4 * h, rng), wh2 = random_matrix(h, 4 * h, rng), b2 = random_matrix(1, 4 * h, rng);
  Md x = random_matrix(2, steps * feat, rng);
  const Md weight = random_matrix(2, steps * 2 * h, rng);
  auto f = [&] {
    return (bilstm_forward<double>(x, steps, feat, {wx1, wh1, b1}, {wx2, wh2, b2}).array() * weight.array()).sum();
  };
  BiLstmCache<double> cache;
  bilstm_forward<double>(x, steps, feat, {wx1, wh1, b1}, {wx2, wh2, b2}, &cache);
  Md g[6] = {Md::Zero(feat, 4 * h), Md::Zero(h, 4 * h), Md::Zero(1, 4 * h),
             Md::Zero(feat, 4 * h), Md::Zero(h, 4 * h), Md::Zero(1, 4 * h)};
  const Md dx = bilstm_backward<double>(x, steps, feat, {wx1, wh1, b1}, {wx2, wh2, b2}, weight, cache,
                                        {g[0], g[1], g[2]}, {g[3], g[4], g[5]});
  Md* w[6] = {&wx1, &wh1, &b1, &wx2, &wh2, &b2};
  for (int i = 0; i < 6; ++i) CHECK(max_rel(g[i], numeric_grad(*w[i], f)) <= 1e-5);
  CHECK(max_rel(dx, numeric_grad(x, f)) <= 1e-5);
}

TEST_CASE("network gradients on randomized shapes") {
  Rng rng(8);
  int trials = 0;
  for (int t = 0; t < 12; ++t) {
    Topology topo;
    topo.trunk = t % 3 == 2 ? TrunkKind::BiLstm : TrunkKind::Mlp;
    topo.head = t % 2 == 0 ? HeadKind::Regression : HeadKind::Classification;
    topo.memory = 1 + 2 * static_cast<int>(rng.below(3));
    topo.mlp_widths = {2 + static_cast<int>(rng.below(6)), 2 + static_cast<int>(rng.below(6)),
                       2 + static_cast<int>(rng.below(6))};
    topo.lstm_hidden = 1 + static_cast<int>(rng.below(3));
    topo.n_classes = 16;
    Network<double> net(topo, 100 + static_cast<std::uint64_t>(t));
    const int batch = 1 + static_cast<int>(rng.below(4));
    const Md x = random_matrix(batch, topo.input_width(), rng);
    double err;
    if (topo.head == HeadKind::Regression) {
      const Md target = random_matrix(batch, 2, rng);
      err = check_network_gradients(net, x, [&](const Md& y) { return mse_loss(y, target); });
    } else {
      const auto lab = random_labels(batch, 16, rng);
      err = check_network_gradients(net, x, [&](const Md& y) { return cel_loss(y, std::span<const int>(lab)); });
    }
    CHECK(err <= 1e-5);
    ++trials;
  }
  CHECK(trials >= 12);
}

TEST_CASE("parameter counts match an independent shape walk") {
  Topology topo;
  topo.mlp_widths = {481, 31, 263};
  topo.memory = 51;
  Network<float> net(topo, 1);
  // (204*481+481) + (481*31+31) + (31*263+263) + (263*2+2)
  CHECK(net.parameter_count() == 122491);
  CHECK(static_cast<long>(net.parameter_count()) == oracle::mlp_param_count({204, 481, 31, 263, 2}));
  topo.head = HeadKind::Classification;
  CHECK(static_cast<long>(Network<float>(topo, 1).parameter_count()) == oracle::mlp_param_count({204, 481, 31, 263, 16}));
  Topology lstm;
  lstm.trunk = TrunkKind::BiLstm;
  lstm.lstm_hidden = 3;
  lstm.memory = 5;
  const long lstm_params = 2 * (4 * 12 + 3 * 12 + 12) + (5 * 6 * 2 + 2);
  CHECK(static_cast<long>(Network<float>(lstm, 1).parameter_count()) == lstm_params);
}

TEST_CASE("initialisation: shared trunk across heads, orthogonal recurrent rows, forget bias") {
  Topology topo;
  topo.trunk = TrunkKind::BiLstm;
  topo.lstm_hidden = 4;
  topo.memory = 5;
  Network<double> reg(topo, 9);
  topo.head = HeadKind::Classification;
  Network<double> cls(topo, 9);
  for (std::size_t i = 0; i < reg.trunk_param_count(); ++i) CHECK(reg.params()[i].value == cls.params()[i].value);
  const Md& wh = reg.params()[1].value;
  CHECK(((wh * wh.transpose()) - Md::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
  const Md& b = reg.params()[2].value;
  CHECK(b.middleCols(4, 4).minCoeff() == 1.0);
  CHECK(b.leftCols(4).cwiseAbs().maxCoeff() == 0.0);
  Network<double> other(topo, 10);
  CHECK(other.params()[0].value != cls.params()[0].value);
}

TEST_CASE("biLSTM network on zeros gives zero trunk output") {
  Topology topo;
  topo.trunk = TrunkKind::BiLstm;
  topo.lstm_hidden = 3;
  topo.memory = 5;
  Network<double> net(topo, 1);
  for (auto& p : net.params())
    if (p.name.find(".b") != std::string::npos) p.value.setZero();
  CHECK(net.trunk_forward(Md::Zero(2, 20)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Adam: zero gradient, first step size, determinism") {
  Topology topo;
  topo.mlp_widths = {4, 3, 2};
  topo.memory = 1;
  Network<double> net(topo, 1);
  const auto before = net.params()[0].value;
  AdamState<double> st(net.params());
  net.zero_grad();
  adam_step(net.params(), st, 1e-3);
  CHECK(net.params()[0].value == before);

  for (auto& p : net.params()) p.grad.setConstant(0.37);
  AdamState<double> st2(net.params());
  const auto w0 = net.params()[0].value;
  adam_step(net.params(), st2, 1e-3);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  const double step = 1e-3 * 0.37 / (0.37 + 1e-8);
  CHECK(((w0 - net.params()[0].value).array() - step).abs().maxCoeff() < 1e-15);

  auto run = [&] {
    Network<float> n(topo, 3);
    AdamState<float> s(n.params());
    Rng rng(4);
    for (int k = 0; k < 10; ++k) {
      for (auto& p : n.params())
        for (Eigen::Index i = 0; i < p.grad.size(); ++i) p.grad.data()[i] = static_cast<float>(rng.uniform(-1, 1));
      adam_step(n.params(), s, 1e-2);
    }
    return n.params()[0].value;
  };
  CHECK(run() == run());
}

TEST_CASE("checkpoint round trip is exact") {
  Topology topo;
  topo.trunk = TrunkKind::BiLstm;
  topo.lstm_hidden = 2;
  topo.memory = 3;
  topo.head = HeadKind::Classification;
  Checkpoint c;
  c.topology = topo;
  Network<float> net(topo, 5);
  c.params = net.params();
  c.adam = AdamState<float>(net.params());
  c.adam.step = 17;
  c.adam.m[0].setConstant(0.25f);
  Rng rng(11);
  rng.next_u64();
  c.rng_state = rng.state();
  c.epoch = 42;
  c.extra["lr"] = 1e-4;
  c.extra_tensors.push_back(Matrix<float>::Constant(2, 2, 1.5f));
  const Checkpoint d = decode_checkpoint(encode_checkpoint(c));
  CHECK(d.epoch == 42);
  CHECK(d.adam.step == 17);
  CHECK(d.adam.m[0] == c.adam.m[0]);
  CHECK(d.rng_state == c.rng_state);
  CHECK(d.extra["lr"] == 1e-4);
  CHECK(d.extra_tensors[0] == c.extra_tensors[0]);
  CHECK(topology_to_json(d.topology) == topology_to_json(topo));
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    CHECK(d.params[i].name == c.params[i].name);
    CHECK(d.params[i].value == c.params[i].value);
  }
  Rng restored(0);
  restored.set_state(d.rng_state);
  CHECK(restored.next_u64() == rng.next_u64());
  auto bytes = encode_checkpoint(c);
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS(decode_checkpoint(bytes));
}

TEST_CASE("forward pass is deterministic") {
  Topology topo;
  topo.mlp_widths = {8, 4, 6};
  topo.memory = 3;
  Network<float> net(topo, 2);
  Rng rng(3);
  Matrix<float> x = random_matrix(16, 12, rng).cast<float>();
  CHECK(net.forward(x) == net.forward(x));
}
