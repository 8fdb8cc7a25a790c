#include "dualcycle/gru.h"

#include <cmath>

#include "doctest.h"
#include "dualcycle/rng.h"
#include "test_util.h"

using namespace dualcycle;

TEST_CASE("all-zero parameters halve the previous hidden state") {
  ParamStore store;
  Rng rng(1);
  GruCell cell(store, "gru", 3, 4, rng);
  for (std::size_t i = 0; i < store.size(); ++i) store[i].value.fill(0.0);

  Tensor x({3}, {0.7, -0.2, 1.5});
  Tensor h({4}, {0.4, -0.8, 0.1, 1.0});
  Tensor out = gru_step(x, h, store, "gru");
  for (int i = 0; i < 4; ++i)
    CHECK(out.at(i) == doctest::Approx(0.5 * h.at(i)));
}

TEST_CASE("zero h_prev with zero biases matches scalar arithmetic") {
  // h = 1, e = 2: h_new = sigmoid(wz . x) * tanh(wc . x)
  ParamStore store;
  Rng rng(2);
  GruCell cell(store, "gru", 2, 1, rng);
  store.at("gru.bz").value.fill(0.0);
  store.at("gru.br").value.fill(0.0);
  store.at("gru.bc").value.fill(0.0);

  Tensor x({2}, {0.9, -1.2});
  Tensor h({1}, {0.0});
  const Tensor& wz = store.at("gru.wz").value;
  const Tensor& wc = store.at("gru.wc").value;
  double zin = wz.at(0, 0) * x.at(0) + wz.at(0, 1) * x.at(1);
  double cin = wc.at(0, 0) * x.at(0) + wc.at(0, 1) * x.at(1);
  double expected = (1.0 / (1.0 + std::exp(-zin))) * std::tanh(cin);

  Tensor out = gru_step(x, h, store, "gru");
  CHECK(out.at(0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gru gradients match finite differences for every parameter") {
  ParamStore store;
  Rng rng(5);
  GruCell cell(store, "gru", 3, 4, rng);
  // biases at zero have zero-gradient symmetry risks; randomize them too
  store.at("gru.bz").value = Tensor::uniform({4}, -0.3, 0.3, rng);
  store.at("gru.br").value = Tensor::uniform({4}, -0.3, 0.3, rng);
  store.at("gru.bc").value = Tensor::uniform({4}, -0.3, 0.3, rng);
  Tensor x = Tensor::uniform({2, 3}, -1, 1, rng);
  Tensor h0 = Tensor::uniform({2, 4}, -1, 1, rng);

  auto build = [&](Graph& g) {
    auto leased = cell.lease(g);
    NodeId h = g.constant(h0);
    NodeId xt = g.constant(x);
    h = cell.step(g, leased, xt, h);
    h = cell.step(g, leased, xt, h);  // two steps exercise recurrent paths
    return g.sum(h);
  };
  auto forward = [&]() {
    Graph g;
    return g.value(build(g)).item();
  };
  auto res = dctest::check_gradients({&store}, forward, build);
  INFO(res.worst);
  CHECK(res.max_rel_err <= 1e-4);
}

TEST_CASE("gru shape mismatch raises") {
  ParamStore store;
  Rng rng(9);
  GruCell cell(store, "gru", 3, 4, rng);
  Graph g;
  auto leased = cell.lease(g);
  NodeId bad_x = g.constant(Tensor({1, 5}));
  NodeId h = g.constant(Tensor({1, 4}));
  CHECK_THROWS_AS(cell.step(g, leased, bad_x, h), ShapeError);
}
