#include "dualcycle/gru.h"

#include "dualcycle/rng.h"

namespace dualcycle {

NodeId affine(Graph& g, NodeId input, NodeId weights, NodeId bias) {
  const Tensor& x = g.value(input);
  const Tensor& w = g.value(weights);
  const Tensor& b = g.value(bias);
  if (w.rank() != 2 || x.cols() != w.cols() || b.size() != w.rows())
    throw ShapeError("affine: input " + x.shape_str() + ", weights " +
                     w.shape_str() + ", bias " + b.shape_str());
  return g.add_rowvec(g.matmul(input, weights, /*transpose_b=*/true), bias);
}

GruCell::GruCell(ParamStore& store, std::string prefix, int input_size,
                 int hidden_size, Rng& rng)
    : store_(&store),
      prefix_(std::move(prefix)),
      input_size_(input_size),
      hidden_size_(hidden_size) {
  auto w = [&](const char* n, int r, int c) {
    store.create(prefix_ + "." + n, {r, c}, ParamStore::Init::kUniform, &rng);
  };
  auto b = [&](const char* n) {
    store.create(prefix_ + "." + n, {hidden_size_}, ParamStore::Init::kZero);
  };
  w("wz", hidden_size_, input_size_);
  w("uz", hidden_size_, hidden_size_);
  b("bz");
  w("wr", hidden_size_, input_size_);
  w("ur", hidden_size_, hidden_size_);
  b("br");
  w("wc", hidden_size_, input_size_);
  w("uc", hidden_size_, hidden_size_);
  b("bc");
}

GruCell::GruCell(ParamStore& store, std::string prefix, int input_size,
                 int hidden_size)
    : store_(&store),
      prefix_(std::move(prefix)),
      input_size_(input_size),
      hidden_size_(hidden_size) {
  store.at(prefix_ + ".wz");  // throws if absent
}

GruCell::Leased GruCell::lease(Graph& g) const {
  auto p = [&](const char* n) { return g.param(store_->at(prefix_ + "." + n)); };
  Leased l;
  l.wz = p("wz");
  l.uz = p("uz");
  l.bz = p("bz");
  l.wr = p("wr");
  l.ur = p("ur");
  l.br = p("br");
  l.wc = p("wc");
  l.uc = p("uc");
  l.bc = p("bc");
  return l;
}

NodeId GruCell::step(Graph& g, const Leased& p, NodeId x, NodeId h_prev) const {
  if (g.value(x).cols() != input_size_ || g.value(h_prev).cols() != hidden_size_)
    throw ShapeError("gru step: x " + g.value(x).shape_str() + ", h " +
                     g.value(h_prev).shape_str());
  NodeId z = g.sigmoid(g.add(affine(g, x, p.wz, p.bz), g.matmul(h_prev, p.uz, true)));
  NodeId r = g.sigmoid(g.add(affine(g, x, p.wr, p.br), g.matmul(h_prev, p.ur, true)));
  NodeId c = g.tanh(
      g.add(affine(g, x, p.wc, p.bc), g.matmul(g.mul(r, h_prev), p.uc, true)));
  return g.add(g.mul(g.one_minus(z), h_prev), g.mul(z, c));
}

Tensor gru_step(const Tensor& x_t, const Tensor& h_prev, ParamStore& params,
                const std::string& prefix) {
  GruCell cell(params, prefix, static_cast<int>(x_t.cols()),
               static_cast<int>(h_prev.cols()));
  Graph g;
  auto leased = cell.lease(g);
  NodeId h = cell.step(g, leased, g.constant(x_t), g.constant(h_prev));
  return g.value(h);
}

}  // namespace dualcycle
