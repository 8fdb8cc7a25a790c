#ifndef DUALCYCLE_GRU_H_
#define DUALCYCLE_GRU_H_

#include <string>

#include "dualcycle/params.h"
#include "dualcycle/tensor.h"

namespace dualcycle {

// weights [m x n] * input [n or B x n] + bias [m], registered on the tape.
NodeId affine(Graph& g, NodeId input, NodeId weights, NodeId bias);

// Gated recurrent unit:
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   c = tanh(Wc x + Uc (r . h) + bc)
//   h' = (1 - z) . h + z . c
// Parameters live in a ParamStore under "<prefix>.{wz,uz,bz,...}", weights
// stored [hidden x input] / [hidden x hidden].
class GruCell {
 public:
  GruCell(ParamStore& store, std::string prefix, int input_size,
          int hidden_size, Rng& rng);
  // Attach to an existing store that already holds the parameters.
  GruCell(ParamStore& store, std::string prefix, int input_size,
          int hidden_size);

  struct Leased {
    NodeId wz, uz, bz, wr, ur, br, wc, uc, bc;
  };
  // Bind parameters into a graph; call once per Graph and reuse across steps.
  Leased lease(Graph& g) const;

  NodeId step(Graph& g, const Leased& p, NodeId x, NodeId h_prev) const;

  int input_size() const { return input_size_; }
  int hidden_size() const { return hidden_size_; }

 private:
  ParamStore* store_;
  std::string prefix_;
  int input_size_;
  int hidden_size_;
};

// Single-vector convenience matching the batched cell; x_t [e], h_prev [h].
Tensor gru_step(const Tensor& x_t, const Tensor& h_prev, ParamStore& params,
                const std::string& prefix = "gru");

}  // namespace dualcycle

#endif  // DUALCYCLE_GRU_H_
