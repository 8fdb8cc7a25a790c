#ifndef DUALCYCLE_PARAMS_H_
#define DUALCYCLE_PARAMS_H_

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dualcycle/tensor.h"

namespace dualcycle {

class Rng;
class ParamStore;

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;  // Adam first moment
  Tensor v;  // Adam second moment
  std::int64_t steps = 0;
  ParamStore* owner = nullptr;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameters plus per-parameter Adam state. Insertion order is the
// canonical iteration order (serialization, hashing, update loops).
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = delete;

  enum class Init { kZero, kUniform };

  Param& create(const std::string& name, std::vector<int> shape, Init init,
                Rng* rng = nullptr, double lo = -0.08, double hi = 0.08);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  Param& operator[](std::size_t i) { return *params_[i]; }
  const Param& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grads();
  bool grads_populated() const { return grads_populated_; }
  void mark_grads_populated() { grads_populated_ = true; }

  double grad_norm() const;
  // Scales all gradients so the global L2 norm is at most max_norm.
  void clip_grad_norm(double max_norm);

  // One Adam step over every parameter, then gradients are zeroed.
  // Throws ContractError if no backward pass has populated gradients.
  void adam_step(double learning_rate, const AdamConfig& cfg = {});

  // FNV-1a hash over names, shapes and raw values; constant across a run for
  // frozen stores.
  std::uint64_t content_hash() const;
  // Same, over the gradient buffers; used by update-routing probes.
  std::uint64_t grad_hash() const;

  std::int64_t value_count() const;

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::unordered_map<std::string, std::size_t> index_;
  bool grads_populated_ = false;
};

// Called by Graph::backward for parameter leaves.
void accumulate_param_grad(Param& p, const Tensor& g);

}  // namespace dualcycle

#endif  // DUALCYCLE_PARAMS_H_
