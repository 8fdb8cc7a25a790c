#include "dualcycle/params.h"

#include <cmath>
#include <cstring>
#include <memory>

#include "dualcycle/hash.h"
#include "dualcycle/rng.h"

namespace dualcycle {

Param& ParamStore::create(const std::string& name, std::vector<int> shape,
                          Init init, Rng* rng, double lo, double hi) {
  if (index_.count(name)) throw ContractError("duplicate parameter " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = init == Init::kUniform && rng
                 ? Tensor::uniform(shape, lo, hi, *rng)
                 : Tensor(shape);
  if (init == Init::kUniform && !rng)
    throw ContractError("uniform init requires an rng");
  p->grad = Tensor(shape);
  p->m = Tensor(shape);
  p->v = Tensor(shape);
  p->owner = this;
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Param& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter " + name);
  return *params_[it->second];
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter " + name);
  return *params_[it->second];
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p->grad.fill(0.0);
  grads_populated_ = false;
}

double ParamStore::grad_norm() const {
  double acc = 0.0;
  for (const auto& p : params_)
    for (std::int64_t i = 0; i < p->grad.size(); ++i)
      acc += p->grad.at(i) * p->grad.at(i);
  return std::sqrt(acc);
}

void ParamStore::clip_grad_norm(double max_norm) {
  double norm = grad_norm();
  if (norm <= max_norm || norm == 0.0) return;
  double s = max_norm / norm;
  for (auto& p : params_)
    for (std::int64_t i = 0; i < p->grad.size(); ++i) p->grad.at(i) *= s;
}

void ParamStore::adam_step(double learning_rate, const AdamConfig& cfg) {
  if (!grads_populated_)
    throw ContractError("adam_step: gradients not populated (no backward pass)");
  for (auto& pp : params_) {
    Param& p = *pp;
    p.steps += 1;
    double b1t = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.steps));
    double b2t = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.steps));
    for (std::int64_t i = 0; i < p.value.size(); ++i) {
      double g = p.grad.at(i);
      p.m.at(i) = cfg.beta1 * p.m.at(i) + (1.0 - cfg.beta1) * g;
      p.v.at(i) = cfg.beta2 * p.v.at(i) + (1.0 - cfg.beta2) * g * g;
      double mhat = p.m.at(i) / b1t;
      double vhat = p.v.at(i) / b2t;
      p.value.at(i) -= learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  zero_grads();
}

std::uint64_t ParamStore::content_hash() const {
  std::string buf;
  for (const auto& p : params_) {
    buf += p->name;
    buf.push_back('\0');
    for (int d : p->value.shape()) {
      buf += std::to_string(d);
      buf.push_back(',');
    }
    const char* raw = reinterpret_cast<const char*>(p->value.data());
    buf.append(raw, static_cast<std::size_t>(p->value.size()) * sizeof(double));
  }
  return fnv1a64(buf);
}

std::uint64_t ParamStore::grad_hash() const {
  std::string buf;
  for (const auto& p : params_) {
    const char* raw = reinterpret_cast<const char*>(p->grad.data());
    buf.append(raw, static_cast<std::size_t>(p->grad.size()) * sizeof(double));
  }
  return fnv1a64(buf);
}

std::int64_t ParamStore::value_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void accumulate_param_grad(Param& p, const Tensor& g) {
  for (std::int64_t i = 0; i < g.size(); ++i) p.grad.at(i) += g.at(i);
  if (p.owner) p.owner->mark_grads_populated();
}

}  // namespace dualcycle
