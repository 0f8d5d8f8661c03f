#include "lnrel/nn.h"

#include <cmath>
#include <stdexcept>

#include "lnrel/optim.h"

namespace lnrel {

Parameter::Parameter(Tensor initial)
    : value(std::move(initial)),
      adam_m(value.numel(), 0.0),
      adam_v(value.numel(), 0.0) {
  value.set_requires_grad(true);
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor::from(std::move(shape), std::move(values));
}

Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor::from(std::move(shape), std::move(values));
}

Mlp::Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
  if (spec_.layer_widths.size() < 2) {
    throw std::invalid_argument("MlpSpec needs at least an input and an output width");
  }
  for (std::size_t w : spec_.layer_widths) {
    if (w == 0) throw std::invalid_argument("MlpSpec widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < spec_.layer_widths.size(); ++l) {
    const std::size_t in = spec_.layer_widths[l];
    const std::size_t out = spec_.layer_widths[l + 1];
    weights_.emplace_back(glorot_uniform({out, in}, in, out, rng));
    biases_.emplace_back(Tensor::zeros({out}));
  }
}

Tensor Mlp::forward(const Tensor& x) const { return activation(forward_logits(x), spec_.output_activation); }

Tensor Mlp::forward_logits(const Tensor& x) const {
  if (x.shape().back() != spec_.input_width()) {
    throw ShapeError("mlp: input width " + std::to_string(x.shape().back()) + " but layer expects " +
                     std::to_string(spec_.input_width()));
  }
  Tensor h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = linear(h, weights_[l].value, biases_[l].value);
    if (l + 1 < weights_.size()) h = activation(h, spec_.hidden_activation);
  }
  return h;
}

void Mlp::collect(ParameterList& out, const std::string& prefix) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back({prefix + ".layer" + std::to_string(l) + ".weight", &weights_[l]});
    out.push_back({prefix + ".layer" + std::to_string(l) + ".bias", &biases_[l]});
  }
}

ParameterSnapshot snapshot(const ParameterList& params) {
  ParameterSnapshot snap;
  snap.reserve(params.size());
  for (const auto& p : params) {
    snap.emplace_back(p.param->value.data().begin(), p.param->value.data().end());
  }
  return snap;
}

void restore(const ParameterList& params, const ParameterSnapshot& snap) {
  if (snap.size() != params.size()) throw std::invalid_argument("snapshot/parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].param->value.mutable_data();
    if (dst.size() != snap[i].size()) throw std::invalid_argument("snapshot size mismatch for " + params[i].name);
    std::copy(snap[i].begin(), snap[i].end(), dst.begin());
  }
}

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) p.param->value.zero_grad();
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.param->value.numel();
  return n;
}

void adam_step(const ParameterList& params, const AdamConfig& config) {
  if (!(config.lr > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
  for (const auto& p : params) {
    if (!p.param->value.has_grad()) {
      throw std::logic_error("adam: parameter '" + p.name + "' has no gradient");
    }
  }
  for (const auto& p : params) {
    Parameter& param = *p.param;
    ++param.step_count;
    const double t = static_cast<double>(param.step_count);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    auto values = param.value.mutable_data();
    auto grads = param.value.mutable_grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grads[i];
      param.adam_m[i] = config.beta1 * param.adam_m[i] + (1.0 - config.beta1) * g;
      param.adam_v[i] = config.beta2 * param.adam_v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = param.adam_m[i] / correction1;
      const double v_hat = param.adam_v[i] / correction2;
      values[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
    param.value.zero_grad();
  }
}

}  // namespace lnrel
