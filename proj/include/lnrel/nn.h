#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lnrel/ops.h"
#include "lnrel/tensor.h"

namespace lnrel {

using Rng = std::mt19937_64;

// A trainable tensor plus its Adam moment buffers.
struct Parameter {
  Tensor value;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::uint64_t step_count = 0;

  Parameter() = default;
  explicit Parameter(Tensor initial);
};

struct NamedParameter {
  std::string name;
  Parameter* param;
};

using ParameterList = std::vector<NamedParameter>;

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);
// Uniform in +-sqrt(6 / fan_in); keeps activation scale through relu stacks.
Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng);

struct MlpSpec {
  std::vector<std::size_t> layer_widths;
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::none;

  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t output_width() const { return layer_widths.back(); }
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, Rng& rng);

  // x is [in] or [B,in].
  Tensor forward(const Tensor& x) const;
  // Every layer, but without the output activation.
  Tensor forward_logits(const Tensor& x) const;

  const MlpSpec& spec() const { return spec_; }
  std::size_t layer_count() const { return weights_.size(); }
  Parameter& weight(std::size_t layer) { return weights_.at(layer); }
  Parameter& bias(std::size_t layer) { return biases_.at(layer); }
  const Parameter& weight(std::size_t layer) const { return weights_.at(layer); }
  const Parameter& bias(std::size_t layer) const { return biases_.at(layer); }

  void collect(ParameterList& out, const std::string& prefix);

 private:
  MlpSpec spec_;
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
};

// Value copy of a parameter set, for best-epoch selection.
using ParameterSnapshot = std::vector<std::vector<double>>;
ParameterSnapshot snapshot(const ParameterList& params);
void restore(const ParameterList& params, const ParameterSnapshot& snap);

void zero_grads(const ParameterList& params);
std::size_t parameter_count(const ParameterList& params);

}  // namespace lnrel
