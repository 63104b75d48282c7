// Finite-difference gradient checking for graphs built from ad::Tensor leaves.
#pragma once

#include <functional>
#include <vector>

#include "oracles.hpp"
#include "protoaudio/autodiff.hpp"
#include "protoaudio/rng.hpp"

namespace gradcheck {

using protoaudio::ad::Tensor;
using Builder = std::function<Tensor(const std::vector<Tensor>&)>;

inline Tensor random_tensor(protoaudio::ad::Shape shape, protoaudio::SplitMix64& gen, double scale = 1.0) {
  std::vector<double> data(protoaudio::ad::numel(shape));
  for (double& v : data) v = scale * protoaudio::standard_normal(gen);
  return Tensor::from(std::move(shape), std::move(data));
}

// Worst relative error over the inputs, comparing backward() against central
// differences of the forward pass.
inline double max_error(const Builder& build, const std::vector<Tensor>& inputs, double h = 1e-4) {
  std::vector<Tensor> leaves;
  for (const auto& t : inputs) leaves.push_back(Tensor::from(t.shape(), {t.data().begin(), t.data().end()}, true));
  protoaudio::ad::backward(build(leaves));

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto f = [&](const std::vector<double>& x) {
      protoaudio::ad::NoGradGuard guard;
      std::vector<Tensor> args;
      for (std::size_t j = 0; j < inputs.size(); ++j)
        args.push_back(j == i ? Tensor::from(inputs[j].shape(), x)
                              : Tensor::from(inputs[j].shape(), {inputs[j].data().begin(), inputs[j].data().end()}));
      return build(args).item();
    };
    const auto numeric = oracle::numeric_gradient(f, {inputs[i].data().begin(), inputs[i].data().end()}, h);
    std::vector<double> analytic(leaves[i].grad().begin(), leaves[i].grad().end());
    if (analytic.empty()) analytic.assign(numeric.size(), 0.0);
    worst = std::max(worst, oracle::relative_error(analytic, numeric));
  }
  return worst;
}

// Weighted sum with fixed random weights, so every output entry matters.
inline Tensor weighted_sum(const Tensor& x, std::uint64_t seed) {
  protoaudio::SplitMix64 gen(seed);
  return protoaudio::ad::sum(protoaudio::ad::mul(x, random_tensor(x.shape(), gen)));
}

}  // namespace gradcheck
