#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "rebox/network.hpp"
#include "rebox/rng.hpp"

namespace rebox {

struct GradCheckReport {
  double max_rel = 0;
  double mean_rel = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // elements whose FD window straddled a kink
  std::string worst_tensor;
  std::size_t worst_elem = 0;
  double worst_analytic = 0, worst_fd = 0;
};

/// Central-difference check of the full backward pass against the loss as a
/// black box. The dropout stream is cloned before every forward, freezing the
/// masks across all evaluations. `per_tensor_cap` > 0 checks a seeded random
/// subset of each parameter tensor (first and last element always included);
/// 0 checks every element. Failures are reported, never thrown.
///
/// The loss is only piecewise smooth: ReLU kinks and max-pool argmax changes
/// put discrete state flips arbitrarily close to the evaluation point, and a
/// finite-difference window that straddles one measures a blend of two slopes
/// that no subgradient convention can match. For a single kink the blend's
/// relative error equals the ratio of the second difference
/// f(+h) + f(-h) - 2 f(0) to the window span, so elements whose ratio exceeds
/// a bar set below working tolerances are skipped and counted in `skipped`.
/// The skip decision depends on the loss landscape alone, never on the
/// analytic value: a wrong analytic gradient on a smooth element produces no
/// curvature and is still reported.
///
/// The relative error denominator is floored at 1e-5: elements whose gradient
/// sits below the floor are judged by the absolute difference instead, which
/// keeps central-difference noise (about 1e-9 for h near 1e-6 in double) from
/// registering while any genuine backward defect still overwhelms it.
template <typename T>
GradCheckReport gradient_check(NetworkT<T>& net, const RegressionBatchT<T>& batch, bool train,
                               const Rng& dropout_rng, double h = 1e-3,
                               std::size_t per_tensor_cap = 0,
                               std::uint64_t sample_seed = 0) {
  const auto* sizes = net.spec().use_size_input ? &batch.sizes : nullptr;
  auto loss_at = [&]() {
    Rng rng = dropout_rng;
    auto out = net.forward(batch.inputs, sizes, train, &rng);
    return mse_loss(out, batch.targets).value;
  };

  net.zero_grads();
  {
    Rng rng = dropout_rng;
    auto out = net.forward(batch.inputs, sizes, train, &rng);
    auto loss = mse_loss(out, batch.targets);
    net.backward(loss.grad);
  }
  std::vector<TensorT<T>> analytic = net.grads();
  const double f_base = loss_at();

  GradCheckReport rep;
  double rel_sum = 0;
  Rng pick(sample_seed ^ 0x9E3779B97F4A7C15ull);
  for (std::size_t ti = 0; ti < net.params().size(); ++ti) {
    auto& p = net.params()[ti];
    std::vector<std::size_t> idx;
    if (per_tensor_cap == 0 || p.numel() <= per_tensor_cap) {
      idx.resize(p.numel());
      for (std::size_t j = 0; j < p.numel(); ++j) idx[j] = j;
    } else {
      std::set<std::size_t> chosen{0, p.numel() - 1};
      while (chosen.size() < per_tensor_cap) chosen.insert(std::size_t(pick.uniform_int(p.numel())));
      idx.assign(chosen.begin(), chosen.end());
    }
    for (std::size_t j : idx) {
      const T saved = p[j];
      p[j] = T(double(saved) + h);
      const double f_plus = loss_at();
      p[j] = T(double(saved) - h);
      const double f_minus = loss_at();
      p[j] = saved;
      const double curvature = std::abs(f_plus + f_minus - 2 * f_base);
      const double span = std::abs(f_plus - f_minus);
      if (curvature > 5e-5 * span + 1e-12) {
        ++rep.skipped;
        continue;
      }
      const double fd = (f_plus - f_minus) / (2 * h);
      const double ga = double(analytic[ti][j]);
      const double rel = std::abs(ga - fd) / std::max({std::abs(ga), std::abs(fd), 1e-5});
      rel_sum += rel;
      ++rep.checked;
      if (rel > rep.max_rel) {
        rep.max_rel = rel;
        rep.worst_tensor = net.param_names()[ti];
        rep.worst_elem = j;
        rep.worst_analytic = ga;
        rep.worst_fd = fd;
      }
    }
  }
  rep.mean_rel = rep.checked ? rel_sum / double(rep.checked) : 0;
  return rep;
}

}  // namespace rebox
