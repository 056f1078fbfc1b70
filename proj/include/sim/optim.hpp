// Copyright 2026  The smoothnce Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sim/autograd.hpp"

namespace sim {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over a fixed parameter group.
class Adam {
 public:
  /// Throws std::invalid_argument when lr <= 0 or betas are outside [0, 1).
  Adam(std::vector<Parameter *> params, AdamConfig config);

  void step();
  void zero_grad();

  std::uint64_t steps() const { return step_count_; }
  const AdamConfig &config() const { return config_; }
  const std::vector<Tensor> &first_moments() const { return m_; }
  const std::vector<Tensor> &second_moments() const { return v_; }
  const std::vector<Parameter *> &params() const { return params_; }

 private:
  std::vector<Parameter *> params_;
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t step_count_ = 0;
};

struct FdEntry {
  std::string id;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  double grad_scale = 0.0;  // max |analytic| over the parameter
  std::size_t worst_index = 0;
};

struct FdReport {
  std::vector<FdEntry> entries;
  std::vector<std::string> flagged;  // ids whose error exceeds tol
  double worst() const;
};

/// Central finite-difference check of analytic gradients.
///
/// `loss_fn` must be deterministic (hold reparametrization noise fixed) and
/// return the loss in f64. The analytic gradient is read from each
/// parameter's grad after `grad_fn` runs (grad_fn is expected to zero grads,
/// build the graph and call backward). Relative error per element is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor), where floor is
/// 1e-2 of the parameter's largest gradient magnitude so that near-zero
/// entries are judged against the tensor's scale. At most `max_entries`
/// elements per parameter are probed (evenly strided).
FdReport fd_check(const std::function<double()> &loss_fn, const std::function<void()> &grad_fn,
                  const std::vector<Parameter *> &params, double h, double tol,
                  std::size_t max_entries = 64);

}  // namespace sim
