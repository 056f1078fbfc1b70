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

#include "sim/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sim {

Adam::Adam(std::vector<Parameter *> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.lr > 0.0)) throw std::invalid_argument("Adam: learning rate must be > 0");
  if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 ||
      config_.beta2 >= 1.0)
    throw std::invalid_argument("Adam: betas must lie in [0, 1)");
  if (!(config_.eps > 0.0)) throw std::invalid_argument("Adam: eps must be > 0");
  for (auto *p : params_) {
    m_.emplace_back(p->value().shape(), 0.0f);
    v_.emplace_back(p->value().shape(), 0.0f);
  }
}

void Adam::step() {
  ++step_count_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor &w = params_[i]->value();
    Tensor &g = params_[i]->var.mutable_grad();
    Tensor &m = m_[i];
    Tensor &v = v_[i];
    for (std::size_t k = 0; k < w.numel(); ++k) {
      const double gk = g[k];
      const double mk = b1 * m[k] + (1.0 - b1) * gk;
      const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      const double update = config_.lr * (mk / c1) / (std::sqrt(vk / c2) + config_.eps);
      w[k] = static_cast<float>(w[k] - update);
    }
    w.check_finite("parameter " + params_[i]->id + " after Adam step");
  }
}

void Adam::zero_grad() { sim::zero_grad(params_); }

double FdReport::worst() const {
  double w = 0.0;
  for (const auto &e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

FdReport fd_check(const std::function<double()> &loss_fn, const std::function<void()> &grad_fn,
                  const std::vector<Parameter *> &params, double h, double tol,
                  std::size_t max_entries) {
  grad_fn();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (auto *p : params) analytic.push_back(p->var.mutable_grad());

  FdReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter &p = *params[pi];
    Tensor &w = p.value();
    const Tensor &ga = analytic[pi];
    FdEntry entry{p.id, 0.0, 0.0, 0.0, 0};
    for (float g : ga.data()) entry.grad_scale = std::max(entry.grad_scale, std::fabs(double{g}));
    const double floor = std::max(1e-2 * entry.grad_scale, 1e-12);
    const std::size_t n = w.numel();
    const std::size_t stride = std::max<std::size_t>(1, n / std::max<std::size_t>(1, max_entries));
    for (std::size_t k = 0; k < n; k += stride) {
      const float orig = w[k];
      w[k] = static_cast<float>(orig + h);
      const double up = loss_fn();
      const double h_up = static_cast<double>(w[k]) - orig;
      w[k] = static_cast<float>(orig - h);
      const double down = loss_fn();
      const double h_down = orig - static_cast<double>(w[k]);
      w[k] = orig;
      const double numeric = (up - down) / (h_up + h_down);
      const double a = ga[k];
      const double abs_err = std::fabs(a - numeric);
      const double rel = abs_err / std::max({std::fabs(a), std::fabs(numeric), floor});
      if (rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = k;
      }
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
    }
    if (entry.max_rel_error > tol) report.flagged.push_back(entry.id);
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace sim
