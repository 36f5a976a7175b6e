// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fedsim/error.hpp"

namespace fedsim {
namespace {

std::vector<std::vector<double>> to_double(const ModelParams& params) {
  std::vector<std::vector<double>> out;
  for (const auto& v : params) out.emplace_back(v.tensor.data().begin(), v.tensor.data().end());
  return out;
}

// logits[c] = bias[c] + sum_i in[i] * weight[i][c]
void affine(const std::vector<double>& in, const std::vector<double>& weight, const std::vector<double>& bias,
            std::vector<double>& out) {
  const std::size_t cols = bias.size();
  out.assign(bias.begin(), bias.end());
  for (std::size_t i = 0; i < in.size(); ++i)
    for (std::size_t c = 0; c < cols; ++c) out[c] += in[i] * weight[i * cols + c];
}

}  // namespace

double reference_loss(const ModelSpec& spec, const std::vector<std::vector<double>>& params, const Batch& batch,
                      std::vector<bool>* active) {
  const std::size_t n = batch.inputs.rows(), dim = batch.inputs.cols();
  const bool mlp = std::holds_alternative<MlpSpec>(spec);
  if (active) active->clear();
  double total = 0.0;
  std::vector<double> x(dim), hidden, logits;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < dim; ++i) x[i] = batch.inputs.at(r, i);
    if (mlp) {
      affine(x, params[0], params[1], hidden);
      for (double& h : hidden) {
        if (active) active->push_back(h > 0.0);
        h = std::max(h, 0.0);
      }
      affine(hidden, params[2], params[3], logits);
    } else {
      affine(x, params[0], params[1], logits);
    }
    const double peak = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - peak);
    total += std::log(z) + peak - logits[static_cast<std::size_t>(batch.labels[r])];
  }
  return total / static_cast<double>(n);
}

GradcheckReport check_gradient(const ModelSpec& spec, const ModelParams& params, const Batch& batch,
                               const ModelParams& analytic, const GradcheckOptions& options) {
  require(params.same_layout(analytic), "check_gradient: gradient layout differs from params");
  GradcheckReport report;
  report.model = describe(spec);
  auto probe = to_double(params);
  std::vector<bool> plus_pattern, minus_pattern;
  for (std::size_t v = 0; v < params.size(); ++v) {
    VariableCheck check{params[v].name};
    const auto grad = analytic[v].tensor.data();
    for (std::size_t i = 0; i < probe[v].size(); ++i) {
      const double original = probe[v][i];
      probe[v][i] = original + options.step;
      const double up = reference_loss(spec, probe, batch, &plus_pattern);
      probe[v][i] = original - options.step;
      const double down = reference_loss(spec, probe, batch, &minus_pattern);
      probe[v][i] = original;
      if (plus_pattern != minus_pattern) {
        ++check.skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = grad[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      check.max_relative_error = std::max(check.max_relative_error, std::abs(a - numeric) / denom);
      ++check.checked;
    }
    report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
    report.variables.push_back(std::move(check));
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

GradcheckCase random_gradcheck_case(const ModelSpec& spec, std::size_t batch_size, std::uint64_t seed) {
  const RngStream root = RngStream(seed).child("gradcheck");
  GradcheckCase c;
  c.params = init_params(spec, root.child("params"));
  RngGenerator gen(root.child("perturb"));
  for (auto& v : c.params)
    if (v.tensor.rank() == 1)
      for (float& b : v.tensor.data()) b = static_cast<float>(gen.next_double() - 0.5);
  const std::size_t dim = input_dim(spec);
  c.batch.inputs = Tensor({batch_size, dim}, rng_uniform(root.child("inputs"), 0.0f, 1.0f, batch_size * dim).values());
  c.batch.labels.resize(batch_size);
  for (int& label : c.batch.labels) label = static_cast<int>(gen.below(num_classes(spec)));
  return c;
}

std::vector<GradcheckReport> gradcheck_suite(std::size_t trials, std::uint64_t seed,
                                             const GradcheckOptions& options) {
  const std::vector<ModelSpec> specs = {SoftmaxRegressionSpec{12, 5}, MlpSpec{12, 8, 5}};
  std::vector<GradcheckReport> reports;
  for (const auto& spec : specs) {
    for (std::size_t t = 0; t < trials; ++t) {
      const std::uint64_t trial_seed = seed * 1000003ULL + t;
      const GradcheckCase c = random_gradcheck_case(spec, 4 + t % 13, trial_seed);
      reports.push_back(check_gradient(spec, c.params, c.batch, backward(spec, c.params, c.batch), options));
    }
  }
  return reports;
}

std::string format_report(const GradcheckReport& report) {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", report.max_relative_error);
  os << report.model << ": max relative error " << buf << (report.passed ? " [pass]" : " [FAIL]") << '\n';
  for (const auto& v : report.variables) {
    std::snprintf(buf, sizeof buf, "%.3e", v.max_relative_error);
    os << "  " << v.name << ": " << buf << " over " << v.checked << " coordinates";
    if (v.skipped) os << " (" << v.skipped << " skipped at ReLU kinks)";
    os << '\n';
  }
  return os.str();
}

}  // namespace fedsim
