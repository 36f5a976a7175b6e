// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. Prints one [PASS]/[FAIL] line per criterion, with the
// measured quantities and wall time, and exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/codec.hpp"
#include "fedsim/data.hpp"
#include "fedsim/error.hpp"
#include "fedsim/experiment.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/gradcheck.hpp"

using namespace fedsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> body;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fedsim_acceptance_" + name);
  fs::remove_all(dir);
  return dir;
}

// -- 1 ----------------------------------------------------------------------
Outcome gradient_correctness() {
  const auto reports = gradcheck_suite(20, 7);
  double worst = 0.0;
  bool ok = true;
  std::size_t softmax = 0, mlp = 0;
  for (const auto& r : reports) {
    worst = std::max(worst, r.max_relative_error);
    ok = ok && r.passed && r.max_relative_error < 1e-4;
    (r.model.rfind("Mlp", 0) == 0 ? mlp : softmax) += 1;
  }
  ok = ok && softmax == 20 && mlp == 20;
  return {ok, fmt("%zu softmax + %zu mlp cases, max relative error %.3g (< 1e-4)", softmax, mlp, worst)};
}

// -- 2 ----------------------------------------------------------------------
Outcome fedavg_equals_gd() {
  const ModelSpec spec = MlpSpec{784, 10, 10};
  const Dataset data = synth_dataset(RngStream(2).child("data"), 20, 10, 784);
  const ClientPartition one = partition_iid(data, 1, RngStream(2).child("partition"));
  FedConfig c;
  c.rounds = 20;
  c.clients_per_round = 1;
  c.batch_size = data.size();
  c.local_epochs = 1;
  c.client_lr = 0.1f;
  c.seed = 2;
  c.codec = CodecPolicy::identity();
  ServerState fed = initialize(spec, c);
  ModelParams gd = fed.params;
  const Batch all = as_batch(data);
  double worst = 0.0;
  for (std::size_t t = 0; t < c.rounds; ++t) {
    fed = next(fed, spec, data, one, c).state;
    gd = sgd_step(gd, backward(spec, gd, all), c.client_lr);
    for (std::size_t v = 0; v < gd.size(); ++v)
      for (std::size_t i = 0; i < gd[v].tensor.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(fed.params[v].tensor[i]) - gd[v].tensor[i]));
  }
  return {worst <= 1e-6, fmt("max |w_fedavg - w_gd| over 20 rounds = %.3g (<= 1e-6)", worst)};
}

// -- 3 ----------------------------------------------------------------------
Outcome codec_properties() {
  RngGenerator gen(RngStream(3).child("codec"));
  std::size_t tensors = 0, violations = 0, not_idempotent = 0;
  double worst_ratio = 0.0;
  for (int bits : {4, 8, 16}) {
    const CodecPolicy policy = CodecPolicy::uniform_quant(bits, 0);
    for (int t = 0; t < 1000; ++t) {
      const std::size_t n = 2 + gen.below(2000);
      const double centre = (gen.next_double() - 0.5) * 20.0;
      const double spread = std::pow(10.0, gen.next_double() * 6.0 - 4.0);
      const Tensor x({n}, rng_uniform(RngStream(3, {static_cast<std::uint64_t>(bits), static_cast<std::uint64_t>(t)}),
                                      static_cast<float>(centre - spread), static_cast<float>(centre + spread), n)
                              .values());
      const EncodedVariable e = encode_variable(x, policy);
      const Tensor y = decode_variable(e);
      const double step = (static_cast<double>(e.max) - e.min) / (std::ldexp(1.0, bits) - 1.0);
      const float magnitude = std::max(std::abs(e.min), std::abs(e.max));
      const double ulp = std::nextafter(magnitude, std::numeric_limits<float>::infinity()) - magnitude;
      const double bound = step / 2.0 + ulp;
      for (std::size_t i = 0; i < n; ++i) {
        const double err = std::abs(static_cast<double>(y[i]) - x[i]);
        if (err > bound) ++violations;
        worst_ratio = std::max(worst_ratio, err / bound);
      }
      if (!(decode_variable(encode_variable(y, policy)) == y)) ++not_idempotent;
      ++tensors;
    }
  }
  const Tensor constant = Tensor::filled({4096}, 0.3721f);
  bool constant_exact = true;
  for (int bits : {4, 8, 16})
    constant_exact = constant_exact && decode_variable(encode_variable(constant, CodecPolicy::uniform_quant(bits, 0))) == constant;
  const bool ok = violations == 0 && not_idempotent == 0 && constant_exact && tensors == 3000;
  return {ok, fmt("%zu tensors, %zu bound violations (worst err/bound %.3f), %zu non-idempotent, constant exact: %s",
                  tensors, violations, worst_ratio, not_idempotent, constant_exact ? "yes" : "no")};
}

// -- 4, 5 -------------------------------------------------------------------
// Criteria 4 and 5 share the three exp1 seed pairs; the time to produce them
// is reported with, and charged to, both.
std::vector<PairedRuns> exp1_runs;
double exp1_seconds = 0.0;

const std::vector<PairedRuns>& exp1_seeds() {
  if (exp1_runs.empty()) {
    const auto start = std::chrono::steady_clock::now();
    for (std::uint64_t seed : {1, 2, 3}) {
      Overrides o;
      o.seed = seed;
      exp1_runs.push_back(exp1_compression(o, false));
    }
    exp1_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return exp1_runs;
}

Outcome bit_accounting() {
  const PairedRuns& p = exp1_seeds().front();
  const ExperimentConfig base = exp1_base_config();
  const std::uint64_t m = *base.federation.clients_per_round;
  const std::uint64_t rounds = base.federation.rounds;
  const std::uint64_t quant_size = encoded_model_bits(base.model, base.federation.codec);
  const std::uint64_t raw_size = encoded_model_bits(base.model, CodecPolicy::identity());
  const bool exact = p.b.log.cumulative_broadcast_bits() == m * rounds * quant_size &&
                     p.b.log.cumulative_aggregate_bits() == m * rounds * quant_size &&
                     p.a.log.cumulative_broadcast_bits() == m * rounds * raw_size &&
                     p.a.log.cumulative_aggregate_bits() == m * rounds * raw_size;
  const double measured = static_cast<double>(p.b.log.cumulative_broadcast_bits() + p.b.log.cumulative_aggregate_bits()) /
                          static_cast<double>(p.a.log.cumulative_broadcast_bits() + p.a.log.cumulative_aggregate_bits());
  const double analytic = compression_ratio(MlpSpec{784, 200, 10}, CodecPolicy::uniform_quant(8, 10000));
  const bool ratio_ok = std::abs(measured - analytic) <= 1e-9;
  return {exact && ratio_ok,
          fmt("quantized bits per direction %llu = m*T*%llu: %s; raw %llu; ratio %.9f vs analytic %.9f",
              static_cast<unsigned long long>(p.b.log.cumulative_broadcast_bits()),
              static_cast<unsigned long long>(quant_size), exact ? "exact" : "MISMATCH",
              static_cast<unsigned long long>(p.a.log.cumulative_broadcast_bits()), measured, analytic)};
}

Outcome compression_parity() {
  std::vector<double> deltas;
  std::string per_seed;
  for (const auto& p : exp1_seeds()) {
    const double d = 100.0 * (p.a.summary.final_accuracy - p.b.summary.final_accuracy);
    deltas.push_back(d);
    per_seed += fmt(" %.3f/%.3f", p.a.summary.final_accuracy, p.b.summary.final_accuracy);
  }
  const double med = median3(deltas);
  return {std::abs(med) <= 1.5 && exp1_seconds < 300.0,
          fmt("identity/quantized accuracy per seed:%s; median delta %+.2f points (|.| <= 1.5); "
              "shared exp1 runs took %.1f s (< 300)",
              per_seed.c_str(), med, exp1_seconds)};
}

// -- 6 ----------------------------------------------------------------------
Outcome noniid_degradation() {
  std::vector<double> gaps;
  std::string per_seed;
  bool one_class = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    Overrides o;
    o.seed = seed;
    const PairedRuns p = exp2_noniid(o, false);
    gaps.push_back(100.0 * (p.a.summary.final_accuracy - p.b.summary.final_accuracy));
    per_seed += fmt(" %.3f/%.3f", p.a.summary.final_accuracy, p.b.summary.final_accuracy);
    for (std::size_t k = 0; k < p.b.histogram.counts.size(); ++k)
      one_class = one_class && p.b.histogram.nonzero_classes(k) == 1;
  }
  const double med = median3(gaps);
  return {med >= 5.0 && one_class,
          fmt("iid/label_skew accuracy per seed:%s; median gap %+.2f points (>= 5); one class per client: %s",
              per_seed.c_str(), med, one_class ? "yes" : "no")};
}

// -- 7 ----------------------------------------------------------------------
Outcome determinism() {
  std::vector<std::string> compared;
  bool same = true;
  auto check_pair = [&](const std::string& recipe, auto run, const std::vector<std::string>& subdirs) {
    const fs::path first = scratch(recipe + "_1"), second = scratch(recipe + "_2");
    run(first);
    run(second);
    for (const auto& sub : subdirs) {
      const std::string a = slurp(first / sub / "metrics.csv");
      const std::string b = slurp(second / sub / "metrics.csv");
      same = same && !a.empty() && a == b;
      compared.push_back(recipe + "/" + sub);
    }
  };
  check_pair("exp1", [](const fs::path& out) {
    Overrides o;
    o.seed = 5;
    o.out_dir = out;
    exp1_compression(o);
  }, {"identity", "uniform_quant"});
  check_pair("exp2", [](const fs::path& out) {
    Overrides o;
    o.seed = 5;
    o.out_dir = out;
    exp2_noniid(o);
  }, {"iid", "label_skew"});
  std::string names;
  for (const auto& c : compared) names += " " + c;
  return {same, fmt("metrics.csv byte-identical across reruns for%s: %s", names.c_str(), same ? "yes" : "no")};
}

// -- 8 ----------------------------------------------------------------------
Outcome partition_soundness() {
  RngGenerator gen(RngStream(8).child("partitions"));
  std::size_t triples = 0, failures = 0;
  std::string first_failure;
  auto sound = [&](const ClientPartition& p, std::size_t n, std::size_t k, const std::string& what) {
    std::vector<int> seen(n, 0);
    bool ok = p.num_clients() == k;
    for (const auto& c : p.clients) {
      ok = ok && !c.empty();
      for (std::size_t i : c) {
        if (i >= n) {
          ok = false;
          continue;
        }
        ++seen[i];
      }
    }
    ok = ok && std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
    if (!ok && first_failure.empty()) first_failure = what;
    return ok;
  };
  for (std::size_t t = 0; t < 200; ++t) {
    const std::size_t classes = 2 + gen.below(9);
    const std::size_t n = classes * (2 + gen.below(60)) + gen.below(classes);
    const std::size_t k = classes + gen.below(std::min<std::size_t>(n - classes, 3 * classes) + 1);
    const std::uint64_t seed = gen.next_u64();
    Dataset ds;
    ds.inputs = Tensor({n, 1});
    ds.num_classes = classes;
    for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<int>(gen.below(classes)));
    const std::string tag = fmt("N=%zu k=%zu seed=%llu", n, k, static_cast<unsigned long long>(seed));
    bool ok = true;

    const ClientPartition iid = partition_iid(ds, k, RngStream(seed));
    ok = ok && sound(iid, n, k, "iid " + tag);
    for (const auto& c : iid.clients) ok = ok && (c.size() == n / k || c.size() == n / k + 1);

    const double ratio = 1.0 + gen.next_double() * 3.0;
    try {
      const std::vector<std::size_t> sizes = geometric_sizes(n, k, ratio);
      const ClientPartition q = partition_quantity_skew(ds, k, ratio, RngStream(seed));
      ok = ok && sound(q, n, k, "quantity_skew " + tag);
      for (std::size_t c = 0; c < k; ++c) ok = ok && q.client_size(c) == sizes[c];
      for (std::size_t c = 1; c < k; ++c) ok = ok && sizes[c - 1] <= sizes[c];
    } catch (const ContractError&) {
      // Only legal when the smallest geometric share is below one example.
      double weights = 0.0;
      for (std::size_t c = 0; c < k; ++c)
        weights += k == 1 ? 1.0 : std::pow(ratio, static_cast<double>(c) / static_cast<double>(k - 1));
      ok = ok && static_cast<double>(n) / weights < 1.0;
    }

    // Label skew needs every class to cover its owners.
    std::vector<std::size_t> per_class(classes, 0), owners(classes, 0);
    for (int l : ds.labels) ++per_class[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < k; ++c) ++owners[c % classes];
    bool feasible = true;
    for (std::size_t c = 0; c < classes; ++c) feasible = feasible && per_class[c] >= owners[c];
    if (feasible) {
      const ClientPartition s = partition_label_skew(ds, k, RngStream(seed));
      ok = ok && sound(s, n, k, "label_skew " + tag);
      const LabelHistogram h = label_histogram(ds, s);
      for (std::size_t c = 0; c < k; ++c)
        ok = ok && h.nonzero_classes(c) == 1 && h.counts[c][c % classes] == s.client_size(c);
    } else {
      bool threw = false;
      try {
        (void)partition_label_skew(ds, k, RngStream(seed));
      } catch (const ContractError&) {
        threw = true;
      }
      ok = ok && threw;
    }
    if (!ok) {
      ++failures;
      if (first_failure.empty()) first_failure = tag;
    }
    ++triples;
  }
  return {failures == 0, fmt("%zu (N, k, seed) triples x 3 partitioners, %zu failures%s%s", triples, failures,
                             first_failure.empty() ? "" : ", first: ", first_failure.c_str())};
}

// -- 9 ----------------------------------------------------------------------
Outcome aggregation_oracle() {
  RngGenerator gen(RngStream(9).child("aggregation"));
  double worst = 0.0, worst_scaled = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const std::size_t clients = 1 + gen.below(12);
    const std::size_t len = 1 + gen.below(64);
    std::vector<ClientUpdate> updates, scaled;
    const std::uint64_t factor = 2 + gen.below(50);
    for (std::size_t k = 0; k < clients; ++k) {
      ClientUpdate u;
      u.client_id = gen.below(1000) * 16 + k;
      u.n_k = 1 + gen.below(500);
      u.params = ModelParams({{"w", rng_uniform(RngStream(9, {s, k}), -4.0f, 4.0f, len)}});
      updates.push_back(u);
      u.n_k *= factor;
      scaled.push_back(u);
    }
    const ModelParams got = aggregate(updates);
    const ModelParams got_scaled = aggregate(scaled);
    double n = 0.0;
    for (const auto& u : updates) n += static_cast<double>(u.n_k);
    for (std::size_t i = 0; i < len; ++i) {
      double sum = 0.0;
      for (const auto& u : updates) sum += static_cast<double>(u.n_k) * u.params[0].tensor[i];
      const double want = sum / n;
      worst = std::max(worst, std::abs(got[0].tensor[i] - want));
      worst_scaled = std::max(worst_scaled, std::abs(static_cast<double>(got_scaled[0].tensor[i]) - got[0].tensor[i]));
    }
  }
  return {worst <= 1e-6 && worst_scaled <= 1e-6,
          fmt("100 update sets: max |aggregate - brute force| = %.3g, max scaling drift = %.3g (<= 1e-6)", worst,
              worst_scaled)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", 30, gradient_correctness},
      {2, "FedAvg matches full-batch gradient descent", 10, fedavg_equals_gd},
      {3, "codec round-trip properties", 30, codec_properties},
      {4, "bit-accounting exactness", 300, bit_accounting},
      {5, "compression accuracy parity", 300, compression_parity},
      {6, "non-IID degradation", 300, noniid_degradation},
      {7, "determinism", 300, determinism},
      {8, "partition soundness", 30, partition_soundness},
      {9, "aggregation oracle", 10, aggregation_oracle},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = o.passed && in_time;
    failed += !pass;
    std::printf("[%s] %d. %s: %s [%.2f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : ", OVER BUDGET");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
