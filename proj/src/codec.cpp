// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsim/codec.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/error.hpp"

namespace fedsim {
namespace {

bool quantizes(std::size_t elements, const CodecPolicy& policy) {
  return policy.scheme == CodecScheme::kUniformQuant && elements > policy.min_elements_threshold;
}

std::uint32_t max_code(int bits) { return (std::uint32_t{1} << bits) - 1; }

// Step is derived from the float header in double precision, identically on
// both sides of the channel.
double step_of(float min, float max, int bits) {
  return (static_cast<double>(max) - static_cast<double>(min)) / static_cast<double>(max_code(bits));
}

}  // namespace

CodecPolicy CodecPolicy::for_direction(Direction direction) const {
  const bool enabled = direction == Direction::kBroadcast ? apply_to_broadcast : apply_to_aggregate;
  if (enabled) return *this;
  CodecPolicy off = *this;
  off.scheme = CodecScheme::kIdentity;
  return off;
}

void validate(const CodecPolicy& policy) {
  require(policy.quant_bits >= 1 && policy.quant_bits <= 16,
          "quant_bits must be in [1, 16], got " + std::to_string(policy.quant_bits));
}

std::string to_string(CodecScheme scheme) {
  return scheme == CodecScheme::kIdentity ? "identity" : "uniform_quant";
}

CodecScheme parse_codec_scheme(const std::string& name) {
  if (name == "identity") return CodecScheme::kIdentity;
  if (name == "uniform_quant") return CodecScheme::kUniformQuant;
  throw ContractError("unknown codec scheme '" + name + "' (expected identity or uniform_quant)");
}

std::uint64_t encoded_bits(std::size_t elements, const CodecPolicy& policy) {
  if (quantizes(elements, policy)) return 64 + static_cast<std::uint64_t>(policy.quant_bits) * elements;
  return 32 * static_cast<std::uint64_t>(elements);
}

EncodedVariable encode_variable(const Tensor& tensor, const CodecPolicy& policy, std::string name) {
  validate(policy);
  require(tensor.all_finite(), "encode_variable: non-finite values in " + (name.empty() ? "tensor" : name));
  EncodedVariable out;
  out.name = std::move(name);
  out.shape = tensor.shape();
  out.element_count = tensor.size();
  out.bit_count = encoded_bits(out.element_count, policy);
  const auto x = tensor.data();

  if (!quantizes(out.element_count, policy)) {
    out.tag = EncodedTag::kRaw;
    out.raw.assign(x.begin(), x.end());
    return out;
  }

  out.tag = EncodedTag::kQuantized;
  out.quant_bits = policy.quant_bits;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  out.min = *lo;
  out.max = *hi;
  out.codes.assign(out.element_count, 0);
  if (out.max == out.min) return out;

  const double step = step_of(out.min, out.max, out.quant_bits);
  const double top = max_code(out.quant_bits);
  for (std::size_t i = 0; i < x.size(); ++i) {
    // std::round rounds halves away from zero.
    const double q = std::round((static_cast<double>(x[i]) - out.min) / step);
    out.codes[i] = static_cast<std::uint16_t>(std::clamp(q, 0.0, top));
  }
  return out;
}

Tensor decode_variable(const EncodedVariable& encoded) {
  require(element_count(encoded.shape) == encoded.element_count, "decode_variable: shape/element count mismatch");
  if (encoded.tag == EncodedTag::kRaw) {
    require(encoded.raw.size() == encoded.element_count, "decode_variable: raw payload length mismatch");
    return Tensor(encoded.shape, encoded.raw);
  }
  require(encoded.quant_bits >= 1 && encoded.quant_bits <= 16, "decode_variable: bad quant_bits");
  require(encoded.codes.size() == encoded.element_count, "decode_variable: code payload length mismatch");
  const std::uint32_t top = max_code(encoded.quant_bits);
  const double step = step_of(encoded.min, encoded.max, encoded.quant_bits);
  std::vector<float> out(encoded.element_count);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t code = encoded.codes[i];
    if (code > top)
      throw ContractError("decode_variable: code " + std::to_string(code) + " exceeds " + std::to_string(top));
    out[i] = code == 0 ? encoded.min : static_cast<float>(encoded.min + code * step);
  }
  return Tensor(encoded.shape, std::move(out));
}

EncodedModel encode_model(const ModelParams& params, const CodecPolicy& policy) {
  EncodedModel out;
  for (const auto& v : params) {
    out.variables.push_back(encode_variable(v.tensor, policy, v.name));
    out.total_bits += out.variables.back().bit_count;
  }
  return out;
}

ModelParams decode_model(const EncodedModel& encoded) {
  std::vector<Variable> vars;
  for (const auto& v : encoded.variables) vars.push_back({v.name, decode_variable(v)});
  return ModelParams(std::move(vars));
}

std::uint64_t encoded_model_bits(const ModelSpec& spec, const CodecPolicy& policy) {
  validate(policy);
  std::uint64_t total = 0;
  for (const auto& v : variable_shapes(spec)) total += encoded_bits(element_count(v.shape), policy);
  return total;
}

double compression_ratio(const ModelSpec& spec, const CodecPolicy& policy) {
  return static_cast<double>(encoded_model_bits(spec, policy)) /
         static_cast<double>(encoded_model_bits(spec, CodecPolicy::identity()));
}

}  // namespace fedsim
