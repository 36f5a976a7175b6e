// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/tensor.hpp"

namespace fedsim {

enum class CodecScheme { kIdentity, kUniformQuant };
enum class Direction { kBroadcast, kAggregate };

/// How parameters are encoded on the wire. Uniform quantization only touches
/// variables with strictly more than `min_elements_threshold` elements; the
/// apply_* flags select the directions it is used in.
struct CodecPolicy {
  CodecScheme scheme = CodecScheme::kIdentity;
  int quant_bits = 8;
  std::size_t min_elements_threshold = 10000;
  bool apply_to_broadcast = true;
  bool apply_to_aggregate = true;

  static CodecPolicy identity() { return {}; }
  static CodecPolicy uniform_quant(int bits = 8, std::size_t threshold = 10000) {
    return {CodecScheme::kUniformQuant, bits, threshold, true, true};
  }

  /// The policy in effect for one direction: identity when that direction is disabled.
  [[nodiscard]] CodecPolicy for_direction(Direction direction) const;

  friend bool operator==(const CodecPolicy&, const CodecPolicy&) = default;
};

void validate(const CodecPolicy& policy);
std::string to_string(CodecScheme scheme);
CodecScheme parse_codec_scheme(const std::string& name);

enum class EncodedTag { kRaw, kQuantized };

/// One variable as transmitted. Payload is either the raw floats or one code per
/// element; codes are kept unpacked, bit_count is the accounting contract.
struct EncodedVariable {
  std::string name;
  EncodedTag tag = EncodedTag::kRaw;
  Shape shape;
  std::size_t element_count = 0;
  int quant_bits = 0;
  float min = 0.0f;
  float max = 0.0f;
  std::vector<float> raw;
  std::vector<std::uint16_t> codes;
  std::uint64_t bit_count = 0;
};

struct EncodedModel {
  std::vector<EncodedVariable> variables;
  std::uint64_t total_bits = 0;
};

/// Bits a variable of `elements` entries costs under `policy`:
/// 32·n raw, or 64 + bits·n quantized (min/max header included).
std::uint64_t encoded_bits(std::size_t elements, const CodecPolicy& policy);

EncodedVariable encode_variable(const Tensor& tensor, const CodecPolicy& policy, std::string name = {});
Tensor decode_variable(const EncodedVariable& encoded);

EncodedModel encode_model(const ModelParams& params, const CodecPolicy& policy);
ModelParams decode_model(const EncodedModel& encoded);

/// Encoded size of a full model under `policy`, computed from shapes alone.
std::uint64_t encoded_model_bits(const ModelSpec& spec, const CodecPolicy& policy);
/// encoded_model_bits(policy) / encoded_model_bits(identity).
double compression_ratio(const ModelSpec& spec, const CodecPolicy& policy);

}  // namespace fedsim
