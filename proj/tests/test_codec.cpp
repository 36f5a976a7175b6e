// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>

#include "fedsim/codec.hpp"
#include "fedsim/error.hpp"

using namespace fedsim;

namespace {

Tensor random_tensor(std::uint64_t seed, std::size_t n, float lo, float hi) {
  return Tensor({n}, rng_uniform(RngStream(seed, {9}), lo, hi, n).values());
}

}  // namespace

TEST_CASE("small variables stay raw") {
  const Tensor t = random_tensor(1, 300, -1.0f, 1.0f);
  const EncodedVariable e = encode_variable(t, CodecPolicy::uniform_quant(8, 10000), "b1");
  CHECK(e.tag == EncodedTag::kRaw);
  CHECK(e.bit_count == 9600);
  CHECK(decode_variable(e) == t);
  // Threshold is strict: exactly at the threshold is still raw.
  CHECK(encode_variable(t, CodecPolicy::uniform_quant(8, 300)).tag == EncodedTag::kRaw);
  CHECK(encode_variable(t, CodecPolicy::uniform_quant(8, 299)).tag == EncodedTag::kQuantized);
}

TEST_CASE("identity codec is lossless") {
  const Tensor t({2, 3}, {1.5f, -0.0f, 3e-30f, -7.25f, 1e30f, 0.1f});
  const EncodedVariable e = encode_variable(t, CodecPolicy::identity());
  CHECK(e.tag == EncodedTag::kRaw);
  CHECK(e.bit_count == 32 * 6);
  CHECK(decode_variable(e) == t);
}

TEST_CASE("lattice points decode exactly") {
  std::vector<float> values(256);
  for (int i = 0; i < 256; ++i) values[static_cast<std::size_t>(i)] = static_cast<float>(i);
  const Tensor t({256}, values);
  const EncodedVariable e = encode_variable(t, CodecPolicy::uniform_quant(8, 0));
  REQUIRE(e.tag == EncodedTag::kQuantized);
  CHECK(e.min == 0.0f);
  CHECK(e.max == 255.0f);
  for (int i = 0; i < 256; ++i) CHECK(e.codes[static_cast<std::size_t>(i)] == i);
  CHECK(decode_variable(e) == t);
  CHECK(e.bit_count == 64 + 8 * 256);
}

TEST_CASE("hand-computed code") {
  // step = 0.25/255; 0.1/step = 102.0 exactly in real arithmetic, nearest code 102.
  const Tensor t({3}, {0.0f, 0.1f, 0.25f});
  const EncodedVariable e = encode_variable(t, CodecPolicy::uniform_quant(8, 0));
  CHECK(e.codes[0] == 0);
  CHECK(e.codes[1] == 102);
  CHECK(e.codes[2] == 255);
  const Tensor d = decode_variable(e);
  CHECK(d[0] == 0.0f);
  CHECK(d[1] == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("constant tensor") {
  const Tensor t = Tensor::filled({50}, -3.5f);
  const EncodedVariable e = encode_variable(t, CodecPolicy::uniform_quant(4, 0));
  REQUIRE(e.tag == EncodedTag::kQuantized);
  for (auto c : e.codes) CHECK(c == 0);
  CHECK(decode_variable(e) == t);
}

TEST_CASE("quantization error bound, idempotence and bit accounting") {
  for (int bits : {1, 2, 4, 8, 12, 16}) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const std::size_t n = 1 + (seed * 37) % 500;
      const Tensor t = random_tensor(seed + 1000 * static_cast<std::uint64_t>(bits), n, -3.0f, 5.0f);
      const CodecPolicy policy = CodecPolicy::uniform_quant(bits, 0);
      const EncodedVariable e = encode_variable(t, policy);
      const Tensor d = decode_variable(e);
      const double step = (static_cast<double>(e.max) - e.min) / (std::ldexp(1.0, bits) - 1.0);
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(static_cast<double>(d[i]) - t[i]));
      CHECK(worst <= step / 2 * (1 + 1e-6) + 1e-6);
      CHECK(e.bit_count == 64 + static_cast<std::uint64_t>(bits) * n);
      CHECK(e.bit_count == encoded_bits(n, policy));
      // Re-encoding the decoded tensor reproduces it.
      CHECK(decode_variable(encode_variable(d, policy)) == d);
    }
  }
}

TEST_CASE("model-level accounting") {
  const ModelSpec spec = MlpSpec{784, 200, 10};
  // W1 (156800) is the only variable above 10000 elements; b1, W2, b2 (2210) stay raw.
  CHECK(encoded_model_bits(spec, CodecPolicy::uniform_quant()) == 1325184);
  CHECK(encoded_model_bits(spec, CodecPolicy::identity()) == 5088320);
  CHECK(compression_ratio(spec, CodecPolicy::uniform_quant()) == doctest::Approx(1325184.0 / 5088320.0));
  CHECK(compression_ratio(spec, CodecPolicy::uniform_quant()) == doctest::Approx(0.260436).epsilon(1e-6));
  CHECK(compression_ratio(spec, CodecPolicy::identity()) == 1.0);
  CHECK(compression_ratio(spec, CodecPolicy::uniform_quant(4)) < compression_ratio(spec, CodecPolicy::uniform_quant(8)));

  const ModelParams p = init_params(spec, RngStream(3));
  const EncodedModel enc = encode_model(p, CodecPolicy::uniform_quant());
  CHECK(enc.total_bits == 1325184);
  const ModelParams back = decode_model(enc);
  CHECK(back.same_layout(p));
  CHECK(back.get("b1") == p.get("b1"));
  CHECK(back.get("W2") == p.get("W2"));
  CHECK_FALSE(back.get("W1") == p.get("W1"));
}

TEST_CASE("direction policies") {
  CodecPolicy p = CodecPolicy::uniform_quant();
  p.apply_to_broadcast = false;
  CHECK(p.for_direction(Direction::kBroadcast).scheme == CodecScheme::kIdentity);
  CHECK(p.for_direction(Direction::kAggregate).scheme == CodecScheme::kUniformQuant);
  CHECK(parse_codec_scheme("uniform_quant") == CodecScheme::kUniformQuant);
  CHECK(to_string(CodecScheme::kIdentity) == "identity");
  CHECK_THROWS_AS(parse_codec_scheme("gzip"), ContractError);
}

TEST_CASE("codec rejects bad input") {
  CHECK_THROWS_AS(validate(CodecPolicy::uniform_quant(0)), ContractError);
  CHECK_THROWS_AS(validate(CodecPolicy::uniform_quant(17)), ContractError);
  Tensor t = random_tensor(2, 20, 0.0f, 1.0f);
  t[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(encode_variable(t, CodecPolicy::uniform_quant(8, 0)), ContractError);
  t[3] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(encode_variable(t, CodecPolicy::identity()), ContractError);

  EncodedVariable e = encode_variable(random_tensor(2, 20, 0.0f, 1.0f), CodecPolicy::uniform_quant(4, 0));
  e.codes[5] = 16;
  CHECK_THROWS_AS(decode_variable(e), ContractError);
  e.codes[5] = 0;
  e.codes.pop_back();
  CHECK_THROWS_AS(decode_variable(e), ContractError);
}
