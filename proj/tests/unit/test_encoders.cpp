#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vrh/common.hpp"
#include "vrh/encoders.hpp"
#include "vrh/perturb.hpp"

using namespace vrh;

TEST_CASE("toy encoder determinism and pooling") {
  ToyEncoder enc;
  const auto clip = fixtures::random_clip("c", 1);
  const auto a = enc.encode(clip);
  const auto b = ToyEncoder().encode(clip);
  CHECK(a == b);
  CHECK(a.dim() == 64);
  CHECK(a.n_tokens == 16);
  CHECK_NOTHROW(a.validate());
  for (int j = 0; j < a.dim(); ++j) {
    double s = 0;
    for (int t = 0; t < a.n_tokens; ++t) s += a.token(t)[j];
    CHECK(a.gap[j] == doctest::Approx(s / a.n_tokens).epsilon(1e-5));
  }

  ToyEncoderOptions other;
  other.seed = 8;
  CHECK(ToyEncoder(other).encode(clip).gap != a.gap);
}

TEST_CASE("toy encoder responds to frame order") {
  const auto clip = fixtures::random_clip("c", 2);
  const auto rev = apply_temporal_condition(clip, TemporalCondition::Reversal, 0);
  ToyEncoder mix;
  const auto a = mix.encode(clip);
  const auto b = mix.encode(rev);
  CHECK(oracle::cosine(a.gap, b.gap) < 1.0 - 1e-6);

  // A static clip gives identical tokens.
  const auto still = apply_temporal_condition(clip, TemporalCondition::StaticMiddle, 0);
  const auto s = mix.encode(still);
  for (int t = 1; t < s.n_tokens; ++t) {
    for (int j = 0; j < s.dim(); ++j) CHECK(s.token(t)[j] == s.token(0)[j]);
  }

  // Without the difference term, token order is the only thing that changes.
  ToyEncoderOptions avg;
  avg.temporal_mixing = 0.0;
  ToyEncoder flat(avg);
  const auto fa = flat.encode(clip);
  const auto fb = flat.encode(rev);
  for (int j = 0; j < fa.dim(); ++j) CHECK(fa.gap[j] == doctest::Approx(fb.gap[j]).epsilon(1e-5));
}

TEST_CASE("encode never modifies its input and enforces the contract") {
  ToyEncoder enc;
  const auto clip = fixtures::random_clip("c", 3, 24, 48, 80);
  const auto copy = clip;
  const auto rec = enc.encode(clip, "occlusion:x");
  CHECK(clip == copy);
  CHECK(rec.perturbation == "occlusion:x");
  CHECK(rec.clip_id == "c");
  CHECK_THROWS(enc.check_contract(clip));
  CHECK_NOTHROW(enc.check_contract(enc.preprocess(clip)));
}

TEST_CASE("embedding record validation") {
  EmbeddingRecord r;
  r.clip_id = "x";
  r.n_tokens = 2;
  r.tokens = {1, 2, 3, 4};
  pool_tokens(r);
  CHECK(r.gap == std::vector<float>{2, 3});
  CHECK_NOTHROW(r.validate());
  r.gap[0] = 5;
  CHECK_THROWS(r.validate());
  r.gap[0] = std::nanf("");
  CHECK_THROWS(r.validate());
}

TEST_CASE("registry") {
  auto& reg = EncoderRegistry::instance();
  CHECK(reg.contains("toy"));
  CHECK(reg.contains("external"));
  const auto enc = reg.create("toy", {{"id", "t2"}, {"dim", 32}});
  CHECK(enc->spec().encoder_id == "t2");
  CHECK(enc->spec().embed_dim == 32);
  CHECK_THROWS_AS(reg.create("nope", nlohmann::json::object()), ConfigError);
  CHECK_THROWS(reg.load_plugin("/nonexistent/plugin.so"));
}
