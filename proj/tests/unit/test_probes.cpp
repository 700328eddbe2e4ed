#include <doctest.h>

#include <cmath>

#include "criteria.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "vrh/common.hpp"
#include "vrh/probes.hpp"

using namespace vrh;

namespace {

ProbeConfig small_attentive() {
  ProbeConfig c;
  c.kind = ProbeKind::Attentive;
  c.depth = 1;
  c.heads = 2;
  c.epochs = 20;
  c.lr = 3e-3;
  c.batch = 16;
  return c;
}

}  // namespace

TEST_CASE("attentive probe gradients, separable training and stable state") {
  const auto o = criteria::attentive_probe();
  for (const auto& f : o.failures) INFO(f);
  CHECK(o.pass);
}

TEST_CASE("knn probe matches an exhaustive scan and ignores rescaling") {
  const auto o = criteria::knn_probe();
  for (const auto& f : o.failures) INFO(f);
  CHECK(o.pass);
}

TEST_CASE("knn vote tie-breaks") {
  // Two refs per class, k = 4: a 2-2 vote goes to the class with the nearer member.
  std::vector<EmbeddingRecord> refs(4);
  const std::vector<std::vector<float>> pts{{1.0f, 0.1f}, {1.0f, -0.3f}, {0.1f, 1.0f}, {-0.3f, 1.0f}};
  for (int i = 0; i < 4; ++i) refs[i].gap = pts[i];
  ProbeConfig c;
  c.kind = ProbeKind::Knn;
  c.k = 4;
  c.standardize = false;
  const auto p = fit_knn_probe(refs, {0, 0, 1, 1}, 2, c);
  CHECK(p->classify({1.0f, 0.2f}) == 0);
  CHECK(p->classify({0.2f, 1.0f}) == 1);
  // Perfectly symmetric query: equal votes and equal nearest similarity, lowest id wins.
  std::vector<EmbeddingRecord> sym(2);
  sym[0].gap = {1.0f, 0.0f};
  sym[1].gap = {0.0f, 1.0f};
  c.k = 2;
  const auto q = fit_knn_probe(sym, {1, 0}, 2, c);
  CHECK(q->classify({1.0f, 1.0f}) == 0);
  CHECK(q->neighbours({1.0f, 1.0f}) == std::vector<int>{0, 1});
}

TEST_CASE("probe save and load") {
  fixtures::TempDir tmp("probe");
  const auto data = fixtures::separable_tokens(3, 24, 3, 8, 3, 1.0);

  SUBCASE("attentive") {
    const auto p = train_attentive_probe(data.records, data.labels, 3, small_attentive());
    save_probe(tmp.path() / "a.bin", *p);
    const auto back = load_probe(tmp.path() / "a.bin");
    CHECK(back->kind() == ProbeKind::Attentive);
    CHECK(back->state_hash() == p->state_hash());
    for (const auto& r : data.records) CHECK(back->logits(r) == p->logits(r));
  }
  SUBCASE("linear") {
    ProbeConfig c;
    c.kind = ProbeKind::Linear;
    c.epochs = 30;
    const auto p = train_linear_probe(data.records, data.labels, 3, c);
    save_probe(tmp.path() / "l.bin", *p);
    const auto back = load_probe(tmp.path() / "l.bin");
    CHECK(back->state_hash() == p->state_hash());
    for (const auto& r : data.records) CHECK(back->logits(r) == p->logits(r));
  }
  SUBCASE("knn") {
    ProbeConfig c;
    c.kind = ProbeKind::Knn;
    const auto p = fit_knn_probe(data.records, data.labels, 3, c);
    save_probe(tmp.path() / "k.bin", *p);
    const auto back = load_probe(tmp.path() / "k.bin");
    CHECK(back->state_hash() == p->state_hash());
  }
  SUBCASE("corrupt blob") {
    ProbeConfig c;
    c.kind = ProbeKind::Knn;
    const auto p = fit_knn_probe(data.records, data.labels, 3, c);
    save_probe(tmp.path() / "k.bin", *p);
    auto bytes = read_file(tmp.path() / "k.bin");
    bytes.resize(bytes.size() / 2);
    atomic_write(tmp.path() / "k.bin", bytes);
    CHECK_THROWS(load_probe(tmp.path() / "k.bin"));
  }
}

TEST_CASE("training is deterministic") {
  const auto data = fixtures::separable_tokens(8, 24, 3, 8, 3, 1.0);
  const auto a = train_attentive_probe(data.records, data.labels, 3, small_attentive());
  const auto b = train_attentive_probe(data.records, data.labels, 3, small_attentive());
  CHECK(a->state_hash() == b->state_hash());
  CHECK(a->curve.loss.size() == 21);
  CHECK(a->curve.loss.back() < a->curve.loss.front());
  auto other = small_attentive();
  other.seed = 43;
  CHECK(train_attentive_probe(data.records, data.labels, 3, other)->state_hash() != a->state_hash());
}

TEST_CASE("linear probe learns separable pooled features") {
  const auto data = fixtures::clustered_gaps(5, 90, 10, 3, 0.2);
  ProbeConfig c;
  c.kind = ProbeKind::Linear;
  c.epochs = 60;
  c.lr = 0.01;
  c.batch = 0;
  const auto p = train_linear_probe(data.records, data.labels, 3, c);
  CHECK(accuracy(predict(*p, data.records), data.labels) == 1.0);
  CHECK(p->curve.loss.back() < p->curve.loss.front());

  // Duplicating every sample leaves the full-batch solution unchanged.
  auto dup = data;
  dup.records.insert(dup.records.end(), data.records.begin(), data.records.end());
  dup.labels.insert(dup.labels.end(), data.labels.begin(), data.labels.end());
  const auto q = train_linear_probe(dup.records, dup.labels, 3, c);
  for (std::size_t i = 0; i < p->params.size(); ++i) CHECK(q->params[i] == doctest::Approx(p->params[i]).epsilon(1e-6));
}

TEST_CASE("probe configuration") {
  ProbeConfig c;
  CHECK(ProbeConfig::from_json(c.to_json()) == c);
  CHECK_THROWS_AS(ProbeConfig::from_json({{"depht", 2}}), ConfigError);
  c.heads = 3;
  CHECK_THROWS_AS(AttentiveProbe(c, 4, 8), ConfigError);
  c.heads = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const auto grid = default_sweep_grid(ProbeConfig{});
  CHECK(grid.size() == 16);
  CHECK_THROWS(parse_probe_kind("svm"));
}

TEST_CASE("sweep keeps the best validation candidate") {
  const auto train = fixtures::separable_tokens(21, 24, 3, 8, 3, 1.0);
  const auto val = fixtures::separable_tokens(21, 12, 3, 8, 3, 1.0);
  auto base = small_attentive();
  base.epochs = 5;
  std::vector<ProbeConfig> grid{base, base};
  grid[1].lr = 1e-2;
  const auto best = select_probe(train.records, train.labels, val.records, val.labels, 3, grid);
  REQUIRE(best->selection.contains("candidates"));
  CHECK(best->selection["candidates"].size() == 2);
}

TEST_CASE("input checks") {
  ProbeConfig c;
  c.kind = ProbeKind::Knn;
  const auto data = fixtures::clustered_gaps(1, 10, 4, 2, 0.5);
  const auto p = fit_knn_probe(data.records, data.labels, 2, c);
  EmbeddingRecord wrong;
  wrong.gap = {1.0f, 2.0f};
  CHECK_THROWS(p->logits(wrong));
  const auto tokless = fixtures::clustered_gaps(1, 10, 4, 2, 0.5);
  CHECK_THROWS(train_attentive_probe(tokless.records, tokless.labels, 2, small_attentive()));
}
