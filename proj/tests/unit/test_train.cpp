#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "hllm/error.hpp"
#include "hllm/train.hpp"
#include "oracles.hpp"

using namespace hllm::train;
using hllm::bpe::Tokenizer;
using hllm::tensor::Shape;

namespace {

ModelConfig scalar_model() {
  ModelConfig c;
  c.vocab_size = 1;
  c.embed_dim = 1;
  c.layers = 1;
  c.heads = 1;
  c.context_window = 1;
  return c;
}

std::vector<Tensor> zero_grads(const Parameters& p) {
  std::vector<Tensor> g;
  for (std::size_t i = 0; i < p.size(); ++i) g.emplace_back(p.tensor(i).shape());
  return g;
}

ModelConfig byte_model(std::size_t n_ctx = 16) {
  ModelConfig c = ModelConfig::tiny();
  c.vocab_size = Tokenizer::byte_level().vocab_size();
  c.context_window = n_ctx;
  return c;
}

std::vector<std::string> toy_docs() {
  oracle::DevanagariGenerator gen(5, 40);
  return gen.documents(3000, 8);
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("pack_corpus") {
  const auto tok = Tokenizer::byte_level();
  const std::vector<std::string> docs{std::string(2049, 'a')};
  const auto packed = pack_corpus(tok, docs, 1024);
  REQUIRE(packed.size() == 2);
  CHECK(packed[0].size() == 1024);
  CHECK(packed[1].back() == 'a');

  const std::vector<std::string> two{"ab", "c"};
  const auto small = pack_corpus(tok, two, 2);
  const auto eot = tok.special_id(hllm::bpe::Special::EndOfText);
  REQUIRE(small.size() == 2);
  CHECK(small[0] == TokenSeq{'a', 'b'});
  CHECK(small[1] == TokenSeq{eot, 'c'});
  CHECK_THROWS_AS(pack_corpus(tok, std::vector<std::string>{}, 4), hllm::DataError);
  CHECK_THROWS_AS(pack_corpus(tok, two, 1), hllm::UsageError);
}

TEST_CASE("clm_loss") {
  hllm::tensor::Tape<double> tape;
  const hllm::tensor::BasicTensor<double> zero({3, 4}, 0.0);
  const std::vector<TokenId> ids{0, 1, 2};
  CHECK(clm_loss<double>(tape.constant(zero), ids).value()[0] == doctest::Approx(std::log(4.0)));

  hllm::tensor::BasicTensor<double> sharp({3, 4}, 0.0);
  sharp.at(0, 1) = 30.0;
  sharp.at(1, 2) = 30.0;
  sharp.at(2, 0) = 30.0;  // last row has no target and must not count
  CHECK(clm_loss<double>(tape.constant(sharp), ids).value()[0] < 1e-9);

  const std::vector<TokenId> one{0};
  CHECK_THROWS_AS(clm_loss<double>(tape.constant(hllm::tensor::BasicTensor<double>({1, 4})), one),
                  hllm::UsageError);
}

TEST_CASE("adamw single-step example") {
  const ModelConfig c = scalar_model();
  Parameters p(c);
  p.tensor(0)[0] = 1.0f;
  auto g = zero_grads(p);
  g[0][0] = 1.0f;
  auto state = OptimState::zeros_like(p);
  TrainConfig tc;
  tc.learning_rate = 0.1;
  tc.weight_decay = 0.01;
  tc.grad_clip = 0.0;
  adamw_step(p, g, state, tc);
  CHECK(p.tensor(0)[0] == doctest::Approx(0.899).epsilon(1e-6));
  CHECK(state.step == 1);
  CHECK(state.first_moment[0][0] == doctest::Approx(0.1));
  CHECK(state.second_moment[0][0] == doctest::Approx(0.001));
}

TEST_CASE("adamw properties") {
  const ModelConfig c = byte_model();
  const Parameters init = hllm::model::init_params(c, 3);
  TrainConfig tc;
  tc.learning_rate = 0.01;

  SUBCASE("zero gradient and no decay leaves weights unchanged") {
    Parameters p = init;
    auto s = OptimState::zeros_like(p);
    tc.weight_decay = 0.0;
    adamw_step(p, zero_grads(p), s, tc);
    CHECK(p == init);
  }
  SUBCASE("zero gradient shrinks matrices by (1 - lr*wd) and leaves vectors alone") {
    Parameters p = init;
    auto s = OptimState::zeros_like(p);
    tc.weight_decay = 0.5;
    adamw_step(p, zero_grads(p), s, tc);
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t k = 0; k < p.tensor(i).size(); ++k) {
        const float before = init.tensor(i)[k];
        const float expect = init.tensor(i).rank() >= 2 ? before * (1.0f - 0.005f) : before;
        REQUIRE(p.tensor(i)[k] == doctest::Approx(expect).epsilon(1e-6));
      }
  }
  SUBCASE("zero learning rate is the identity") {
    Parameters p = init;
    auto s = OptimState::zeros_like(p);
    tc.learning_rate = 0.0;
    auto g = zero_grads(p);
    for (auto& t : g)
      for (auto& x : t.data()) x = 0.3f;
    adamw_step(p, g, s, tc);
    CHECK(p == init);
  }
  SUBCASE("non-finite gradients abort without touching anything") {
    Parameters p = init;
    auto s = OptimState::zeros_like(p);
    const auto s0 = s;
    auto g = zero_grads(p);
    g.back()[0] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(adamw_step(p, g, s, tc), hllm::NumericError);
    CHECK(p == init);
    CHECK(s == s0);
  }
  SUBCASE("clipping bounds the applied update") {
    Parameters p = init;
    auto s = OptimState::zeros_like(p);
    auto g = zero_grads(p);
    for (auto& t : g)
      for (auto& x : t.data()) x = 5.0f;
    tc.grad_clip = 1.0;
    const double norm = adamw_step(p, g, s, tc);
    double expect = 0;
    for (const auto& t : g) expect += 25.0 * static_cast<double>(t.size());
    CHECK(norm == doctest::Approx(std::sqrt(expect)));
    double msq = 0;
    for (const auto& m : s.first_moment)
      for (float x : m.data()) msq += double(x) * x;
    // First moment holds 0.1 * clipped gradient, whose norm is 1.
    CHECK(std::sqrt(msq) == doctest::Approx(0.1).epsilon(1e-4));
  }
}

TEST_CASE("checkpoint roundtrip and corruption") {
  const ModelConfig c = byte_model();
  Checkpoint ck;
  ck.config = c;
  ck.params = hllm::model::init_params(c, 8);
  ck.optim = OptimState::zeros_like(ck.params);
  ck.optim->step = 17;
  ck.optim->first_moment[3][0] = 0.25f;
  ck.step = 17;
  ck.tokenizer_digest = Tokenizer::byte_level().digest();
  ck.extra["task"] = "cls";

  const std::string bytes = serialize_checkpoint(ck);
  CHECK(bytes.substr(0, 4) == "HLLM");
  CHECK(deserialize_checkpoint(bytes) == ck);
  CHECK(serialize_checkpoint(deserialize_checkpoint(bytes)) == bytes);

  const auto dir = oracle::temp_dir("ckpt");
  save_checkpoint(ck, dir / "m.ckpt");
  CHECK(load_checkpoint(dir / "m.ckpt") == ck);
  CHECK_FALSE(std::filesystem::exists(dir / "m.ckpt.tmp"));

  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(flipped), doctest::Contains("CRC"), hllm::DataError);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{8}, bytes.size() / 3, bytes.size() - 1})
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, cut)), hllm::DataError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), hllm::DataError);

  Checkpoint reserved = ck;
  reserved.extra["step"] = "3";
  CHECK_THROWS_AS(serialize_checkpoint(reserved), hllm::UsageError);
}

TEST_CASE("seeded permutation") {
  for (std::size_t n : {0u, 1u, 2u, 17u, 1000u}) {
    const auto p = seeded_permutation(n, 5);
    std::vector<std::size_t> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> iota(n);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(sorted == iota);
  }
  CHECK(seeded_permutation(100, 1) == seeded_permutation(100, 1));
  CHECK(seeded_permutation(100, 1) != seeded_permutation(100, 2));
  // Position of element 0 is roughly uniform over many seeds.
  std::vector<int> hits(4, 0);
  for (std::uint64_t s = 0; s < 4000; ++s) {
    const auto p = seeded_permutation(4, s);
    ++hits[std::find(p.begin(), p.end(), 0u) - p.begin()];
  }
  for (int h : hits) CHECK(std::abs(h - 1000) < 120);
}

TEST_CASE("metrics rows") {
  CHECK(metrics_header() == "step\ttrain_loss\teval_loss\teval_acc\tperplexity");
  MetricsRow r;
  r.step = 5;
  r.train_loss = 1.5;
  CHECK(format_metrics_row(r) == "5\t1.5\t\t\t");
  EvalReport e;
  e.eval_loss = 2.0;
  e.eval_accuracy = 0.25;
  e.perplexity = perplexity_from_loss(2.0);
  r.eval = e;
  CHECK(format_metrics_row(r) == "5\t1.5\t2\t0.25\t7.3890561");
}

TEST_CASE("evaluate reports exp of the mean loss") {
  const ModelConfig c = byte_model(8);
  const auto p = hllm::model::init_params(c, 2);
  const auto packed = pack_corpus(Tokenizer::byte_level(), toy_docs(), 8);
  const std::vector<TokenSeq> few(packed.begin(), packed.begin() + 5);
  const auto rep = evaluate(p, few);
  CHECK(rep.perplexity == doctest::Approx(std::exp(rep.eval_loss)));
  // Near-uniform predictions at initialization.
  CHECK(rep.eval_loss == doctest::Approx(std::log(double(c.vocab_size))).epsilon(0.05));
  CHECK(rep.eval_accuracy >= 0.0);
  CHECK(rep.eval_accuracy <= 1.0);
}

TEST_CASE("pretraining") {
  const auto tok = Tokenizer::byte_level();
  const ModelConfig c = byte_model(8);
  const auto docs = toy_docs();
  TrainConfig tc;
  tc.window = 8;
  tc.batch_size = 4;
  tc.seed = 13;
  tc.learning_rate = 3e-3;

  SUBCASE("zero steps returns the initialization") {
    tc.total_steps = 0;
    const auto r = pretrain(c, tok, docs, tc);
    CHECK(r.checkpoint.params == hllm::model::init_params(c, 13));
    CHECK(r.checkpoint.step == 0);
  }
  SUBCASE("runs are deterministic and loss decreases") {
    tc.total_steps = 30;
    tc.checkpoint_every = 10;
    const auto dir = oracle::temp_dir("pretrain");
    PretrainOptions o;
    o.checkpoint_path = dir / "m.ckpt";
    std::size_t rows = 0;
    o.on_row = [&](const MetricsRow&) { ++rows; };
    const auto a = pretrain(c, tok, docs, tc, o);
    const auto b = pretrain(c, tok, docs, tc);
    CHECK(a.checkpoint == b.checkpoint);
    CHECK(a.checkpoint.step == 30);
    CHECK(a.checkpoint.tokenizer_digest == tok.digest());
    CHECK(load_checkpoint(dir / "m.ckpt") == a.checkpoint);
    CHECK(rows == 30);
    REQUIRE(a.log.size() == 30);
    std::size_t evals = 0;
    for (const auto& row : a.log) evals += row.eval.has_value();
    CHECK(evals == 3);
    CHECK(a.log.back().train_loss < a.log.front().train_loss);
    CHECK(a.final_eval.perplexity == doctest::Approx(std::exp(a.final_eval.eval_loss)));
    CHECK(a.final_train_perplexity > 1.0);
  }
  SUBCASE("invalid settings") {
    tc.window = 9;
    CHECK_THROWS_AS(pretrain(c, tok, docs, tc), hllm::UsageError);
    tc.window = 8;
    ModelConfig wrong = c;
    wrong.vocab_size = 100;
    CHECK_THROWS_AS(pretrain(wrong, tok, docs, tc), hllm::UsageError);
    CHECK_THROWS_AS(pretrain(c, tok, std::vector<std::string>{"ab"}, tc), hllm::DataError);
  }
}

}
