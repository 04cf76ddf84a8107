#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hllm/error.hpp"
#include "hllm/finetune.hpp"
#include "oracles.hpp"

using namespace hllm::finetune;
using hllm::bpe::Special;
using hllm::bpe::Tokenizer;
using hllm::train::Checkpoint;

namespace {

Checkpoint base_checkpoint(const Tokenizer& tok, std::size_t n_ctx = 16, std::uint64_t seed = 1) {
  Checkpoint c;
  c.config = hllm::model::ModelConfig::tiny();
  c.config.vocab_size = tok.vocab_size();
  c.config.context_window = n_ctx;
  c.params = hllm::model::init_params(c.config, seed);
  c.tokenizer_digest = tok.digest();
  c.step = 7;
  return c;
}

LabeledExample cls(std::string text, std::size_t label) {
  LabeledExample e;
  e.text = std::move(text);
  e.label = label;
  return e;
}

}  // namespace

TEST_SUITE("finetune") {

TEST_CASE("task names") {
  CHECK(parse_task_kind("mc") == TaskKind::MultipleChoice);
  CHECK(task_kind_name(TaskKind::Pair) == "pair");
  CHECK_THROWS_AS(parse_task_kind("ner"), hllm::UsageError);
  CHECK(parse_direction("en2hi") == Direction::EnToHi);
  CHECK_THROWS_AS(parse_direction("hi2fr"), hllm::DataError);
  TaskSpec s;
  s.num_classes = 1;
  CHECK_THROWS_AS(s.validate(), hllm::UsageError);
}

TEST_CASE("classification and pair encodings") {
  const auto tok = Tokenizer::byte_level();
  const TokenId bos = tok.special_id(Special::Bos), cls_id = tok.special_id(Special::Cls),
                sep = tok.special_id(Special::Sep);
  const auto one = encode_for_task(tok, TaskKind::Classification, cls("ab", 0), 16);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == TokenSeq{bos, 'a', 'b', cls_id});

  LabeledExample pair = cls("ab", 0);
  pair.text_b = "c";
  CHECK(encode_for_task(tok, TaskKind::Pair, pair, 16)[0] == TokenSeq{bos, 'a', 'b', sep, 'c', cls_id});

  CHECK(encode_for_task(tok, TaskKind::Classification, cls("abcdef", 0), 5)[0] == TokenSeq{bos, 'd', 'e', 'f', cls_id});
  CHECK(encode_for_task(tok, TaskKind::Classification, cls("abcdef", 0), 5, Truncation::Back)[0] ==
        TokenSeq{bos, 'a', 'b', 'c', cls_id});
  CHECK_THROWS_AS(encode_for_task(tok, TaskKind::Pair, pair, 2), hllm::UsageError);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    LabeledExample e = cls(std::string(rng() % 60, 'x'), 0);
    e.text_b = std::string(rng() % 60, 'y');
    const std::size_t n_ctx = 3 + rng() % 40;
    for (auto kind : {TaskKind::Classification, TaskKind::Pair}) {
      const auto s = encode_for_task(tok, kind, e, n_ctx)[0];
      CHECK(s.size() <= n_ctx);
      CHECK(s.back() == cls_id);
      CHECK(s.front() == bos);
      if (kind == TaskKind::Pair) CHECK(std::count(s.begin(), s.end(), sep) == 1);
    }
  }
}

TEST_CASE("multiple-choice and translation encodings") {
  const auto tok = Tokenizer::byte_level();
  LabeledExample mc;
  mc.text = "q";
  mc.candidates = {"a", "b", "c", "d"};
  const auto seqs = encode_for_task(tok, TaskKind::MultipleChoice, mc, 16);
  REQUIRE(seqs.size() == kChoices);
  CHECK(seqs[2][3] == 'c');

  LabeledExample tr;
  tr.text = "abc";
  tr.text_b = "xy";
  const auto t = encode_translation(tok, tr, 16);
  CHECK(t.ids == TokenSeq{tok.special_id(Special::Bos), 'a', 'b', 'c', tok.special_id(Special::Sep), 'x', 'y',
                          tok.special_id(Special::EndOfText)});
  CHECK(t.target_begin == 5);
  const auto cut = encode_translation(tok, tr, 6);
  CHECK(cut.ids.size() == 6);
  CHECK(cut.ids[1] == 'c');
  const auto tgt_only = encode_translation(tok, tr, 4);
  CHECK(tgt_only.ids.size() == 4);
  CHECK(tgt_only.ids[2] == 'x');
}

TEST_CASE("head attachment") {
  const auto tok = Tokenizer::byte_level();
  const auto base = base_checkpoint(tok);
  const auto a = attach_head(base.params, 3, 4), b = attach_head(base.params, 3, 4);
  CHECK(a == b);
  CHECK(has_head(a));
  CHECK_FALSE(has_head(base.params));
  CHECK_THROWS_AS(attach_head(a, 3, 4), hllm::UsageError);
  CHECK(a.at("head.w").shape() == hllm::tensor::Shape{8, 3});
  const auto ids = encode_for_task(tok, TaskKind::Classification, cls("नमस्ते", 0), 16)[0];
  const auto logits = head_logits(a, ids);
  REQUIRE(logits.size() == 3);
  for (float x : logits) CHECK(std::abs(x) < 1.0f);
  CHECK_THROWS_AS(head_logits(base.params, ids), hllm::UsageError);
}

TEST_CASE("finetune edge cases") {
  const auto tok = Tokenizer::byte_level();
  const auto base = base_checkpoint(tok);
  const std::vector<LabeledExample> data{cls("aa", 0), cls("bb", 1), cls("ab", 0), cls("ba", 1)};
  TaskSpec spec;
  spec.batch_size = 2;
  spec.epochs = 2;

  SUBCASE("zero learning rate keeps the base weights") {
    spec.learning_rate = 0.0;
    const auto r = finetune(base, tok, spec, data);
    CHECK(r.losses.size() == 4);
    for (std::size_t i = 0; i < base.params.size(); ++i) CHECK(r.checkpoint.params.tensor(i) == base.params.tensor(i));
    CHECK(r.checkpoint.params.at("head.w") == attach_head(base.params, 2, spec.seed).at("head.w"));
    CHECK(task_of(r.checkpoint).kind == TaskKind::Classification);
    CHECK(r.checkpoint.extra.at("base_step") == "7");
  }
  SUBCASE("zero epochs returns the base with a fresh head") {
    spec.epochs = 0;
    const auto r = finetune(base, tok, spec, data);
    CHECK(r.losses.empty());
    CHECK(r.checkpoint.params == attach_head(base.params, 2, spec.seed));
  }
  SUBCASE("early stop through the callback") {
    FinetuneOptions o;
    o.on_step = [](std::size_t step, double, const Parameters&) { return step < 3; };
    CHECK(finetune(base, tok, spec, data, o).losses.size() == 3);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(finetune(base, tok, spec, std::vector<LabeledExample>{}), hllm::UsageError);
    CHECK_THROWS_AS(finetune(base, tok, spec, std::vector<LabeledExample>{cls("a", 2)}), hllm::DataError);
    Checkpoint other = base;
    other.tokenizer_digest = "0000";
    CHECK_THROWS_AS(finetune(other, tok, spec, data), hllm::DataError);
  }
  SUBCASE("deterministic") {
    spec.learning_rate = 1e-3;
    CHECK(finetune(base, tok, spec, data).checkpoint == finetune(base, tok, spec, data).checkpoint);
  }
}

TEST_CASE("separable three-class task is learned to full train accuracy") {
  const auto tok = Tokenizer::byte_level();
  const auto base = base_checkpoint(tok, 16, 5);
  std::vector<LabeledExample> data;
  std::mt19937_64 rng(2);
  const std::string letters[3] = {"क", "म", "स"};
  for (int i = 0; i < 32; ++i) {
    const std::size_t label = i % 3;
    std::string s;
    for (std::size_t k = 0, n = 1 + rng() % 4; k < n; ++k) s += letters[label];
    data.push_back(cls(s, label));
  }
  TaskSpec spec;
  spec.num_classes = 3;
  spec.learning_rate = 1e-2;
  spec.batch_size = 8;
  spec.epochs = 50;
  const auto r = finetune(base, tok, spec, data);
  CHECK(r.losses.size() == 200);
  const auto rep = eval_classification(r.checkpoint.params, tok, spec, data);
  CHECK(rep.accuracy == 1.0);
  CHECK(predict_classes(r.checkpoint.params, tok, spec, data, 1) == predict_classes(r.checkpoint.params, tok, spec, data, 4));
}

TEST_CASE("multiple choice scoring") {
  const auto tok = Tokenizer::byte_level();
  const auto base = base_checkpoint(tok);
  const auto params = attach_head(base.params, 1, 3);
  LabeledExample same;
  same.text = "प्रश्न";
  same.candidates = {"उत्तर", "उत्तर", "उत्तर", "उत्तर"};
  const auto scores = choice_scores(params, tok, same);
  const auto probs = choice_probabilities(scores);
  for (double p : probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-9));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    std::array<double, kChoices> s{};
    for (auto& x : s) x = n(rng);
    std::array<double, kChoices> t{};
    for (std::size_t k = 0; k < kChoices; ++k) t[k] = 2.0 * s[k] + 5.0;
    CHECK(argmax(s) == argmax(t));
    const auto p = choice_probabilities(s);
    CHECK(argmax(p) == argmax(s));
    double sum = 0;
    for (double x : p) sum += x;
    CHECK(sum == doctest::Approx(1.0));
  }
  const std::vector<double> tie{1.0, 3.0, 3.0};
  CHECK(argmax(tie) == 1);
}

TEST_CASE("classification metrics") {
  const std::vector<std::size_t> truth{0, 0, 1, 1}, pred{0, 1, 1, 1};
  const auto m = metrics_from_predictions(truth, pred, 2);
  CHECK(m.macro_f1 == doctest::Approx(0.7333333333333333).epsilon(1e-12));
  CHECK(m.precision[0] == 1.0);
  CHECK(m.recall[0] == 0.5);
  CHECK(m.precision[1] == doctest::Approx(2.0 / 3.0));
  CHECK(m.accuracy == 0.75);
  CHECK(metrics_from_predictions(truth, truth, 2).macro_f1 == 1.0);

  const std::vector<std::size_t> never{0, 0, 0};
  const std::vector<std::size_t> t3{0, 1, 2};
  const auto z = metrics_from_predictions(t3, never, 3);
  CHECK(z.precision[1] == 0.0);
  CHECK(z.f1[2] == 0.0);

  CHECK_THROWS_AS(metrics_from_predictions(truth, never, 2), hllm::UsageError);
  CHECK_THROWS_AS(metrics_from_confusion({}), hllm::UsageError);

  std::mt19937_64 rng(8);
  for (int i = 0; i < 300; ++i) {
    const std::size_t k = 2 + rng() % 5;
    std::vector<std::vector<std::uint64_t>> conf(k, std::vector<std::uint64_t>(k));
    for (auto& row : conf)
      for (auto& x : row) x = rng() % 4 == 0 ? 0 : rng() % 30;
    conf[0][0] += 1;
    const auto mine = metrics_from_confusion(conf);
    const auto ref = oracle::naive_macro(conf);
    CHECK(std::abs(mine.macro_precision - ref.precision) <= 1e-12);
    CHECK(std::abs(mine.macro_recall - ref.recall) <= 1e-12);
    CHECK(std::abs(mine.macro_f1 - ref.f1) <= 1e-12);
    CHECK(std::abs(mine.accuracy - ref.accuracy) <= 1e-12);
  }
}

TEST_CASE("human evaluation aggregation") {
  const double hi_en[] = {6.89, 28.83, 28.67, 31.40, 4.21};
  const double en_hi[] = {5.91, 44.93, 29.47, 17.81, 1.88};
  CHECK(std::abs(aggregate_human_eval_distribution(std::span<const double, 5>(hi_en)).mean - 2.03) <= 0.005);
  CHECK(std::abs(aggregate_human_eval_distribution(std::span<const double, 5>(en_hi)).mean - 2.35) <= 0.005);

  const std::vector<int> fours(10, 4);
  CHECK(aggregate_human_eval(fours).mean == 4.0);
  const std::vector<int> mixed{0, 1, 2, 3, 4, 4};
  const auto d = aggregate_human_eval(mixed);
  CHECK(d.mean == doctest::Approx(14.0 / 6.0));
  CHECK(d.counts[4] == 2);
  CHECK(d.fractions[0] == doctest::Approx(1.0 / 6.0));
  CHECK_THROWS_AS(aggregate_human_eval(std::vector<int>{5}), hllm::DataError);
  CHECK_THROWS_AS(aggregate_human_eval(std::vector<int>{-1}), hllm::DataError);
  CHECK_THROWS_AS(aggregate_human_eval(std::vector<int>{}), hllm::DataError);

  std::istringstream in("4\n3\n\n0\n");
  CHECK(read_ratings(in) == std::vector<int>{4, 3, 0});
  std::istringstream bad("4\nfour\n");
  CHECK_THROWS_AS(read_ratings(bad), hllm::DataError);
}

TEST_CASE("task data files") {
  TaskSpec spec;
  spec.num_classes = 3;
  std::istringstream good("पहला\t0\nदूसरा\t2\n");
  const auto ex = read_task_data(good, spec);
  REQUIRE(ex.size() == 2);
  CHECK(ex[1].label == 2);

  std::istringstream five("a\tb\tc\td\te\n");
  CHECK_THROWS_WITH_AS(read_task_data(five, spec), doctest::Contains("line 1"), hllm::DataError);
  std::istringstream range("ok\t1\nbad\t3\n");
  CHECK_THROWS_WITH_AS(read_task_data(range, spec), doctest::Contains("line 2"), hllm::DataError);

  TaskSpec mc;
  mc.kind = TaskKind::MultipleChoice;
  std::istringstream answer4("q\ta\tb\tc\td\t4\n");
  CHECK_THROWS_AS(read_task_data(answer4, mc), hllm::DataError);
  std::istringstream answer3("q\ta\tb\tc\td\t3\n");
  CHECK(read_task_data(answer3, mc)[0].candidates[3] == "d");

  TaskSpec tr;
  tr.kind = TaskKind::Translation;
  std::istringstream dir("नमस्ते\thello\tfr2en\n");
  CHECK_THROWS_WITH_AS(read_task_data(dir, tr), doctest::Contains("line 1"), hllm::DataError);

  CHECK_THROWS_AS(load_task_data("/nonexistent/x.tsv", spec), hllm::DataError);
}

}
