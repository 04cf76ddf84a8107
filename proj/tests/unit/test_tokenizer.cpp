#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "hllm/error.hpp"
#include "hllm/tokenizer.hpp"
#include "hllm/utf8.hpp"
#include "oracles.hpp"

using namespace hllm::bpe;

namespace {

Tokenizer train(const std::vector<std::string>& corpus, std::size_t vocab, unsigned threads = 1) {
  TrainOptions o;
  o.target_vocab = vocab;
  o.threads = threads;
  return train_bpe(corpus, o);
}

std::string random_utf8(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(0, 40), kind(0, 5);
  std::u32string cps;
  for (int i = 0, n = len(rng); i < n; ++i) {
    switch (kind(rng)) {
      case 0: cps += static_cast<char32_t>(std::uniform_int_distribution<int>(0x20, 0x7E)(rng)); break;
      case 1: cps += static_cast<char32_t>(std::uniform_int_distribution<int>(0x0900, 0x097F)(rng)); break;
      case 2: cps += U" \t\n"[std::uniform_int_distribution<int>(0, 2)(rng)]; break;
      case 3: cps += static_cast<char32_t>(std::uniform_int_distribution<int>(0x1F600, 0x1F64F)(rng)); break;
      case 4: cps += static_cast<char32_t>(std::uniform_int_distribution<int>(0x00A0, 0x07FF)(rng)); break;
      default: {
        char32_t c = static_cast<char32_t>(std::uniform_int_distribution<int>(0x0800, 0xFFFD)(rng));
        if (c >= 0xD800 && c <= 0xDFFF) c = 0x4E00;
        cps += c;
      }
    }
  }
  return hllm::utf8::encode(cps);
}

}  // namespace

TEST_SUITE("tokenizer") {

TEST_CASE("pretokenize keeps bytes and attaches one leading space") {
  CHECK(pretokenize("aaab aaab") == std::vector<std::string_view>{"aaab", " aaab"});
  CHECK(pretokenize("a  b") == std::vector<std::string_view>{"a", " ", " b"});
  CHECK(pretokenize(" x\ny") == std::vector<std::string_view>{" x", "\n", "y"});
  CHECK(pretokenize("").empty());
  std::mt19937_64 rng(4);
  for (int i = 0; i < 2000; ++i) {
    const std::string s = random_utf8(rng);
    std::string joined;
    for (auto c : pretokenize(s)) joined += c;
    CHECK(joined == s);
    const auto mine = pretokenize(s);
    const auto ref = oracle::naive_chunks(s);
    REQUIRE(mine.size() == ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(mine[k] == ref[k]);
  }
}

TEST_CASE("toy corpus merges") {
  const std::vector<std::string> corpus{"aaab aaab"};
  const auto one = train(corpus, 257);
  REQUIRE(one.merges().size() == 1);
  CHECK(one.merges()[0] == Merge{97, 97, 256});
  const auto two = train(corpus, 258);
  REQUIRE(two.merges().size() == 2);
  CHECK(two.merges()[1] == Merge{97, 98, 257});

  CHECK(one.encode("") == TokenSeq{});
  CHECK(one.encode("aaab") == TokenSeq{256, 97, 98});
  CHECK(one.decode(TokenSeq{256, 97, 98}) == "aaab");
  CHECK(one.decode(TokenSeq{}) == "");
}

TEST_CASE("training errors and stopping") {
  CHECK_THROWS_AS(train({"abc"}, 256), hllm::UsageError);
  CHECK_THROWS_AS(train({}, 300), hllm::UsageError);
  // No pair occurs twice: no merges at all.
  CHECK(train({"abcdef"}, 400).merges().empty());
  CHECK(train({"abcdef"}, 400).vocab_size() == 256 + 8);
}

TEST_CASE("specials follow the merges and never come out of encode") {
  const auto tok = train({"the cat sat on the mat with the hat"}, 270);
  const std::size_t m = tok.merges().size();
  CHECK(tok.vocab_size() == 256 + m + 8);
  CHECK(tok.special_id(Special::EndOfText) == 256 + m);
  CHECK(tok.special_id(Special::Reserved) == 256 + m + 7);
  for (TokenId id : tok.encode("<|endoftext|> the cat <|pad|>")) CHECK_FALSE(tok.is_special(id));
  const TokenSeq with{tok.special_id(Special::Cls)};
  CHECK_THROWS_AS(tok.decode(with), hllm::DataError);
  CHECK(tok.decode(with, true) == "<|cls|>");
}

TEST_CASE("byte-level model is the identity on bytes") {
  const auto tok = Tokenizer::byte_level();
  const std::string s = "Hello, world! 123";
  const auto ids = tok.encode(s);
  REQUIRE(ids.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(ids[i] == static_cast<unsigned char>(s[i]));
  CHECK(tok.fertility("नमस्ते") == 18.0);
}

TEST_CASE("fertility") {
  const auto tok = Tokenizer::byte_level();
  CHECK(tok.fertility("ab cd ef g") == doctest::Approx(2.5));
  CHECK_THROWS_AS(tok.fertility("   \n"), hllm::DataError);
}

TEST_CASE("decode errors") {
  const auto tok = Tokenizer::byte_level();
  CHECK_THROWS_AS(tok.decode(TokenSeq{100000}), hllm::DataError);
  CHECK_THROWS_WITH(tok.decode(TokenSeq{'a', 0xE0, 'b'}), doctest::Contains("1"));
}

TEST_CASE("roundtrip on fuzzed UTF-8 with a trained model") {
  oracle::DevanagariGenerator gen(8, 400);
  const auto tok = train(gen.documents(30000, 1), 600);
  CHECK(tok.decode(tok.encode("नमस्ते दुनिया!")) == "नमस्ते दुनिया!");
  std::mt19937_64 rng(77);
  for (int i = 0; i < 3000; ++i) {
    const std::string s = random_utf8(rng);
    REQUIRE(tok.decode(tok.encode(s)) == s);
  }
}

TEST_CASE("merge list equals the naive reference") {
  std::mt19937_64 rng(2024);
  for (int c = 0; c < 20; ++c) {
    std::vector<std::string> corpus;
    std::size_t bytes = 0;
    std::uniform_int_distribution<int> letter(0, 4), wl(1, 6), sep(0, 9);
    while (bytes < 600) {
      std::string doc;
      for (int w = 0; w < 12; ++w) {
        if (w) doc += sep(rng) == 0 ? "  " : (sep(rng) == 1 ? "\n" : " ");
        for (int k = 0, n = wl(rng); k < n; ++k) doc += static_cast<char>('a' + letter(rng));
      }
      bytes += doc.size();
      corpus.push_back(doc);
    }
    const auto tok = train(corpus, 300);
    const auto ref = oracle::naive_bpe(corpus, 300);
    REQUIRE(tok.merges().size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(tok.merges()[i].left == ref[i].left);
      CHECK(tok.merges()[i].right == ref[i].right);
      CHECK(tok.merges()[i].id == ref[i].id);
    }
  }
}

TEST_CASE("training is independent of the worker count") {
  oracle::DevanagariGenerator gen(9, 300);
  const auto docs = gen.documents(40000, 3);
  const auto a = train(docs, 700, 1);
  const auto b = train(docs, 700, 5);
  CHECK(a == b);
}

TEST_CASE("extra merges never increase the token count") {
  oracle::DevanagariGenerator gen(10, 300);
  const auto docs = gen.documents(30000, 4);
  const auto small = train(docs, 400);
  const auto large = train(docs, 800);
  // The larger model's merge list extends the smaller one.
  REQUIRE(large.merges().size() >= small.merges().size());
  for (std::size_t i = 0; i < small.merges().size(); ++i) CHECK(large.merges()[i] == small.merges()[i]);
  std::mt19937_64 rng(1);
  const auto held = gen.documents(5000, 99);
  for (const auto& d : held) CHECK(large.encode(d).size() <= small.encode(d).size());
  for (int i = 0; i < 500; ++i) {
    const std::string s = random_utf8(rng);
    CHECK(large.encode(s).size() <= small.encode(s).size());
  }
}

TEST_CASE("serialization") {
  const auto tok = train({"aaab aaab"}, 258);
  std::ostringstream out;
  tok.write(out);
  const std::string text = out.str();
  CHECK(text.rfind("HLLM-TOK v1\ntarget_vocab 258\nM 97 97 256\nM 97 98 257\nS 258 <|endoftext|>\n", 0) == 0);
  std::istringstream in(text);
  CHECK(Tokenizer::read(in) == tok);

  const auto dir = oracle::temp_dir("tok");
  tok.save(dir / "t.txt");
  CHECK(Tokenizer::load(dir / "t.txt") == tok);
  CHECK(Tokenizer::load(dir / "t.txt").digest() == tok.digest());

  const auto bad = [](const std::string& s) {
    std::istringstream is(s);
    return Tokenizer::read(is);
  };
  CHECK_THROWS_WITH_AS(bad("HLLM-TOK v2\n"), doctest::Contains("line 1"), hllm::DataError);
  CHECK_THROWS_WITH_AS(bad("HLLM-TOK v1\ntarget_vocab 300\nM 999 97 256\n"), doctest::Contains("line 3"),
                       hllm::DataError);
  CHECK_THROWS_WITH_AS(bad("HLLM-TOK v1\ntarget_vocab 300\nM 97 97 256\nM 97 98 256\n"),
                       doctest::Contains("line 4"), hllm::DataError);
  CHECK_THROWS_WITH_AS(bad("HLLM-TOK v1\ntarget_vocab 300\nM 97 97 256\nX\n"), doctest::Contains("line 4"),
                       hllm::DataError);
  // Truncations at every byte boundary fail cleanly.
  for (std::size_t cut = 0; cut < text.size(); ++cut) CHECK_THROWS_AS(bad(text.substr(0, cut)), hllm::DataError);
}

}
