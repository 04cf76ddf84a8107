#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "oracles.hpp"

namespace {

const std::filesystem::path kDir = oracle::temp_dir("cli");

struct Run {
  int code;
  std::string out, err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const std::string& args) {
  const auto out = kDir / "stdout.txt", err = kDir / "stderr.txt";
  const std::string cmd = std::string(HLLM_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string path(const char* name) { return (kDir / name).string(); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 1") {
  CHECK(run("").code == 1);
  CHECK(run("count-params --bogus").code == 1);
  const auto r = run("count-params --preset huge");
  CHECK(r.code == 1);
  CHECK(r.err.find("huge") != std::string::npos);
  CHECK(run("--version").out.find("0.1.0") != std::string::npos);
}

TEST_CASE("count-params") {
  CHECK(run("count-params --preset small").out == "124248576\n");
  CHECK(run("count-params --dims 50257,768,12,12,1024").out == "124439808\n");
  CHECK(run("count-params --dims 50257,1024,24,16,1024").out == "354823168\n");
}

TEST_CASE("human-eval") {
  const auto r = run("human-eval --dist 6.89,28.83,28.67,31.40,4.21");
  CHECK(r.code == 0);
  const auto at = r.out.find("mean\t");
  REQUIRE(at != std::string::npos);
  CHECK(std::abs(std::stod(r.out.substr(at + 5)) - 2.03) <= 0.005);
  {
    std::ofstream f(path("ratings.txt"));
    f << "4\n4\n2\n";
  }
  CHECK(run("human-eval --in " + path("ratings.txt")).out.find("mean\t3.33") != std::string::npos);
  {
    std::ofstream f(path("bad_ratings.txt"));
    f << "4\n9\n";
  }
  CHECK(run("human-eval --in " + path("bad_ratings.txt")).code == 2);
}

TEST_CASE("end-to-end pipeline") {
  oracle::DevanagariGenerator gen(2, 60);
  {
    std::ofstream raw(path("raw.txt"));
    for (const auto& d : gen.documents(20000, 5)) raw << d << "\n\n";
    raw << "होम\nमेनू\n\n";
  }
  REQUIRE(run("clean --in " + path("raw.txt") + " --out " + path("corpus.txt")).code == 0);
  CHECK(std::filesystem::exists(path("corpus.txt.manifest.json")));
  CHECK(slurp(path("corpus.txt.manifest.json")).find("raw.txt\": \"") != std::string::npos);
  const auto stats = run("stats --in " + path("corpus.txt"));
  CHECK(stats.code == 0);

  REQUIRE(run("tokenizer-train --in " + path("corpus.txt") + " --vocab 400 --out " + path("tok.txt")).code == 0);
  const auto fert = run("fertility --model " + path("tok.txt") + " --in " + path("corpus.txt"));
  CHECK(fert.code == 0);
  CHECK(std::stod(fert.out) < 6.0);

  {
    std::ofstream cfg(path("model.cfg"));
    cfg << "preset=tiny\ncontext_window=32\n";
  }
  const auto pt = run("pretrain --config " + path("model.cfg") + " --corpus " + path("corpus.txt") + " --tok " +
                      path("tok.txt") + " --out " + path("m.ckpt") + " --steps 6 --batch 2 --lr 1e-3 --seed 4");
  REQUIRE_MESSAGE(pt.code == 0, pt.err);
  CHECK(std::filesystem::exists(path("m.ckpt.metrics.tsv")));
  CHECK(slurp(path("m.ckpt.metrics.tsv")).rfind("step\ttrain_loss", 0) == 0);

  const auto ppl = run("eval-ppl --ckpt " + path("m.ckpt") + " --tok " + path("tok.txt") + " --in " + path("corpus.txt"));
  CHECK(ppl.code == 0);

  const auto gen_out = run("generate --ckpt " + path("m.ckpt") + " --tok " + path("tok.txt") +
                           " --prompt क --max-new 5 --strategy topk:3 --seed 1");
  CHECK(gen_out.code == 0);
  CHECK(gen_out.out == run("generate --ckpt " + path("m.ckpt") + " --tok " + path("tok.txt") +
                           " --prompt क --max-new 5 --strategy topk:3 --seed 1").out);

  {
    std::ofstream t(path("train.tsv"));
    t << "कक\t0\nमम\t1\nकककक\t0\nमममम\t1\n";
  }
  const auto ft = run("finetune --ckpt " + path("m.ckpt") + " --tok " + path("tok.txt") + " --task cls --classes 2 --train " +
                      path("train.tsv") + " --lr 1e-3 --epochs 2 --seed 3 --out " + path("ft.ckpt"));
  REQUIRE_MESSAGE(ft.code == 0, ft.err);
  const auto ev = run("eval-cls --model " + path("ft.ckpt") + " --tok " + path("tok.txt") + " --test " + path("train.tsv"));
  CHECK(ev.code == 0);
  CHECK(ev.out.rfind("accuracy\t", 0) == 0);
  CHECK(ev.out.find("\nprecision\t") != std::string::npos);

  // Flipping one byte of the checkpoint body must be caught by the CRC.
  std::string bytes = slurp(path("m.ckpt"));
  bytes[bytes.size() / 2] ^= 0x01;
  {
    std::ofstream bad(path("bad.ckpt"), std::ios::binary);
    bad << bytes;
  }
  const auto corrupt = run("eval-ppl --ckpt " + path("bad.ckpt") + " --tok " + path("tok.txt") + " --in " + path("corpus.txt"));
  CHECK(corrupt.code == 2);
  CHECK(corrupt.err.find("CRC") != std::string::npos);

  CHECK(run("eval-ppl --ckpt " + path("missing.ckpt") + " --tok " + path("tok.txt") + " --in " + path("corpus.txt")).code == 2);
}

}
