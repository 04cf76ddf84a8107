#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hllm/corpus.hpp"
#include "hllm/digest.hpp"
#include "hllm/error.hpp"
#include "hllm/finetune.hpp"
#include "hllm/kernels.hpp"
#include "hllm/model.hpp"
#include "hllm/parallel.hpp"
#include "hllm/tokenizer.hpp"
#include "hllm/train.hpp"
#include "hllm/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hllm;

namespace {

unsigned g_threads = 0;

class Manifest {
 public:
  explicit Manifest(std::string subcommand) {
    j_["subcommand"] = std::move(subcommand);
    j_["version"] = kVersion;
    j_["config"] = json::object();
    j_["seeds"] = json::object();
    j_["inputs"] = json::object();
  }

  json& config() { return j_["config"]; }
  void seed(const std::string& name, std::uint64_t value) { j_["seeds"][name] = value; }
  void input(const fs::path& path) { j_["inputs"][path.string()] = sha256_file(path); }

  // Beside the output file when there is one, else one line on stderr.
  void emit(const std::optional<fs::path>& output) const {
    if (output) {
      const fs::path p = output->string() + ".manifest.json";
      std::ofstream out(p, std::ios::binary);
      out << j_.dump(2) << '\n';
      if (!out) throw DataError("cannot write " + p.string());
    } else {
      std::cerr << "manifest: " << j_.dump() << '\n';
    }
  }

 private:
  json j_;
};

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& s : inputs) {
    const fs::path p(s);
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file()) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      out.insert(out.end(), files.begin(), files.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw DataError("no such file or directory: " + s);
    }
  }
  return out;
}

std::string join_lines(const corpus::Document& doc) {
  std::string s;
  for (std::size_t i = 0; i < doc.lines.size(); ++i) {
    if (i) s += '\n';
    s += doc.lines[i];
  }
  return s;
}

std::vector<std::string> load_corpus_texts(const std::vector<fs::path>& paths, Manifest& manifest) {
  std::vector<std::string> docs;
  for (const auto& p : paths) {
    manifest.input(p);
    for (const auto& d : corpus::read_documents(p)) docs.push_back(join_lines(d));
  }
  return docs;
}

void write_text_atomic(const fs::path& path, const std::string& data) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << data;
    if (!out) throw DataError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::map<std::string, std::string> read_kv_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

train::Checkpoint load_with_tokenizer(const fs::path& ckpt_path, const fs::path& tok_path,
                                      bpe::Tokenizer& tok, Manifest& manifest) {
  manifest.input(ckpt_path);
  manifest.input(tok_path);
  train::Checkpoint ckpt = train::load_checkpoint(ckpt_path);
  tok = bpe::Tokenizer::load(tok_path);
  if (ckpt.tokenizer_digest != tok.digest())
    throw DataError("checkpoint " + ckpt_path.string() + " was trained with a different tokenizer");
  return ckpt;
}

// ---- subcommands -------------------------------------------------------------

struct CleanArgs {
  std::vector<std::string> in;
  std::string out;
  double min_devanagari = 0.5;
  std::uint64_t seed = 0;
};

void run_clean(const CleanArgs& a) {
  Manifest m("clean");
  m.config() = {{"min_devanagari", a.min_devanagari}, {"threads", g_threads}};
  m.seed("pair_order", a.seed);
  std::vector<corpus::Document> docs;
  for (const auto& p : expand_inputs(a.in)) {
    m.input(p);
    if (p.extension() == ".tsv") {
      const auto pairs = corpus::read_parallel_pairs(p);
      auto merged = corpus::merge_parallel_pairs(pairs, a.seed);
      docs.insert(docs.end(), merged.begin(), merged.end());
    } else {
      auto d = corpus::read_documents(p);
      docs.insert(docs.end(), d.begin(), d.end());
    }
  }
  const auto cleaned = corpus::clean_documents(docs, a.min_devanagari, g_threads);
  std::ostringstream out;
  corpus::write_documents(out, cleaned);
  write_text_atomic(a.out, out.str());
  std::cerr << "clean: kept " << cleaned.size() << " of " << docs.size() << " documents\n";
  m.emit(fs::path(a.out));
}

void run_stats(const std::vector<std::string>& in) {
  Manifest m("stats");
  const auto paths = expand_inputs(in);
  for (const auto& p : paths) m.input(p);
  const auto s = corpus::corpus_stats(paths, g_threads);
  std::cout << s.bytes << '\t' << s.words << '\t' << s.lines << '\t' << s.documents << '\n';
  m.emit(std::nullopt);
}

void run_tokenizer_train(const std::vector<std::string>& in, std::size_t vocab, const std::string& out) {
  Manifest m("tokenizer-train");
  m.config() = {{"target_vocab", vocab}, {"threads", g_threads}};
  const auto texts = load_corpus_texts(expand_inputs(in), m);
  bpe::TrainOptions opt;
  opt.target_vocab = vocab;
  opt.threads = g_threads == 0 ? default_threads() : g_threads;
  const auto tok = bpe::train_bpe(texts, opt);
  tok.save(out);
  std::cerr << "tokenizer-train: " << tok.vocab_size() << " tokens\n";
  m.emit(fs::path(out));
}

void run_tokenize(const std::string& model_path, const std::string& text) {
  Manifest m("tokenize");
  m.input(model_path);
  const auto tok = bpe::Tokenizer::load(model_path);
  const auto ids = tok.encode(text);
  for (std::size_t i = 0; i < ids.size(); ++i) std::cout << (i ? " " : "") << ids[i];
  std::cout << '\n';
  m.emit(std::nullopt);
}

void run_fertility(const std::string& model_path, const std::string& in) {
  Manifest m("fertility");
  m.input(model_path);
  m.input(in);
  const auto tok = bpe::Tokenizer::load(model_path);
  std::printf("%.6f\n", tok.fertility(corpus::read_file(in)));
  m.emit(std::nullopt);
}

void run_count_params(const std::string& preset, const std::string& dims) {
  Manifest m("count-params");
  model::ModelConfig c;
  if (!dims.empty()) {
    std::vector<std::size_t> v;
    std::stringstream ss(dims);
    std::string part;
    while (std::getline(ss, part, ',')) {
      std::size_t pos = 0;
      try {
        v.push_back(std::stoull(part, &pos));
      } catch (const std::exception&) {
        pos = std::string::npos;
      }
      if (pos != part.size()) throw UsageError("--dims: '" + part + "' is not a non-negative integer");
    }
    if (v.size() != 5) throw UsageError("--dims expects V,d,L,H,n_ctx");
    c.vocab_size = v[0];
    c.embed_dim = v[1];
    c.layers = v[2];
    c.heads = v[3];
    c.context_window = v[4];
  } else {
    c = model::ModelConfig::preset(preset);
  }
  c.validate();
  for (const auto& [k, val] : c.to_map()) m.config()[k] = val;
  std::cout << model::count_params(c) << '\n';
  m.emit(std::nullopt);
}

struct PretrainArgs {
  std::string config, preset = "tiny", tok, out, log;
  std::vector<std::string> corpus;
  std::size_t steps = 0, batch = 16, window = 0, checkpoint_every = 0;
  double lr = 5e-5;
  std::uint64_t seed = 0;
};

void run_pretrain(const PretrainArgs& a) {
  Manifest m("pretrain");
  std::map<std::string, std::string> kv;
  if (!a.config.empty()) {
    m.input(a.config);
    kv = read_kv_file(a.config);
  } else {
    kv["preset"] = a.preset;
  }
  m.input(a.tok);
  const auto tok = bpe::Tokenizer::load(a.tok);

  // Keys the model does not know are training settings.
  train::TrainConfig tc;
  const auto take = [&](const char* key, auto& field) {
    const auto it = kv.find(key);
    if (it == kv.end()) return;
    std::istringstream is(it->second);
    if (!(is >> field) || !is.eof()) throw UsageError(std::string("config key '") + key + "' is malformed");
    kv.erase(it);
  };
  take("weight_decay", tc.weight_decay);
  take("beta1", tc.beta1);
  take("beta2", tc.beta2);
  take("eps", tc.eps);
  take("grad_clip", tc.grad_clip);
  std::size_t window = a.window, checkpoint_every = a.checkpoint_every;
  take("window", window);
  take("checkpoint_every", checkpoint_every);

  const bool explicit_vocab = kv.count("vocab_size") > 0;
  model::ModelConfig mc = model::ModelConfig::from_map(kv);
  if (!explicit_vocab) mc.vocab_size = tok.vocab_size();
  mc.validate();

  tc.learning_rate = a.lr;
  tc.batch_size = a.batch;
  tc.total_steps = a.steps;
  tc.seed = a.seed;
  tc.window = window ? window : mc.context_window;
  tc.checkpoint_every = checkpoint_every;

  for (const auto& [k, v] : mc.to_map()) m.config()["model"][k] = v;
  m.config()["train"] = {{"learning_rate", tc.learning_rate}, {"batch_size", tc.batch_size},
                         {"steps", tc.total_steps},          {"window", tc.window},
                         {"checkpoint_every", tc.checkpoint_every}, {"weight_decay", tc.weight_decay},
                         {"beta1", tc.beta1},                {"beta2", tc.beta2},
                         {"eps", tc.eps},                    {"grad_clip", tc.grad_clip},
                         {"kernels", kernels::active().name}};
  m.seed("init_and_order", tc.seed);

  std::vector<fs::path> corpus_paths;
  for (const auto& p : expand_inputs(a.corpus)) corpus_paths.push_back(p);
  const auto docs = load_corpus_texts(corpus_paths, m);

  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".metrics.tsv") : fs::path(a.log);
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw DataError("cannot write " + log_path.string());
  log << train::metrics_header() << '\n';

  train::PretrainOptions opt;
  opt.checkpoint_path = fs::path(a.out);
  opt.on_row = [&](const train::MetricsRow& row) {
    log << train::format_metrics_row(row) << '\n';
    log.flush();
    if (row.eval)
      std::cerr << "step " << row.step << " train_loss " << row.train_loss << " eval_loss "
                << row.eval->eval_loss << " ppl " << row.eval->perplexity << '\n';
  };
  const auto result = train::pretrain(mc, tok, docs, tc, opt);
  const double examples = static_cast<double>(train::pack_corpus(tok, docs, tc.window).size());
  m.config()["train"]["epochs"] = examples > 0 ? static_cast<double>(tc.total_steps * tc.batch_size) / examples : 0.0;
  std::cerr << "pretrain: eval perplexity " << result.final_eval.perplexity << ", train perplexity "
            << result.final_train_perplexity << '\n';
  m.emit(fs::path(a.out));
}

void run_eval_ppl(const std::string& ckpt_path, const std::string& tok_path, const std::vector<std::string>& in) {
  Manifest m("eval-ppl");
  bpe::Tokenizer tok = bpe::Tokenizer::byte_level();
  const auto ckpt = load_with_tokenizer(ckpt_path, tok_path, tok, m);
  const auto docs = load_corpus_texts(expand_inputs(in), m);
  const auto examples = train::pack_corpus(tok, docs, ckpt.config.context_window);
  if (examples.empty()) throw DataError("corpus is shorter than one context window");
  const auto r = train::evaluate(ckpt.params, examples);
  std::printf("%.6f\t%.6f\t%.6f\n", r.eval_loss, r.eval_accuracy, r.perplexity);
  m.emit(std::nullopt);
}

struct FinetuneArgs {
  std::string ckpt, tok, task = "cls", train, out;
  std::size_t classes = 2, epochs = 1, batch = 8;
  double lr = 5e-6;
  std::uint64_t seed = 0;
};

void run_finetune(const FinetuneArgs& a) {
  Manifest m("finetune");
  bpe::Tokenizer tok = bpe::Tokenizer::byte_level();
  const auto base = load_with_tokenizer(a.ckpt, a.tok, tok, m);
  finetune::TaskSpec spec;
  spec.kind = finetune::parse_task_kind(a.task);
  spec.num_classes = a.classes;
  spec.learning_rate = a.lr;
  spec.epochs = a.epochs;
  spec.seed = a.seed;
  spec.batch_size = a.batch;
  spec.validate();
  m.input(a.train);
  const auto examples = finetune::load_task_data(a.train, spec);
  m.config() = {{"task", a.task},      {"classes", a.classes}, {"learning_rate", a.lr},
                {"epochs", a.epochs},  {"batch_size", a.batch}, {"kernels", kernels::active().name}};
  m.seed("head_and_order", a.seed);
  finetune::FinetuneOptions opt;
  opt.on_step = [](std::size_t step, double loss, const model::Parameters&) {
    std::cerr << "step " << step << " loss " << loss << '\n';
    return true;
  };
  const auto result = finetune::finetune(base, tok, spec, examples, opt);
  train::save_checkpoint(result.checkpoint, a.out);
  m.emit(fs::path(a.out));
}

void run_eval_cls(const std::string& model_path, const std::string& tok_path, const std::string& test) {
  Manifest m("eval-cls");
  bpe::Tokenizer tok = bpe::Tokenizer::byte_level();
  const auto ckpt = load_with_tokenizer(model_path, tok_path, tok, m);
  const auto spec = finetune::task_of(ckpt);
  m.input(test);
  const auto examples = finetune::load_task_data(test, spec);
  if (examples.empty()) throw DataError(test + ": no examples");
  finetune::MetricsReport r;
  switch (spec.kind) {
    case finetune::TaskKind::Classification:
    case finetune::TaskKind::Pair:
      r = finetune::eval_classification(ckpt.params, tok, spec, examples, g_threads);
      break;
    case finetune::TaskKind::MultipleChoice: {
      const auto pred = finetune::predict_choices(ckpt.params, tok, examples, g_threads);
      std::vector<std::size_t> truth;
      for (const auto& e : examples) truth.push_back(e.label);
      r = finetune::metrics_from_predictions(truth, pred, finetune::kChoices);
      break;
    }
    case finetune::TaskKind::Translation:
      throw UsageError("eval-cls does not apply to translation checkpoints; use generate");
  }
  std::printf("accuracy\t%.6f\n", r.accuracy);
  std::printf("precision\t%.6f\trecall\t%.6f\tf1\t%.6f\n", r.macro_precision, r.macro_recall, r.macro_f1);
  m.config() = {{"task", std::string(finetune::task_kind_name(spec.kind))}, {"classes", spec.num_classes}};
  m.emit(std::nullopt);
}

struct GenerateArgs {
  std::string ckpt, tok, prompt, strategy = "greedy";
  std::size_t max_new = 32;
  std::uint64_t seed = 0;
  bool bos = false;
};

void run_generate(const GenerateArgs& a) {
  Manifest m("generate");
  bpe::Tokenizer tok = bpe::Tokenizer::byte_level();
  const auto ckpt = load_with_tokenizer(a.ckpt, a.tok, tok, m);
  auto opt = model::GenerateOptions::parse_strategy(a.strategy);
  opt.max_new = a.max_new;
  opt.seed = a.seed;
  opt.prepend_bos = a.bos;
  m.config() = {{"prompt", a.prompt}, {"strategy", a.strategy}, {"max_new", a.max_new}, {"bos", a.bos}};
  m.seed("sampling", a.seed);
  const auto gen = model::generate(ckpt.params, tok, a.prompt, opt);
  std::cout << gen.text << '\n';
  m.emit(std::nullopt);
}

void run_human_eval(const std::string& in, const std::vector<double>& dist) {
  Manifest m("human-eval");
  finetune::HumanEvalDistribution d;
  if (!dist.empty()) {
    if (dist.size() != 5) throw UsageError("--dist expects five weights for scores 4,3,2,1,0");
    const std::array<double, 5> w{dist[0], dist[1], dist[2], dist[3], dist[4]};
    d = finetune::aggregate_human_eval_distribution(std::span<const double, 5>(w));
    m.config()["dist"] = dist;
  } else {
    if (in.empty()) throw UsageError("human-eval needs --in or --dist");
    m.input(in);
    std::ifstream f(in);
    if (!f) throw DataError("cannot open " + in);
    std::vector<int> ratings;
    try {
      ratings = finetune::read_ratings(f);
    } catch (const DataError& e) {
      throw DataError(in + ": " + e.what());
    }
    d = finetune::aggregate_human_eval(ratings);
  }
  std::printf("score\tcount\tfraction\n");
  for (int s = 4; s >= 0; --s)
    std::printf("%d\t%llu\t%.6f\n", s, static_cast<unsigned long long>(d.counts[s]), d.fractions[s]);
  std::printf("mean\t%.4f\n", d.mean);
  m.emit(std::nullopt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hindi language-model pipeline: corpus cleaning, BPE, pre-training, fine-tuning"};
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       std::string("hllm ") + kVersion + " (checkpoint format " +
                           std::to_string(train::Checkpoint::kFormatVersion) + ", tokenizer format " +
                           std::string(bpe::kFormatHeader) + ")");
  app.add_option("--threads", g_threads, "Worker threads (0 = all cores)");

  CleanArgs clean;
  auto* c_clean = app.add_subcommand("clean", "Clean raw text into a pre-training corpus");
  c_clean->add_option("--in", clean.in, "Input files or directories (.tsv = parallel pairs)")->required();
  c_clean->add_option("--out", clean.out, "Output corpus")->required();
  c_clean->add_option("--min-devanagari", clean.min_devanagari, "Devanagari fraction gate (0 disables)");
  c_clean->add_option("--seed", clean.seed, "Seed for parallel pair ordering");

  std::vector<std::string> stats_in;
  auto* c_stats = app.add_subcommand("stats", "Print bytes, words, lines, documents");
  c_stats->add_option("--in", stats_in)->required();

  std::vector<std::string> tt_in;
  std::size_t tt_vocab = 50000;
  std::string tt_out;
  auto* c_tt = app.add_subcommand("tokenizer-train", "Train a byte-level BPE tokenizer");
  c_tt->add_option("--in", tt_in)->required();
  c_tt->add_option("--vocab", tt_vocab, "Target vocabulary including the 256 bytes");
  c_tt->add_option("--out", tt_out)->required();

  std::string tk_model, tk_text;
  auto* c_tk = app.add_subcommand("tokenize", "Print token ids for a string");
  c_tk->add_option("--model", tk_model)->required();
  c_tk->add_option("--text", tk_text)->required();

  std::string fe_model, fe_in;
  auto* c_fe = app.add_subcommand("fertility", "Tokens per whitespace word");
  c_fe->add_option("--model", fe_model)->required();
  c_fe->add_option("--in", fe_in)->required();

  std::string cp_preset, cp_dims;
  auto* c_cp = app.add_subcommand("count-params", "Count model parameters");
  auto* o_preset = c_cp->add_option("--preset", cp_preset, "small|medium|tiny");
  auto* o_dims = c_cp->add_option("--dims", cp_dims, "V,d,L,H,n_ctx");
  o_preset->excludes(o_dims);
  c_cp->require_option(1);

  PretrainArgs pt;
  auto* c_pt = app.add_subcommand("pretrain", "Causal language-model pre-training");
  c_pt->add_option("--config", pt.config, "key=value model/training config file");
  c_pt->add_option("--preset", pt.preset, "Model preset when no config file is given");
  c_pt->add_option("--corpus", pt.corpus)->required();
  c_pt->add_option("--tok", pt.tok)->required();
  c_pt->add_option("--out", pt.out)->required();
  c_pt->add_option("--steps", pt.steps)->required();
  c_pt->add_option("--batch", pt.batch);
  c_pt->add_option("--lr", pt.lr);
  c_pt->add_option("--seed", pt.seed);
  c_pt->add_option("--window", pt.window, "Training window (default: context window)");
  c_pt->add_option("--checkpoint-every", pt.checkpoint_every);
  c_pt->add_option("--log", pt.log, "Metrics TSV (default: <out>.metrics.tsv)");

  std::string ep_ckpt, ep_tok;
  std::vector<std::string> ep_in;
  auto* c_ep = app.add_subcommand("eval-ppl", "Held-out loss, accuracy and perplexity");
  c_ep->add_option("--ckpt", ep_ckpt)->required();
  c_ep->add_option("--tok", ep_tok)->required();
  c_ep->add_option("--in", ep_in)->required();

  FinetuneArgs ft;
  auto* c_ft = app.add_subcommand("finetune", "Supervised fine-tuning");
  c_ft->add_option("--ckpt", ft.ckpt)->required();
  c_ft->add_option("--tok", ft.tok)->required();
  c_ft->add_option("--task", ft.task, "cls|pair|mc|translate")->required();
  c_ft->add_option("--classes", ft.classes);
  c_ft->add_option("--train", ft.train)->required();
  c_ft->add_option("--lr", ft.lr);
  c_ft->add_option("--epochs", ft.epochs);
  c_ft->add_option("--batch", ft.batch);
  c_ft->add_option("--seed", ft.seed);
  c_ft->add_option("--out", ft.out)->required();

  std::string ec_model, ec_tok, ec_test;
  auto* c_ec = app.add_subcommand("eval-cls", "Accuracy and macro precision/recall/F1");
  c_ec->add_option("--model", ec_model)->required();
  c_ec->add_option("--tok", ec_tok)->required();
  c_ec->add_option("--test", ec_test)->required();

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Sample a continuation");
  c_gen->add_option("--ckpt", gen.ckpt)->required();
  c_gen->add_option("--tok", gen.tok)->required();
  c_gen->add_option("--prompt", gen.prompt);
  c_gen->add_option("--max-new", gen.max_new);
  c_gen->add_option("--strategy", gen.strategy, "greedy|temp:<tau>|topk:<k>");
  c_gen->add_option("--seed", gen.seed);
  c_gen->add_flag("--bos", gen.bos, "Start from the bos token");

  std::string he_in;
  std::vector<double> he_dist;
  auto* c_he = app.add_subcommand("human-eval", "Aggregate 0..4 translation ratings");
  c_he->add_option("--in", he_in, "One rating per line");
  c_he->add_option("--dist", he_dist, "Weights for scores 4,3,2,1,0")->delimiter(',');

  if (argc <= 1) {
    std::cerr << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto parsed = app.get_subcommands();
    std::cerr << (parsed.empty() ? app.help() : parsed.front()->help());
    return 1;
  }

  try {
    if (*c_clean) run_clean(clean);
    else if (*c_stats) run_stats(stats_in);
    else if (*c_tt) run_tokenizer_train(tt_in, tt_vocab, tt_out);
    else if (*c_tk) run_tokenize(tk_model, tk_text);
    else if (*c_fe) run_fertility(fe_model, fe_in);
    else if (*c_cp) run_count_params(cp_preset, cp_dims);
    else if (*c_pt) run_pretrain(pt);
    else if (*c_ep) run_eval_ppl(ep_ckpt, ep_tok, ep_in);
    else if (*c_ft) run_finetune(ft);
    else if (*c_ec) run_eval_cls(ec_model, ec_tok, ec_test);
    else if (*c_gen) run_generate(gen);
    else if (*c_he) run_human_eval(he_in, he_dist);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
