#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include "hllm/error.hpp"
#include "hllm/finetune.hpp"
#include "hllm/utf8.hpp"

namespace hllm::finetune {

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw UsageError("argmax of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

MetricsReport metrics_from_confusion(std::vector<std::vector<std::uint64_t>> confusion) {
  const std::size_t k = confusion.size();
  if (k == 0) throw UsageError("empty confusion matrix");
  for (const auto& row : confusion)
    if (row.size() != k) throw UsageError("confusion matrix is not square");

  MetricsReport r;
  std::uint64_t total = 0, diag = 0;
  std::vector<std::uint64_t> predicted(k, 0), actual(k, 0);
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t p = 0; p < k; ++p) {
      total += confusion[t][p];
      actual[t] += confusion[t][p];
      predicted[p] += confusion[t][p];
    }
  for (std::size_t c = 0; c < k; ++c) diag += confusion[c][c];
  if (total == 0) throw UsageError("confusion matrix has no entries");

  r.accuracy = static_cast<double>(diag) / static_cast<double>(total);
  for (std::size_t c = 0; c < k; ++c) {
    const double tp = static_cast<double>(confusion[c][c]);
    const double p = predicted[c] ? tp / static_cast<double>(predicted[c]) : 0.0;
    const double rc = actual[c] ? tp / static_cast<double>(actual[c]) : 0.0;
    const double f = p + rc > 0.0 ? 2.0 * p * rc / (p + rc) : 0.0;
    r.precision.push_back(p);
    r.recall.push_back(rc);
    r.f1.push_back(f);
    r.macro_precision += p;
    r.macro_recall += rc;
    r.macro_f1 += f;
  }
  r.macro_precision /= static_cast<double>(k);
  r.macro_recall /= static_cast<double>(k);
  r.macro_f1 /= static_cast<double>(k);
  r.confusion = std::move(confusion);
  return r;
}

MetricsReport metrics_from_predictions(std::span<const std::size_t> truth,
                                       std::span<const std::size_t> predicted, std::size_t num_classes) {
  if (truth.size() != predicted.size())
    throw UsageError("metrics: " + std::to_string(truth.size()) + " labels but " +
                     std::to_string(predicted.size()) + " predictions");
  std::vector<std::vector<std::uint64_t>> confusion(num_classes, std::vector<std::uint64_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes)
      throw UsageError("metrics: class id out of range at item " + std::to_string(i));
    ++confusion[truth[i]][predicted[i]];
  }
  return metrics_from_confusion(std::move(confusion));
}

namespace {

HumanEvalDistribution finish(HumanEvalDistribution d) {
  d.mean = 0.0;
  for (int s = 0; s <= 4; ++s) d.mean += s * d.fractions[s];
  return d;
}

}  // namespace

HumanEvalDistribution aggregate_human_eval(std::span<const int> ratings) {
  if (ratings.empty()) throw DataError("no ratings");
  HumanEvalDistribution d;
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    if (ratings[i] < 0 || ratings[i] > 4)
      throw DataError("rating " + std::to_string(ratings[i]) + " at position " + std::to_string(i + 1) +
                      " is outside 0..4");
    ++d.counts[static_cast<std::size_t>(ratings[i])];
  }
  for (int s = 0; s <= 4; ++s)
    d.fractions[s] = static_cast<double>(d.counts[s]) / static_cast<double>(ratings.size());
  return finish(d);
}

HumanEvalDistribution aggregate_human_eval_distribution(std::span<const double, 5> weights_4_to_0) {
  double total = 0.0;
  for (double w : weights_4_to_0) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("distribution weights must be finite and >= 0");
    total += w;
  }
  if (total <= 0.0) throw DataError("distribution weights sum to zero");
  HumanEvalDistribution d;
  for (int s = 0; s <= 4; ++s) d.fractions[s] = weights_4_to_0[4 - s] / total;
  return finish(d);
}

namespace {

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

std::size_t parse_index(const std::string& field, std::size_t line_no, std::size_t bound, const char* what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
    throw DataError("line " + std::to_string(line_no) + ": " + what + " '" + field + "' is not an integer");
  if (v >= bound)
    throw DataError("line " + std::to_string(line_no) + ": " + what + " " + std::to_string(v) +
                    " out of range (must be < " + std::to_string(bound) + ")");
  return v;
}

std::size_t columns_for(TaskKind kind) {
  switch (kind) {
    case TaskKind::Classification: return 2;
    case TaskKind::Pair: return 3;
    case TaskKind::MultipleChoice: return 6;
    case TaskKind::Translation: return 3;
  }
  return 0;
}

}  // namespace

std::vector<LabeledExample> read_task_data(std::istream& in, const TaskSpec& spec) {
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t line_no = 0;
  const std::size_t want = columns_for(spec.kind);
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto bad = utf8::find_invalid(line))
      throw DataError("line " + std::to_string(line_no) + ": invalid UTF-8 at byte " + std::to_string(*bad));
    const auto f = split_tabs(line);
    if (f.size() != want)
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(want) +
                      " tab-separated columns, found " + std::to_string(f.size()));
    LabeledExample ex;
    switch (spec.kind) {
      case TaskKind::Classification:
        ex.text = f[0];
        ex.label = parse_index(f[1], line_no, spec.num_classes, "label");
        break;
      case TaskKind::Pair:
        ex.text = f[0];
        ex.text_b = f[1];
        ex.label = parse_index(f[2], line_no, spec.num_classes, "label");
        break;
      case TaskKind::MultipleChoice:
        ex.text = f[0];
        for (std::size_t c = 0; c < kChoices; ++c) ex.candidates[c] = f[1 + c];
        ex.label = parse_index(f[5], line_no, kChoices, "answer index");
        break;
      case TaskKind::Translation:
        ex.text = f[0];
        ex.text_b = f[1];
        try {
          ex.direction = parse_direction(f[2]);
        } catch (const DataError& e) {
          throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
        break;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<LabeledExample> load_task_data(const std::filesystem::path& path, const TaskSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_task_data(in, spec);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<int> read_ratings(std::istream& in) {
  std::vector<int> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(static_cast<int>(parse_index(line, line_no, 5, "rating")));
  }
  return out;
}

}  // namespace hllm::finetune
