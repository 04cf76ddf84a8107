#include <bit>
#include <cstring>
#include <fstream>

#include "hllm/corpus.hpp"
#include "hllm/digest.hpp"
#include "hllm/error.hpp"
#include "hllm/train.hpp"

namespace hllm::train {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'H', 'L', 'L', 'M'};

class Writer {
 public:
  template <typename U>
  void put(U v) {
    char buf[sizeof(U)];
    std::memcpy(buf, &v, sizeof(U));
    out_.append(buf, sizeof(U));
  }
  void bytes(std::string_view s) { out_.append(s); }
  void tensor(const std::string& name, const Tensor& t) {
    put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    bytes(name);
    put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(d);
    bytes({reinterpret_cast<const char*>(t.data().data()), t.size() * sizeof(float)});
  }
  std::string take() { return std::move(out_); }
  std::string_view view() const { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, in_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string_view bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::pair<std::string, Tensor> tensor() {
    const auto name_len = get<std::uint32_t>("tensor name length");
    std::string name(bytes(name_len, "tensor name"));
    const auto rank = get<std::uint32_t>("tensor rank");
    if (rank > 8) throw DataError("checkpoint: tensor '" + name + "' has implausible rank");
    tensor::Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
      d = get<std::uint64_t>("tensor dims");
      if (d != 0 && count > (in_.size() / sizeof(float)) / d)
        throw DataError("checkpoint: tensor '" + name + "' is larger than the file");
      count *= d;
    }
    const auto raw = bytes(count * sizeof(float), "tensor data");
    std::vector<float> data(count);
    std::memcpy(data.data(), raw.data(), raw.size());
    return {std::move(name), Tensor(std::move(shape), std::move(data))};
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) throw DataError(std::string("checkpoint truncated while reading ") + what);
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::map<std::string, std::string> parse_config_block(std::string_view block) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  while (pos < block.size()) {
    std::size_t nl = block.find('\n', pos);
    if (nl == std::string_view::npos) nl = block.size();
    const auto line = block.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw DataError("checkpoint: malformed config line '" + std::string(line) + "'");
    kv[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }
  return kv;
}

const std::string kReservedKeys[] = {"vocab_size", "embed_dim", "layers", "heads",
                                     "context_window", "tie_output", "step", "tokenizer_digest"};

bool is_reserved(const std::string& key) {
  for (const auto& k : kReservedKeys)
    if (k == key) return true;
  return false;
}

}  // namespace

OptimState OptimState::zeros_like(const Parameters& params) {
  OptimState s;
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.first_moment.emplace_back(params.tensor(i).shape());
    s.second_moment.emplace_back(params.tensor(i).shape());
  }
  return s;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes({kMagic, 4});
  w.put<std::uint32_t>(Checkpoint::kFormatVersion);

  std::string block;
  auto kv = ckpt.config.to_map();
  kv["step"] = std::to_string(ckpt.step);
  kv["tokenizer_digest"] = ckpt.tokenizer_digest;
  for (const auto& [k, v] : ckpt.extra) {
    if (is_reserved(k)) throw UsageError("checkpoint extra key '" + k + "' is reserved");
    kv[k] = v;
  }
  for (const auto& [k, v] : kv) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw UsageError("checkpoint config entry '" + k + "' contains '=' or a newline");
    block += k + "=" + v + "\n";
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(block.size()));
  w.bytes(block);

  w.put<std::uint64_t>(ckpt.params.size());
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) w.tensor(ckpt.params.name(i), ckpt.params.tensor(i));

  w.put<std::uint8_t>(ckpt.optim ? 1 : 0);
  if (ckpt.optim) {
    const OptimState& s = *ckpt.optim;
    if (s.first_moment.size() != ckpt.params.size() || s.second_moment.size() != ckpt.params.size())
      throw UsageError("optimizer state does not mirror the parameters");
    w.put<std::uint64_t>(s.step);
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
      w.tensor("m." + ckpt.params.name(i), s.first_moment[i]);
      w.tensor("v." + ckpt.params.name(i), s.second_moment[i]);
    }
  }
  const std::uint32_t crc = crc32(w.view());
  w.put<std::uint32_t>(crc);
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw DataError("not a checkpoint file (bad magic)");
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  const auto body = bytes.substr(0, bytes.size() - 4);
  if (crc32(body) != stored_crc) throw DataError("checkpoint CRC32 mismatch (file is corrupt)");

  Reader r(body);
  r.bytes(4, "magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != Checkpoint::kFormatVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto block_len = r.get<std::uint32_t>("config length");
  auto kv = parse_config_block(r.bytes(block_len, "config block"));

  Checkpoint ckpt;
  try {
    ckpt.config = ModelConfig::from_map(kv);
    ckpt.step = kv.count("step") ? std::stoull(kv.at("step")) : 0;
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  } catch (const std::exception&) {
    throw DataError("checkpoint config: malformed step");
  }
  ckpt.tokenizer_digest = kv.count("tokenizer_digest") ? kv.at("tokenizer_digest") : "";
  for (const auto& [k, v] : kv)
    if (!is_reserved(k) && k != "preset") ckpt.extra[k] = v;

  // Rebuild in the canonical layout and check every tensor against it.
  Parameters params(ckpt.config);
  const auto count = r.get<std::uint64_t>("tensor count");
  if (count < params.size()) throw DataError("checkpoint is missing model tensors");
  for (std::uint64_t i = 0; i < count; ++i) {
    auto [name, t] = r.tensor();
    if (i < params.size()) {
      if (name != params.name(i))
        throw DataError("checkpoint tensor " + std::to_string(i) + " is '" + name + "', expected '" +
                        params.name(i) + "'");
      if (t.shape() != params.tensor(i).shape())
        throw DataError("checkpoint tensor '" + name + "' has shape " + tensor::shape_str(t.shape()));
      params.tensor(i) = std::move(t);
    } else {
      params.add(std::move(name), std::move(t));
    }
  }
  ckpt.params = std::move(params);

  const auto has_optim = r.get<std::uint8_t>("optimizer flag");
  if (has_optim > 1) throw DataError("checkpoint optimizer flag must be 0 or 1");
  if (has_optim) {
    OptimState s;
    s.step = r.get<std::uint64_t>("optimizer step");
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
      auto [mn, m] = r.tensor();
      auto [vn, v] = r.tensor();
      if (mn != "m." + ckpt.params.name(i) || vn != "v." + ckpt.params.name(i) ||
          m.shape() != ckpt.params.tensor(i).shape() || v.shape() != m.shape())
        throw DataError("checkpoint optimizer state does not mirror parameter '" +
                        ckpt.params.name(i) + "'");
      s.first_moment.push_back(std::move(m));
      s.second_moment.push_back(std::move(v));
    }
    ckpt.optim = std::move(s);
  }
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  for (std::size_t i = 0; i < ckpt.params.size(); ++i)
    if (!tensor::all_finite<float>(ckpt.params.tensor(i).data()))
      throw DataError("checkpoint tensor '" + ckpt.params.name(i) + "' holds non-finite values");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw DataError("error while writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(corpus::read_file(path));
}

}  // namespace hllm::train
