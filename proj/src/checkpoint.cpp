#include "defemo/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "defemo/error.hpp"
#include "defemo/hash.hpp"

namespace defemo {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr std::string_view kMagic{"DEFEMO1\0", 8};
constexpr std::string_view kMagicStem{"DEFEMO"};

using Kind = CheckpointError::Kind;

[[noreturn]] void fail(Kind kind, const std::string& msg) { throw CheckpointError(kind, "checkpoint: " + msg); }

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename N>
N parse_number(std::string_view key, std::string_view text) {
  N v{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    fail(Kind::Malformed, "bad value '" + std::string(text) + "' for key '" + std::string(key) + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true") return true;
  if (text == "false") return false;
  fail(Kind::Malformed, "bad boolean '" + std::string(text) + "' for key '" + std::string(key) + "'");
}

// Scalar header fields, written in this order.
struct Field {
  std::string key;
  std::function<std::string(const Checkpoint&)> get;
  std::function<void(Checkpoint&, std::string_view)> set;
};

template <typename N, typename Member>
Field size_field(std::string key, Member member) {
  return {key, [member](const Checkpoint& c) { return std::to_string(std::invoke(member, c)); },
          [member, key](Checkpoint& c, std::string_view v) { std::invoke(member, c) = parse_number<N>(key, v); }};
}

template <typename Member>
Field double_field(std::string key, Member member) {
  return {key, [member](const Checkpoint& c) { return fmt_double(std::invoke(member, c)); },
          [member, key](Checkpoint& c, std::string_view v) { std::invoke(member, c) = parse_number<double>(key, v); }};
}

template <typename Member>
Field bool_field(std::string key, Member member) {
  return {key, [member](const Checkpoint& c) { return std::string(std::invoke(member, c) ? "true" : "false"); },
          [member, key](Checkpoint& c, std::string_view v) { std::invoke(member, c) = parse_bool(key, v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(size_field<std::size_t>("encoder.num_layers", [](auto& c) -> auto& { return c.encoder.num_layers; }));
    f.push_back(size_field<std::size_t>("encoder.num_heads", [](auto& c) -> auto& { return c.encoder.num_heads; }));
    f.push_back(size_field<std::size_t>("encoder.hidden_dim", [](auto& c) -> auto& { return c.encoder.hidden_dim; }));
    f.push_back(size_field<std::size_t>("encoder.ff_dim", [](auto& c) -> auto& { return c.encoder.ff_dim; }));
    f.push_back(size_field<std::size_t>("encoder.max_len", [](auto& c) -> auto& { return c.encoder.max_len; }));
    f.push_back(size_field<std::size_t>("encoder.vocab_size", [](auto& c) -> auto& { return c.encoder.vocab_size; }));
    f.push_back(size_field<std::size_t>("encoder.num_labels", [](auto& c) -> auto& { return c.encoder.num_labels; }));
    f.push_back(double_field("encoder.dropout_rate", [](auto& c) -> auto& { return c.encoder.dropout_rate; }));
    f.push_back(size_field<std::uint64_t>("encoder.seed", [](auto& c) -> auto& { return c.encoder.seed; }));
    f.push_back({"train.setup", [](const Checkpoint& c) { return std::string(setup_name(c.train.setup)); },
                 [](Checkpoint& c, std::string_view v) {
                   try {
                     c.train.setup = parse_setup(v);
                   } catch (const ConfigError& e) {
                     fail(Kind::Malformed, e.what());
                   }
                 }});
    f.push_back(double_field("train.primary_prob", [](auto& c) -> auto& { return c.train.primary_prob; }));
    f.push_back(size_field<std::size_t>("train.epochs", [](auto& c) -> auto& { return c.train.epochs; }));
    f.push_back(size_field<std::size_t>("train.batch_size", [](auto& c) -> auto& { return c.train.batch_size; }));
    f.push_back(double_field("train.learning_rate", [](auto& c) -> auto& { return c.train.learning_rate; }));
    f.push_back(size_field<std::size_t>("train.max_len", [](auto& c) -> auto& { return c.train.max_len; }));
    f.push_back(double_field("train.threshold", [](auto& c) -> auto& { return c.train.threshold; }));
    f.push_back(size_field<std::uint64_t>("train.seed", [](auto& c) -> auto& { return c.train.seed; }));
    f.push_back(bool_field("train.resample_aux_per_epoch",
                           [](auto& c) -> auto& { return c.train.resample_aux_per_epoch; }));
    f.push_back(bool_field("train.mlm_on_negatives", [](auto& c) -> auto& { return c.train.mlm_on_negatives; }));
    f.push_back(bool_field("train.trailing_sep", [](auto& c) -> auto& { return c.train.trailing_sep; }));
    f.push_back(size_field<std::size_t>("train.negatives_per_label",
                                        [](auto& c) -> auto& { return c.train.negatives_per_label; }));
    f.push_back(double_field("train.cdp_weight", [](auto& c) -> auto& { return c.train.cdp_weight; }));
    f.push_back(double_field("train.mlm_weight", [](auto& c) -> auto& { return c.train.mlm_weight; }));
    return f;
  }();
  return table;
}

std::string shape_token(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out.empty() ? "scalar" : out;
}

Shape parse_shape_token(std::string_view text) {
  if (text == "scalar") return {};
  Shape s;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto x = text.find('x', start);
    const auto part = text.substr(start, x == std::string_view::npos ? std::string_view::npos : x - start);
    s.push_back(parse_number<std::size_t>("param", part));
    if (x == std::string_view::npos) break;
    start = x + 1;
  }
  return s;
}

std::uint64_t read_u64_le(const char* p) {
  std::uint64_t v = 0;
  std::memcpy(&v, p, sizeof v);
  return v;
}

}  // namespace

std::uint64_t payload_checksum(const std::vector<float>& payload) {
  return fnv1a64(std::as_bytes(std::span<const float>(payload)));
}

Checkpoint make_checkpoint(const Model<float>& model, const TrainConfig& train, std::vector<std::string> label_names,
                           std::uint64_t vocab_fingerprint) {
  if (label_names.size() != model.config().num_labels) {
    throw CheckpointError(Kind::ConfigMismatch, "checkpoint: " + std::to_string(label_names.size()) +
                                                    " label names for a model with " +
                                                    std::to_string(model.config().num_labels) + " labels");
  }
  Checkpoint c;
  c.encoder = model.config();
  c.train = train;
  c.label_names = std::move(label_names);
  c.vocab_fingerprint = vocab_fingerprint;
  for (const auto& p : model.parameters()) {
    c.manifest.push_back({p.name, p.value.shape, c.payload.size()});
    c.payload.insert(c.payload.end(), p.value.data.begin(), p.value.data.end());
  }
  c.checksum = payload_checksum(c.payload);
  return c;
}

Model<float> model_from_checkpoint(const Checkpoint& ckpt) {
  std::vector<Parameter<float>> params;
  params.reserve(ckpt.manifest.size());
  for (const auto& e : ckpt.manifest) {
    const std::size_t n = numel(e.shape);
    if (e.offset + n > ckpt.payload.size()) {
      fail(Kind::Malformed, "parameter '" + e.name + "' extends past the payload");
    }
    std::vector<float> values(ckpt.payload.begin() + static_cast<std::ptrdiff_t>(e.offset),
                              ckpt.payload.begin() + static_cast<std::ptrdiff_t>(e.offset + n));
    params.push_back({e.name, Tensor<float>(e.shape, std::move(values))});
  }
  try {
    return Model<float>(ckpt.encoder, std::move(params));
  } catch (const ConfigError& e) {
    fail(Kind::ConfigMismatch, e.what());
  } catch (const ShapeError& e) {
    fail(Kind::ConfigMismatch, e.what());
  }
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::ostringstream header;
  header << "format_version=" << ckpt.format_version << '\n';
  for (const auto& f : fields()) header << f.key << '=' << f.get(ckpt) << '\n';
  for (const auto& name : ckpt.label_names) header << "label=" << name << '\n';
  char fp[17];
  std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(ckpt.vocab_fingerprint));
  header << "vocab_fingerprint=" << fp << '\n';
  header << "payload_floats=" << ckpt.payload.size() << '\n';
  for (const auto& e : ckpt.manifest) {
    header << "param=" << e.name << ' ' << shape_token(e.shape) << ' ' << e.offset << '\n';
  }
  header << '\n';

  std::string out(kMagic);
  out += header.str();
  const auto* bytes = reinterpret_cast<const char*>(ckpt.payload.data());
  out.append(bytes, ckpt.payload.size() * sizeof(float));
  const std::uint64_t sum = payload_checksum(ckpt.payload);
  out.append(reinterpret_cast<const char*>(&sum), sizeof sum);
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size()) {
    if (bytes.substr(0, kMagicStem.size()) == kMagicStem.substr(0, bytes.size()) && !bytes.empty()) {
      fail(Kind::Truncated, "file ends inside the magic");
    }
    fail(Kind::BadMagic, "not a checkpoint file");
  }
  if (bytes.substr(0, kMagic.size()) != kMagic) {
    if (bytes.substr(0, kMagicStem.size()) == kMagicStem) {
      fail(Kind::VersionMismatch, "unsupported format '" + std::string(bytes.substr(0, 7)) + "', expected DEFEMO1");
    }
    fail(Kind::BadMagic, "not a checkpoint file");
  }
  const auto header_end = bytes.find("\n\n", kMagic.size() - 1);
  if (header_end == std::string_view::npos) fail(Kind::Truncated, "header is not terminated");
  std::string_view header = bytes.substr(kMagic.size(), header_end + 1 - kMagic.size());

  Checkpoint c;
  c.label_names.clear();
  std::map<std::string, const Field*, std::less<>> by_key;
  for (const auto& f : fields()) by_key.emplace(f.key, &f);
  std::map<std::string, bool, std::less<>> seen;
  std::optional<std::size_t> payload_floats;
  bool have_version = false, have_fp = false;

  std::size_t line_no = 0;
  while (!header.empty()) {
    const auto nl = header.find('\n');
    const auto line = header.substr(0, nl);
    header.remove_prefix(nl + 1);
    ++line_no;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(Kind::Malformed, "header line " + std::to_string(line_no) + " has no '='");
    }
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key == "format_version") {
      c.format_version = parse_number<std::uint32_t>(key, value);
      if (c.format_version != kCheckpointVersion) {
        fail(Kind::VersionMismatch, "format_version " + std::to_string(c.format_version) + ", expected " +
                                        std::to_string(kCheckpointVersion));
      }
      have_version = true;
    } else if (key == "label") {
      c.label_names.emplace_back(value);
    } else if (key == "vocab_fingerprint") {
      std::uint64_t v = 0;
      auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), v, 16);
      if (ec != std::errc() || end != value.data() + value.size()) fail(Kind::Malformed, "bad vocab_fingerprint");
      c.vocab_fingerprint = v;
      have_fp = true;
    } else if (key == "payload_floats") {
      payload_floats = parse_number<std::size_t>(key, value);
    } else if (key == "param") {
      const auto s1 = value.find(' ');
      const auto s2 = value.rfind(' ');
      if (s1 == std::string_view::npos || s1 == s2) fail(Kind::Malformed, "bad param entry '" + std::string(value) + "'");
      c.manifest.push_back({std::string(value.substr(0, s1)), parse_shape_token(value.substr(s1 + 1, s2 - s1 - 1)),
                            parse_number<std::size_t>(key, value.substr(s2 + 1))});
    } else if (auto it = by_key.find(key); it != by_key.end()) {
      if (seen[std::string(key)]) fail(Kind::Malformed, "duplicate key '" + std::string(key) + "'");
      seen[std::string(key)] = true;
      it->second->set(c, value);
    } else {
      fail(Kind::Malformed, "unknown header key '" + std::string(key) + "'");
    }
  }
  if (!have_version) fail(Kind::Malformed, "missing format_version");
  if (!have_fp) fail(Kind::Malformed, "missing vocab_fingerprint");
  if (!payload_floats) fail(Kind::Malformed, "missing payload_floats");
  for (const auto& f : fields()) {
    if (!seen.count(f.key)) fail(Kind::Malformed, "missing key '" + f.key + "'");
  }
  std::size_t expected_offset = 0;
  for (const auto& e : c.manifest) {
    if (e.offset != expected_offset) fail(Kind::Malformed, "parameter '" + e.name + "' has a non-contiguous offset");
    expected_offset += numel(e.shape);
  }
  if (expected_offset != *payload_floats) {
    fail(Kind::Malformed, "manifest covers " + std::to_string(expected_offset) + " floats, payload has " +
                              std::to_string(*payload_floats));
  }

  const std::size_t body = header_end + 2;
  const std::size_t need = *payload_floats * sizeof(float) + sizeof(std::uint64_t);
  if (bytes.size() - body < need) {
    fail(Kind::Truncated, "expected " + std::to_string(need) + " payload bytes, found " +
                              std::to_string(bytes.size() - body));
  }
  if (bytes.size() - body > need) fail(Kind::Malformed, "trailing bytes after checksum");
  c.payload.resize(*payload_floats);
  std::memcpy(c.payload.data(), bytes.data() + body, *payload_floats * sizeof(float));
  c.checksum = read_u64_le(bytes.data() + body + *payload_floats * sizeof(float));
  if (payload_checksum(c.payload) != c.checksum) fail(Kind::ChecksumMismatch, "payload checksum mismatch");
  if (c.label_names.size() != c.encoder.num_labels) {
    fail(Kind::Malformed, std::to_string(c.label_names.size()) + " labels for num_labels=" +
                              std::to_string(c.encoder.num_labels));
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

void check_compatible(const Checkpoint& ckpt, std::size_t num_labels, const Vocabulary& vocab) {
  if (ckpt.encoder.num_labels != num_labels) {
    fail(Kind::ConfigMismatch, "checkpoint has " + std::to_string(ckpt.encoder.num_labels) +
                                   " labels, data has " + std::to_string(num_labels));
  }
  if (ckpt.encoder.vocab_size != vocab.size()) {
    fail(Kind::ConfigMismatch, "checkpoint vocabulary has " + std::to_string(ckpt.encoder.vocab_size) +
                                   " tokens, given vocabulary has " + std::to_string(vocab.size()));
  }
  if (ckpt.vocab_fingerprint != vocab.fingerprint()) {
    fail(Kind::ConfigMismatch, "vocabulary fingerprint differs from the one used in training");
  }
}

}  // namespace defemo
