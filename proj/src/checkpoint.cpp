#include "excl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

namespace excl {

using nlohmann::json;

namespace {

void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

json spec_to_json(const ModelSpec& s) {
  return {{"objective", s.objective == Objective::clf ? "clf" : "reg"},
          {"video_lstm", s.video_lstm},
          {"predictor", std::string(1, predictor_letter(s.predictor))},
          {"vocab_size", s.vocab_size},
          {"embedding_dim", s.embedding_dim},
          {"feature_dim", s.feature_dim},
          {"query_hidden", s.query_hidden},
          {"video_hidden", s.video_hidden},
          {"predictor_hidden", s.predictor_hidden},
          {"mlp_hidden", s.mlp_hidden},
          {"dropout", s.dropout},
          {"reg_loss", s.reg_loss == RegLossKind::abs ? "abs" : "mse"}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.objective = j.at("objective").get<std::string>() == "clf" ? Objective::clf : Objective::reg;
  s.video_lstm = j.at("video_lstm").get<bool>();
  s.predictor = predictor_from_letter(j.at("predictor").get<std::string>().at(0));
  s.vocab_size = j.at("vocab_size").get<int>();
  s.embedding_dim = j.at("embedding_dim").get<int>();
  s.feature_dim = j.at("feature_dim").get<int>();
  s.query_hidden = j.at("query_hidden").get<int>();
  s.video_hidden = j.at("video_hidden").get<int>();
  s.predictor_hidden = j.at("predictor_hidden").get<int>();
  s.mlp_hidden = j.at("mlp_hidden").get<int>();
  s.dropout = j.at("dropout").get<double>();
  s.reg_loss = j.at("reg_loss").get<std::string>() == "abs" ? RegLossKind::abs : RegLossKind::mse;
  return s;
}

void put_floats(std::vector<std::uint8_t>& out, const Matrix<float>& m) {
  const std::size_t at = out.size();
  out.resize(at + 4 * static_cast<std::size_t>(m.size()));
  std::uint8_t* p = out.data() + at;
  for (Eigen::Index i = 0; i < m.size(); ++i, p += 4) put_u32(p, std::bit_cast<std::uint32_t>(m.data()[i]));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const std::size_t n = ckpt.params.size();
  if (ckpt.adam.m.size() != n || ckpt.adam.v.size() != n)
    throw ShapeError("checkpoint: Adam state tracks " + std::to_string(ckpt.adam.m.size()) + " tensors, store has " +
                     std::to_string(n));
  json meta;
  meta["config"] = json::parse(ckpt.config.to_json());
  meta["spec"] = spec_to_json(ckpt.spec);
  meta["vocab"] = ckpt.vocab.content_tokens();
  meta["epoch"] = ckpt.epoch;
  meta["best_metric"] = ckpt.best_metric;
  meta["adam_step"] = ckpt.adam.step;
  json index = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = ckpt.params[i];
    index.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  meta["tensors"] = index;
  const std::string text = meta.dump();

  std::vector<std::uint8_t> out(20);
  std::memcpy(out.data(), kCheckpointMagic, 8);
  put_u32(out.data() + 8, kCheckpointVersion);
  put_u64(out.data() + 12, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (std::size_t i = 0; i < n; ++i) put_floats(out, ckpt.params[i].value);
  for (std::size_t i = 0; i < n; ++i) put_floats(out, ckpt.adam.m[i]);
  for (std::size_t i = 0; i < n; ++i) put_floats(out, ckpt.adam.v[i]);
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& origin) {
  auto fail = [&](const std::string& why) { return DataError("checkpoint " + origin + ": " + why); };
  if (bytes.size() < 20) throw fail("truncated header (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) throw fail("bad magic at offset 0");
  const std::uint32_t version = get_u32(bytes.data() + 8);
  if (version > kCheckpointVersion)
    throw fail("format version " + std::to_string(version) + " is newer than supported version " +
               std::to_string(kCheckpointVersion));
  if (version == 0) throw fail("invalid format version 0");
  const std::uint64_t meta_len = get_u64(bytes.data() + 12);
  if (meta_len > bytes.size() - 20) throw fail("truncated metadata at offset 20");

  Checkpoint ck;
  std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index>> index;
  try {
    const json meta = json::parse(bytes.begin() + 20, bytes.begin() + 20 + static_cast<std::ptrdiff_t>(meta_len));
    ck.config = RunConfig::from_json(meta.at("config").dump());
    ck.spec = spec_from_json(meta.at("spec"));
    ck.vocab = Vocabulary(meta.at("vocab").get<std::vector<std::string>>());
    ck.epoch = meta.at("epoch").get<int>();
    ck.best_metric = meta.at("best_metric").get<double>();
    ck.adam.config = ck.config.adam;
    ck.adam.step = meta.at("adam_step").get<std::int64_t>();
    for (const auto& t : meta.at("tensors"))
      index.emplace_back(t.at("name").get<std::string>(), t.at("rows").get<Eigen::Index>(),
                         t.at("cols").get<Eigen::Index>());
  } catch (const json::exception& e) {
    throw fail(std::string("bad metadata: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw fail(std::string("bad metadata: ") + e.what());
  }
  if (static_cast<std::size_t>(ck.spec.vocab_size) != ck.vocab.size())
    throw fail("vocabulary has " + std::to_string(ck.vocab.size()) + " entries, model expects " +
               std::to_string(ck.spec.vocab_size));

  std::size_t offset = 20 + meta_len;
  auto read_tensor = [&](Eigen::Index rows, Eigen::Index cols, const std::string& name) {
    if (rows < 0 || cols < 0) throw fail("negative shape for " + name);
    const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    if (count > (bytes.size() - offset) / 4)
      throw fail("truncated tensor " + name + " at offset " + std::to_string(offset));
    Matrix<float> m(rows, cols);
    const std::uint8_t* p = bytes.data() + offset;
    for (std::size_t i = 0; i < count; ++i, p += 4) m.data()[i] = std::bit_cast<float>(get_u32(p));
    offset += 4 * count;
    return m;
  };
  for (const auto& [name, r, c] : index) ck.params.add(name, read_tensor(r, c, name));
  for (const auto& [name, r, c] : index) ck.adam.m.push_back(read_tensor(r, c, name + " (adam m)"));
  for (const auto& [name, r, c] : index) ck.adam.v.push_back(read_tensor(r, c, name + " (adam v)"));
  if (offset != bytes.size())
    throw fail(std::to_string(bytes.size() - offset) + " trailing bytes at offset " + std::to_string(offset));
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("short write to checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

}  // namespace excl
