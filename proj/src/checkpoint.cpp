#include "loglens/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

#include "loglens/error.hpp"

namespace loglens {

namespace {

constexpr char kMagic[4] = {'L', 'G', 'L', 'N'};

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

template <typename U>
U get_le(const std::string& in, std::size_t& pos) {
  if (in.size() - pos < sizeof(U)) throw Error(Errc::corrupt_checkpoint, "checkpoint is truncated");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return value;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model},
          {"n_heads", c.n_heads},       {"d_ff", c.d_ff},
          {"n_layers", c.n_layers},     {"max_len", c.max_len},
          {"n_classes", c.n_classes},   {"classifier_hidden", c.classifier_hidden},
          {"dropout_rate", c.dropout_rate}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.n_classes = j.at("n_classes").get<std::size_t>();
  c.classifier_hidden = j.at("classifier_hidden").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path,
                     StorageType storage) {
  const bool f32 = storage == StorageType::float32;
  nlohmann::json header;
  header["config"] = config_to_json(checkpoint.params.config);
  header["vocab_digest"] = checkpoint.vocab_digest;
  header["provenance"] = checkpoint.provenance;
  header["dtype"] = f32 ? "float32" : "float64";
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& np : checkpoint.params.named()) {
    tensors.push_back(
        {{"name", np.name}, {"rows", np.param->value.rows()}, {"cols", np.param->value.cols()}});
  }
  header["tensors"] = std::move(tensors);
  const std::string header_text = header.dump();

  std::string blob(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(blob, checkpoint.format_version);
  put_le<std::uint32_t>(blob, static_cast<std::uint32_t>(header_text.size()));
  blob += header_text;
  for (const auto& np : checkpoint.params.named()) {
    const Matrix& m = np.param->value;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double v = m.data()[i];
      if (f32) {
        put_le(blob, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else {
        put_le(blob, std::bit_cast<std::uint64_t>(v));
      }
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write checkpoint " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error(Errc::io, "error while writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open checkpoint " + path.string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (blob.size() < sizeof kMagic || std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(Errc::corrupt_checkpoint, path.string() + " is not a checkpoint (bad magic)");
  }
  std::size_t pos = sizeof kMagic;
  Checkpoint cp;
  cp.format_version = get_le<std::uint32_t>(blob, pos);
  if (cp.format_version != kCheckpointVersion) {
    throw Error(Errc::incompatible_checkpoint,
                "checkpoint format version " + std::to_string(cp.format_version) +
                    " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get_le<std::uint32_t>(blob, pos);
  if (blob.size() - pos < header_len) {
    throw Error(Errc::corrupt_checkpoint, "checkpoint header is truncated");
  }

  nlohmann::json header;
  ModelConfig config;
  bool f32 = false;
  try {
    header = nlohmann::json::parse(blob.substr(pos, header_len));
    pos += header_len;
    config = config_from_json(header.at("config"));
    cp.vocab_digest = header.at("vocab_digest").get<std::string>();
    cp.provenance = header.value("provenance", "");
    const auto dtype = header.at("dtype").get<std::string>();
    if (dtype != "float32" && dtype != "float64") {
      throw Error(Errc::corrupt_checkpoint, "unknown checkpoint dtype " + dtype);
    }
    f32 = dtype == "float32";
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt_checkpoint, std::string("checkpoint header is malformed: ") + e.what());
  }
  if (cp.vocab_digest != vocab.digest()) {
    throw Error(Errc::vocabulary_mismatch, "checkpoint vocabulary digest " + cp.vocab_digest +
                                               " does not match " + vocab.digest());
  }
  try {
    cp.params = make_params(config);
  } catch (const Error& e) {
    throw Error(Errc::corrupt_checkpoint, std::string("checkpoint config is invalid: ") + e.what());
  }

  const auto tensors = header.value("tensors", nlohmann::json{});
  auto named = cp.params.named();
  if (!tensors.is_array() || tensors.size() != named.size()) {
    throw Error(Errc::corrupt_checkpoint, "checkpoint tensor list does not match its config");
  }
  for (std::size_t t = 0; t < named.size(); ++t) {
    Matrix& m = named[t].param->value;
    const auto& desc = tensors[t];
    const bool matches = desc.is_object() && desc.value("name", "") == named[t].name &&
                         desc.value("rows", Eigen::Index{-1}) == m.rows() &&
                         desc.value("cols", Eigen::Index{-1}) == m.cols();
    if (!matches) {
      throw Error(Errc::corrupt_checkpoint, "checkpoint tensor " + std::to_string(t) +
                                                " does not match " + named[t].name);
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = f32 ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(blob, pos)))
                        : std::bit_cast<double>(get_le<std::uint64_t>(blob, pos));
    }
  }
  if (pos != blob.size()) {
    throw Error(Errc::corrupt_checkpoint, "checkpoint has trailing bytes");
  }
  return cp;
}

}  // namespace loglens
