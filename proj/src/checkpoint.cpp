#include "mt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mt/error.hpp"

// Fixed-width fields are stored in native byte order; the format is defined
// as little-endian.
static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace mt {
namespace {

constexpr char kMagic[8] = {'M', 'T', 'L', 'A', 'B', 'C', 'K', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::filesystem::path& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw data_error("truncated checkpoint file: " + path.string());
  }
  return value;
}

void write_tensor(std::ofstream& out, const std::string& name,
                  const Mat<float>& m) {
  write_raw(out, static_cast<uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_raw(out, static_cast<uint64_t>(m.rows()));
  write_raw(out, static_cast<uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float) * m.size()));
}

void read_tensor(std::ifstream& in, const std::filesystem::path& path,
                 const std::string& expected_name, Mat<float>& m) {
  const auto name_len = read_raw<uint32_t>(in, path);
  std::string name(name_len, '\0');
  in.read(name.data(), name_len);
  if (!in) throw data_error("truncated checkpoint file: " + path.string());
  if (name != expected_name) {
    throw data_error("checkpoint tensor order mismatch in " + path.string() +
                     ": expected " + expected_name + ", found " + name);
  }
  const auto rows = read_raw<uint64_t>(in, path);
  const auto cols = read_raw<uint64_t>(in, path);
  if (rows != static_cast<uint64_t>(m.rows()) ||
      cols != static_cast<uint64_t>(m.cols())) {
    throw data_error("checkpoint tensor " + name + " has shape " +
                     std::to_string(rows) + "x" + std::to_string(cols) +
                     ", expected " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()));
  }
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(float) * m.size()));
  if (!in) throw data_error("truncated checkpoint file: " + path.string());
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path) {
  validate_config(ckpt.config);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw data_error("cannot write checkpoint file: " + path.string());
  }
  out.write(kMagic, sizeof(kMagic));
  write_raw(out, kVersion);
  const ModelConfig& c = ckpt.config;
  write_raw(out, static_cast<int32_t>(c.num_layers));
  write_raw(out, static_cast<int32_t>(c.hidden_size));
  write_raw(out, static_cast<int32_t>(c.num_heads));
  write_raw(out, static_cast<int32_t>(c.ffn_size));
  write_raw(out, static_cast<int32_t>(c.max_positions));
  write_raw(out, c.dropout_rate);
  write_raw(out, static_cast<int32_t>(c.vocab_size));
  write_raw(out, c.seed);
  write_raw(out, ckpt.updates);
  write_raw(out, ckpt.valid_loss);
  write_raw(out, static_cast<uint8_t>(ckpt.has_optimizer ? 1 : 0));
  if (ckpt.has_optimizer) write_raw(out, ckpt.opt.step);

  std::vector<std::pair<std::string, const Mat<float>*>> tensors;
  auto add_all = [&](const Seq2SeqParams<float>& p, const char* prefix) {
    visit_params(p, [&](const std::string& name, const Mat<float>& m) {
      tensors.push_back({prefix + name, &m});
    });
  };
  add_all(ckpt.params, "");
  if (ckpt.has_optimizer) {
    add_all(ckpt.opt.m, "m.");
    add_all(ckpt.opt.v, "v.");
  }
  write_raw(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    write_tensor(out, name, *tensor);
  }
  out.flush();
  if (!out) {
    throw data_error("failed writing checkpoint file: " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw data_error("cannot read checkpoint file: " + path.string());
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw data_error("not a checkpoint file: " + path.string());
  }
  const auto version = read_raw<uint32_t>(in, path);
  if (version != kVersion) {
    throw data_error("unsupported checkpoint version " +
                     std::to_string(version) + " in " + path.string());
  }

  Checkpoint ckpt;
  ckpt.config.num_layers = read_raw<int32_t>(in, path);
  ckpt.config.hidden_size = read_raw<int32_t>(in, path);
  ckpt.config.num_heads = read_raw<int32_t>(in, path);
  ckpt.config.ffn_size = read_raw<int32_t>(in, path);
  ckpt.config.max_positions = read_raw<int32_t>(in, path);
  ckpt.config.dropout_rate = read_raw<double>(in, path);
  ckpt.config.vocab_size = read_raw<int32_t>(in, path);
  ckpt.config.seed = read_raw<uint64_t>(in, path);
  validate_config(ckpt.config);
  ckpt.updates = read_raw<uint64_t>(in, path);
  ckpt.valid_loss = read_raw<double>(in, path);
  ckpt.has_optimizer = read_raw<uint8_t>(in, path) != 0;
  if (ckpt.has_optimizer) ckpt.opt.step = read_raw<uint64_t>(in, path);

  ckpt.params = allocate_params<float>(ckpt.config);
  if (ckpt.has_optimizer) {
    ckpt.opt.m = allocate_params<float>(ckpt.config);
    ckpt.opt.v = allocate_params<float>(ckpt.config);
  }
  std::vector<std::pair<std::string, Mat<float>*>> tensors;
  auto add_all = [&](Seq2SeqParams<float>& p, const char* prefix) {
    visit_params(p, [&](const std::string& name, Mat<float>& m) {
      tensors.push_back({prefix + name, &m});
    });
  };
  add_all(ckpt.params, "");
  if (ckpt.has_optimizer) {
    add_all(ckpt.opt.m, "m.");
    add_all(ckpt.opt.v, "v.");
  }
  const auto count = read_raw<uint32_t>(in, path);
  if (count != tensors.size()) {
    throw data_error("checkpoint lists " + std::to_string(count) +
                     " tensors, expected " + std::to_string(tensors.size()) +
                     ": " + path.string());
  }
  for (auto& [name, tensor] : tensors) {
    read_tensor(in, path, name, *tensor);
  }
  in.peek();
  if (!in.eof()) {
    throw data_error("trailing bytes after checkpoint data: " +
                     path.string());
  }
  return ckpt;
}

}  // namespace mt
