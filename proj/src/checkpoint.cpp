#include "gog/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "gog/error.hpp"

namespace gog {

namespace {

constexpr char kMagic[8] = {'G', 'O', 'G', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, double d) { write_u64(os, std::bit_cast<std::uint64_t>(d)); }

double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

void write_f64_vec(std::ostream& os, const std::vector<double>& v) {
  write_u64(os, v.size());
  for (double d : v) write_f64(os, d);
}

std::vector<double> read_f64_vec(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  std::vector<double> v(n);
  for (auto& d : v) d = read_f64(is);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store, const CheckpointMeta& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 8);
  write_u64(os, 1);  // format version
  write_u64(os, meta.seed);
  write_u64(os, meta.config_digest);
  write_u64(os, meta.epoch);
  write_string(os, meta.config_text);

  write_u64(os, meta.vocab_tokens.size());
  for (const auto& t : meta.vocab_tokens) write_string(os, t);

  const auto names = store.names();
  write_u64(os, names.size());
  for (const auto& name : names) {
    const Tensor& t = store.get(name);
    write_string(os, name);
    write_u64(os, static_cast<std::uint64_t>(t.rows));
    write_u64(os, static_cast<std::uint64_t>(t.cols));
    os.put(store.trainable(name) ? 1 : 0);
    for (double d : *t.data) write_f64(os, d);
  }

  os.put(meta.has_optimizer ? 1 : 0);
  if (meta.has_optimizer) {
    write_u64(os, meta.adam_step);
    write_u64(os, meta.adam_moments.size());
    for (const auto& [name, mv] : meta.adam_moments) {
      write_string(os, name);
      write_f64_vec(os, mv.first);
      write_f64_vec(os, mv.second);
    }
  }
  if (!os) throw LoadError("write failure on checkpoint: " + path);
}

ParamStore load_checkpoint(const std::string& path, CheckpointMeta& meta) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) {
    throw LoadError("not a checkpoint file: " + path);
  }
  const std::uint64_t version = read_u64(is);
  if (version != 1) throw LoadError("unsupported checkpoint version " + std::to_string(version));
  meta.seed = read_u64(is);
  meta.config_digest = read_u64(is);
  meta.epoch = read_u64(is);
  meta.config_text = read_string(is);

  meta.vocab_tokens.clear();
  const std::uint64_t n_tokens = read_u64(is);
  meta.vocab_tokens.reserve(n_tokens);
  for (std::uint64_t i = 0; i < n_tokens; ++i) meta.vocab_tokens.push_back(read_string(is));

  ParamStore store(meta.seed);
  const std::uint64_t n_params = read_u64(is);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    const std::string name = read_string(is);
    const int rows = static_cast<int>(read_u64(is));
    const int cols = static_cast<int>(read_u64(is));
    const bool trainable = is.get() != 0;
    std::vector<double> values(static_cast<std::size_t>(rows) * cols);
    for (auto& d : values) d = read_f64(is);
    store.create_raw(name, rows, cols, trainable, std::move(values));
  }

  meta.has_optimizer = is.get() != 0;
  meta.adam_moments.clear();
  meta.adam_step = 0;
  if (meta.has_optimizer) {
    meta.adam_step = read_u64(is);
    const std::uint64_t n = read_u64(is);
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::string name = read_string(is);
      auto m = read_f64_vec(is);
      auto v = read_f64_vec(is);
      meta.adam_moments.emplace(name, std::make_pair(std::move(m), std::move(v)));
    }
  }
  if (!is) throw LoadError("truncated checkpoint: " + path);
  return store;
}

}  // namespace gog
