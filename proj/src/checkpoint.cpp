// Checkpoint layout (all integers and floats little-endian):
//
//   "STKRLCKP"          8-byte magic
//   version             u8
//   k k_w k_p d m batch_size epochs seed          u64 each (d as two's complement)
//   norm energy_mode loss_mode encoder aggregation attention_grad   u8 each
//   margin learning_rate epsilon                   f64 each
//   table_count         u32
//   rows cols           u64 pair per table
//   table data          row-major f64, tables in the order
//                       entity_struct, relation, words, positions,
//                       then W, U, b per encoder gate (i, f, o, u for LSTM)
//   word source flags   one byte per word row (1 = loaded from file)

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "stkrl/error.hpp"
#include "stkrl/model.hpp"

namespace stkrl {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'K', 'R', 'L', 'C', 'K', 'P'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }

 private:
  void le(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(buf, n);
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint8_t u8(const char* field) { return static_cast<std::uint8_t>(le(1, field)); }
  std::uint32_t u32(const char* field) { return static_cast<std::uint32_t>(le(4, field)); }
  std::uint64_t u64(const char* field) { return le(8, field); }
  double f64(const char* field) { return std::bit_cast<double>(le(8, field)); }
  void bytes(char* p, std::size_t n, const std::string& field) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw CheckpointError("truncated checkpoint while reading " + field);
    }
  }

 private:
  std::uint64_t le(int n, const std::string& field) {
    unsigned char buf[8];
    bytes(reinterpret_cast<char*>(buf), static_cast<std::size_t>(n), field);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
};

template <class E>
E enum_field(std::uint8_t v, std::uint8_t count, const char* field) {
  if (v >= count) throw CheckpointError(std::string("invalid value for ") + field);
  return static_cast<E>(v);
}

}  // namespace

void save_checkpoint(const ModelParams& params, std::ostream& out) {
  params.check_shapes();
  Writer w(out);
  const auto& c = params.config;
  w.bytes(kMagic, sizeof kMagic);
  w.u8(kCheckpointVersion);
  w.u64(c.k);
  w.u64(c.k_w);
  w.u64(c.k_p);
  w.u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(c.d)));
  w.u64(c.m);
  w.u64(c.batch_size);
  w.u64(c.epochs);
  w.u64(c.seed);
  w.u8(static_cast<std::uint8_t>(c.norm));
  w.u8(static_cast<std::uint8_t>(c.energy_mode));
  w.u8(static_cast<std::uint8_t>(c.loss_mode));
  w.u8(static_cast<std::uint8_t>(c.encoder));
  w.u8(static_cast<std::uint8_t>(c.aggregation));
  w.u8(static_cast<std::uint8_t>(c.attention_grad));
  w.f64(c.margin);
  w.f64(c.learning_rate);
  w.f64(c.epsilon);

  struct Table {
    std::size_t rows, cols;
    ConstSpan data;
  };
  std::vector<Table> tables = {
      {params.entities.rows(), params.entities.cols(), params.entities.values()},
      {params.relations.rows(), params.relations.cols(), params.relations.values()},
      {params.words.vectors.rows(), params.words.vectors.cols(), params.words.vectors.values()},
      {params.positions.vectors.rows(), params.positions.vectors.cols(),
       params.positions.vectors.values()},
  };
  for (const auto& g : params.encoder.gates) {
    tables.push_back({g.W.rows(), g.W.cols(), g.W.values()});
    tables.push_back({g.U.rows(), g.U.cols(), g.U.values()});
    tables.push_back({g.b.size(), 1, g.b});
  }
  w.u32(static_cast<std::uint32_t>(tables.size()));
  for (const auto& t : tables) {
    w.u64(t.rows);
    w.u64(t.cols);
  }
  for (const auto& t : tables) {
    for (double v : t.data) w.f64(v);
  }
  for (bool loaded : params.words.loaded) w.u8(loaded ? 1 : 0);
  if (!out) throw CheckpointError("write failed");
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  save_checkpoint(params, out);
}

ModelParams load_checkpoint(std::istream& in) {
  Reader r(in);
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("magic: not a checkpoint file");
  }
  const auto version = r.u8("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("version: unsupported checkpoint version " + std::to_string(version));
  }
  ModelParams p;
  auto& c = p.config;
  c.k = r.u64("k");
  c.k_w = r.u64("k_w");
  c.k_p = r.u64("k_p");
  c.d = static_cast<int>(static_cast<std::int64_t>(r.u64("d")));
  c.m = r.u64("m");
  c.batch_size = r.u64("batch_size");
  c.epochs = r.u64("epochs");
  c.seed = r.u64("seed");
  c.norm = enum_field<NormKind>(r.u8("norm"), 2, "norm");
  c.energy_mode = enum_field<EnergyMode>(r.u8("energy_mode"), 2, "energy_mode");
  c.loss_mode = enum_field<LossMode>(r.u8("loss_mode"), 2, "loss_mode");
  c.encoder = enum_field<EncoderKind>(r.u8("encoder"), 3, "encoder");
  c.aggregation = enum_field<AggregationMode>(r.u8("aggregation"), 2, "aggregation");
  c.attention_grad = enum_field<AttentionGrad>(r.u8("attention_grad"), 2, "attention_grad");
  c.margin = r.f64("margin");
  c.learning_rate = r.f64("learning_rate");
  c.epsilon = r.f64("epsilon");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("header: ") + e.what());
  }

  const std::size_t gates = EncoderParams::gate_count(c.encoder);
  const std::uint32_t count = r.u32("table_count");
  if (count != 4 + 3 * gates) {
    throw CheckpointError("table_count: expected " + std::to_string(4 + 3 * gates) + ", got " +
                          std::to_string(count));
  }
  std::vector<std::pair<std::uint64_t, std::uint64_t>> dims(count);
  for (auto& [rows, cols] : dims) {
    rows = r.u64("table dimensions");
    cols = r.u64("table dimensions");
  }

  p.encoder.kind = c.encoder;
  p.encoder.gates.resize(gates);
  std::vector<std::string> names = {"entity_struct", "relation", "words", "positions"};
  for (auto& b : p.encoder.blocks()) names.push_back(b.name);

  // Required column counts (and row counts where fixed by the header).
  const std::size_t in_dim = c.k_w + c.k_p;
  auto expect = [&](std::size_t t, std::uint64_t rows, std::uint64_t cols, bool rows_fixed) {
    if (dims[t].second != cols || (rows_fixed && dims[t].first != rows)) {
      throw CheckpointError(names[t] + ": shape " + std::to_string(dims[t].first) + "x" +
                            std::to_string(dims[t].second) + " inconsistent with header");
    }
  };
  expect(0, 0, c.k, false);
  expect(1, 0, c.k, false);
  expect(2, 0, c.k_w, false);
  expect(3, static_cast<std::uint64_t>(2 * c.d + 1), c.k_p, true);
  for (std::size_t g = 0; g < gates; ++g) {
    expect(4 + 3 * g, c.k, in_dim, true);
    expect(5 + 3 * g, c.k, c.k, true);
    expect(6 + 3 * g, c.k, 1, true);
  }

  auto read_matrix = [&](std::size_t t) {
    Matrix m(dims[t].first, dims[t].second);
    for (double& v : m.values()) v = r.f64(names[t].c_str());
    return m;
  };
  p.entities = read_matrix(0);
  p.relations = read_matrix(1);
  p.words.vectors = read_matrix(2);
  p.positions.clip_d = c.d;
  p.positions.vectors = read_matrix(3);
  for (std::size_t g = 0; g < gates; ++g) {
    p.encoder.gates[g].W = read_matrix(4 + 3 * g);
    p.encoder.gates[g].U = read_matrix(5 + 3 * g);
    const Matrix b = read_matrix(6 + 3 * g);
    p.encoder.gates[g].b.assign(b.values().begin(), b.values().end());
  }
  p.words.loaded.resize(p.words.vectors.rows());
  for (std::size_t w = 0; w < p.words.loaded.size(); ++w) {
    p.words.loaded[w] = r.u8("word source flags") != 0;
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError("trailing bytes after word source flags");
  }
  return p;
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace stkrl
