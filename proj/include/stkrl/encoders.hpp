#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "stkrl/kg_data.hpp"
#include "stkrl/numerics.hpp"

namespace stkrl {

enum class EncoderKind { Rnn, RnnPool, Lstm };

std::string to_string(EncoderKind kind);

// One affine block W x + U h + b. The RNN has one, the LSTM four in the
// order input, forget, output, update.
struct GateParams {
  Matrix W;  // k x (k_w + k_p)
  Matrix U;  // k x k
  Vec b;     // k

  bool operator==(const GateParams&) const = default;
};

namespace lstm_gate {
inline constexpr std::size_t kInput = 0;
inline constexpr std::size_t kForget = 1;
inline constexpr std::size_t kOutput = 2;
inline constexpr std::size_t kUpdate = 3;
}  // namespace lstm_gate

struct EncoderParams {
  EncoderKind kind = EncoderKind::Rnn;
  std::vector<GateParams> gates;

  static EncoderParams zeros(EncoderKind kind, std::size_t k, std::size_t input_dim);
  static std::size_t gate_count(EncoderKind kind) { return kind == EncoderKind::Lstm ? 4 : 1; }

  std::size_t hidden_dim() const { return gates.empty() ? 0 : gates[0].b.size(); }
  std::size_t input_dim() const { return gates.empty() ? 0 : gates[0].W.cols(); }

  // Named flat views in checkpoint order: per gate W, U, b.
  struct Block {
    std::string name;
    MutSpan values;
  };
  std::vector<Block> blocks();

  void set_zero();
  bool operator==(const EncoderParams&) const = default;
};

// Learned vectors for clipped positions -d..d; row index = position + d.
struct PositionFeatureTable {
  int clip_d = 10;
  Matrix vectors;  // (2d+1) x k_p

  ConstSpan at(int position) const;
  std::size_t row_of(int position) const;
  bool operator==(const PositionFeatureTable&) const = default;
};

// Forward activations for one sentence, kept for backpropagation.
struct EncoderTape {
  EncoderKind kind = EncoderKind::Rnn;
  const EncoderParams* params = nullptr;
  std::vector<WordId> tokens;
  std::vector<int> positions;
  std::vector<Vec> xs;
  std::vector<Vec> h;  // h_1..h_n
  // LSTM only.
  std::vector<Vec> i, f, o, u, c, tanh_c;
};

struct Encoding {
  Vec output;
  EncoderTape tape;
};

// x_t = [word_vector(tokens[t]) ; position_vector(position_ids[t])]
std::vector<Vec> embed_sentence(const ReferenceSentence& sentence, const WordFeatureTable& words,
                                const PositionFeatureTable& positions);

Encoding rnn_forward(const EncoderParams& p, std::vector<Vec> xs);
Encoding rnn_pool_forward(const EncoderParams& p, std::vector<Vec> xs);
Encoding lstm_forward(const EncoderParams& p, std::vector<Vec> xs);

// Dispatches on p.kind.
Encoding encode(const EncoderParams& p, std::vector<Vec> xs);

// Embeds and encodes a reference sentence, recording ids on the tape.
Encoding encode_sentence(const EncoderParams& p, const ReferenceSentence& sentence,
                         const WordFeatureTable& words, const PositionFeatureTable& positions);

// Row-sparse gradient accumulator keyed by id, iterated in id order.
struct SparseRows {
  std::size_t dim = 0;
  std::map<std::int32_t, Vec> rows;

  MutSpan row(std::int32_t id);
  void add(std::int32_t id, ConstSpan g, double scale = 1.0);
  bool empty() const { return rows.empty(); }
};

struct EncoderGradients {
  EncoderParams params;  // same shapes as the encoder, holding gradients
  SparseRows words;
  SparseRows positions;  // keyed by position id (-d..d)

  static EncoderGradients zeros(const EncoderParams& like, std::size_t k_w, std::size_t k_p);
};

// Accumulates exact reverse-mode gradients of the forward map into `grads`
// for upstream = dL/d(output). Input gradients are routed to the word and
// position rows named on the tape; x_t is split as [k_w | k_p]. When `dxs`
// is given it receives dL/dx_t for every step as well.
void encoder_backward(const EncoderTape& tape, ConstSpan upstream, EncoderGradients& grads,
                      std::vector<Vec>* dxs = nullptr);

}  // namespace stkrl
