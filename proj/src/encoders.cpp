#include "stkrl/encoders.hpp"

#include <array>
#include <cmath>

#include "stkrl/error.hpp"

namespace stkrl {

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::Rnn: return "rnn";
    case EncoderKind::RnnPool: return "rnn-pool";
    case EncoderKind::Lstm: return "lstm";
  }
  return "?";
}

EncoderParams EncoderParams::zeros(EncoderKind kind, std::size_t k, std::size_t input_dim) {
  EncoderParams p;
  p.kind = kind;
  p.gates.resize(gate_count(kind));
  for (auto& g : p.gates) {
    g.W = Matrix(k, input_dim);
    g.U = Matrix(k, k);
    g.b.assign(k, 0.0);
  }
  return p;
}

std::vector<EncoderParams::Block> EncoderParams::blocks() {
  static const char* const kLstmNames[] = {"input", "forget", "output", "update"};
  std::vector<Block> out;
  for (std::size_t g = 0; g < gates.size(); ++g) {
    const std::string prefix =
        kind == EncoderKind::Lstm ? std::string("encoder.") + kLstmNames[g] + "." : "encoder.";
    out.push_back({prefix + "W", gates[g].W.values()});
    out.push_back({prefix + "U", gates[g].U.values()});
    out.push_back({prefix + "b", gates[g].b});
  }
  return out;
}

void EncoderParams::set_zero() {
  for (auto& g : gates) {
    g.W.fill(0.0);
    g.U.fill(0.0);
    std::fill(g.b.begin(), g.b.end(), 0.0);
  }
}

std::size_t PositionFeatureTable::row_of(int position) const {
  if (position < -clip_d || position > clip_d) {
    throw ArgumentError("position id " + std::to_string(position) + " outside [-d, d]");
  }
  return static_cast<std::size_t>(position + clip_d);
}

ConstSpan PositionFeatureTable::at(int position) const { return vectors.row(row_of(position)); }

std::vector<Vec> embed_sentence(const ReferenceSentence& sentence, const WordFeatureTable& words,
                                const PositionFeatureTable& positions) {
  if (sentence.tokens.empty()) throw ArgumentError("reference sentence has no tokens");
  if (sentence.position_ids.size() != sentence.tokens.size()) {
    throw ArgumentError("position ids and tokens differ in length");
  }
  const std::size_t kw = words.dim();
  const std::size_t kp = positions.vectors.cols();
  std::vector<Vec> xs;
  xs.reserve(sentence.tokens.size());
  for (std::size_t t = 0; t < sentence.tokens.size(); ++t) {
    const WordId w = sentence.tokens[t];
    if (w < 0 || static_cast<std::size_t>(w) >= words.size()) {
      throw ArgumentError("word id " + std::to_string(w) + " has no feature row");
    }
    Vec x(kw + kp);
    auto wv = words.vectors.row(static_cast<std::size_t>(w));
    std::copy(wv.begin(), wv.end(), x.begin());
    auto pv = positions.at(sentence.position_ids[t]);
    std::copy(pv.begin(), pv.end(), x.begin() + static_cast<std::ptrdiff_t>(kw));
    xs.push_back(std::move(x));
  }
  return xs;
}

namespace {

void check_inputs(const EncoderParams& p, const std::vector<Vec>& xs, EncoderKind want) {
  if (p.gates.size() != EncoderParams::gate_count(want)) {
    throw ConfigError("encoder", "parameter set does not match " + to_string(want));
  }
  if (xs.empty()) throw ArgumentError("cannot encode an empty sequence");
  const std::size_t k = p.hidden_dim();
  for (const auto& g : p.gates) {
    if (g.W.rows() != k || g.U.rows() != k || g.U.cols() != k || g.b.size() != k ||
        g.W.cols() != p.input_dim()) {
      throw ConfigError("encoder", "inconsistent gate shapes");
    }
  }
  for (const auto& x : xs) {
    if (x.size() != p.input_dim()) {
      throw ConfigError("encoder", "input dimension " + std::to_string(x.size()) + " != " +
                                       std::to_string(p.input_dim()));
    }
  }
}

// a = W x + U h + b
Vec affine(const GateParams& g, ConstSpan x, ConstSpan h) {
  Vec a = g.b;
  gemv_add(g.W, x, a);
  gemv_add(g.U, h, a);
  return a;
}

Encoding run_rnn(const EncoderParams& p, std::vector<Vec> xs, EncoderKind kind) {
  check_inputs(p, xs, kind);
  const std::size_t k = p.hidden_dim();
  Encoding enc;
  enc.tape.kind = kind;
  enc.tape.params = &p;
  Vec prev(k, 0.0);
  for (const auto& x : xs) {
    Vec a = affine(p.gates[0], x, prev);
    for (double& v : a) v = std::tanh(v);
    enc.tape.h.push_back(a);
    prev = std::move(a);
  }
  if (kind == EncoderKind::Rnn) {
    enc.output = enc.tape.h.back();
  } else {
    enc.output.assign(k, 0.0);
    const double inv = 1.0 / static_cast<double>(xs.size());
    for (const auto& h : enc.tape.h) axpy(inv, h, enc.output);
  }
  enc.tape.xs = std::move(xs);
  return enc;
}

}  // namespace

Encoding rnn_forward(const EncoderParams& p, std::vector<Vec> xs) {
  return run_rnn(p, std::move(xs), EncoderKind::Rnn);
}

Encoding rnn_pool_forward(const EncoderParams& p, std::vector<Vec> xs) {
  return run_rnn(p, std::move(xs), EncoderKind::RnnPool);
}

Encoding lstm_forward(const EncoderParams& p, std::vector<Vec> xs) {
  check_inputs(p, xs, EncoderKind::Lstm);
  using namespace lstm_gate;
  const std::size_t k = p.hidden_dim();
  Encoding enc;
  auto& tape = enc.tape;
  tape.kind = EncoderKind::Lstm;
  tape.params = &p;
  Vec h_prev(k, 0.0);
  Vec c_prev(k, 0.0);
  for (const auto& x : xs) {
    Vec i = affine(p.gates[kInput], x, h_prev);
    Vec f = affine(p.gates[kForget], x, h_prev);
    Vec o = affine(p.gates[kOutput], x, h_prev);
    Vec u = affine(p.gates[kUpdate], x, h_prev);
    Vec c(k), tc(k), h(k);
    for (std::size_t j = 0; j < k; ++j) {
      i[j] = sigmoid(i[j]);
      f[j] = sigmoid(f[j]);
      o[j] = sigmoid(o[j]);
      u[j] = std::tanh(u[j]);
      c[j] = i[j] * u[j] + f[j] * c_prev[j];
      tc[j] = std::tanh(c[j]);
      h[j] = o[j] * tc[j];
    }
    h_prev = h;
    c_prev = c;
    tape.i.push_back(std::move(i));
    tape.f.push_back(std::move(f));
    tape.o.push_back(std::move(o));
    tape.u.push_back(std::move(u));
    tape.c.push_back(std::move(c));
    tape.tanh_c.push_back(std::move(tc));
    tape.h.push_back(std::move(h));
  }
  enc.output = tape.h.back();
  tape.xs = std::move(xs);
  return enc;
}

Encoding encode(const EncoderParams& p, std::vector<Vec> xs) {
  switch (p.kind) {
    case EncoderKind::Rnn: return rnn_forward(p, std::move(xs));
    case EncoderKind::RnnPool: return rnn_pool_forward(p, std::move(xs));
    case EncoderKind::Lstm: return lstm_forward(p, std::move(xs));
  }
  throw UsageError("unknown encoder kind");
}

Encoding encode_sentence(const EncoderParams& p, const ReferenceSentence& sentence,
                         const WordFeatureTable& words, const PositionFeatureTable& positions) {
  Encoding enc = encode(p, embed_sentence(sentence, words, positions));
  enc.tape.tokens = sentence.tokens;
  enc.tape.positions = sentence.position_ids;
  return enc;
}

MutSpan SparseRows::row(std::int32_t id) {
  auto [it, inserted] = rows.try_emplace(id);
  if (inserted) it->second.assign(dim, 0.0);
  return it->second;
}

void SparseRows::add(std::int32_t id, ConstSpan g, double scale) { axpy(scale, g, row(id)); }

EncoderGradients EncoderGradients::zeros(const EncoderParams& like, std::size_t k_w,
                                         std::size_t k_p) {
  EncoderGradients g;
  g.params = EncoderParams::zeros(like.kind, like.hidden_dim(), like.input_dim());
  g.words.dim = k_w;
  g.positions.dim = k_p;
  return g;
}

namespace {

void accumulate_gate(GateParams& grad, ConstSpan da, ConstSpan x, const Vec* h_prev) {
  outer_add(grad.W, da, x);
  if (h_prev) outer_add(grad.U, da, *h_prev);
  axpy(1.0, da, grad.b);
}

}  // namespace

void encoder_backward(const EncoderTape& tape, ConstSpan upstream, EncoderGradients& grads,
                      std::vector<Vec>* dxs) {
  if (grads.params.kind != tape.kind) {
    throw UsageError("encoder_backward: tape was recorded by " + to_string(tape.kind) +
                     " but gradients are for " + to_string(grads.params.kind));
  }
  if (!tape.params) throw UsageError("encoder_backward: tape has no parameters");
  const EncoderParams& p = *tape.params;
  const std::size_t n = tape.h.size();
  const std::size_t k = p.hidden_dim();
  if (upstream.size() != k) throw UsageError("encoder_backward: upstream dimension mismatch");
  const bool route = !tape.tokens.empty();
  const std::size_t kw = grads.words.dim;
  if (dxs) dxs->assign(n, Vec(p.input_dim(), 0.0));

  // Gradient reaching h_t from outside the recurrence.
  auto external = [&](std::size_t t, MutSpan dh) {
    if (tape.kind == EncoderKind::RnnPool) {
      axpy(1.0 / static_cast<double>(n), upstream, dh);
    } else if (t + 1 == n) {
      axpy(1.0, upstream, dh);
    }
  };

  auto emit_dx = [&](std::size_t t, const Vec& dx) {
    if (dxs) (*dxs)[t] = dx;
    if (!route) return;
    grads.words.add(tape.tokens[t], ConstSpan(dx).first(kw));
    grads.positions.add(tape.positions[t], ConstSpan(dx).subspan(kw));
  };

  if (tape.kind != EncoderKind::Lstm) {
    Vec rec(k, 0.0);
    for (std::size_t t = n; t-- > 0;) {
      Vec da = rec;
      external(t, da);
      const Vec& h = tape.h[t];
      for (std::size_t j = 0; j < k; ++j) da[j] *= 1.0 - h[j] * h[j];
      accumulate_gate(grads.params.gates[0], da, tape.xs[t], t > 0 ? &tape.h[t - 1] : nullptr);
      Vec dx(p.input_dim(), 0.0);
      gemv_t_add(p.gates[0].W, da, dx);
      emit_dx(t, dx);
      std::fill(rec.begin(), rec.end(), 0.0);
      gemv_t_add(p.gates[0].U, da, rec);
    }
    return;
  }

  using namespace lstm_gate;
  Vec dh_rec(k, 0.0);
  Vec dc_next(k, 0.0);  // dL/dc_t arriving from step t+1
  for (std::size_t t = n; t-- > 0;) {
    Vec dh = dh_rec;
    external(t, dh);
    const Vec& i = tape.i[t];
    const Vec& f = tape.f[t];
    const Vec& o = tape.o[t];
    const Vec& u = tape.u[t];
    const Vec& tc = tape.tanh_c[t];
    std::array<Vec, 4> da;
    for (auto& v : da) v.assign(k, 0.0);
    Vec dc(k);
    for (std::size_t j = 0; j < k; ++j) {
      dc[j] = dh[j] * o[j] * (1.0 - tc[j] * tc[j]) + dc_next[j];
      const double c_prev = t > 0 ? tape.c[t - 1][j] : 0.0;
      da[kOutput][j] = dh[j] * tc[j] * o[j] * (1.0 - o[j]);
      da[kInput][j] = dc[j] * u[j] * i[j] * (1.0 - i[j]);
      da[kForget][j] = dc[j] * c_prev * f[j] * (1.0 - f[j]);
      da[kUpdate][j] = dc[j] * i[j] * (1.0 - u[j] * u[j]);
      dc_next[j] = dc[j] * f[j];
    }
    Vec dx(p.input_dim(), 0.0);
    std::fill(dh_rec.begin(), dh_rec.end(), 0.0);
    for (std::size_t g = 0; g < 4; ++g) {
      accumulate_gate(grads.params.gates[g], da[g], tape.xs[t], t > 0 ? &tape.h[t - 1] : nullptr);
      gemv_t_add(p.gates[g].W, da[g], dx);
      gemv_t_add(p.gates[g].U, da[g], dh_rec);
    }
    emit_dx(t, dx);
  }
}

}  // namespace stkrl
