// Sequence (LSTM) and one-time (MLP) autoencoders. Parameters live in the
// model struct; AutoencoderGraph binds them as tape leaves so one tape can
// record a whole batch and hand gradients back in params() order.
#pragma once

#include <vector>

#include "dice/autograd.hpp"
#include "dice/cohort.hpp"
#include "dice/rng.hpp"
#include "dice/tensor.hpp"

namespace dice {

struct Autoencoder {
  CohortKind kind = CohortKind::kOneTime;
  int input_dim = 0;
  int latent_dim = 0;
  int hidden_dim = 0;  // mlp only

  // lstm: gate blocks stacked [input; forget; cell; output]
  Tensor2 enc_wx, enc_wh, enc_b;
  Tensor2 dec_wh, dec_b;       // decoder is driven by state alone
  Tensor2 dec_wy, dec_by;      // per-step readout back to feature space

  // mlp
  Tensor2 enc_w1, enc_b1, enc_w2, enc_b2;
  Tensor2 dec_w1, dec_b1, dec_w2, dec_b2;

  static Autoencoder make(CohortKind kind, int input_dim, int latent_dim,
                          Rng& rng) {
    Autoencoder m;
    m.kind = kind;
    m.input_dim = input_dim;
    m.latent_dim = latent_dim;
    const int f = input_dim, d = latent_dim;
    if (kind == CohortKind::kSequence) {
      m.enc_wx = init_weight(4 * d, f, rng);
      m.enc_wh = init_weight(4 * d, d, rng);
      m.enc_b = Tensor2(4 * d, 1);
      m.dec_wh = init_weight(4 * d, d, rng);
      m.dec_b = Tensor2(4 * d, 1);
      m.dec_wy = init_weight(f, d, rng);
      m.dec_by = Tensor2(f, 1);
    } else {
      m.hidden_dim = 2 * d;
      const int h = m.hidden_dim;
      m.enc_w1 = init_weight(h, f, rng);
      m.enc_b1 = Tensor2(h, 1);
      m.enc_w2 = init_weight(d, h, rng);
      m.enc_b2 = Tensor2(d, 1);
      m.dec_w1 = init_weight(h, d, rng);
      m.dec_b1 = Tensor2(h, 1);
      m.dec_w2 = init_weight(f, h, rng);
      m.dec_b2 = Tensor2(f, 1);
    }
    return m;
  }

  std::vector<Tensor2*> params() {
    if (kind == CohortKind::kSequence)
      return {&enc_wx, &enc_wh, &enc_b, &dec_wh, &dec_b, &dec_wy, &dec_by};
    return {&enc_w1, &enc_b1, &enc_w2, &enc_b2,
            &dec_w1, &dec_b1, &dec_w2, &dec_b2};
  }
  std::vector<const Tensor2*> params() const {
    auto ps = const_cast<Autoencoder*>(this)->params();
    return {ps.begin(), ps.end()};
  }

  std::vector<std::string> param_names() const {
    if (kind == CohortKind::kSequence)
      return {"enc_wx", "enc_wh", "enc_b", "dec_wh", "dec_b", "dec_wy", "dec_by"};
    return {"enc_w1", "enc_b1", "enc_w2", "enc_b2",
            "dec_w1", "dec_b1", "dec_w2", "dec_b2"};
  }

 private:
  static Tensor2 init_weight(int r, int c, Rng& rng) {
    Tensor2 w(r, c);
    double bound = 1.0 / std::sqrt(static_cast<double>(c));
    for (double& v : w.data) v = rng.next_uniform(-bound, bound);
    return w;
  }
};

// Per-tape view of an autoencoder: leaf Vars for every parameter plus the
// forward passes. Gradients are read back via param_vars() after backward.
class AutoencoderGraph {
 public:
  AutoencoderGraph(ad::Tape& tape, const Autoencoder& model)
      : tape_(&tape), model_(&model) {
    for (const Tensor2* p : model.params()) pv_.push_back(tape.leaf(*p));
  }

  const std::vector<ad::Var>& param_vars() const { return pv_; }

  ad::Var encode(const Subject& s) const {
    if (model_->kind == CohortKind::kSequence) return encode_lstm(s);
    if (s.n() != 1)
      throw NumericError("one-time encoder given a multi-event subject");
    ad::Var x = tape_->leaf(s.events[0]);
    ad::Var h = tape_->relu(affine(pv_[0], x, pv_[1]));
    return affine(pv_[2], h, pv_[3]);
  }

  // total squared reconstruction error of one subject's events
  ad::Var recon_loss(const Subject& s, ad::Var z) const {
    if (model_->kind == CohortKind::kSequence) return decode_lstm(s, z);
    ad::Var h = tape_->relu(affine(pv_[4], z, pv_[5]));
    ad::Var xhat = affine(pv_[6], h, pv_[7]);
    return tape_->sumsq(tape_->sub(xhat, tape_->leaf(s.events[0])));
  }

  ad::Var recon_loss(const Subject& s) const { return recon_loss(s, encode(s)); }

 private:
  ad::Var affine(ad::Var w, ad::Var x, ad::Var b) const {
    return tape_->add(tape_->matmul(w, x), b);
  }

  struct Gates {
    ad::Var i, f, g, o;
  };
  Gates split_gates(ad::Var pre) const {
    const int d = model_->latent_dim;
    return {tape_->sigmoid_(tape_->slice_rows(pre, 0, d)),
            tape_->sigmoid_(tape_->slice_rows(pre, d, 2 * d)),
            tape_->tanh_(tape_->slice_rows(pre, 2 * d, 3 * d)),
            tape_->sigmoid_(tape_->slice_rows(pre, 3 * d, 4 * d))};
  }

  ad::Var encode_lstm(const Subject& s) const {
    const int d = model_->latent_dim;
    ad::Var h = tape_->leaf(Tensor2::zeros(d, 1));
    ad::Var c = tape_->leaf(Tensor2::zeros(d, 1));
    for (int t = 0; t < s.n(); ++t) {
      ad::Var x = tape_->leaf(s.events[t]);
      ad::Var pre = tape_->add(
          tape_->add(tape_->matmul(pv_[0], x), tape_->matmul(pv_[1], h)),
          pv_[2]);
      Gates gs = split_gates(pre);
      c = tape_->add(tape_->mul(gs.f, c), tape_->mul(gs.i, gs.g));
      h = tape_->mul(gs.o, tape_->tanh_(c));
    }
    return h;
  }

  ad::Var decode_lstm(const Subject& s, ad::Var z) const {
    const int d = model_->latent_dim;
    ad::Var h = z;
    ad::Var c = tape_->leaf(Tensor2::zeros(d, 1));
    std::vector<ad::Var> errs;
    for (int t = 0; t < s.n(); ++t) {
      ad::Var pre = tape_->add(tape_->matmul(pv_[3], h), pv_[4]);
      Gates gs = split_gates(pre);
      c = tape_->add(tape_->mul(gs.f, c), tape_->mul(gs.i, gs.g));
      h = tape_->mul(gs.o, tape_->tanh_(c));
      ad::Var xhat = affine(pv_[5], h, pv_[6]);
      errs.push_back(tape_->sumsq(tape_->sub(xhat, tape_->leaf(s.events[t]))));
    }
    return tape_->add_scalars(errs);
  }

  ad::Tape* tape_;
  const Autoencoder* model_;
  std::vector<ad::Var> pv_;
};

inline Tensor2 encode_subject(const Autoencoder& model, const Subject& s) {
  ad::Tape tape;
  AutoencoderGraph g(tape, model);
  return tape.val(g.encode(s));
}

// N x d matrix of latent representations, one row per subject
inline Tensor2 encode_cohort(const Autoencoder& model, const Cohort& cohort) {
  Tensor2 out(cohort.size(), model.latent_dim);
  for (int i = 0; i < cohort.size(); ++i) {
    Tensor2 z = encode_subject(model, cohort.subjects[i]);
    for (int j = 0; j < model.latent_dim; ++j) out.at(i, j) = z.data[j];
  }
  return out;
}

inline double mean_recon_loss(const Autoencoder& model, const Cohort& cohort) {
  if (cohort.size() == 0) throw DataError("mean_recon_loss: empty cohort");
  double total = 0.0;
  for (const auto& s : cohort.subjects) {
    ad::Tape tape;
    AutoencoderGraph g(tape, model);
    total += tape.val(g.recon_loss(s)).data[0];
  }
  return total / cohort.size();
}

}  // namespace dice
