#include "fastqa/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "fastqa/wiq.hpp"

namespace fastqa {

using ad::Graph32;
using ad::Var;

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBow: return "bow";
    case ModelKind::kFastqa: return "fastqa";
    case ModelKind::kFastqaExt: return "fastqaext";
  }
  return "?";
}

ModelKind model_kind_from(const std::string& name) {
  if (name == "bow") return ModelKind::kBow;
  if (name == "fastqa") return ModelKind::kFastqa;
  if (name == "fastqaext") return ModelKind::kFastqaExt;
  throw Error("unknown model kind: " + name + " (expected bow|fastqa|fastqaext)");
}

TrainConfig defaults_for(ModelKind kind) {
  TrainConfig cfg;
  cfg.model = kind;
  if (kind == ModelKind::kBow) {
    cfg.n = 150;
    cfg.batch_size = 32;
    cfg.dropout_rate = 0.2;
  } else {
    cfg.n = 300;
    cfg.batch_size = 64;
    cfg.dropout_rate = 0.5;
  }
  return cfg;
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
  return nlohmann::json{{"model", model_kind_name(cfg.model)},
                        {"n", cfg.n},
                        {"lr", cfg.lr},
                        {"batch_size", cfg.batch_size},
                        {"dropout_rate", cfg.dropout_rate},
                        {"checkpoint_every", cfg.checkpoint_every},
                        {"beam_k", cfg.beam_k},
                        {"max_context", cfg.max_context},
                        {"seed", cfg.seed},
                        {"epochs", cfg.epochs},
                        {"wiq_enabled", cfg.wiq_enabled},
                        {"marginal_loss", cfg.marginal_loss},
                        {"use_chars", cfg.use_chars},
                        {"lr_floor", cfg.lr_floor},
                        {"early_stop", cfg.early_stop},
                        {"max_steps", cfg.max_steps}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig cfg = defaults_for(model_kind_from(j.at("model").get<std::string>()));
  cfg.n = j.value("n", cfg.n);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  cfg.beam_k = j.value("beam_k", cfg.beam_k);
  cfg.max_context = j.value("max_context", cfg.max_context);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.wiq_enabled = j.value("wiq_enabled", cfg.wiq_enabled);
  cfg.marginal_loss = j.value("marginal_loss", cfg.marginal_loss);
  cfg.use_chars = j.value("use_chars", cfg.use_chars);
  cfg.lr_floor = j.value("lr_floor", cfg.lr_floor);
  cfg.early_stop = j.value("early_stop", cfg.early_stop);
  cfg.max_steps = j.value("max_steps", cfg.max_steps);
  return cfg;
}

std::vector<std::pair<std::string, Tensor32*>> Model::named_trainable() {
  std::vector<std::pair<std::string, Tensor32*>> out = embedder.named_trainable();
  auto append = [&](auto named) {
    for (auto& [name, t] : named) out.emplace_back(name, t);
  };
  switch (kind) {
    case ModelKind::kBow:
      append(bow.named_params());
      break;
    case ModelKind::kFastqa:
      append(fastqa.named_params());
      break;
    case ModelKind::kFastqaExt:
      append(fastqa.named_params());
      append(fusion.named_params());
      break;
  }
  return out;
}

Model init_model(const TrainConfig& cfg, const Embeddings& emb) {
  Model m;
  m.kind = cfg.model;
  m.vocab = emb.vocab;
  EmbedderConfig ec;
  ec.use_chars = cfg.use_chars;
  m.embedder =
      init_embedder<float>(emb.table, std::max<int64_t>(m.vocab.char_count(), 2), ec, cfg.seed);
  const int64_t d = m.embedder.out_dim();
  if (cfg.model == ModelKind::kBow) {
    m.bow = init_bow<float>(cfg.n, d, cfg.seed);
  } else {
    m.fastqa = init_fastqa<float>(cfg.n, d, cfg.seed);
    if (cfg.model == ModelKind::kFastqaExt) m.fusion = init_fusion<float>(cfg.n, cfg.seed);
  }
  m.opts.wiq_enabled = cfg.wiq_enabled;
  return m;
}

void adam_step(const std::vector<std::pair<std::string, Tensor32*>>& params, AdamState& state,
               double lr) {
  constexpr float kBeta1 = 0.9f, kBeta2 = 0.999f, kEps = 1e-8f;
  ++state.step;
  const float bc1 = 1.0f - std::pow(kBeta1, float(state.step));
  const float bc2 = 1.0f - std::pow(kBeta2, float(state.step));
  const float flr = float(lr);
  for (auto& [name, t] : params) {
    t->ensure_grad();
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) m.assign(t->data.size(), 0.0f);
    if (v.empty()) v.assign(t->data.size(), 0.0f);
    for (size_t i = 0; i < t->data.size(); ++i) {
      const float g = t->grad[i];
      m[i] = kBeta1 * m[i] + (1.0f - kBeta1) * g;
      v[i] = kBeta2 * v[i] + (1.0f - kBeta2) * g * g;
      const float mh = m[i] / bc1;
      const float vh = v[i] / bc2;
      t->data[i] -= flr * mh / (std::sqrt(vh) + kEps);
    }
  }
}

double global_grad_norm(const std::vector<std::pair<std::string, Tensor32*>>& params) {
  double sq = 0.0;
  for (auto& [name, t] : params)
    for (float g : t->grad) sq += double(g) * double(g);
  return std::sqrt(sq);
}

void clip_global_norm(const std::vector<std::pair<std::string, Tensor32*>>& params,
                      double max_norm) {
  double norm = global_grad_norm(params);
  if (norm <= max_norm || norm == 0.0) return;
  const float factor = float(max_norm / norm);
  for (auto& [name, t] : params)
    for (float& g : t->grad) g *= factor;
}

bool grads_finite(const std::vector<std::pair<std::string, Tensor32*>>& params) {
  for (auto& [name, t] : params)
    for (float g : t->grad)
      if (!std::isfinite(g)) return false;
  return true;
}

double lr_schedule_update(const std::vector<double>& f1_history, double lr, double floor) {
  if (f1_history.size() >= 2 && f1_history.back() < f1_history[f1_history.size() - 2]) lr /= 2.0;
  return std::max(lr, floor);
}

namespace {

std::vector<float> dropout_row(int64_t d, double rate, uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0)
    throw Error("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  std::vector<float> row(size_t(d), 1.0f);
  if (rate == 0.0) return row;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  const float scale = float(1.0 / (1.0 - rate));
  for (auto& v : row) v = keep(rng) ? scale : 0.0f;
  return row;
}

Tensor32 tile_mask(const std::vector<float>& row, int64_t L) {
  Tensor32 t = zeros<float>({L, int64_t(row.size())});
  for (int64_t j = 0; j < L; ++j)
    std::copy(row.begin(), row.end(), t.data.begin() + j * int64_t(row.size()));
  return t;
}

}  // namespace

Tensor32 variational_dropout_mask(int64_t L, int64_t d, double rate, uint64_t seed) {
  return tile_mask(dropout_row(d, rate, seed), L);
}

void variational_input_dropout(std::vector<Tensor32>& batch_emb, double rate, uint64_t seed,
                               uint64_t step) {
  for (size_t b = 0; b < batch_emb.size(); ++b) {
    Tensor32& emb = batch_emb[b];
    if (emb.rank() != 2) throw Error("variational dropout expects (L,d) embeddings");
    auto row = dropout_row(emb.dim(1), rate, mix_seed(seed, step, uint64_t(b)));
    for (int64_t j = 0; j < emb.dim(0); ++j)
      for (int64_t c = 0; c < emb.dim(1); ++c) emb.data[j * emb.dim(1) + c] *= row[size_t(c)];
  }
}

std::optional<Var> example_loss(Graph32& g, Model& m, const TokenizedExample& ex,
                                double dropout_rate, uint64_t mask_seed, bool marginal) {
  if (ex.context_tokens.empty() || ex.question_tokens.empty() || ex.gold_spans.empty())
    return std::nullopt;
  const int64_t L_X = int64_t(ex.context_tokens.size());
  const int64_t L_Q = int64_t(ex.question_tokens.size());

  Var table = g.param(m.embedder.E);
  Var ctx_emb = embed_tokens(g, m.embedder, table, word_ids_for(m.vocab, ex.context_tokens),
                             ex.context_chars);
  Var q_emb = embed_tokens(g, m.embedder, table, word_ids_for(m.vocab, ex.question_tokens),
                           ex.question_chars);
  if (dropout_rate > 0.0) {
    auto row = dropout_row(m.embedder.out_dim(), dropout_rate, mask_seed);
    ctx_emb = g.dropout(ctx_emb, tile_mask(row, L_X));
    q_emb = g.dropout(q_emb, tile_mask(row, L_Q));
  }

  if (m.kind == ModelKind::kBow) {
    auto spans = enumerate_spans(L_X);
    std::vector<int64_t> gold_idx;
    for (size_t i = 0; i < spans.size(); ++i)
      for (const Span& gold : ex.gold_spans)
        if (spans[i] == gold) gold_idx.push_back(int64_t(i));
    if (gold_idx.empty()) return std::nullopt;
    auto wiq_b = compute_wiq_binary(ex.context_tokens, ex.question_tokens, WiqPolicy::kNormalized);
    auto lat = extract_lat(ex.question_tokens);
    auto scores = bow_span_scores(g, m.bow, ctx_emb, q_emb, wiq_b, lat, spans);
    return bow_loss<float>(g, scores.total, gold_idx);
  }

  auto wiq_b = compute_wiq_binary(ex.context_tokens, ex.question_tokens, WiqPolicy::kSurface);
  auto enc = encode_example(g, m.fastqa, ctx_emb, q_emb, wiq_b, m.opts);
  Var H = enc.ctx_H;
  if (m.kind == ModelKind::kFastqaExt) H = fusion_stack(g, m.fusion, H, enc.q_Z);
  return span_loss(g, m.fastqa, H, enc.z_tilde, ex.gold_spans, marginal);
}

Prediction predict_example(Model& m, const TokenizedExample& ex, int64_t beam_k) {
  Prediction out;
  if (ex.context_tokens.empty() || ex.question_tokens.empty()) return out;
  const int64_t L_X = int64_t(ex.context_tokens.size());
  Graph32 g;
  Var table = g.param(m.embedder.E);
  Var ctx_emb = embed_tokens(g, m.embedder, table, word_ids_for(m.vocab, ex.context_tokens),
                             ex.context_chars);
  Var q_emb = embed_tokens(g, m.embedder, table, word_ids_for(m.vocab, ex.question_tokens),
                           ex.question_chars);

  if (m.kind == ModelKind::kBow) {
    auto spans = enumerate_spans(L_X);
    auto wiq_b = compute_wiq_binary(ex.context_tokens, ex.question_tokens, WiqPolicy::kNormalized);
    auto lat = extract_lat(ex.question_tokens);
    auto scores = bow_span_scores(g, m.bow, ctx_emb, q_emb, wiq_b, lat, spans);
    int64_t best = bow_argmax<float>(g, scores.total);
    out.s = spans[size_t(best)].start;
    out.e = spans[size_t(best)].end;
    const double lse = double(g.value(g.logsumexp(scores.total)).scalar());
    out.probability = std::exp(double(g.value(scores.total).data[size_t(best)]) - lse);
    out.text = ex.span_text({out.s, out.e});
    return out;
  }

  auto wiq_b = compute_wiq_binary(ex.context_tokens, ex.question_tokens, WiqPolicy::kSurface);
  auto enc = encode_example(g, m.fastqa, ctx_emb, q_emb, wiq_b, m.opts);
  Var H = enc.ctx_H;
  if (m.kind == ModelKind::kFastqaExt) H = fusion_stack(g, m.fusion, H, enc.q_Z);
  auto beam = beam_search_decode(g, m.fastqa, H, enc.z_tilde, beam_k);
  const auto& best = beam.front();
  out.s = best.s;
  out.e = best.e;
  out.probability = best.probability;
  out.text = ex.span_text({out.s, out.e});
  return out;
}

std::map<std::string, std::string> predict_all(Model& m,
                                               const std::vector<TokenizedExample>& examples,
                                               int64_t beam_k) {
  std::map<std::string, std::string> out;
  for (const auto& ex : examples) out[ex.id] = predict_example(m, ex, beam_k).text;
  return out;
}

EvalResult eval_on(Model& m, const std::vector<TokenizedExample>& dev, int64_t beam_k) {
  std::map<std::string, std::vector<std::string>> golds;
  for (const auto& ex : dev) golds[ex.id] = ex.raw_answers;
  return evaluate(predict_all(m, dev, beam_k), golds);
}

uint64_t embeddings_hash(const Embeddings& emb) {
  uint64_t h = fnv1a(emb.table.data.data(), emb.table.data.size() * sizeof(float));
  return mix_seed(h, uint64_t(emb.dim));
}

void model_to_checkpoint(Model& m, const AdamState& adam, const TrainConfig& cfg,
                         const nlohmann::json& state, Checkpoint& out) {
  out.version = 1;
  out.config = config_to_json(cfg);
  out.config["state"] = state;
  out.hashes["vocab.words"] = m.vocab.word_hash();
  out.hashes["vocab.chars"] = m.vocab.char_hash();
  out.adam_step = uint64_t(adam.step);
  for (auto& [name, t] : m.named_trainable()) {
    out.tensors.emplace(name, *t);
    auto mi = adam.m.find(name);
    auto vi = adam.v.find(name);
    if (mi != adam.m.end() && !mi->second.empty()) {
      Tensor32 mt = zeros<float>(t->shape);
      mt.data = mi->second;
      out.tensors.emplace("adam.m." + name, std::move(mt));
    }
    if (vi != adam.v.end() && !vi->second.empty()) {
      Tensor32 vt = zeros<float>(t->shape);
      vt.data = vi->second;
      out.tensors.emplace("adam.v." + name, std::move(vt));
    }
  }
}

void model_from_checkpoint(const Checkpoint& ckpt, Model& m, AdamState& adam) {
  auto named = m.named_trainable();
  size_t consumed = 0;
  for (auto& [name, t] : named) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw Error("checkpoint missing tensor: " + name);
    if (it->second.shape != t->shape)
      throw Error("checkpoint tensor shape mismatch for " + name + ": file " +
                  shape_str(it->second.shape) + " vs model " + shape_str(t->shape));
    t->data = it->second.data;
    ++consumed;
    auto mi = ckpt.tensors.find("adam.m." + name);
    if (mi != ckpt.tensors.end()) {
      adam.m[name] = mi->second.data;
      ++consumed;
    }
    auto vi = ckpt.tensors.find("adam.v." + name);
    if (vi != ckpt.tensors.end()) {
      adam.v[name] = vi->second.data;
      ++consumed;
    }
  }
  if (consumed != ckpt.tensors.size())
    throw Error("checkpoint holds tensors unknown to this model configuration");
  adam.step = int64_t(ckpt.adam_step);
}

namespace {

struct MetricsWriter {
  std::ofstream file;

  MetricsWriter(const std::string& path, bool append)
      : file(path, append ? std::ios::app : std::ios::trunc) {
    if (!file) throw Error("cannot open metrics log: " + path);
  }

  void line(int64_t step, double loss, std::optional<double> dev_em,
            std::optional<double> dev_f1, double lr, double wall_time) {
    nlohmann::json j{{"step", step}, {"loss", loss}, {"lr", lr}, {"wall_time", wall_time}};
    j["dev_em"] = dev_em ? nlohmann::json(*dev_em) : nlohmann::json(nullptr);
    j["dev_f1"] = dev_f1 ? nlohmann::json(*dev_f1) : nlohmann::json(nullptr);
    file << j.dump() << "\n";
    file.flush();
  }
};

bool eligible_example(ModelKind kind, const TokenizedExample& ex) {
  if (ex.context_tokens.empty() || ex.question_tokens.empty() || ex.gold_spans.empty())
    return false;
  if (kind != ModelKind::kBow) return true;
  for (const Span& gold : ex.gold_spans)
    if (span_len(gold) <= 10) return true;
  return false;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<TokenizedExample>& train_set,
                  const std::vector<TokenizedExample>& dev_set, const Embeddings& emb,
                  const std::string& out_dir, const std::string& resume_from) {
  if (dev_set.empty()) throw Error("train: dev set is empty");
  if (cfg.batch_size <= 0) throw Error("train: batch_size must be positive");
  std::filesystem::create_directories(out_dir);

  // Training-side context cutting; dev contexts stay whole.
  std::vector<TokenizedExample> prepped;
  prepped.reserve(train_set.size());
  for (const auto& ex : train_set) {
    if (int64_t(ex.context_tokens.size()) > cfg.max_context) {
      auto cut = cut_context(ex, cfg.max_context);
      if (cut && eligible_example(cfg.model, *cut)) prepped.push_back(std::move(*cut));
    } else if (eligible_example(cfg.model, ex)) {
      prepped.push_back(ex);
    }
  }
  if (prepped.empty()) throw Error("train: no usable training examples after preparation");

  Model model = init_model(cfg, emb);
  auto params = model.named_trainable();
  AdamState adam;
  double lr = cfg.lr;
  std::vector<double> f1_history;
  double best_f1 = -1.0, best_em = 0.0;
  int64_t no_improve = 0;
  int64_t start_step = 0;

  const bool resuming = !resume_from.empty();
  if (resuming) {
    Checkpoint ckpt = load_checkpoint(resume_from);
    require_hash(ckpt, "vocab.words", emb.vocab.word_hash());
    require_hash(ckpt, "vocab.chars", emb.vocab.char_hash());
    require_hash(ckpt, "embeddings", embeddings_hash(emb));
    nlohmann::json stored = ckpt.config;
    nlohmann::json state = stored.value("state", nlohmann::json::object());
    stored.erase("state");
    // run-length limits may change between legs; everything else must match
    nlohmann::json wanted = config_to_json(cfg);
    for (auto* j : {&stored, &wanted}) {
      j->erase("max_steps");
      j->erase("epochs");
      j->erase("early_stop");
    }
    if (stored != wanted)
      throw Error("resume: config differs from the checkpoint's; stored " + stored.dump());
    model_from_checkpoint(ckpt, model, adam);
    lr = state.value("lr", cfg.lr);
    f1_history = state.value("f1_history", std::vector<double>{});
    best_f1 = state.value("best_f1", -1.0);
    best_em = state.value("best_em", 0.0);
    no_improve = state.value("no_improve", int64_t(0));
    start_step = state.value("step", int64_t(0));
  }

  TrainResult res;
  res.metrics_path = out_dir + "/metrics.jsonl";
  MetricsWriter metrics(res.metrics_path, resuming);
  const auto t0 = std::chrono::steady_clock::now();
  auto wall = [&]() { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  const int64_t N = int64_t(prepped.size());
  const int64_t B = cfg.batch_size;
  const int64_t batches_per_epoch = (N + B - 1) / B;

  auto save_state = [&](int64_t step) {
    return nlohmann::json{{"step", step},       {"lr", lr},
                          {"f1_history", f1_history}, {"best_f1", best_f1},
                          {"best_em", best_em}, {"no_improve", no_improve}};
  };
  auto save_ckpt = [&](const std::string& path, int64_t step) {
    Checkpoint ckpt;
    model_to_checkpoint(model, adam, cfg, save_state(step), ckpt);
    ckpt.hashes["embeddings"] = embeddings_hash(emb);
    save_checkpoint(ckpt, path);
  };

  int64_t global_step = start_step;
  int64_t last_eval_step = -1;
  bool stop = false;
  for (int64_t epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    if ((epoch + 1) * batches_per_epoch <= start_step) continue;  // fully consumed before resume
    std::vector<int64_t> order(static_cast<size_t>(N));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0xE90C, uint64_t(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (int64_t bi = 0; bi < batches_per_epoch && !stop; ++bi) {
      if (epoch * batches_per_epoch + bi < start_step) continue;
      const int64_t lo = bi * B;
      const int64_t hi = std::min(lo + B, N);
      const int64_t batch_n = hi - lo;

      for (auto& [name, t] : params) {
        t->ensure_grad();
        t->zero_grad();
      }
      double loss_sum = 0.0;
      for (int64_t slot = 0; slot < batch_n; ++slot) {
        const TokenizedExample& ex = prepped[size_t(order[size_t(lo + slot)])];
        Graph32 g;
        uint64_t mask_seed = mix_seed(cfg.seed, 0xD407u ^ uint64_t(global_step), uint64_t(slot));
        auto lv = example_loss(g, model, ex, cfg.dropout_rate, mask_seed, cfg.marginal_loss);
        if (!lv) continue;
        loss_sum += double(g.value(*lv).scalar());
        g.backward(g.scale(*lv, 1.0f / float(batch_n)));
      }
      const double batch_loss = loss_sum / double(batch_n);

      if (grads_finite(params)) {
        clip_global_norm(params, 5.0);
        adam_step(params, adam, lr);
      } else {
        ++res.skipped_steps;
        std::fprintf(stderr, "[train] step %lld: non-finite gradients, update skipped\n",
                     (long long)(global_step + 1));
      }
      ++global_step;

      const bool last_batch_of_epoch = bi == batches_per_epoch - 1;
      const bool checkpoint_now =
          cfg.model == ModelKind::kBow
              ? last_batch_of_epoch
              : (cfg.checkpoint_every > 0 && global_step % cfg.checkpoint_every == 0);
      const double lr_used = lr;
      std::optional<double> dev_em, dev_f1;
      if (checkpoint_now) {
        EvalResult dev = eval_on(model, dev_set, cfg.beam_k);
        last_eval_step = global_step;
        dev_em = dev.exact_match;
        dev_f1 = dev.f1;
        f1_history.push_back(dev.f1);
        double new_lr = lr_schedule_update(f1_history, lr, cfg.lr_floor);
        if (new_lr != lr) {
          std::fprintf(stderr, "[train] step %lld: dev F1 %.3f < %.3f, lr %.2e -> %.2e\n",
                       (long long)global_step, f1_history[f1_history.size() - 1],
                       f1_history[f1_history.size() - 2], lr, new_lr);
          lr = new_lr;
        }
        if (dev.f1 > best_f1) {
          best_f1 = dev.f1;
          best_em = dev.exact_match;
          no_improve = 0;
          res.best_path = out_dir + "/best.fqac";
          save_ckpt(res.best_path, global_step);
        } else {
          ++no_improve;
        }
        save_ckpt(out_dir + "/ckpt-" + std::to_string(global_step) + ".fqac", global_step);
        if (cfg.early_stop > 0 && no_improve >= cfg.early_stop) {
          std::fprintf(stderr, "[train] step %lld: no dev-F1 improvement in %lld checkpoints\n",
                       (long long)global_step, (long long)no_improve);
          res.stopped_early = true;
          stop = true;
        }
      }
      metrics.line(global_step, batch_loss, dev_em, dev_f1, lr_used, wall());
      if (cfg.max_steps >= 0 && global_step >= cfg.max_steps) stop = true;
    }
  }

  // catch runs that end between checkpoints; deliberately leaves the lr and
  // early-stop bookkeeping alone so a resumed run sees the same schedule
  if (global_step > start_step && last_eval_step != global_step) {
    EvalResult dev = eval_on(model, dev_set, cfg.beam_k);
    if (dev.f1 > best_f1) {
      best_f1 = dev.f1;
      best_em = dev.exact_match;
      res.best_path = out_dir + "/best.fqac";
      save_ckpt(res.best_path, global_step);
    }
  }

  res.steps = global_step;
  res.best_f1 = best_f1;
  res.best_em = best_em;
  res.final_lr = lr;
  res.last_path = out_dir + "/last.fqac";
  save_ckpt(res.last_path, global_step);
  if (res.best_path.empty()) res.best_path = res.last_path;
  return res;
}

}  // namespace fastqa
