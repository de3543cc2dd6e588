#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fastqa/bow.hpp"
#include "fastqa/checkpoint.hpp"
#include "fastqa/embedder.hpp"
#include "fastqa/eval.hpp"
#include "fastqa/fastqa_model.hpp"
#include "fastqa/fusion.hpp"
#include "fastqa/text.hpp"

namespace fastqa {

enum class ModelKind { kBow, kFastqa, kFastqaExt };

const char* model_kind_name(ModelKind kind);
ModelKind model_kind_from(const std::string& name);

struct TrainConfig {
  ModelKind model = ModelKind::kFastqa;
  int64_t n = 300;
  double lr = 1e-3;
  int64_t batch_size = 64;
  double dropout_rate = 0.5;
  int64_t checkpoint_every = 1000;  // mini-batches; the bow model checkpoints per epoch
  int64_t beam_k = 5;
  int64_t max_context = 400;
  uint64_t seed = 1;
  int64_t epochs = 50;
  bool wiq_enabled = true;     // ablation switch: zero both context wiq features
  bool marginal_loss = false;  // multiple golds: marginalize instead of min-loss
  bool use_chars = false;
  double lr_floor = 1e-6;
  int64_t early_stop = 5;   // checkpoints without dev-F1 improvement
  int64_t max_steps = -1;   // hard cap on mini-batches, < 0 for unlimited
};

TrainConfig defaults_for(ModelKind kind);
nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);

// One model variant plus the shared embedder, with the fixed lookup table.
struct Model {
  ModelKind kind = ModelKind::kFastqa;
  Vocabulary vocab;
  EmbedderParams embedder;
  FastQAParams fastqa;
  FusionParams fusion;
  BowParams bow;
  FastQAOptions opts;

  std::vector<std::pair<std::string, Tensor32*>> named_trainable();
};

Model init_model(const TrainConfig& cfg, const Embeddings& emb);

struct AdamState {
  std::map<std::string, std::vector<float>> m, v;
  int64_t step = 0;  // applied updates, drives bias correction
};

// Standard bias-corrected Adam over the current .grad buffers.
void adam_step(const std::vector<std::pair<std::string, Tensor32*>>& params, AdamState& state,
               double lr);

double global_grad_norm(const std::vector<std::pair<std::string, Tensor32*>>& params);
void clip_global_norm(const std::vector<std::pair<std::string, Tensor32*>>& params,
                      double max_norm);
bool grads_finite(const std::vector<std::pair<std::string, Tensor32*>>& params);

// Halve when the latest checkpoint F1 dropped below the previous one.
double lr_schedule_update(const std::vector<double>& f1_history, double lr,
                          double floor = 1e-6);

// One Bernoulli(1-rate) mask over the embedding coordinates, tiled across all
// L positions and pre-scaled by 1/(1-rate).
Tensor32 variational_dropout_mask(int64_t L, int64_t d, double rate, uint64_t seed);

// Spec'd batch form: applies one per-example mask to every row of that
// example's (L,d) embedding matrix, in place.
void variational_input_dropout(std::vector<Tensor32>& batch_emb, double rate, uint64_t seed,
                               uint64_t step);

// Loss graph for one example; nullopt when the example cannot be scored by
// this model (bow: no gold span of eligible length). dropout_rate > 0 draws
// the per-example coordinate mask from mask_seed and applies it to both the
// context and question embeddings.
std::optional<ad::Var> example_loss(ad::Graph32& g, Model& m, const TokenizedExample& ex,
                                    double dropout_rate, uint64_t mask_seed, bool marginal);

struct Prediction {
  int64_t s = 0;
  int64_t e = 0;
  double probability = 0.0;
  std::string text;
};

Prediction predict_example(Model& m, const TokenizedExample& ex, int64_t beam_k);
std::map<std::string, std::string> predict_all(Model& m,
                                               const std::vector<TokenizedExample>& examples,
                                               int64_t beam_k);
EvalResult eval_on(Model& m, const std::vector<TokenizedExample>& dev, int64_t beam_k);

struct TrainResult {
  int64_t steps = 0;  // mini-batches processed
  double best_f1 = -1.0;
  double best_em = 0.0;
  std::string best_path;
  std::string last_path;
  std::string metrics_path;
  double final_lr = 0.0;
  bool stopped_early = false;
  int64_t skipped_steps = 0;  // non-finite gradients
};

// Full optimization loop: seeded shuffling, context cutting (training side
// only), gradient-accumulated mini-batches, checkpoint/eval/lr schedule,
// early stopping. Give resume_from a checkpoint path to continue a run; the
// config must match the one stored there.
TrainResult train(const TrainConfig& cfg, const std::vector<TokenizedExample>& train_set,
                  const std::vector<TokenizedExample>& dev_set, const Embeddings& emb,
                  const std::string& out_dir, const std::string& resume_from = "");

// Checkpoint plumbing shared by train() and the CLI.
void model_to_checkpoint(Model& m, const AdamState& adam, const TrainConfig& cfg,
                         const nlohmann::json& state, Checkpoint& out);
void model_from_checkpoint(const Checkpoint& ckpt, Model& m, AdamState& adam);
uint64_t embeddings_hash(const Embeddings& emb);

}  // namespace fastqa
