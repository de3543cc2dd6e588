// Command-line front end: dataset preprocessing, training, prediction,
// evaluation, gradient checking, prediction diffing, and the synthetic toy
// dataset generator.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fastqa/eval.hpp"
#include "fastqa/grad_check.hpp"
#include "fastqa/synth.hpp"
#include "fastqa/text.hpp"
#include "fastqa/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fastqa;

namespace {

// Removes everything registered but not committed, so failed commands do not
// leave partial artifacts behind.
class ArtifactGuard {
 public:
  ~ArtifactGuard() {
    if (committed_) return;
    for (const auto& p : paths_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
  void add(const std::string& path) { paths_.push_back(path); }
  void commit() { committed_ = true; }

 private:
  std::vector<std::string> paths_;
  bool committed_ = false;
};

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc | std::ios::binary);
    if (!f) throw Error("cannot write " + tmp);
    f << content;
    if (!f.flush()) throw Error("write failed: " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot replace " + path);
  }
}

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  return j;
}

// Every artifact-producing command drops the resolved options next to its
// outputs; reruns overwrite atomically.
void write_snapshot(const std::string& out_dir, const std::string& command, const json& opts) {
  json snap{{"command", command}, {"options", opts}};
  atomic_write(out_dir + "/resolved_config.json", snap.dump(2) + "\n");
}

TokenizeMode mode_for(ModelKind kind) {
  return kind == ModelKind::kBow ? TokenizeMode::kBow : TokenizeMode::kFastqa;
}

std::vector<TokenizedExample> load_examples(const std::string& path, TokenizeMode mode,
                                            IngestStats* stats = nullptr) {
  if (path.size() > 6 && path.substr(path.size() - 6) == ".cache") {
    return load_examples_cache(path);
  }
  return ingest_squad(path, mode, stats);
}

std::map<std::string, std::string> load_predictions(const std::string& path) {
  json j = read_json(path);
  if (!j.is_object()) throw Error(path + ": predictions must be a JSON object of id -> text");
  std::map<std::string, std::string> out;
  for (auto& [id, text] : j.items()) {
    if (!text.is_string()) throw Error(path + ": prediction for " + id + " is not a string");
    out[id] = text.get<std::string>();
  }
  return out;
}

// id -> gold answer texts, straight off the dataset JSON; no tokenization.
std::map<std::string, std::vector<std::string>> load_gold_answers(const std::string& path) {
  json j = read_json(path);
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& article : j.at("data")) {
    for (const auto& para : article.at("paragraphs")) {
      for (const auto& qa : para.at("qas")) {
        std::vector<std::string> texts;
        for (const auto& a : qa.at("answers")) texts.push_back(a.at("text").get<std::string>());
        out[qa.at("id").get<std::string>()] = std::move(texts);
      }
    }
  }
  return out;
}

std::map<std::string, std::string> load_gold_questions(const std::string& path) {
  json j = read_json(path);
  std::map<std::string, std::string> out;
  for (const auto& article : j.at("data")) {
    for (const auto& para : article.at("paragraphs")) {
      for (const auto& qa : para.at("qas")) {
        out[qa.at("id").get<std::string>()] = qa.at("question").get<std::string>();
      }
    }
  }
  return out;
}

struct DataArgs {
  std::string data;  // directory in the synth layout, or a dataset file
  std::string train_file, dev_file, embeddings;

  void add_flags(CLI::App* cmd, bool need_train) {
    cmd->add_option("--data", data,
                    "dataset directory (train.json, dev.json, embeddings.txt) or a single file");
    if (need_train) cmd->add_option("--train-file", train_file, "training set JSON or .cache");
    cmd->add_option("--dev-file", dev_file, "dev set JSON or .cache");
    cmd->add_option("--embeddings", embeddings, "word embeddings, text format");
  }

  void resolve(bool need_train) {
    if (!data.empty() && fs::is_directory(data)) {
      if (train_file.empty()) train_file = data + "/train.json";
      if (dev_file.empty()) dev_file = data + "/dev.json";
      if (embeddings.empty()) embeddings = data + "/embeddings.txt";
    } else if (!data.empty() && train_file.empty()) {
      train_file = data;
    }
    if (need_train && train_file.empty()) throw Error("no training set given (--data/--train-file)");
    if (dev_file.empty()) throw Error("no dev set given (--data/--dev-file)");
    if (embeddings.empty()) throw Error("no embeddings given (--data/--embeddings)");
  }
};

json data_json(const DataArgs& d) {
  return json{{"train_file", d.train_file}, {"dev_file", d.dev_file},
              {"embeddings", d.embeddings}};
}

int cmd_synth(const std::string& out_dir, const SynthConfig& sc) {
  fs::create_directories(out_dir);
  ArtifactGuard guard;
  guard.add(out_dir + "/train.json");
  guard.add(out_dir + "/dev.json");
  guard.add(out_dir + "/embeddings.txt");
  guard.add(out_dir + "/resolved_config.json");
  SynthPaths paths = generate_synth(sc, out_dir);
  write_snapshot(out_dir, "synth",
                 json{{"out", out_dir},
                      {"n_train", sc.n_train},
                      {"n_dev", sc.n_dev},
                      {"context_len", sc.context_len},
                      {"dim", sc.dim},
                      {"leak_prob", sc.leak_prob},
                      {"seed", sc.seed}});
  guard.commit();
  std::printf("wrote %s, %s, %s\n", paths.train_json.c_str(), paths.dev_json.c_str(),
              paths.embeddings.c_str());
  return 0;
}

int cmd_preprocess(const std::string& data, const std::string& mode_name,
                   const std::string& out_dir) {
  TokenizeMode mode = mode_name == "bow" ? TokenizeMode::kBow : TokenizeMode::kFastqa;
  fs::create_directories(out_dir);
  ArtifactGuard guard;
  const std::string cache_path = out_dir + "/examples.cache";
  guard.add(cache_path);
  guard.add(out_dir + "/resolved_config.json");
  IngestStats stats;
  auto examples = ingest_squad(data, mode, &stats);
  save_examples_cache(cache_path, examples);
  write_snapshot(out_dir, "preprocess",
                 json{{"data", data}, {"mode", mode_name}, {"out", out_dir}});
  guard.commit();
  json report{{"examples", stats.examples},
              {"answers", stats.answers},
              {"answers_dropped", stats.answers_dropped},
              {"examples_without_spans", stats.examples_without_spans},
              {"cache", cache_path}};
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_train(const TrainConfig& cfg, const DataArgs& data, const std::string& out_dir,
              const std::string& resume) {
  TokenizeMode mode = mode_for(cfg.model);
  auto train_set = load_examples(data.train_file, mode);
  auto dev_set = load_examples(data.dev_file, mode);
  auto emb = load_embeddings(data.embeddings);
  fs::create_directories(out_dir);
  json opts = config_to_json(cfg);
  opts["data"] = data_json(data);
  opts["out"] = out_dir;
  if (!resume.empty()) opts["resume"] = resume;
  write_snapshot(out_dir, "train", opts);

  TrainResult res = train(cfg, train_set, dev_set, emb, out_dir, resume);
  json report{{"steps", res.steps},
              {"best_em", res.best_em},
              {"best_f1", res.best_f1},
              {"best_checkpoint", res.best_path},
              {"last_checkpoint", res.last_path},
              {"metrics", res.metrics_path},
              {"final_lr", res.final_lr},
              {"stopped_early", res.stopped_early},
              {"skipped_steps", res.skipped_steps}};
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& data_path,
                const std::string& emb_path, const std::string& out_path, int64_t beam_k) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  TrainConfig cfg = config_from_json(ckpt.config);
  auto emb = load_embeddings(emb_path);
  require_hash(ckpt, "vocab.words", emb.vocab.word_hash());
  require_hash(ckpt, "vocab.chars", emb.vocab.char_hash());
  require_hash(ckpt, "embeddings", embeddings_hash(emb));

  Model model = init_model(cfg, emb);
  AdamState adam;
  model_from_checkpoint(ckpt, model, adam);

  auto examples = load_examples(data_path, mode_for(cfg.model));
  auto preds = predict_all(model, examples, beam_k);

  ArtifactGuard guard;
  guard.add(out_path);
  atomic_write(out_path, json(preds).dump(2) + "\n");
  const fs::path parent = fs::path(out_path).parent_path();
  const std::string snap_dir = parent.empty() ? "." : parent.string();
  guard.add(snap_dir + "/resolved_config.json");
  write_snapshot(snap_dir, "predict",
                 json{{"checkpoint", ckpt_path},
                      {"data", data_path},
                      {"embeddings", emb_path},
                      {"out", out_path},
                      {"beam_k", beam_k},
                      {"model", model_kind_name(cfg.model)}});
  guard.commit();
  std::printf("wrote %zu predictions to %s\n", preds.size(), out_path.c_str());
  return 0;
}

int cmd_evaluate(const std::string& pred_path, const std::string& gold_path,
                 const std::string& out_path) {
  auto preds = load_predictions(pred_path);
  auto golds = load_gold_answers(gold_path);
  EvalResult r = evaluate(preds, golds);
  json report{{"exact_match", r.exact_match}, {"f1", r.f1}, {"missing", r.missing}};
  std::cout << report.dump(2) << "\n";
  if (!out_path.empty()) {
    ArtifactGuard guard;
    guard.add(out_path);
    atomic_write(out_path, report.dump(2) + "\n");
    guard.commit();
  }
  return 0;
}

json summary_json(const DiffSummary& s) {
  return json{{"count", s.ids.size()},
              {"ids", s.ids},
              {"mean_question_tokens", s.mean_question_tokens},
              {"mean_answer_tokens", s.mean_answer_tokens},
              {"question_word_hist", s.question_word_hist}};
}

int cmd_diff(const std::string& a_path, const std::string& b_path, const std::string& gold_path,
             const std::string& out_path) {
  auto golds = load_gold_answers(gold_path);
  EvalResult ra = evaluate(load_predictions(a_path), golds);
  EvalResult rb = evaluate(load_predictions(b_path), golds);
  DiffResult d = diff_systems(ra, rb, load_gold_questions(gold_path));
  json report{{"a", json{{"path", a_path}, {"exact_match", ra.exact_match}, {"f1", ra.f1}}},
              {"b", json{{"path", b_path}, {"exact_match", rb.exact_match}, {"f1", rb.f1}}},
              {"a_wins", summary_json(d.a_wins)},
              {"b_wins", summary_json(d.b_wins)},
              {"both", summary_json(d.both)},
              {"neither", summary_json(d.neither)}};
  std::cout << report.dump(2) << "\n";
  if (!out_path.empty()) {
    ArtifactGuard guard;
    guard.add(out_path);
    atomic_write(out_path, report.dump(2) + "\n");
    guard.commit();
  }
  return 0;
}

int cmd_gradcheck(const std::string& model, int64_t n, uint64_t seed, int64_t seeds, double tol) {
  auto wanted = [&](const std::string& name) {
    if (model.empty()) return true;
    if (model == "bow") return name.rfind("model: bow", 0) == 0;
    if (model == "fastqa") return name.rfind("model: fastqa ", 0) == 0;
    // the fusion stack belongs to the extended model
    return name.rfind("model: fastqaext", 0) == 0 || name.rfind("model: fusion", 0) == 0;
  };
  bool all_ok = true;
  for (int64_t i = 0; i < seeds; ++i) {
    const uint64_t s = seed + uint64_t(i);
    std::vector<ad::GradCase> cases;
    if (model.empty()) cases = ad::gradcheck_battery_ops(s);
    auto models = ad::gradcheck_battery_models(s, n);
    cases.insert(cases.end(), models.begin(), models.end());
    for (const auto& c : cases) {
      if (!wanted(c.name)) continue;
      const bool ok = c.result.ok(tol);
      all_ok = all_ok && ok;
      std::printf("seed %llu  %-42s max_rel_err=%.3e  %s\n", (unsigned long long)s,
                  c.name.c_str(), c.result.max_rel_err, ok ? "ok" : "FAIL");
    }
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extractive question answering: train, predict, evaluate"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate the synthetic toy dataset");
  SynthConfig sc;
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--n-train", sc.n_train, "training examples");
  synth->add_option("--n-dev", sc.n_dev, "dev examples");
  synth->add_option("--context-len", sc.context_len, "context length in tokens");
  synth->add_option("--dim", sc.dim, "embedding dimension");
  synth->add_option("--leak-prob", sc.leak_prob, "decoy carries the question words");
  synth->add_option("--seed", sc.seed, "generator seed");

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "tokenize a dataset into a cache");
  std::string prep_data, prep_mode = "fastqa", prep_out;
  prep->add_option("--data", prep_data, "dataset JSON")->required();
  prep->add_option("--mode", prep_mode, "tokenizer mode")
      ->check(CLI::IsMember({"fastqa", "bow"}));
  prep->add_option("--out", prep_out, "output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "train a model");
  std::string tr_model = "fastqa", tr_out, tr_resume;
  DataArgs tr_data;
  struct {
    int64_t n = -1, batch_size = -1, checkpoint_every = -1, beam_k = -1, max_context = -1;
    int64_t epochs = -1, max_steps = -2, early_stop = -1;
    double lr = -1.0, dropout = -1.0;
    uint64_t seed = 0;
    bool no_wiq = false, marginal = false, use_chars = false;
  } ov;
  tr->add_option("--model", tr_model, "bow | fastqa | fastqaext")
      ->check(CLI::IsMember({"bow", "fastqa", "fastqaext"}));
  tr_data.add_flags(tr, true);
  tr->add_option("--out", tr_out, "run directory")->required();
  tr->add_option("--n", ov.n, "hidden width");
  tr->add_option("--lr", ov.lr, "Adam learning rate");
  tr->add_option("--batch-size", ov.batch_size, "mini-batch size");
  tr->add_option("--dropout", ov.dropout, "variational input dropout rate");
  tr->add_option("--max-context", ov.max_context, "training-side context cut");
  tr->add_option("--seed", ov.seed, "run seed");
  tr->add_option("--checkpoint-every", ov.checkpoint_every, "mini-batches between checkpoints");
  tr->add_option("--beam-k", ov.beam_k, "beam width for dev decoding");
  tr->add_option("--epochs", ov.epochs, "max epochs");
  tr->add_option("--max-steps", ov.max_steps, "hard cap on mini-batches");
  tr->add_option("--early-stop", ov.early_stop, "checkpoints without improvement");
  tr->add_flag("--no-wiq", ov.no_wiq, "zero both word-in-question features");
  tr->add_flag("--marginal-loss", ov.marginal, "marginalize over gold spans");
  tr->add_flag("--use-chars", ov.use_chars, "concatenate char-CNN embeddings");
  tr->add_option("--resume", tr_resume, "checkpoint to continue from");

  // predict
  auto* pr = app.add_subcommand("predict", "decode answers with a trained model");
  std::string pr_ckpt, pr_data, pr_emb, pr_out;
  int64_t pr_beam = 5;
  pr->add_option("--checkpoint", pr_ckpt, "model checkpoint")->required();
  pr->add_option("--data", pr_data, "dataset JSON or .cache")->required();
  pr->add_option("--embeddings", pr_emb, "word embeddings")->required();
  pr->add_option("--out", pr_out, "predictions JSON path")->required();
  pr->add_option("--beam-k", pr_beam, "beam width");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score predictions against gold answers");
  std::string ev_pred, ev_gold, ev_out;
  ev->add_option("--pred", ev_pred, "predictions JSON")->required();
  ev->add_option("--gold", ev_gold, "gold dataset JSON")->required();
  ev->add_option("--out", ev_out, "also write the report here");

  // diff
  auto* df = app.add_subcommand("diff", "win/loss breakdown of two prediction files");
  std::string df_a, df_b, df_gold, df_out;
  df->add_option("--a", df_a, "predictions JSON, system A")->required();
  df->add_option("--b", df_b, "predictions JSON, system B")->required();
  df->add_option("--gold", df_gold, "gold dataset JSON")->required();
  df->add_option("--out", df_out, "also write the report here");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the autodiff stack");
  std::string gc_model;
  int64_t gc_n = 7, gc_seeds = 1;
  uint64_t gc_seed = 1;
  double gc_tol = 1e-5;
  gc->add_option("--model", gc_model, "restrict to one model's cases")
      ->check(CLI::IsMember({"bow", "fastqa", "fastqaext"}));
  gc->add_option("--n", gc_n, "hidden width of the model cases");
  gc->add_option("--seed", gc_seed, "first seed");
  gc->add_option("--seeds", gc_seeds, "number of seeds");
  gc->add_option("--tol", gc_tol, "max relative error tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_out, sc);
    if (prep->parsed()) return cmd_preprocess(prep_data, prep_mode, prep_out);
    if (tr->parsed()) {
      TrainConfig cfg = defaults_for(model_kind_from(tr_model));
      if (ov.n >= 0) cfg.n = ov.n;
      if (ov.lr >= 0) cfg.lr = ov.lr;
      if (ov.batch_size >= 0) cfg.batch_size = ov.batch_size;
      if (ov.dropout >= 0) cfg.dropout_rate = ov.dropout;
      if (ov.max_context >= 0) cfg.max_context = ov.max_context;
      if (tr->count("--seed")) cfg.seed = ov.seed;
      if (ov.checkpoint_every >= 0) cfg.checkpoint_every = ov.checkpoint_every;
      if (ov.beam_k >= 0) cfg.beam_k = ov.beam_k;
      if (ov.epochs >= 0) cfg.epochs = ov.epochs;
      if (ov.max_steps >= -1) cfg.max_steps = ov.max_steps;
      if (ov.early_stop >= 0) cfg.early_stop = ov.early_stop;
      if (ov.no_wiq) cfg.wiq_enabled = false;
      if (ov.marginal) cfg.marginal_loss = true;
      if (ov.use_chars) cfg.use_chars = true;
      DataArgs d = tr_data;
      d.resolve(true);
      return cmd_train(cfg, d, tr_out, tr_resume);
    }
    if (pr->parsed()) return cmd_predict(pr_ckpt, pr_data, pr_emb, pr_out, pr_beam);
    if (ev->parsed()) return cmd_evaluate(ev_pred, ev_gold, ev_out);
    if (df->parsed()) return cmd_diff(df_a, df_b, df_gold, df_out);
    if (gc->parsed()) return cmd_gradcheck(gc_model, gc_n, gc_seed, gc_seeds, gc_tol);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
