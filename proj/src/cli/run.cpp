// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/cli/run.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "kgprompt/kg/toy_kg.hpp"
#include "kgprompt/lar/lar.hpp"
#include "kgprompt/model/model.hpp"

namespace kgprompt::cli {

namespace {

using Model = model::KgcModel<float>;

void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << content;
  if (!f) throw std::runtime_error("write failed for " + p.string());
}

struct Trained {
  train::TrainResult result;
  num::Checkpoint checkpoint;
};

Trained train_model(Model& m, const RunConfig& cfg, const Dataset& data, const std::string& tag, std::ostream* progress) {
  Trained t;
  auto on_epoch = [&](const train::EpochRecord& r) {
    if (!progress) return;
    *progress << tag << r.epoch << '\t' << r.train_loss << '\t' << r.valid_mrr << '\t' << r.alpha_eff << '\t'
              << r.seconds << '\n';
    progress->flush();
  };
  t.result = train::train(m, data.graph, cfg.train, on_epoch);
  t.checkpoint = t.result.best;
  t.checkpoint.config_echo = cfg.echo;
  return t;
}

std::string sanitize(std::string s) {
  for (auto& c : s) {
    if (c == '=' || c == ':' || c == '/') c = '_';
  }
  return s;
}

// Settings for the bundled toy graph; the dataset keys point next to it.
std::string toy_config_text(std::uint64_t seed) {
  std::ostringstream os;
  os << "# Desk-scale run on the synthetic geography graph.\n"
     << "train = train.txt\nvalid = valid.txt\ntest = test.txt\n"
     << "entity_text = entity_text.txt\nrelation_text = relation_text.txt\n"
     << "output_dir = out\n"
     << "seed = " << seed << "\n"
     << "epochs = 200\npatience = 15\n"
     << "learning_rate = 0.005\nbatch_size = 32\n"
     << "alpha = 0.1\nalpha_step = 0.001\n"
     << "timing = true\n";
  return os.str();
}

void write_outputs(const std::filesystem::path& dir, const RunOutcome& o) {
  write_file(dir / "train_log.tsv", o.train.log_text());
  write_file(dir / "report_valid.txt", o.valid.to_text());
  write_file(dir / "report_test.txt", o.test.to_text());
  o.checkpoint.save(dir / "best.ckpt");
  if (!o.graph_checkpoint.arrays().empty()) o.graph_checkpoint.save(dir / "graph_only.ckpt");
}

}  // namespace

Dataset load_dataset(const RunConfig& cfg) {
  Dataset d{kg::augment_inverse(kg::KnowledgeGraph::load(cfg.paths, cfg.temporal)), {}};
  d.filter = kg::build_filter_index(d.graph);
  return d;
}

RunOutcome run_variant(const RunConfig& cfg, const Variant& variant, const Dataset& data, std::ostream* progress) {
  RunOutcome o;
  const int eb = cfg.train.eval_batch_size;
  const bool timing = cfg.train.timing;
  if (variant.kind == VariantKind::kSingle) {
    Model m(cfg.model, data.graph, cfg.train.seed);
    auto t = train_model(m, cfg, data, "", progress);
    o.train = std::move(t.result);
    o.checkpoint = std::move(t.checkpoint);
    o.valid = train::evaluate_filtered(m, data.graph, data.filter, kg::Split::kValid, eb, timing);
    o.test = train::evaluate_filtered(m, data.graph, data.filter, kg::Split::kTest, eb, timing);
    return o;
  }
  RunConfig graph_cfg = cfg;
  graph_cfg.model.graph_only = true;
  if (graph_cfg.model.scorer.kind == model::ScorerKind::kTextOnly) graph_cfg.model.scorer.kind = model::ScorerKind::kConvE;
  graph_cfg.echo = config_listing(graph_cfg) + "graph_only = true\n";
  RunConfig text_cfg = cfg;
  text_cfg.model.scorer.kind = model::ScorerKind::kTextOnly;
  text_cfg.echo = config_listing(text_cfg);

  Model gm(graph_cfg.model, data.graph, cfg.train.seed);
  auto gt = train_model(gm, graph_cfg, data, "graph\t", progress);
  Model tm(text_cfg.model, data.graph, cfg.train.seed);
  auto tt = train_model(tm, text_cfg, data, "text\t", progress);
  o.train = std::move(tt.result);
  o.checkpoint = std::move(tt.checkpoint);
  o.graph_checkpoint = std::move(gt.checkpoint);
  o.valid = train::ensemble_evaluate(gm, tm, data.graph, data.filter, kg::Split::kValid, eb, timing);
  o.test = train::ensemble_evaluate(gm, tm, data.graph, data.filter, kg::Split::kTest, eb, timing);
  return o;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge graph completion with graph-conditioned soft prompts over a frozen text encoder"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, split = "test", variant = "full", out_path;
  std::uint64_t seed = 7;

  auto* train_cmd = app.add_subcommand("train", "Train a model and keep the best validation checkpoint");
  train_cmd->add_option("--config", config_path, "Run configuration file")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Filtered ranking evaluation of a checkpoint");
  eval_cmd->add_option("--config", config_path, "Run configuration file")->required();
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint written by train")->required();
  eval_cmd->add_option("--split", split, "valid or test")->check(CLI::IsMember({"valid", "test"}));

  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate one ablation variant");
  ablate_cmd->add_option("--config", config_path, "Run configuration file")->required();
  ablate_cmd->add_option("--variant", variant,
                         "full, separated, no-graph, non-layerwise, no-lar, random-lar, "
                         "freeze=<bottom|top>:<n> or ensemble");

  auto* lar_cmd = app.add_subcommand("lar-index", "Write the keyword adversary index");
  lar_cmd->add_option("--config", config_path, "Run configuration file")->required();
  lar_cmd->add_option("--out", out_path, "Output file")->required();

  auto* toy_cmd = app.add_subcommand("gen-toy", "Generate the synthetic geography graph and a config for it");
  toy_cmd->add_option("--out", out_path, "Output directory")->required();
  toy_cmd->add_option("--seed", seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (toy_cmd->parsed()) {
      kg::ToyKgParams p;
      p.seed = seed;
      auto files = kg::generate_toy_kg(p, out_path);
      write_file(std::filesystem::path(out_path) / "toy.conf", toy_config_text(seed));
      out << "wrote " << files.train.parent_path().string() << "\n";
      return 0;
    }

    auto cfg = parse_config(config_path);
    if (lar_cmd->parsed()) {
      auto data = load_dataset(cfg);
      auto idx = lar::LarIndex::build(data.graph, cfg.train.lar.df_max, cfg.train.lar.min_token_len);
      write_file(out_path, idx.dump());
      return 0;
    }
    if (eval_cmd->parsed()) {
      auto data = load_dataset(cfg);
      auto ckpt = num::Checkpoint::load(checkpoint_path);
      Model m(cfg.model, data.graph, cfg.train.seed);
      m.load(ckpt);
      auto report = train::evaluate_filtered(m, data.graph, data.filter, kg::parse_split(split),
                                             cfg.train.eval_batch_size, cfg.train.timing);
      write_file(cfg.output_dir / ("eval_" + split + ".txt"), report.to_text());
      out << report.to_text();
      return 0;
    }

    Variant v;
    std::filesystem::path dir = cfg.output_dir;
    if (ablate_cmd->parsed()) {
      v = apply_variant(cfg, variant);
      dir = cfg.output_dir / "ablate" / sanitize(v.name);
    }
    auto data = load_dataset(cfg);
    out << "epoch\ttrain_loss\tvalid_mrr\talpha_eff\tseconds\n";
    auto o = run_variant(cfg, v, data, &out);
    write_outputs(dir, o);
    if (v.kind == VariantKind::kSingle) {
      Model m(cfg.model, data.graph, cfg.train.seed);
      if (m.encoder()) write_file(dir / "vocab.tsv", m.vocab().dump());
    }
    out << "best epoch " << o.train.best_epoch << " valid mrr " << o.train.best_valid_mrr << "\n[test]\n"
        << o.test.to_text();
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace kgprompt::cli
