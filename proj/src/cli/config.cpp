// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/cli/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace kgprompt::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::int64_t to_int(const std::string& v) {
  std::int64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("expected an integer, got '" + v + "'");
  return x;
}

int to_int32(const std::string& v) {
  const auto x = to_int(v);
  if (x < INT32_MIN || x > INT32_MAX) throw std::invalid_argument("integer out of range: " + v);
  return static_cast<int>(x);
}

std::uint64_t to_uint(const std::string& v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
  }
  return x;
}

double to_double(const std::string& v) {
  double x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("expected a number, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::string freeze_str(const model::FreezeSpec& f) {
  if (f.count < 0) return "all";
  if (f.count == 0) return "none";
  return std::string(f.direction == model::FreezeDirection::kBottom ? "bottom:" : "top:") + std::to_string(f.count);
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&, const std::filesystem::path&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define KG_INT(KEY, MEMBER)                                                                            \
  Field {                                                                                              \
    KEY, [](RunConfig& c, const std::string& v, const std::filesystem::path&) { c.MEMBER = to_int32(v); }, \
        [](const RunConfig& c) { return std::to_string(c.MEMBER); }                                   \
  }
#define KG_DOUBLE(KEY, MEMBER)                                                                          \
  Field {                                                                                               \
    KEY, [](RunConfig& c, const std::string& v, const std::filesystem::path&) { c.MEMBER = to_double(v); }, \
        [](const RunConfig& c) { return fmt_double(c.MEMBER); }                                        \
  }
#define KG_BOOL(KEY, MEMBER)                                                                          \
  Field {                                                                                             \
    KEY, [](RunConfig& c, const std::string& v, const std::filesystem::path&) { c.MEMBER = to_bool(v); }, \
        [](const RunConfig& c) { return bool_str(c.MEMBER); }                                       \
  }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
  std::filesystem::path p(v);
  return p.is_absolute() || base.empty() ? p : base / p;
}

const std::vector<Field>& fields() {
  using model::PromptMode;
  using model::ScorerKind;
  static const std::vector<Field> f = {
      {"train", [](RunConfig& c, const std::string& v, const std::filesystem::path& b) { c.paths.train = resolve(b, v); },
       [](const RunConfig& c) { return c.paths.train.string(); }},
      {"valid", [](RunConfig& c, const std::string& v, const std::filesystem::path& b) { c.paths.valid = resolve(b, v); },
       [](const RunConfig& c) { return c.paths.valid.string(); }},
      {"test", [](RunConfig& c, const std::string& v, const std::filesystem::path& b) { c.paths.test = resolve(b, v); },
       [](const RunConfig& c) { return c.paths.test.string(); }},
      {"entity_text",
       [](RunConfig& c, const std::string& v, const std::filesystem::path& b) { c.paths.entity_text = resolve(b, v); },
       [](const RunConfig& c) { return c.paths.entity_text.string(); }},
      {"relation_text",
       [](RunConfig& c, const std::string& v, const std::filesystem::path& b) { c.paths.relation_text = resolve(b, v); },
       [](const RunConfig& c) { return c.paths.relation_text ? c.paths.relation_text->string() : std::string(); }},
      KG_BOOL("temporal", temporal),
      {"output_dir",
       [](RunConfig& c, const std::string& v, const std::filesystem::path& b) { c.output_dir = resolve(b, v); },
       [](const RunConfig& c) { return c.output_dir.string(); }},
      {"seed", [](RunConfig& c, const std::string& v, const std::filesystem::path&) { c.train.seed = to_uint(v); },
       [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      KG_DOUBLE("learning_rate", train.adamw.lr),
      KG_INT("batch_size", train.batch_size),
      KG_INT("eval_batch_size", train.eval_batch_size),
      KG_INT("epochs", train.epochs),
      KG_INT("patience", train.patience),
      {"max_steps", [](RunConfig& c, const std::string& v, const std::filesystem::path&) { c.train.max_steps = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.train.max_steps); }},
      KG_DOUBLE("label_smoothing", train.label_smoothing),
      {"ls_normalizer",
       [](RunConfig& c, const std::string& v, const std::filesystem::path&) {
         if (v == "vocab") c.train.ls_normalizer = train::SmoothingNormalizer::kVocab;
         else if (v == "vocab_minus_one") c.train.ls_normalizer = train::SmoothingNormalizer::kVocabMinusOne;
         else throw std::invalid_argument("expected vocab or vocab_minus_one, got '" + v + "'");
       },
       [](const RunConfig& c) {
         return std::string(c.train.ls_normalizer == train::SmoothingNormalizer::kVocab ? "vocab" : "vocab_minus_one");
       }},
      KG_DOUBLE("alpha", train.alpha),
      KG_DOUBLE("alpha_step", train.alpha_step),
      {"alpha_schedule",
       [](RunConfig& c, const std::string& v, const std::filesystem::path&) {
         if (v == "step") c.train.alpha_unit = train::AlphaUnit::kStep;
         else if (v == "epoch") c.train.alpha_unit = train::AlphaUnit::kEpoch;
         else throw std::invalid_argument("expected step or epoch, got '" + v + "'");
       },
       [](const RunConfig& c) { return std::string(c.train.alpha_unit == train::AlphaUnit::kStep ? "step" : "epoch"); }},
      KG_INT("lar_samples", train.lar.samples),
      KG_DOUBLE("lar_margin", train.lar.margin),
      {"lar_source",
       [](RunConfig& c, const std::string& v, const std::filesystem::path&) { c.train.lar.source = lar::parse_source(v); },
       [](const RunConfig& c) { return std::string(c.train.lar.source == lar::Source::kKeyword ? "keyword" : "random"); }},
      {"lar_sign",
       [](RunConfig& c, const std::string& v, const std::filesystem::path&) { c.train.lar.sign = lar::parse_sign_mode(v); },
       [](const RunConfig& c) {
         return std::string(c.train.lar.sign == lar::SignMode::kCorrected ? "corrected" : "as_written");
       }},
      KG_DOUBLE("lar_df_max", train.lar.df_max),
      KG_INT("lar_min_token_len", train.lar.min_token_len),
      KG_INT("embed_dim", model.embed_dim),
      KG_DOUBLE("embed_init_std", model.embed_init_std),
      KG_INT("prompt_hidden", model.prompt_hidden),
      KG_INT("prompt_len", model.prompt_len),
      KG_INT("input_only_prompt_len", model.input_only_prompt_len),
      {"prompt_mode",
       [](RunConfig& c, const std::string& v, const std::filesystem::path&) {
         if (v == "layerwise") c.model.prompt_mode = PromptMode::kLayerwise;
         else if (v == "input_only") c.model.prompt_mode = PromptMode::kInputOnly;
         else throw std::invalid_argument("expected layerwise or input_only, got '" + v + "'");
       },
       [](const RunConfig& c) {
         return std::string(c.model.prompt_mode == PromptMode::kLayerwise ? "layerwise" : "input_only");
       }},
      {"strategy",
       [](RunConfig& c, const std::string& v, const std::filesystem::path&) {
         if (v == "joint") c.model.strategy = text::Strategy::kJoint;
         else if (v == "separated") c.model.strategy = text::Strategy::kSeparated;
         else throw std::invalid_argument("expected joint or separated, got '" + v + "'");
       },
       [](const RunConfig& c) { return std::string(c.model.strategy == text::Strategy::kJoint ? "joint" : "separated"); }},
      {"scorer",
       [](RunConfig& c, const std::string& v, const std::filesystem::path&) { c.model.scorer.kind = model::parse_scorer(v); },
       [](const RunConfig& c) { return std::string(model::scorer_name(c.model.scorer.kind)); }},
      KG_INT("transe_norm", model.scorer.transe_norm),
      KG_INT("conve_channels", model.scorer.conve_channels),
      KG_INT("conve_reshape_h", model.scorer.conve_reshape_h),
      KG_INT("conve_reshape_w", model.scorer.conve_reshape_w),
      KG_INT("conve_kernel", model.scorer.conve_kernel),
      KG_INT("encoder_layers", model.encoder.layers),
      KG_INT("encoder_hidden", model.encoder.hidden),
      KG_INT("encoder_heads", model.encoder.heads),
      KG_INT("encoder_ffn", model.encoder.ffn),
      KG_INT("max_text_len", model.encoder.max_text_len),
      KG_BOOL("position_encoding", model.encoder.position_encoding),
      {"freeze",
       [](RunConfig& c, const std::string& v, const std::filesystem::path&) {
         c.model.freeze = parse_freeze(v, c.model.freeze.word_embeddings);
       },
       [](const RunConfig& c) { return freeze_str(c.model.freeze); }},
      KG_BOOL("freeze_word_embeddings", model.freeze.word_embeddings),
      KG_DOUBLE("adam_beta1", train.adamw.beta1),
      KG_DOUBLE("adam_beta2", train.adamw.beta2),
      KG_DOUBLE("adam_eps", train.adamw.eps),
      KG_DOUBLE("weight_decay", train.adamw.weight_decay),
      KG_BOOL("timing", train.timing),
  };
  return f;
}

#undef KG_INT
#undef KG_DOUBLE
#undef KG_BOOL

RunConfig defaults() {
  RunConfig c;
  c.train.adamw.lr = 1e-3;
  return c;
}

void validate(const RunConfig& c, const std::string& source, const std::map<std::string, int>& lines) {
  auto fail = [&](const std::string& key, const std::string& msg) {
    auto it = lines.find(key);
    throw ConfigError(source, it == lines.end() ? 0 : it->second, key + ": " + msg);
  };
  const auto& t = c.train;
  const auto& m = c.model;
  if (t.label_smoothing < 0.0 || t.label_smoothing >= 1.0) fail("label_smoothing", "must lie in [0, 1)");
  if (t.alpha < 0.0) fail("alpha", "must be non-negative");
  if (t.alpha > 0.0 && t.alpha_step <= 0.0) fail("alpha_step", "must be positive when alpha > 0");
  if (t.batch_size < 1) fail("batch_size", "must be positive");
  if (t.eval_batch_size < 1) fail("eval_batch_size", "must be positive");
  if (t.epochs < 1) fail("epochs", "must be positive");
  if (t.patience < 0) fail("patience", "must be non-negative");
  if (t.lar.samples < 1) fail("lar_samples", "must be at least 1");
  if (t.lar.margin < 0.0) fail("lar_margin", "must be non-negative");
  if (t.adamw.lr <= 0.0) fail("learning_rate", "must be positive");
  if (m.prompt_len < 1) fail("prompt_len", "must be at least 1");
  if (m.embed_dim < 1) fail("embed_dim", "must be positive");
  if (m.embed_init_std <= 0.0) fail("embed_init_std", "must be positive");
  if (m.encoder.hidden % m.encoder.heads != 0) fail("encoder_heads", "must divide encoder_hidden");
  if (m.freeze.count > m.encoder.layers) fail("freeze", "freezes more layers than encoder_layers");
  if (m.scorer.kind == model::ScorerKind::kConvE && m.scorer.conve_reshape_h * m.scorer.conve_reshape_w != m.embed_dim) {
    fail("conve_reshape_h", "conve_reshape_h * conve_reshape_w must equal embed_dim");
  }
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

model::FreezeSpec parse_freeze(std::string_view s, bool word_embeddings) {
  model::FreezeSpec f;
  f.word_embeddings = word_embeddings;
  if (s == "all") return f;
  if (s == "none") {
    f.count = 0;
    return f;
  }
  const auto colon = s.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("expected all, none or <bottom|top>:<n>");
  const auto dir = s.substr(0, colon);
  if (dir == "bottom") f.direction = model::FreezeDirection::kBottom;
  else if (dir == "top") f.direction = model::FreezeDirection::kTop;
  else throw std::invalid_argument("freeze direction must be bottom or top, got '" + std::string(dir) + "'");
  f.count = to_int32(std::string(s.substr(colon + 1)));
  if (f.count < 0) throw std::invalid_argument("freeze count must be non-negative");
  return f;
}

RunConfig parse_config_text(std::string_view text, const std::string& source, const std::filesystem::path& base_dir,
                            bool check_files) {
  RunConfig cfg = defaults();
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;
  std::map<std::string, int> lines;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  std::string freeze_value;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(source, lineno, "unknown key '" + key + "'");
    if (lines.count(key)) {
      throw ConfigError(source, lineno, "duplicate key '" + key + "' (first set on line " +
                                            std::to_string(lines[key]) + ")");
    }
    if (value.empty()) throw ConfigError(source, lineno, key + ": missing value");
    lines[key] = lineno;
    if (key == "freeze") {
      freeze_value = value;
    }
    try {
      it->second->set(cfg, value, base_dir);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(source, lineno, key + ": " + e.what());
    }
  }
  // The freeze direction parse reads freeze_word_embeddings, which may come later.
  if (!freeze_value.empty()) cfg.model.freeze = parse_freeze(freeze_value, cfg.model.freeze.word_embeddings);

  for (const char* req : {"train", "valid", "test", "entity_text"}) {
    if (!lines.count(req)) throw ConfigError(source, lineno, "missing required dataset path '" + std::string(req) + "'");
  }
  if (check_files) {
    auto check = [&](const char* key, const std::filesystem::path& p) {
      if (!std::filesystem::exists(p)) throw ConfigError(source, lines.at(key), std::string(key) + ": no such file " + p.string());
    };
    check("train", cfg.paths.train);
    check("valid", cfg.paths.valid);
    check("test", cfg.paths.test);
    check("entity_text", cfg.paths.entity_text);
    if (cfg.paths.relation_text) check("relation_text", *cfg.paths.relation_text);
  }
  validate(cfg, source, lines);
  cfg.echo = config_listing(cfg);
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), 0, "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string(), path.parent_path());
}

std::string config_listing(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

std::string default_config_listing() { return config_listing(defaults()); }

Variant apply_variant(RunConfig& cfg, std::string_view variant) {
  Variant v;
  v.name = std::string(variant);
  if (variant == "full") {
  } else if (variant == "separated") {
    cfg.model.strategy = text::Strategy::kSeparated;
  } else if (variant == "no-graph") {
    cfg.model.scorer.kind = model::ScorerKind::kTextOnly;
  } else if (variant == "non-layerwise") {
    cfg.model.prompt_mode = model::PromptMode::kInputOnly;
  } else if (variant == "no-lar") {
    cfg.train.alpha = 0.0;
  } else if (variant == "random-lar") {
    cfg.train.lar.source = lar::Source::kRandom;
  } else if (variant.rfind("freeze=", 0) == 0) {
    const auto spec = variant.substr(7);
    if (spec.find(':') == std::string_view::npos) {
      throw std::invalid_argument("freeze variant must look like freeze=<bottom|top>:<n>");
    }
    cfg.model.freeze = parse_freeze(spec, cfg.model.freeze.word_embeddings);
    if (cfg.model.freeze.count > cfg.model.encoder.layers) {
      throw std::invalid_argument("freeze variant exceeds encoder_layers");
    }
  } else if (variant == "ensemble") {
    v.kind = VariantKind::kEnsemble;
  } else {
    throw std::invalid_argument("unknown variant '" + std::string(variant) +
                                "' (want full, separated, no-graph, non-layerwise, no-lar, random-lar, "
                                "freeze=<bottom|top>:<n> or ensemble)");
  }
  cfg.echo = config_listing(cfg);
  return v;
}

}  // namespace kgprompt::cli
