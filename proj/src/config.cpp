// SPDX-License-Identifier: Apache-2.0
#include "ltrans/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>

#include "ltrans/errors.hpp"
#include "ltrans/rng.hpp"

namespace ltrans {

using nlohmann::json;

std::string to_string(DataKind k) { return k == DataKind::pie ? "pie" : "glyph"; }

DataKind parse_data_kind(const std::string& name) {
  if (name == "pie") return DataKind::pie;
  if (name == "glyph") return DataKind::glyph;
  throw ConfigError("unknown data kind '" + name + "' (expected pie or glyph)", "data.kind");
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace {

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

// Reads one JSON object field by field and rejects whatever is left over.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("expected an object", path_);
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string field(const std::string& key) const { return join_path(path_, key); }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError("expected a number", field(key));
      out = v->get<double>();
    }
  }

  void count(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) {
        throw ConfigError("expected a non-negative integer", field(key));
      }
      out = v->get<std::size_t>();
    }
  }

  void seed(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<long long>() < 0)) {
        throw ConfigError("expected a non-negative integer", field(key));
      }
      out = v->get<std::uint64_t>();
    }
  }

  void text(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError("expected a string", field(key));
      out = v->get<std::string>();
    }
  }

  void flag(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError("expected true or false", field(key));
      out = v->get<bool>();
    }
  }

  void widths(const std::string& key, std::vector<std::size_t>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError("expected an array of widths", field(key));
      std::vector<std::size_t> w;
      for (const auto& e : *v) {
        if (!e.is_number_integer() || e.get<long long>() < 1) {
          throw ConfigError("widths must be positive integers", field(key));
        }
        w.push_back(e.get<std::size_t>());
      }
      out = std::move(w);
    }
  }

  template <class Enum, class Parse>
  void choice(const std::string& key, Enum& out, Parse parse) {
    std::string name;
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError("expected a string", field(key));
      name = v->get<std::string>();
      try {
        out = parse(name);
      } catch (const std::exception&) {
        throw ConfigError("unknown value '" + name + "'", field(key));
      }
    }
  }

  template <class Fn>
  void object(const std::string& key, Fn fn) {
    if (const json* v = find(key)) {
      Reader child(*v, field(key));
      fn(child);
      child.finish();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (seen_.count(it.key())) continue;
      std::string best;
      std::size_t best_d = std::numeric_limits<std::size_t>::max();
      for (const auto& k : seen_) {
        const std::size_t d = edit_distance(it.key(), k);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      std::string msg = "unknown key";
      if (!best.empty() && best_d <= std::max<std::size_t>(2, best.size() / 3)) {
        msg += " (did you mean '" + join_path(path_, best) + "'?)";
      }
      throw ConfigError(msg, join_path(path_, it.key()));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_optimizer(Reader& r, OptimizerConfig& o) {
  r.choice("kind", o.kind, parse_optimizer_kind);
  r.number("learning_rate", o.learning_rate);
  r.number("beta1", o.beta1);
  r.number("beta2", o.beta2);
  r.number("epsilon", o.epsilon);
}

void read_langevin(Reader& r, LangevinConfig& c) {
  r.count("steps", c.steps);
  r.number("step_size", c.step_size);
  r.choice("decay", c.decay, parse_step_decay);
  r.number("decay_gamma", c.decay_gamma);
  r.number("decay_offset", c.decay_offset);
  r.number("noise_scale", c.noise_scale);
  r.flag("record_trajectory", c.record_trajectory);
}

void read_pie(Reader& r, PieGeometry& g) {
  if (const json* v = r.find("center")) {
    if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
      throw ConfigError("expected [x, y]", r.field("center"));
    }
    g.center = {(*v)[0].get<double>(), (*v)[1].get<double>()};
  }
  r.number("inner", g.inner);
  r.number("outer", g.outer);
  r.number("start_deg", g.start_deg);
  r.number("sweep_deg", g.sweep_deg);
}

void read_glyph(Reader& r, GlyphStyle& g) {
  r.count("side", g.side);
  r.number("position_jitter", g.position_jitter);
  r.number("scale_min", g.scale_min);
  r.number("scale_max", g.scale_max);
  r.number("intensity_min", g.intensity_min);
  r.number("intensity_max", g.intensity_max);
}

json optimizer_json(const OptimizerConfig& o) {
  return {{"kind", to_string(o.kind)},
          {"learning_rate", o.learning_rate},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"epsilon", o.epsilon}};
}

json langevin_json(const LangevinConfig& c) {
  return {{"steps", c.steps},
          {"step_size", c.step_size},
          {"decay", to_string(c.decay)},
          {"decay_gamma", c.decay_gamma},
          {"decay_offset", c.decay_offset},
          {"noise_scale", c.noise_scale},
          {"record_trajectory", c.record_trajectory}};
}

json pie_json(const PieGeometry& g) {
  return {{"center", {g.center[0], g.center[1]}},
          {"inner", g.inner},
          {"outer", g.outer},
          {"start_deg", g.start_deg},
          {"sweep_deg", g.sweep_deg}};
}

void check_langevin(const LangevinConfig& c, const std::string& path) {
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what(), path);
  }
  if (c.steps == 0) throw ConfigError("steps must be at least 1", path + ".steps");
}

void check_optimizer(const OptimizerConfig& o, const std::string& path) {
  if (!(o.learning_rate > 0.0)) throw ConfigError("must be positive", path + ".learning_rate");
  if (!(o.beta1 >= 0.0 && o.beta1 < 1.0)) throw ConfigError("must be in [0, 1)", path + ".beta1");
  if (!(o.beta2 >= 0.0 && o.beta2 < 1.0)) throw ConfigError("must be in [0, 1)", path + ".beta2");
  if (!(o.epsilon > 0.0)) throw ConfigError("must be positive", path + ".epsilon");
}

}  // namespace

void RunConfig::validate() const {
  if (experiment.empty()) throw ConfigError("must not be empty", "experiment");
  if (data.count < 2) throw ConfigError("need at least 2 samples per domain", "data.count");
  if (data.kind == DataKind::pie) {
    for (const auto& [name, g] : {std::pair{"data.pie_x", data.pie_x}, std::pair{"data.pie_y", data.pie_y}}) {
      PieSpec s;
      s.center = g.center;
      s.inner = g.inner;
      s.outer = g.outer;
      s.start_deg = g.start_deg;
      s.sweep_deg = g.sweep_deg;
      try {
        s.validate();
      } catch (const std::exception& e) {
        throw ConfigError(e.what(), name);
      }
    }
  } else {
    GlyphSpec s;
    s.side = data.glyph.side;
    s.position_jitter = data.glyph.position_jitter;
    s.scale_min = data.glyph.scale_min;
    s.scale_max = data.glyph.scale_max;
    s.intensity_min = data.glyph.intensity_min;
    s.intensity_max = data.glyph.intensity_max;
    try {
      s.validate();
    } catch (const std::exception& e) {
      throw ConfigError(e.what(), "data.glyph");
    }
  }
  if (ae.latent_dim == 0) throw ConfigError("must be at least 1", "ae.latent_dim");
  if (!(ae.beta >= 0.0)) throw ConfigError("must be non-negative", "ae.beta");
  if (ae.batch_size == 0) throw ConfigError("must be at least 1", "ae.batch_size");
  check_optimizer(ae.optimizer, "ae.optimizer");
  if (ebm.batch_size == 0) throw ConfigError("must be at least 1", "ebm.batch_size");
  if (!(ebm.leaky_slope >= 0.0)) throw ConfigError("must be non-negative", "ebm.leaky_slope");
  check_optimizer(ebm.optimizer, "ebm.optimizer");
  check_langevin(langevin_train, "langevin_train");
  check_langevin(langevin_translate, "langevin_translate");
}

RunConfig default_run_config(DataKind kind) {
  RunConfig cfg;
  if (kind == DataKind::pie) return cfg;
  cfg.experiment = "glyph";
  cfg.output_dir = "runs/glyph";
  cfg.data.kind = DataKind::glyph;
  cfg.data.count = 1000;
  cfg.ae.latent_dim = 32;
  cfg.ae.hidden = {128};
  cfg.ae.beta = 0.003;
  cfg.ae.decoder_output = Activation::sigmoid;
  cfg.ae.epochs = 60;
  cfg.ebm.hidden = {64};
  cfg.ebm.iterations = 200;
  cfg.ebm.optimizer = {OptimizerKind::sgd, 0.1};
  cfg.langevin_train.step_size = 0.1;
  cfg.langevin_translate.step_size = 0.1;
  cfg.translate.frame_stride = 2;
  cfg.translate.grid_count = 16;
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json j;
  j["experiment"] = cfg.experiment;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["data"] = {{"kind", to_string(cfg.data.kind)},
               {"count", cfg.data.count},
               {"pie_x", pie_json(cfg.data.pie_x)},
               {"pie_y", pie_json(cfg.data.pie_y)},
               {"glyph",
                {{"side", cfg.data.glyph.side},
                 {"position_jitter", cfg.data.glyph.position_jitter},
                 {"scale_min", cfg.data.glyph.scale_min},
                 {"scale_max", cfg.data.glyph.scale_max},
                 {"intensity_min", cfg.data.glyph.intensity_min},
                 {"intensity_max", cfg.data.glyph.intensity_max}}},
               {"glyph_x", to_string(cfg.data.glyph_x)},
               {"glyph_y", to_string(cfg.data.glyph_y)},
               {"preview_count", cfg.data.preview_count}};
  j["ae"] = {{"mode", to_string(cfg.ae.mode)},
             {"latent_dim", cfg.ae.latent_dim},
             {"hidden", cfg.ae.hidden},
             {"beta", cfg.ae.beta},
             {"decoder_output", to_string(cfg.ae.decoder_output)},
             {"epochs", cfg.ae.epochs},
             {"batch_size", cfg.ae.batch_size},
             {"optimizer", optimizer_json(cfg.ae.optimizer)}};
  j["ebm"] = {{"hidden", cfg.ebm.hidden},
              {"leaky_slope", cfg.ebm.leaky_slope},
              {"iterations", cfg.ebm.iterations},
              {"batch_size", cfg.ebm.batch_size},
              {"optimizer", optimizer_json(cfg.ebm.optimizer)}};
  j["langevin_train"] = langevin_json(cfg.langevin_train);
  j["langevin_translate"] = langevin_json(cfg.langevin_translate);
  j["translate"] = {{"chunk_rows", cfg.translate.chunk_rows},
                    {"frame_stride", cfg.translate.frame_stride},
                    {"grid_count", cfg.translate.grid_count}};
  return j;
}

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object", "");
  DataKind kind = DataKind::pie;
  if (auto d = doc.find("data"); d != doc.end() && d->is_object()) {
    if (auto k = d->find("kind"); k != d->end()) {
      if (!k->is_string()) throw ConfigError("expected a string", "data.kind");
      kind = parse_data_kind(k->get<std::string>());
    }
  }
  RunConfig cfg = default_run_config(kind);
  Reader r(doc, "");
  r.text("experiment", cfg.experiment);
  r.seed("seed", cfg.seed);
  r.text("output_dir", cfg.output_dir);
  r.object("data", [&](Reader& d) {
    d.choice("kind", cfg.data.kind, parse_data_kind);
    d.count("count", cfg.data.count);
    d.object("pie_x", [&](Reader& g) { read_pie(g, cfg.data.pie_x); });
    d.object("pie_y", [&](Reader& g) { read_pie(g, cfg.data.pie_y); });
    d.object("glyph", [&](Reader& g) { read_glyph(g, cfg.data.glyph); });
    d.choice("glyph_x", cfg.data.glyph_x, parse_glyph_kind);
    d.choice("glyph_y", cfg.data.glyph_y, parse_glyph_kind);
    d.count("preview_count", cfg.data.preview_count);
  });
  r.object("ae", [&](Reader& a) {
    a.choice("mode", cfg.ae.mode, parse_ae_mode);
    a.count("latent_dim", cfg.ae.latent_dim);
    a.widths("hidden", cfg.ae.hidden);
    a.number("beta", cfg.ae.beta);
    a.choice("decoder_output", cfg.ae.decoder_output, parse_activation);
    a.count("epochs", cfg.ae.epochs);
    a.count("batch_size", cfg.ae.batch_size);
    a.object("optimizer", [&](Reader& o) { read_optimizer(o, cfg.ae.optimizer); });
  });
  r.object("ebm", [&](Reader& e) {
    e.widths("hidden", cfg.ebm.hidden);
    e.number("leaky_slope", cfg.ebm.leaky_slope);
    e.count("iterations", cfg.ebm.iterations);
    e.count("batch_size", cfg.ebm.batch_size);
    e.object("optimizer", [&](Reader& o) { read_optimizer(o, cfg.ebm.optimizer); });
  });
  r.object("langevin_train", [&](Reader& l) { read_langevin(l, cfg.langevin_train); });
  r.object("langevin_translate", [&](Reader& l) { read_langevin(l, cfg.langevin_translate); });
  r.object("translate", [&](Reader& t) {
    t.count("chunk_rows", cfg.translate.chunk_rows);
    t.count("frame_stride", cfg.translate.frame_stride);
    t.count("grid_count", cfg.translate.grid_count);
  });
  r.finish();
  cfg.validate();
  return cfg;
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like key.path=value, got '" + std::string(assignment) + "'", "");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("empty path segment in override", path);
    if (!node->is_object()) throw ConfigError("override descends into a non-object", path);
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config file " + path->string(), "");
    doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config file " + path->string() + " is not valid JSON", "");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_run_config(doc);
}

std::filesystem::path resolve_output_dir(const RunConfig& cfg, const std::optional<std::filesystem::path>& out) {
  std::filesystem::path dir = out ? *out : std::filesystem::path(cfg.output_dir);
  if (dir.is_relative()) {
    if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') {
      dir = std::filesystem::path(root) / dir;
    }
  }
  return dir;
}

DerivedSeeds derive_seeds(std::uint64_t seed) {
  auto draw = [seed](std::string_view name, std::uint64_t index) {
    return RandomStream::named(seed, name, index).next_u64();
  };
  DerivedSeeds s;
  s.data_x = draw(streams::kDataX, 0);
  s.data_y = draw(streams::kDataY, 0);
  s.autoencoder = draw(streams::kInit, 0);
  s.ebm_x2y = draw("ebm", 0);
  s.ebm_y2x = draw("ebm", 1);
  s.translate_x2y = draw("translate", 0);
  s.translate_y2x = draw("translate", 1);
  return s;
}

}  // namespace ltrans
