// Copyright 2026 The repreval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "repreval/config.hpp"
#include "repreval/disent_metrics.hpp"
#include "repreval/downstream.hpp"
#include "repreval/error.hpp"
#include "repreval/infotheory.hpp"
#include "repreval/metadata.hpp"
#include "repreval/ood_protocol.hpp"
#include "repreval/parallel.hpp"
#include "repreval/report.hpp"
#include "repreval/seg_metrics.hpp"
#include "repreval/synthgen.hpp"
#include "repreval/tensor_io.hpp"

#include <CLI11.hpp>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace repreval;

namespace {

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by every subcommand.
struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool timings = false;
  std::string out;
};

// A subcommand flag that overrides one configuration key.
struct KeyFlag {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

struct Command {
  CLI::App* app = nullptr;
  std::vector<KeyFlag> keyed;
  std::map<std::string, std::string> paths;
  std::vector<std::string> inputs;  // report-merge
  std::vector<std::string> prefixes;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "key=value configuration file");
  app->add_option("--set", c.sets, "override one key, key=value (repeatable)");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--threads", c.threads, "worker threads (default REPREVAL_THREADS or 1)")->check(CLI::PositiveNumber);
  app->add_flag("--timings", c.timings, "record wall-clock timings in the report");
  app->add_option("--out", c.out, "output path");
}

void bind_key_flags(Command& cmd, const std::vector<std::array<std::string, 3>>& flags) {
  cmd.keyed.reserve(flags.size());
  for (const auto& [flag, key, help] : flags) cmd.keyed.push_back({key, {}, nullptr});
  for (std::size_t i = 0; i < flags.size(); ++i) cmd.keyed[i].option = cmd.app->add_option(flags[i][0], cmd.keyed[i].value, flags[i][2]);
}

void path_option(Command& cmd, const std::string& flag, const std::string& name, const std::string& help, bool required) {
  auto* opt = cmd.app->add_option(flag, cmd.paths[name], help);
  if (required) opt->required();
}

config::RunConfig resolve_config(const Common& common, const Command& cmd) {
  config::RunConfig cfg = common.config_path.empty() ? config::defaults() : config::load_config(common.config_path);
  for (const auto& s : common.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    config::set_flag(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& k : cmd.keyed) {
    if (k.option != nullptr && k.option->count() > 0) config::set_flag(cfg, k.key, k.value);
  }
  if (common.seed) config::set_flag(cfg, "seed", std::to_string(*common.seed));
  return cfg;
}

std::size_t resolve_threads(const Common& common) {
  if (common.threads) return *common.threads;
  if (const char* env = std::getenv("REPREVAL_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("REPREVAL_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

void put(std::map<std::string, double>& block, const std::string& key, double v) {
  if (std::isfinite(v)) block[key] = v;
}

predict::TrainProtocol protocol_from(const config::RunConfig& cfg) {
  predict::TrainProtocol p;
  p.learning_rate = cfg.real("train.learning_rate");
  p.batch_size = cfg.integer("train.batch_size");
  p.max_steps = cfg.integer("train.max_steps");
  p.halve_every = cfg.integer("train.halve_every");
  p.eval_every = cfg.integer("train.eval_every");
  p.patience = cfg.integer("train.patience");
  p.min_delta = cfg.real("train.min_delta");
  return p;
}

predict::PredictorConfig predictor_from(const config::RunConfig& cfg, int hidden_layers) {
  const std::string& kind = cfg.text("predictor");
  predict::PredictorConfig p;
  if (kind == "mlp") {
    p = predict::PredictorConfig::mlp(hidden_layers);
  } else if (kind == "linear") {
    p = predict::PredictorConfig::linear();
  } else if (kind == "forest") {
    p = predict::PredictorConfig::forest(cfg.integer("forest.trees"), cfg.integer("forest.max_depth"));
  } else if (kind == "knn") {
    p = predict::PredictorConfig::knn(5);
  } else {
    throw UsageError("unknown predictor '" + kind + "'");
  }
  p.hidden_size = cfg.integer("mlp.hidden_size");
  p.leaky_slope = cfg.real("mlp.slope");
  return p;
}

info::Binning binning_from(const config::RunConfig& cfg) {
  const std::string& b = cfg.text("binning");
  if (b == "equal_width") return info::Binning::equal_width;
  if (b == "quantile") return info::Binning::quantile;
  throw UsageError("unknown binning '" + b + "'");
}

FactorSpace space_from(const config::RunConfig& cfg, const std::string& key) {
  if (cfg.text(key) != "table31") throw UsageError("unknown factor space '" + cfg.text(key) + "'");
  FactorSpace full = table31_space();
  const auto names = cfg.list("gen.factors");
  if (names.empty() || (names.size() == 1 && names[0] == "all")) return full;
  FactorSpace picked;
  for (const auto& f : full) {
    for (const auto& n : names) {
      if (n == f.name) picked.push_back(f);
    }
  }
  for (const auto& n : names) factor_index(full, n);
  return picked;
}

fs::path require_path(const Command& cmd, const std::string& name) {
  const auto it = cmd.paths.find(name);
  if (it == cmd.paths.end() || it->second.empty()) throw UsageError("missing --" + name);
  return it->second;
}

void run_gen(const config::RunConfig& cfg, const Common& common, EvalReport& report) {
  if (common.out.empty()) throw UsageError("gen needs --out <directory>");
  const fs::path dir = common.out;
  fs::create_directories(dir);
  const std::uint64_t seed = report.seed;
  const FactorSpace space = space_from(cfg, "gen.space");
  const FactorTable factors = synth::sample_factors(space, cfg.integer("gen.n"), seed);
  synth::MixingSpec mixing;
  mixing.mode = synth::parse_mixing(cfg.text("gen.mix"));
  mixing.extra_dims = cfg.integer("gen.extra_dims");
  mixing.noise_sigma = cfg.real("gen.noise");
  mixing.seed = seed;
  const Representation repr = synth::mix(factors, mixing);
  io::save_factors(dir / "factors.rtab", factors);
  io::save_representation(dir / "repr.rtab", repr);
  report.metrics["rows"] = static_cast<double>(factors.rows());
  report.metrics["factors"] = static_cast<double>(factors.factors());
  report.metrics["dims"] = static_cast<double>(repr.dims());

  const double sigma = cfg.real("gen.posterior_sigma");
  if (sigma > 0) {
    const GaussianPosterior post = synth::make_posteriors(repr, sigma);
    io::write_tensor(dir / "posterior_mean.rtab", io::from_matrix(post.mean));
    io::write_tensor(dir / "posterior_logvar.rtab", io::from_matrix(post.log_var));
  }
  const Index scenes = cfg.integer("gen.scenes");
  if (scenes > 0) {
    const synth::SceneSpec spec;
    const synth::Scenes s = synth::render_scenes(spec, scenes, seed);
    io::save_masks(dir / "masks.rtab", s.masks);
    io::save_properties(dir / "props.rtab", s.properties);
    io::save_representation(dir / "slots.rtab", synth::oracle_slots(s.properties, spec.slots));
    report.metrics["scenes"] = static_cast<double>(scenes);
  }
}

void run_disent(const config::RunConfig& cfg, const Command& cmd, EvalReport& report) {
  const FactorTable factors = io::load_factors(require_path(cmd, "factors"));
  const Representation repr = io::load_representation(require_path(cmd, "repr"));
  if (repr.rows() != factors.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "cli", "factor and representation row counts differ");
  }
  const Matrix& z = repr.data;
  const std::uint64_t seed = report.seed;
  const Index bins = cfg.integer("bins");
  const info::Binning binning = binning_from(cfg);
  const double train_fraction = cfg.real("train_fraction");
  disent::BatchOptions batches;
  batches.train_batches = cfg.integer("batches.train");
  batches.eval_batches = cfg.integer("batches.eval");
  batches.batch_size = cfg.integer("batches.size");
  batches.prune_threshold = cfg.real("factorvae.prune_threshold");

  auto per_factor = [&](const std::string& block, const std::vector<double>& values) {
    for (std::size_t f = 0; f < values.size() && f < factors.space.size(); ++f) {
      put(report.per_factor[block], factors.space[f].name, values[f]);
    }
  };
  auto simple = [&](const std::string& name, const disent::MetricResult& r) {
    report.metrics[name] = r.score;
    per_factor(name, r.per_factor);
    report.flags.insert(r.flags.begin(), r.flags.end());
  };

  const auto metrics = cfg.list("metrics");
  for (const auto& m : metrics) {
    if (m == "mig") {
      simple(m, disent::mig(factors, z, bins, binning));
    } else if (m == "betavae") {
      simple(m, disent::betavae_score(factors, z, seed, batches));
    } else if (m == "factorvae") {
      simple(m, disent::factorvae_score(factors, z, seed, batches));
    } else if (m == "irs") {
      simple(m, disent::irs(factors, z));
    } else if (m == "dci") {
      const auto r = disent::dci(factors, z, seed,
                                 predict::PredictorConfig::forest(cfg.integer("forest.trees"), cfg.integer("forest.max_depth")),
                                 train_fraction);
      report.metrics[m] = r.disentanglement;
      auto& summary = report.per_factor["dci_summary"];
      summary["disentanglement"] = r.disentanglement;
      summary["completeness"] = r.completeness;
      summary["informativeness"] = r.informativeness;
      per_factor("dci_informativeness", r.per_factor_informativeness);
      report.flags.insert(r.flags.begin(), r.flags.end());
    } else if (m == "sap") {
      const auto r = disent::sap(factors, z, seed, train_fraction);
      report.metrics[m] = r.score;
      per_factor(m, r.per_factor);
      if (r.scores.clamped) report.flags.insert("sap_r2_clamped");
    } else if (m == "modularity") {
      const auto r = disent::modularity_explicitness(factors, z, seed, bins, train_fraction, binning);
      report.metrics[m] = r.modularity;
      report.per_factor["modularity_summary"]["explicitness"] = r.explicitness;
      per_factor("explicitness", r.per_factor_explicitness);
      for (std::size_t d = 0; d < r.per_dim_modularity.size(); ++d) {
        put(report.per_factor["modularity_per_dim"], "dim_" + std::to_string(d), r.per_dim_modularity[d]);
      }
      report.flags.insert(r.flags.begin(), r.flags.end());
    } else {
      throw UsageError("unknown metric '" + m + "'");
    }
  }
}

void run_seg(const Command& cmd, EvalReport& report) {
  const MaskSet pred = io::load_masks(require_path(cmd, "pred"));
  const MaskSet gt = io::load_masks(require_path(cmd, "gt"));
  const seg::SegScores s = seg::evaluate_masks(pred, gt);
  report.metrics["ari_fg"] = s.ari_fg;
  report.metrics["sc"] = s.sc;
  report.metrics["msc"] = s.msc;
  report.metrics["images"] = static_cast<double>(s.images);
  report.metrics["skipped_images"] = static_cast<double>(s.skipped);
}

void run_objects(const config::RunConfig& cfg, const Command& cmd, EvalReport& report) {
  const Representation repr = io::load_representation(require_path(cmd, "repr"));
  const PropertyTable props = io::load_properties(require_path(cmd, "props"));
  objects::DownstreamConfig dc;
  dc.predictor = predictor_from(cfg, static_cast<int>(cfg.integer("mlp.hidden_layers")));
  dc.protocol = protocol_from(cfg);
  dc.matching = objects::parse_matching(cfg.text("objects.matching"));
  dc.train_scenes = cfg.integer("objects.train_scenes");
  dc.val_scenes = cfg.integer("objects.val_scenes");
  dc.test_scenes = cfg.integer("objects.test_scenes");
  dc.baseline_seeds = cfg.integer("objects.baseline_seeds");
  dc.baseline = dc.baseline_seeds > 0;

  std::optional<MaskSet> pred_masks, gt_masks;
  if (const auto it = cmd.paths.find("pred-masks"); it != cmd.paths.end() && !it->second.empty()) pred_masks = io::load_masks(it->second);
  if (const auto it = cmd.paths.find("gt-masks"); it != cmd.paths.end() && !it->second.empty()) gt_masks = io::load_masks(it->second);

  const std::string& layout = cfg.text("objects.layout");
  objects::DownstreamResult result;
  if (layout == "slotted") {
    Representation r = repr;
    if (!r.is_slotted()) {
      const Index k = cfg.integer("objects.slots");
      if (k < 1 || r.dims() % k != 0) throw UsageError("flat representation needs objects.slots dividing its width");
      r = Representation::slotted(r.data, k, r.dims() / k);
    }
    result = objects::eval_slotted(r, props, dc, report.seed, pred_masks ? &*pred_masks : nullptr,
                                   gt_masks ? &*gt_masks : nullptr);
  } else if (layout == "flat") {
    Index k = cfg.integer("objects.slots");
    if (k < 1) k = repr.is_slotted() ? repr.slots : props.max_objects();
    result = objects::eval_flat(Representation::flat(repr.data), k, props, dc, report.seed);
  } else {
    throw UsageError("unknown objects.layout '" + layout + "'");
  }
  objects::add_to_report(result, "objects", report);
}

void run_ood(const config::RunConfig& cfg, EvalReport& report) {
  const FactorSpace space = space_from(cfg, "gen.space");
  const std::uint64_t seed = report.seed;
  synth::MixingSpec mixing;
  mixing.mode = synth::parse_mixing(cfg.text("ood.mix"));
  mixing.noise_sigma = cfg.real("ood.noise");
  mixing.seed = seed;
  const ood::ReprProvider provider = [mixing](const FactorTable& t) { return synth::mix(t, mixing).data; };

  ood::OodConfig oc;
  oc.train_rows = cfg.integer("ood.train_rows");
  oc.eval_rows = cfg.integer("ood.eval_rows");
  oc.predictor = predictor_from(cfg, static_cast<int>(cfg.integer("ood.mlp_hidden_layers")));
  oc.protocol = protocol_from(cfg);
  oc.val_fraction = cfg.real("train.val_fraction");
  for (const auto& name : cfg.list("ood.scenarios")) {
    const ood::Scenario scenario = ood::parse_scenario(name);
    const ood::SplitPlan plan = ood::build_split(space, cfg.text("ood.factor"), scenario, seed);
    ood::add_to_report(ood::run_ood_eval(space, provider, oc, plan, seed), report);
  }
}

void run_decompose(const config::RunConfig& cfg, const Command& cmd, EvalReport& report) {
  GaussianPosterior post;
  post.mean = io::read_tensor(require_path(cmd, "mean")).to_matrix();
  post.log_var = io::read_tensor(require_path(cmd, "logvar")).to_matrix();
  if (post.mean.rows() != post.log_var.rows() || post.mean.cols() != post.log_var.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "cli", "mean and log-variance shapes differ");
  }
  const auto d = info::kl_decomposition(post, cfg.integer("decompose.mc_samples"), report.seed);
  report.metrics["index_code_mi"] = d.index_code_mi;
  report.metrics["total_correlation"] = d.total_correlation;
  report.metrics["dimwise_kl"] = d.dimwise_kl;
  report.metrics["estimated_mean_kl"] = d.estimated_mean_kl;
  report.metrics["standard_error"] = d.standard_error;
  report.metrics["analytic_mean_kl"] = d.analytic_mean_kl;
}

int dispatch(CLI::App& app, Common& common, std::map<std::string, Command>& commands) {
  std::string name;
  Command* cmd = nullptr;
  for (auto& [n, c] : commands) {
    if (c.app->parsed()) {
      name = n;
      cmd = &c;
    }
  }
  if (cmd == nullptr) throw UsageError(app.help());

  const auto start = std::chrono::steady_clock::now();
  set_thread_count(resolve_threads(common));

  EvalReport report;
  report.version = kVersion;
  if (name == "report-merge") {
    if (cmd->inputs.empty()) throw UsageError("report-merge needs input reports");
    std::vector<EvalReport> parts;
    for (const auto& p : cmd->inputs) parts.push_back(io::read_report(p));
    report = io::merge_reports(parts);
  } else {
    const config::RunConfig cfg = resolve_config(common, *cmd);
    report.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
    report.config = config::resolved(cfg, cmd->prefixes);
    report.config_digest = io::config_digest(report.config);
    for (const auto& key : cfg.overridden) {
      if (report.config.count(key) != 0) report.flags.insert("config_override:" + key);
    }
    std::cerr << "repreval " << name << ": seed=" << report.seed << " config_digest=" << report.config_digest << '\n';
    if (name == "gen") {
      run_gen(cfg, common, report);
    } else if (name == "disent") {
      run_disent(cfg, *cmd, report);
    } else if (name == "seg") {
      run_seg(*cmd, report);
    } else if (name == "objects") {
      run_objects(cfg, *cmd, report);
    } else if (name == "ood") {
      run_ood(cfg, report);
    } else if (name == "decompose") {
      run_decompose(cfg, *cmd, report);
    }
  }
  if (name == "report-merge") {
    std::cerr << "repreval " << name << ": seed=" << report.seed << " config_digest=" << report.config_digest << '\n';
  }
  if (common.timings) {
    report.timings["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  fs::path target;
  if (name == "gen") {
    target = fs::path(common.out) / "report.json";
  } else if (!common.out.empty()) {
    target = common.out;
  }
  if (target.empty()) {
    std::cout << io::serialize_report(report);
  } else {
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    io::emit_report(report, target);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluation harness for learned representations", "repreval"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;
  std::map<std::string, Command> commands;

  auto make = [&](const std::string& name, const std::string& help, std::vector<std::string> prefixes) -> Command& {
    Command& c = commands[name];
    c.app = app.add_subcommand(name, help);
    c.prefixes = std::move(prefixes);
    add_common(c.app, common);
    return c;
  };

  Command& gen = make("gen", "generate synthetic factors, representations and scenes", {"seed", "gen."});
  bind_key_flags(gen, {{{"--space", "gen.space", "factor space (table31)"},
                        {"--factors", "gen.factors", "comma-separated factor subset or 'all'"},
                        {"--mix", "gen.mix", "mixing mode"},
                        {"--n", "gen.n", "rows"},
                        {"--noise", "gen.noise", "latent noise sigma"},
                        {"--extra-dims", "gen.extra_dims", "appended noise dims"},
                        {"--posterior-sigma", "gen.posterior_sigma", "also write Gaussian posteriors"},
                        {"--scenes", "gen.scenes", "also render this many scenes"}}});

  Command& dis = make("disent", "disentanglement metrics",
                      {"seed", "bins", "binning", "metrics", "train_fraction", "batches.", "factorvae.", "forest."});
  path_option(dis, "--factors", "factors", "factor tensor", true);
  path_option(dis, "--repr", "repr", "representation tensor", true);
  bind_key_flags(dis, {{{"--metrics", "metrics", "comma-separated metric names"},
                        {"--bins", "bins", "histogram bins"},
                        {"--binning", "binning", "equal_width or quantile"}}});

  Command& seg = make("seg", "segmentation metrics", {"seed"});
  path_option(seg, "--pred", "pred", "predicted masks", true);
  path_option(seg, "--gt", "gt", "ground-truth masks", true);

  Command& obj = make("objects", "downstream object property prediction",
                      {"seed", "predictor", "mlp.", "train.", "objects.", "forest."});
  path_option(obj, "--repr", "repr", "slot representation", true);
  path_option(obj, "--props", "props", "object properties", true);
  path_option(obj, "--pred-masks", "pred-masks", "predicted masks (mask matching)", false);
  path_option(obj, "--gt-masks", "gt-masks", "ground-truth masks (mask matching)", false);
  bind_key_flags(obj, {{{"--matching", "objects.matching", "loss, mask or deterministic"},
                        {"--layout", "objects.layout", "slotted or flat"},
                        {"--slots", "objects.slots", "slot count for flat inputs"}}});

  Command& od = make("ood", "out-of-distribution transfer", {"seed", "predictor", "mlp.", "train.", "ood.", "gen.space", "gen.factors", "forest."});
  bind_key_flags(od, {{{"--space", "gen.space", "factor space (table31)"},
                       {"--factor", "ood.factor", "OOD factor"},
                       {"--scenarios", "ood.scenarios", "comma-separated scenarios"},
                       {"--mix", "ood.mix", "mixing mode of the frozen encoder"},
                       {"--noise", "ood.noise", "encoder noise sigma"},
                       {"--train-rows", "ood.train_rows", "downstream training rows"},
                       {"--eval-rows", "ood.eval_rows", "evaluation rows"}}});

  Command& dec = make("decompose", "KL decomposition of Gaussian posteriors", {"seed", "decompose."});
  path_option(dec, "--mean", "mean", "posterior means", true);
  path_option(dec, "--logvar", "logvar", "posterior log-variances", true);
  bind_key_flags(dec, {{{"--mc-samples", "decompose.mc_samples", "Monte Carlo samples"}}});

  Command& merge = make("report-merge", "merge reports", {});
  merge.app->add_option("reports", merge.inputs, "input reports")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    return dispatch(app, common, commands);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    const bool usage = e.code() == ErrorCode::UnknownKey || e.code() == ErrorCode::TypeError;
    return usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
