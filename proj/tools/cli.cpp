#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "cyclehash/checkpoint.hpp"
#include "cyclehash/config.hpp"
#include "cyclehash/errors.hpp"
#include "cyclehash/pipeline.hpp"
#include "cyclehash/trainer.hpp"

namespace cyclehash::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string direction = "both";
  std::string method = "cycdgh";
  std::string data_u;
  std::string data_v;
  std::string checkpoint;
  std::string resume;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> bits;
  std::optional<std::size_t> epochs;
  std::optional<double> lambda;
  std::size_t stride = 50;
};

class Manifest {
 public:
  Manifest(std::string command, const fs::path& out_dir) : out_dir_(out_dir) {
    doc_["command"] = std::move(command);
    doc_["artifact_versions"] = {{"cyclehash", kVersion},
                                 {"checkpoint_format", Checkpoint::kVersion},
                                 {"feature_format", 1}};
    doc_["output_dir"] = out_dir.string();
    doc_["inputs"] = ordered_json::object();
    doc_["checkpoints"] = ordered_json::array();
    doc_["outputs"] = ordered_json::array();
  }
  void set_config(const RunConfig& cfg) {
    ordered_json c = ordered_json::object();
    for (const auto& [k, v] : config_entries(cfg)) c[k] = v;
    doc_["seed"] = cfg.seed();
    doc_["config"] = std::move(c);
  }
  void input(const std::string& name, const std::string& path) { doc_["inputs"][name] = path; }
  void checkpoint(const fs::path& p) { doc_["checkpoints"].push_back(p.string()); }
  void output(const fs::path& p) { doc_["outputs"].push_back(p.string()); }
  ordered_json& doc() { return doc_; }
  void write() const {
    std::ofstream f(out_dir_ / "manifest.json");
    if (!f) throw FormatError("cannot write manifest in " + out_dir_.string());
    f << doc_.dump(2) << '\n';
  }

 private:
  fs::path out_dir_;
  ordered_json doc_;
};

fs::path output_dir(const Options& o) {
  fs::path dir = o.out;
  if (dir.empty()) {
    const char* env = std::getenv(kOutEnv);
    dir = env && *env ? env : "cyclehash_out";
  }
  fs::create_directories(dir);
  return dir;
}

// A manifest can stand in for a config file: its "config" object holds the
// same key/value pairs.
RunConfig apply_config_file(const fs::path& path, RunConfig base) {
  if (path.extension() != ".json") return load_config(path, std::move(base));
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const ordered_json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!doc.contains("config") || !doc["config"].is_object()) {
    throw ConfigError(path.string() + ": no \"config\" object");
  }
  for (const auto& [k, v] : doc["config"].items()) {
    apply_setting(base, k, v.is_string() ? v.get<std::string>() : v.dump());
  }
  return base;
}

// Precedence, lowest first: built-in defaults, the config stored in a
// checkpoint, --config, then individual flags.
RunConfig resolve_config(const Options& o, const Checkpoint* ckpt) {
  RunConfig cfg;
  if (ckpt) {
    if (auto it = ckpt->meta.find("config"); it != ckpt->meta.end()) {
      cfg = parse_config(it->second, cfg);
    }
  }
  if (!o.config.empty()) cfg = apply_config_file(o.config, cfg);
  if (o.seed) apply_setting(cfg, "seed", std::to_string(*o.seed));
  if (o.bits) cfg.train.arch.bits = *o.bits;
  if (o.lambda) cfg.train.lambda = *o.lambda;
  if (o.epochs) cfg.train.epochs_flat = cfg.train.epochs_decay = *o.epochs;
  cfg.validate();
  return cfg;
}

LabeledFeatureSet load_modality(const std::string& path, Modality expected, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  LabeledFeatureSet set = load_features(path);
  if (set.modality != expected) {
    throw ConfigError(std::string(flag) + " expects modality " + modality_name(expected) +
                      " but " + path + " holds " + modality_name(set.modality));
  }
  return set;
}

CrossModalModel load_trained(const Checkpoint& ckpt, const RunConfig& cfg) {
  if (ckpt.bits != cfg.train.arch.bits) {
    throw ConfigError("checkpoint holds " + std::to_string(ckpt.bits) + "-bit codes, not " +
                      std::to_string(cfg.train.arch.bits));
  }
  std::mt19937_64 rng(0);
  CrossModalModel model = CrossModalModel::create(cfg.train.arch, ckpt.dim_u, ckpt.dim_v, rng);
  load_model(ckpt, model);
  return model;
}

std::vector<Direction> directions(const std::string& d) {
  if (d == "both") return {Direction::kImageToText, Direction::kTextToImage};
  return {parse_direction(d)};
}

int cmd_synth(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o, nullptr);
  const fs::path dir = output_dir(o);
  const auto [set_u, set_v] = generate_synthetic(cfg.synth);
  Manifest manifest("synth", dir);
  manifest.set_config(cfg);
  for (const auto* set : {&set_u, &set_v}) {
    const fs::path p = dir / ("features_" + modality_name(set->modality) + ".bin");
    save_features(p, *set);
    manifest.output(p);
    out << "wrote " << p.string() << " (" << set->size() << " x " << set->dim() << ")\n";
  }
  manifest.write();
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  std::optional<Checkpoint> resume;
  if (!o.resume.empty()) resume = read_checkpoint(o.resume);
  const RunConfig cfg = resolve_config(o, resume ? &*resume : nullptr);
  const auto set_u = load_modality(o.data_u, Modality::kU, "--data-u");
  const auto set_v = load_modality(o.data_v, Modality::kV, "--data-v");
  const fs::path dir = output_dir(o);
  const ExperimentData data = prepare_data(cfg, set_u, set_v);

  Trainer trainer = resume ? Trainer(cfg.train, *resume)
                           : Trainer(cfg.train, set_u.dim(), set_v.dim());
  const fs::path log_path = dir / "train_log.csv";
  TrainLog log;
  if (resume && fs::exists(log_path)) {
    // Keep the history up to the resume point so numbering continues.
    for (const auto& r : TrainLog::read_csv(log_path).iterations) {
      if (r.iteration < trainer.next_iteration()) log.iterations.push_back(r);
    }
  }

  Manifest manifest("train", dir);
  manifest.set_config(cfg);
  manifest.input("data_u", o.data_u);
  manifest.input("data_v", o.data_v);
  if (resume) manifest.input("resume", o.resume);

  const std::string config_text = config_to_text(cfg);
  auto save = [&](const fs::path& p) {
    Checkpoint ckpt = trainer.checkpoint();
    ckpt.meta["config"] = config_text;
    write_checkpoint(p, ckpt);
    manifest.checkpoint(p);
  };
  const std::size_t every = cfg.train.checkpoint_every;
  trainer.train(data.u.database, data.v.database, log,
                [&](const Trainer& t, std::size_t epoch) {
                  const auto& last = log.iterations.back().loss;
                  out << "epoch " << epoch << " lr " << lr_schedule(epoch, t.config())
                      << " total " << last.total << '\n';
                  if (every > 0 && (epoch + 1) % every == 0) {
                    char name[32];
                    std::snprintf(name, sizeof name, "epoch_%04zu.ckpt", epoch);
                    save(dir / "checkpoints" / name);
                  }
                });
  save(dir / "model.ckpt");
  log.write_csv(log_path);
  manifest.output(log_path);
  manifest.write();
  out << "wrote " << (dir / "model.ckpt").string() << '\n';
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const Checkpoint ckpt = read_checkpoint(o.checkpoint);
  const RunConfig cfg = resolve_config(o, &ckpt);
  const CrossModalModel model = load_trained(ckpt, cfg);
  const ExperimentData data = prepare_data(cfg, load_modality(o.data_u, Modality::kU, "--data-u"),
                                           load_modality(o.data_v, Modality::kV, "--data-v"));
  const fs::path dir = output_dir(o);
  Manifest manifest("eval", dir);
  manifest.set_config(cfg);
  manifest.input("checkpoint", o.checkpoint);
  manifest.input("data_u", o.data_u);
  manifest.input("data_v", o.data_v);
  manifest.checkpoint(o.checkpoint);
  MetricsOptions opts;
  opts.map_cutoff = cfg.map_cutoff;
  for (Direction d : directions(o.direction)) {
    const RetrievalTask task = direction_task(model, data, d);
    const std::string stem = "eval_" + direction_name(d);
    const MetricsReport report = evaluate(task, opts);
    write_report(dir, stem, report);
    write_codes_csv(dir / (stem + "_query_codes.csv"), task.query_codes, task.query_labels);
    write_codes_csv(dir / (stem + "_database_codes.csv"), task.database_codes,
                    task.database_labels);
    for (const char* suffix : {".json", "_pr.csv", "_prec_at_r.csv", "_query_codes.csv",
                               "_database_codes.csv"}) {
      manifest.output(dir / (stem + suffix));
    }
    out << direction_name(d) << " mAP " << report.map << " over " << report.valid_queries
        << " queries\n";
  }
  manifest.write();
  return 0;
}

int cmd_recon(const Options& o, std::ostream& out) {
  const ReconMethod method = parse_recon_method(o.method);
  std::optional<Checkpoint> ckpt;
  if (!o.checkpoint.empty()) ckpt = read_checkpoint(o.checkpoint);
  if (method == ReconMethod::kCycDgh && !ckpt) {
    throw ConfigError("--method cycdgh needs --checkpoint");
  }
  const RunConfig cfg = resolve_config(o, ckpt ? &*ckpt : nullptr);
  std::optional<CrossModalModel> model;
  if (method == ReconMethod::kCycDgh) model = load_trained(*ckpt, cfg);
  const ExperimentData data = prepare_data(cfg, load_modality(o.data_u, Modality::kU, "--data-u"),
                                           load_modality(o.data_v, Modality::kV, "--data-v"));
  if (o.stride == 0) throw ConfigError("--stride must be positive");
  const auto trace = reconstruction_trace(method, model ? &*model : nullptr, data,
                                          cfg.train.arch.bits, o.stride, cfg.seed());
  const fs::path dir = output_dir(o);
  const fs::path p = dir / ("recon_" + recon_method_name(method) + ".csv");
  write_trace_csv(p, trace);
  Manifest manifest("recon", dir);
  manifest.set_config(cfg);
  manifest.input("data_u", o.data_u);
  manifest.input("data_v", o.data_v);
  if (ckpt) manifest.checkpoint(o.checkpoint);
  manifest.doc()["method"] = recon_method_name(method);
  manifest.output(p);
  manifest.write();
  out << recon_method_name(method) << " final mean L2 " << trace.back().mean_l2 << '\n';
  return 0;
}

int cmd_curves(const Options& o, std::ostream& out) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const Checkpoint ckpt = read_checkpoint(o.checkpoint);
  const RunConfig cfg = resolve_config(o, &ckpt);
  const CrossModalModel model = load_trained(ckpt, cfg);
  const ExperimentData data = prepare_data(cfg, load_modality(o.data_u, Modality::kU, "--data-u"),
                                           load_modality(o.data_v, Modality::kV, "--data-v"));
  const fs::path dir = output_dir(o);
  std::ofstream pr(dir / "curves_pr.csv");
  std::ofstream top(dir / "curves_prec_at_r.csv");
  if (!pr || !top) throw FormatError("cannot write curve files in " + dir.string());
  pr.precision(17);
  top.precision(17);
  pr << "direction,radius,recall,precision\n";
  top << "direction,r,precision\n";
  MetricsOptions opts;
  opts.map_cutoff = cfg.map_cutoff;
  for (Direction d : directions(o.direction)) {
    const MetricsReport report = evaluate(direction_task(model, data, d), opts);
    for (std::size_t t = 0; t < report.pr_curve.size(); ++t) {
      pr << direction_name(d) << ',' << t << ',' << report.pr_curve[t].first << ','
         << report.pr_curve[t].second << '\n';
    }
    for (const auto& [r, p] : report.prec_at_r) top << direction_name(d) << ',' << r << ',' << p << '\n';
  }
  Manifest manifest("curves", dir);
  manifest.set_config(cfg);
  manifest.checkpoint(o.checkpoint);
  manifest.output(dir / "curves_pr.csv");
  manifest.output(dir / "curves_prec_at_r.csv");
  manifest.write();
  out << "wrote curve data to " << dir.string() << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-modal binary hashing: synthesize data, train, evaluate"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key=value config file, or a run manifest");
    sub->add_option("--seed", o.seed, "seed for data, splits and training");
    sub->add_option("--out", o.out, std::string("output directory (default $") + kOutEnv +
                                        ", else ./cyclehash_out)");
  };
  auto data_flags = [&](CLI::App* sub) {
    sub->add_option("--data-u", o.data_u, "modality u (image) feature file");
    sub->add_option("--data-v", o.data_v, "modality v (text) feature file");
    sub->add_option("--bits", o.bits, "code length K");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic two-modality dataset");
  common(synth);
  auto* train = app.add_subcommand("train", "train hash models on unpaired data");
  common(train);
  data_flags(train);
  train->add_option("--lambda", o.lambda, "cycle-consistency weight");
  train->add_option("--epochs", o.epochs, "N flat plus N decaying epochs");
  train->add_option("--resume", o.resume, "continue from a training checkpoint");
  auto* eval = app.add_subcommand("eval", "Hamming-ranking retrieval metrics");
  common(eval);
  data_flags(eval);
  eval->add_option("--checkpoint", o.checkpoint, "trained model");
  eval->add_option("--direction", o.direction, "i2t, t2i or both")
      ->check(CLI::IsMember({"i2t", "t2i", "both"}));
  auto* recon = app.add_subcommand("recon", "L2 reconstruction-error trace");
  common(recon);
  data_flags(recon);
  recon->add_option("--checkpoint", o.checkpoint, "trained model (cycdgh)");
  recon->add_option("--method", o.method, "cycdgh or itq")
      ->check(CLI::IsMember({"cycdgh", "itq"}));
  recon->add_option("--stride", o.stride, "samples between trace points");
  auto* curves = app.add_subcommand("curves", "PR and precision@R curve data");
  common(curves);
  data_flags(curves);
  curves->add_option("--checkpoint", o.checkpoint, "trained model");
  curves->add_option("--direction", o.direction, "i2t, t2i or both")
      ->check(CLI::IsMember({"i2t", "t2i", "both"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(o, out);
    if (*train) return cmd_train(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*recon) return cmd_recon(o, out);
    return cmd_curves(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace cyclehash::cli
