#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "jumpflow/checkpoint.hpp"
#include "jumpflow/classical.hpp"
#include "jumpflow/config.hpp"
#include "jumpflow/corpus.hpp"
#include "jumpflow/errors.hpp"
#include "jumpflow/metrics.hpp"
#include "jumpflow/model.hpp"
#include "jumpflow/synthetic.hpp"
#include "jumpflow/trainer.hpp"

namespace jumpflow::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

json stats_json(const SolverStats& s) {
  return {{"accepted", s.accepted}, {"rejected", s.rejected}, {"evaluations", s.evaluations}};
}

json metrics_json(const MetricReport& m) {
  json j = json::object();
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("intensity_mape", m.intensity_mape);
  put("type_error", m.type_error);
  put("type_error_baseline", m.type_error_baseline);
  put("mark_mae", m.mark_mae);
  put("mark_mae_baseline", m.mark_mae_baseline);
  put("nll", m.nll);
  return j;
}

json spec_json(const ClassicalProcessSpec& spec) {
  const Family family = family_of(spec);
  json j = {{"family", family_name(family)}};
  const auto names = parameter_names(family);
  const auto values = parameters(spec);
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = values[i];
  return j;
}

// Run record written atomically when the command finishes.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args)
      : started_(Clock::now()) {
    j_["command"] = std::move(command);
    j_["args"] = args;
    j_["git_describe"] = JUMPFLOW_GIT_DESCRIBE;
    j_["version"] = JUMPFLOW_VERSION;
  }
  json& operator[](const char* key) { return j_[key]; }
  void phase(const char* name, Clock::time_point since) {
    j_["wall_seconds"][name] = std::chrono::duration<double>(Clock::now() - since).count();
  }
  void write(const fs::path& path) {
    phase("total", started_);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, j_.dump(2) + "\n");
  }

 private:
  Clock::time_point started_;
  json j_;
};

struct GenerateArgs {
  std::string family;
  std::optional<double> lambda0, alpha, beta, sigma, mu;
  std::size_t count = 500;
  std::vector<double> window{0.0, 100.0};
  std::uint64_t seed = 0;
  std::string out;
  std::string marks = "none";
  std::size_t types = 22;
  double stay = 0.8;
  std::string manifest;
};

ClassicalProcessSpec spec_from_args(const GenerateArgs& a) {
  const Family family = parse_family(a.family);
  // Start from the family's defaults and override what was given.
  std::vector<double> values;
  switch (family) {
    case Family::poisson: values = parameters(Poisson{}); break;
    case Family::hawkes_exp: values = parameters(HawkesExp{}); break;
    case Family::hawkes_pl: values = parameters(HawkesPL{}); break;
    case Family::self_correcting: values = parameters(SelfCorrecting{}); break;
  }
  const auto names = parameter_names(family);
  auto set = [&](const char* name, const std::optional<double>& v) {
    if (!v) return;
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      throw std::invalid_argument(std::string("--") + name + " does not apply to " +
                                  family_name(family));
    }
    values[static_cast<std::size_t>(it - names.begin())] = *v;
  };
  set("lambda0", a.lambda0);
  set("alpha", a.alpha);
  set("beta", a.beta);
  set("sigma", a.sigma);
  set("mu", a.mu);
  ClassicalProcessSpec spec = make_spec(family, values);
  validate(spec);
  return spec;
}

int cmd_generate(const GenerateArgs& a, const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err) {
  Manifest manifest("generate", args);
  const ClassicalProcessSpec spec = spec_from_args(a);
  if (auto warning = stationarity_warning(spec)) err << "warning: " << *warning << "\n";
  if (!(a.window[0] <= a.window[1])) throw std::invalid_argument("--window is reversed");

  Corpus corpus;
  corpus.t_start = a.window[0];
  corpus.t_end = a.window[1];
  corpus.spec = spec;
  corpus.sequences = generate_corpus(spec, a.count, corpus.t_start, corpus.t_end, a.seed);
  if (a.marks == "intervals") {
    corpus.marks = MarkSpace::continuous(1, 1);
    for (auto& seq : corpus.sequences) seq = with_interval_features(seq);
  } else if (a.marks == "sticky") {
    corpus.marks = MarkSpace::discrete(a.types);
    for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
      corpus.sequences[i] = with_sticky_types(corpus.sequences[i], StickyTypes{a.types, a.stay},
                                              sequence_seed(~a.seed, i));
    }
  } else if (a.marks != "none") {
    throw std::invalid_argument("--marks must be none, intervals or sticky");
  }
  write_corpus(fs::path(a.out), corpus);

  std::size_t total = 0, fewest = 0, most = 0;
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    const std::size_t n = corpus.sequences[i].events.size();
    total += n;
    fewest = i == 0 ? n : std::min(fewest, n);
    most = std::max(most, n);
  }
  const double mean =
      corpus.sequences.empty() ? 0.0 : static_cast<double>(total) / corpus.sequences.size();
  out << "wrote " << corpus.sequences.size() << " sequences to " << a.out << "\n"
      << "events: total " << total << ", mean " << mean << ", min " << fewest << ", max "
      << most << "\n";

  manifest["seed"] = a.seed;
  manifest["config"] = {{"spec", spec_json(spec)},
                        {"count", a.count},
                        {"window", a.window},
                        {"marks", a.marks}};
  manifest["metrics"] = {{"total_events", total}, {"mean_events", mean}};
  manifest.write(a.manifest.empty() ? fs::path(a.out + ".manifest.json") : fs::path(a.manifest));
  return kExitOk;
}

Corpus load_corpus(const std::string& path, std::ostream& err) {
  Corpus corpus = read_corpus(fs::path(path));
  if (corpus.separated_ties > 0) {
    err << "warning: " << corpus.separated_ties
        << " events shared a timestamp with their predecessor and were moved forward by 1e-9 of "
           "the window\n";
  }
  return corpus;
}

RunConfig resolve_config(const std::string& path) {
  return path.empty() ? RunConfig{} : load_config(path);
}

// Fits the model's mark space to the corpus, or checks that they agree.
ModelConfig model_for_corpus(const RunConfig& config, const Corpus& corpus) {
  ModelConfig model = config.model;
  if (!config.marks_explicit) {
    model.marks = corpus.marks;
    if (!corpus.marks.is_discrete()) model.marks.components = config.model.marks.components;
    return model;
  }
  const MarkSpace& m = model.marks;
  const MarkSpace& c = corpus.marks;
  if (m.kind != c.kind) {
    throw SchemaError(std::string("config declares ") +
                      (m.is_discrete() ? "discrete" : "continuous") +
                      " marks but the corpus has " + (c.is_discrete() ? "discrete" : "continuous") +
                      " marks");
  }
  if (m.is_discrete() ? m.types < c.types : m.dim != c.dim) {
    throw SchemaError("config mark space is too small for the corpus marks");
  }
  return model;
}

std::vector<EventSequence> pick(const std::vector<EventSequence>& all,
                                const std::vector<std::size_t>& indices) {
  std::vector<EventSequence> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(all[i]);
  return out;
}

struct MetricRequest {
  bool mape = false, type_error = false, mark_mae = false, nll = false;
};

MetricRequest default_metrics(const ModelConfig& model, const Corpus& corpus) {
  MetricRequest r;
  r.nll = true;
  r.mape = corpus.spec.has_value();
  r.type_error = model.marks.is_discrete() && model.marks.types > 1;
  r.mark_mae = !model.marks.is_discrete();
  return r;
}

MetricReport compute_metrics(const LatentModel& model, std::span<const double> params,
                             const Corpus& corpus, const std::vector<EventSequence>& seqs,
                             const MetricRequest& want, const RunConfig& config) {
  MetricReport report;
  if (seqs.empty()) return report;
  if (want.mape) {
    if (!corpus.spec) throw SchemaError("MAPE needs a ground-truth spec in the corpus header");
    report.intensity_mape =
        eval_intensity_mape(model, params, *corpus.spec, seqs, config.eval_grid_points,
                            config.solver);
  }
  if (want.type_error) {
    report.type_error = eval_type_error(model, params, seqs, config.solver);
    report.type_error_baseline = majority_type_error(seqs);
  }
  if (want.mark_mae) {
    report.mark_mae = eval_mark_mae(model, params, seqs, config.solver);
    report.mark_mae_baseline = running_mean_mark_mae(seqs);
  }
  if (want.nll) {
    AdjointOptions options;
    options.forward = config.solver;
    options.compensator = config.train.compensator;
    std::vector<std::size_t> all(seqs.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    report.nll = dataset_loss(model, params, seqs, all, config.eval_grid_points, options).total /
                 static_cast<double>(seqs.size());
  }
  return report;
}

struct TrainArgs {
  std::string corpus, config, out_dir;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& args, std::ostream& out,
              std::ostream& err) {
  Manifest manifest("train", args);
  RunConfig config = resolve_config(a.config);
  if (a.epochs) config.train.epochs = *a.epochs;
  if (a.seed) config.train.seed = *a.seed;
  config.validate();
  const Corpus corpus = load_corpus(a.corpus, err);
  const ModelConfig model_config = model_for_corpus(config, corpus);
  const LatentModel model(model_config);
  fs::create_directories(a.out_dir);

  AdjointOptions options;
  options.forward = config.solver;
  options.backward = config.solver;

  std::ofstream log(fs::path(a.out_dir) / "train_log.jsonl", std::ios::trunc);
  const auto train_started = Clock::now();
  const TrainResult result = train(
      model, config.train, corpus.sequences, options, [&](const EpochLog& e) {
        const json line = {{"epoch", e.epoch},
                           {"train_nll", e.train_nll},
                           {"validation_nll", e.validation_nll},
                           {"learning_rate", e.learning_rate},
                           {"wall_seconds", e.wall_seconds},
                           {"solver", stats_json(e.stats)}};
        log << line.dump() << "\n" << std::flush;
        if (!a.quiet) {
          out << "epoch " << e.epoch << "  train " << e.train_nll << "  val " << e.validation_nll
              << "\n"
              << std::flush;
        }
      });
  manifest.phase("train", train_started);

  const auto eval_started = Clock::now();
  const auto test = pick(corpus.sequences, result.split.test);
  const MetricReport report =
      compute_metrics(model, result.best_params.values(), corpus, test,
                      default_metrics(model_config, corpus), config);
  manifest.phase("eval", eval_started);
  log << json{{"final", true}, {"best_epoch", result.best_epoch},
              {"metrics", metrics_json(report)}}.dump()
      << "\n";

  save_checkpoint(fs::path(a.out_dir) / "checkpoint.json",
                  Checkpoint{model_config, result.best_params});

  RunConfig resolved = config;
  resolved.model = model_config;
  resolved.marks_explicit = true;
  manifest["config"] = json::parse(config_to_json(resolved));
  manifest["seed"] = config.train.seed;
  manifest["corpus"] = a.corpus;
  manifest["split"] = {{"train", result.split.train},
                       {"validation", result.split.validation},
                       {"test", result.split.test}};
  manifest["training"] = {{"epochs_run", result.logs.size()},
                          {"best_epoch", result.best_epoch},
                          {"best_validation_nll", result.best_validation_nll},
                          {"stopped_early", result.stopped_early},
                          {"recoveries", result.recoveries}};
  manifest["solver_stats"] = stats_json(result.stats);
  manifest["metrics"] = metrics_json(report);
  manifest.write(fs::path(a.out_dir) / "manifest.json");

  out << "test metrics: " << metrics_json(report).dump() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint, corpus, config, traces, manifest, baseline;
  std::vector<std::string> metrics;
  std::string split = "all";
  std::optional<std::size_t> grid;
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  Manifest manifest("eval", args);
  RunConfig config = resolve_config(a.config);
  if (a.grid) config.eval_grid_points = *a.grid;
  config.validate();
  const Corpus corpus = load_corpus(a.corpus, err);

  std::vector<EventSequence> seqs;
  if (a.split == "all") {
    seqs = corpus.sequences;
  } else if (a.split == "test") {
    seqs = pick(corpus.sequences, split_indices(corpus.sequences.size(), config.train).test);
  } else {
    throw std::invalid_argument("--split must be all or test");
  }

  json result = json::object();
  if (!a.baseline.empty()) {
    if (!corpus.spec) throw SchemaError("baseline MAPE needs a ground-truth spec in the corpus");
    ClassicalProcessSpec predictor = *corpus.spec;
    if (a.baseline != "truth") {
      predictor = fit_mle(parse_family(a.baseline), corpus.sequences).spec;
    }
    result["baseline"] = {
        {"spec", spec_json(predictor)},
        {"intensity_mape", seqs.empty() ? 0.0
                                        : classical_intensity_mape(predictor, *corpus.spec, seqs,
                                                                   config.eval_grid_points)}};
  }

  if (!a.checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(fs::path(a.checkpoint));
    RunConfig explicit_marks = config;
    explicit_marks.model = ck.config;
    explicit_marks.marks_explicit = true;
    model_for_corpus(explicit_marks, corpus);
    const LatentModel model(ck.config);

    MetricRequest want = default_metrics(ck.config, corpus);
    if (!a.metrics.empty()) {
      want = MetricRequest{};
      for (const auto& m : a.metrics) {
        if (m == "mape") want.mape = true;
        else if (m == "type_error") want.type_error = true;
        else if (m == "mark_mae") want.mark_mae = true;
        else if (m == "nll") want.nll = true;
        else throw std::invalid_argument("unknown metric '" + m + "'");
      }
    }
    const MetricReport report =
        compute_metrics(model, ck.params.values(), corpus, seqs, want, config);
    result["model"] = metrics_json(report);

    if (!a.traces.empty()) {
      if (!corpus.spec) throw SchemaError("traces need a ground-truth spec in the corpus");
      fs::create_directories(a.traces);
      for (std::size_t i = 0; i < seqs.size(); ++i) {
        const IntensityTrace trace = intensity_trace(model, ck.params.values(), *corpus.spec,
                                                     seqs[i], config.eval_grid_points,
                                                     config.solver);
        std::ostringstream csv;
        csv << std::setprecision(17) << "t,lambda_model,lambda_gt\n";
        for (std::size_t k = 0; k < trace.times.size(); ++k) {
          csv << trace.times[k] << ',' << trace.model[k] << ',' << trace.truth[k] << '\n';
        }
        std::ostringstream name;
        name << "trace_" << std::setw(5) << std::setfill('0') << i << ".csv";
        write_file_atomic(fs::path(a.traces) / name.str(), csv.str());
      }
    }
  } else if (a.baseline.empty()) {
    throw std::invalid_argument("eval needs --checkpoint or --baseline");
  }

  out << result.dump(2) << "\n";
  manifest["config"] = json::parse(config_to_json(config));
  manifest["seed"] = config.train.seed;
  manifest["metrics"] = result;
  const fs::path manifest_path =
      !a.manifest.empty() ? fs::path(a.manifest)
                          : fs::path(a.checkpoint.empty() ? a.corpus : a.checkpoint)
                                    .replace_extension(".eval_manifest.json");
  manifest.write(manifest_path);
  return kExitOk;
}

struct SimulateArgs {
  std::string checkpoint, out, manifest;
  std::vector<double> window{0.0, 100.0};
  std::size_t count = 1;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& args,
                 std::ostream& out) {
  Manifest manifest("simulate", args);
  if (!(a.window[0] <= a.window[1])) throw std::invalid_argument("--window is reversed");
  const Checkpoint ck = load_checkpoint(fs::path(a.checkpoint));
  const LatentModel model(ck.config);
  Corpus corpus;
  corpus.marks = ck.config.marks;
  corpus.t_start = a.window[0];
  corpus.t_end = a.window[1];
  corpus.sequences.resize(a.count);
  std::size_t total = 0;
  for (std::size_t i = 0; i < a.count; ++i) {
    corpus.sequences[i] = model.simulate(ck.params.values(), corpus.t_start, corpus.t_end, {},
                                         sequence_seed(a.seed, i));
    total += corpus.sequences[i].events.size();
  }
  write_corpus(fs::path(a.out), corpus);
  const double mean = a.count == 0 ? 0.0 : static_cast<double>(total) / a.count;
  out << "wrote " << a.count << " sequences to " << a.out << " (mean " << mean
      << " events)\n";
  manifest["seed"] = a.seed;
  manifest["config"] = {{"checkpoint", a.checkpoint}, {"window", a.window}, {"count", a.count}};
  manifest["metrics"] = {{"total_events", total}, {"mean_events", mean}};
  manifest.write(a.manifest.empty() ? fs::path(a.out + ".manifest.json") : fs::path(a.manifest));
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent jump-flow models of marked event sequences"};
  app.name("jumpflow");
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Simulate a classical point-process corpus");
  generate->add_option("family", gen.family, "poisson | hawkes_exp | hawkes_pl | self_correcting")
      ->required();
  generate->add_option("--lambda0", gen.lambda0, "Base rate");
  generate->add_option("--alpha", gen.alpha, "Excitation weight");
  generate->add_option("--beta", gen.beta, "Decay / exponent / correction");
  generate->add_option("--sigma", gen.sigma, "Power-law delay");
  generate->add_option("--mu", gen.mu, "Self-correcting growth rate");
  generate->add_option("--count", gen.count, "Number of sequences")->capture_default_str();
  generate->add_option("--window", gen.window, "t0 tN")->expected(2)->capture_default_str();
  generate->add_option("--seed", gen.seed)->capture_default_str();
  generate->add_option("--out", gen.out, "Corpus path (.jsonl)")->required();
  generate->add_option("--marks", gen.marks, "none | intervals | sticky")->capture_default_str();
  generate->add_option("--types", gen.types, "Types for --marks sticky")->capture_default_str();
  generate->add_option("--stay", gen.stay, "Repeat probability for --marks sticky")
      ->capture_default_str();
  generate->add_option("--manifest", gen.manifest, "Manifest path (default <out>.manifest.json)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
  train_cmd->add_option("--corpus", tr.corpus)->required();
  train_cmd->add_option("--config", tr.config, "TOML config (defaults when omitted)");
  train_cmd->add_option("--out-dir", tr.out_dir)->required();
  train_cmd->add_option("--epochs", tr.epochs, "Override [train] epochs");
  train_cmd->add_option("--seed", tr.seed, "Override [train] seed");
  train_cmd->add_flag("--quiet", tr.quiet);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint or classical baseline");
  eval_cmd->add_option("--checkpoint", ev.checkpoint);
  eval_cmd->add_option("--corpus", ev.corpus)->required();
  eval_cmd->add_option("--config", ev.config, "TOML config for solver, grid and split");
  eval_cmd->add_option("--metrics", ev.metrics, "mape type_error mark_mae nll");
  eval_cmd->add_option("--split", ev.split, "all | test")->capture_default_str();
  eval_cmd->add_option("--grid", ev.grid, "Evaluation grid points");
  eval_cmd->add_option("--traces", ev.traces, "Directory for per-sequence intensity CSVs");
  eval_cmd->add_option("--baseline", ev.baseline,
                       "truth or a family name fitted by maximum likelihood");
  eval_cmd->add_option("--manifest", ev.manifest);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Sample sequences from a checkpoint");
  simulate_cmd->add_option("--checkpoint", sim.checkpoint)->required();
  simulate_cmd->add_option("--window", sim.window, "t0 tN")->expected(2)->capture_default_str();
  simulate_cmd->add_option("--count", sim.count)->capture_default_str();
  simulate_cmd->add_option("--seed", sim.seed)->capture_default_str();
  simulate_cmd->add_option("--out", sim.out)->required();
  simulate_cmd->add_option("--manifest", sim.manifest);

  bool dump_defaults = false;
  std::string check;
  auto* config_cmd = app.add_subcommand("config", "Print or check configuration files");
  config_cmd->add_flag("--dump-defaults", dump_defaults, "Print the default config");
  config_cmd->add_option("--check", check, "Validate a config file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen, args, out, err);
    if (train_cmd->parsed()) return cmd_train(tr, args, out, err);
    if (eval_cmd->parsed()) return cmd_eval(ev, args, out, err);
    if (simulate_cmd->parsed()) return cmd_simulate(sim, args, out);
    if (config_cmd->parsed()) {
      if (!check.empty()) {
        load_config(check);
        out << check << ": ok\n";
      }
      if (dump_defaults || check.empty()) out << config_to_toml(RunConfig{});
      return kExitOk;
    }
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << " (t=" << e.time() << ")\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace jumpflow::cli
