// Command-line front end: synth, train, eval, generate, gradcheck, sweep,
// ablate-delete. Failures print one line `error: E_<CODE>: message` on stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "proactive/config.hpp"
#include "proactive/data.hpp"
#include "proactive/evaluation.hpp"
#include "proactive/generation.hpp"
#include "proactive/pipeline.hpp"
#include "proactive/probe.hpp"
#include "proactive/sweep.hpp"
#include "proactive/synth.hpp"
#include "proactive/training.hpp"

namespace fs = std::filesystem;
using namespace proactive;

namespace {

constexpr int kUsageExit = 2;
constexpr int kInternalExit = 1;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  training::write_atomic(path, text);
}

std::string corpus_text(const data::Corpus& corpus, const data::Vocab& vocab) {
  std::ostringstream out;
  data::write_corpus(out, corpus, vocab);
  return out.str();
}

std::vector<double> parse_prefixes(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfig, "--prefixes: cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::kConfig, "--prefixes: empty list");
  return out;
}

struct SynthArgs {
  std::string spec, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> sequences;
};

void run_synth(const SynthArgs& a) {
  auto spec = synth::load_spec(a.spec);
  if (a.seed) spec.seed = *a.seed;
  if (a.sequences) spec.sequences = *a.sequences;
  spec.validate();
  const auto corpus = synth::generate(spec);
  write_text(a.out, corpus_text(corpus.sequences, corpus.vocab));
  std::cout << "wrote " << corpus.sequences.size() << " sequences to " << a.out << "\n";
}

/// Flags shared by commands that read a RunConfig.
struct ConfigArgs {
  std::string config;
  std::vector<std::string> set;
  std::optional<std::string> data;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;

  RunConfig load() const {
    RunConfig cfg = load_run_config(config, set);
    if (data) cfg.data.path = *data;
    if (seed) cfg.train.seed = *seed;
    if (workers) cfg.train.workers = cfg.eval.workers = *workers;
    cfg.train.validate();
    cfg.eval.validate();
    return cfg;
  }

  void attach(CLI::App* cmd, bool with_data = true) {
    cmd->add_option("--config", config, "run configuration JSON (defaults apply when omitted)");
    cmd->add_option("--set", set, "override a config value, e.g. --set model.D=8 (repeatable)");
    if (with_data) cmd->add_option("--data", data, "corpus JSONL; overrides data.path");
    cmd->add_option("--seed", seed, "overrides train.seed");
    cmd->add_option("--workers", workers, "caps worker threads; overrides train.workers and eval.workers");
  }
};

data::LoadedCorpus load_configured_corpus(const RunConfig& cfg) {
  if (cfg.data.path.empty()) throw Error(ErrorCode::kConfig, "no corpus given (--data or data.path)");
  return data::load_corpus(cfg.data.path);
}

struct TrainArgs {
  ConfigArgs cfg;
  std::string out;
  bool resume = false;
};

void run_train(const TrainArgs& a) {
  const RunConfig cfg = a.cfg.load();
  auto prepared = pipeline::prepare(cfg, load_configured_corpus(cfg));
  const fs::path dir = a.out;
  training::RunDirectory run(dir);
  write_text(dir / "config.json", cfg.to_json().dump(2) + "\n");
  write_text(dir / "train.jsonl", corpus_text(prepared.train, prepared.model.vocab));
  write_text(dir / "test.jsonl", corpus_text(prepared.test, prepared.model.vocab));

  training::Checkpoint state = training::Checkpoint::fresh(prepared.model, cfg.train);
  if (a.resume && fs::exists(dir / training::files::kCheckpoint)) {
    state = training::load_checkpoint(dir / training::files::kCheckpoint);
    if (state.model.vocab != prepared.model.vocab || state.model.config.to_json() != prepared.model.config.to_json()) {
      throw Error(ErrorCode::kConfig, "--resume: checkpoint in '" + dir.string() + "' was trained on different data or config");
    }
    state.train = cfg.train;
    std::cout << "resuming after epoch " << state.epoch << "\n";
  }
  run.reset_log(state.epoch);
  const auto outcome = training::train(std::move(state), prepared.train_eos, [&](const auto& s, const auto& r, bool improved) {
    run.record(s, r, improved);
    std::cout << r.to_line() << "\n" << std::flush;
  });
  std::cout << "trained " << outcome.state.epoch << " epochs" << (outcome.early_stopped ? " (early stop)" : "")
            << "; checkpoint in " << dir.string() << "\n";
}

struct EvalArgs {
  std::string ckpt, data, report, prefixes;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool greedy = false;
  bool no_generation = false;
};

void run_eval(const EvalArgs& a) {
  const Model model = training::load_model(a.ckpt);
  const auto test = data::load_corpus(a.data, model.vocab);
  EvalConfig cfg;
  if (!a.prefixes.empty()) cfg.prefixes = parse_prefixes(a.prefixes);
  if (a.seed) cfg.seed = *a.seed;
  if (a.workers) cfg.workers = *a.workers;
  cfg.greedy = a.greedy;
  cfg.generation = !a.no_generation;
  const auto report = evaluation::evaluate(model, test, cfg);
  write_text(a.report, report.to_json().dump(2) + "\n");
  std::cout << "apa " << report.apa << " mae " << report.mae;
  for (const auto& [k, v] : report.gpa_at) std::cout << " gpa@" << k << " " << v;
  if (report.has_generation) std::cout << " cl " << report.cl << " gen_apa " << report.gen_apa;
  std::cout << "\n";
}

struct GenerateArgs {
  std::string ckpt, goal, first_mark, out;
  double first_t = 0.0;
  bool greedy = false;
  std::uint64_t seed = 0;
  std::size_t max_len = 0;
  std::size_t count = 1;
};

fs::path sidecar_path(const fs::path& out) {
  fs::path p = out;
  p.replace_extension(".reasons.json");
  return p;
}

void run_generate(const GenerateArgs& a) {
  const Model model = training::load_model(a.ckpt);
  if (a.count == 0) throw Error(ErrorCode::kConfig, "--count must be positive");
  generation::GenRequest req;
  req.goal = model.vocab.goal_id(a.goal);
  req.first = {model.vocab.mark_id(a.first_mark), a.first_t};
  req.max_len = a.max_len;
  req.greedy = a.greedy;
  data::Corpus out;
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i < a.count; ++i) {
    const std::string id = "gen-" + std::to_string(i);
    req.seed = evaluation::sequence_seed(a.seed, id);
    auto g = generation::generate(model, req);
    g.sequence.id = id;
    const std::string reason = generation::to_string(g.reason);
    records.push_back({{"id", id}, {"reason", reason}, {"length", g.length()}});
    ++counts[reason];
    out.push_back(std::move(g.sequence));
  }
  write_text(a.out, corpus_text(out, model.vocab));
  nlohmann::ordered_json side{{"format", "proactive.generation_reasons"},
                              {"version", 1},
                              {"seed", a.seed},
                              {"greedy", a.greedy},
                              {"counts", counts},
                              {"records", records}};
  write_text(sidecar_path(a.out), side.dump(2) + "\n");
  std::cout << "wrote " << a.count << " sequences to " << a.out << "\n";
}

struct GradcheckArgs {
  ConfigArgs cfg;
  double tol = 1e-4;
  std::size_t length = 5;
};

void run_gradcheck(const GradcheckArgs& a) {
  const RunConfig cfg = a.cfg.load();
  ModelConfig model = cfg.model;
  if (model.encoder.max_len == 0) model.encoder.max_len = a.length + 1;
  if (a.length < 2) throw Error(ErrorCode::kConfig, "--length must be at least 2");
  const auto report = probe::gradient_check(model, a.length, cfg.train.seed, cfg.train);
  std::cout << "checked " << report.checked << " entries; max relative error " << report.max_rel_error << " at "
            << report.worst_param << "[" << report.worst_index << "]\n";
  if (!report.passed(a.tol)) {
    std::ostringstream msg;
    msg << "max relative error " << report.max_rel_error << " at " << report.worst_param << "[" << report.worst_index
        << "] exceeds " << a.tol;
    throw Error(ErrorCode::kGradCheck, msg.str());
  }
}

struct SweepArgs {
  ConfigArgs cfg;
  std::string grid, out;
};

void run_sweep(const SweepArgs& a) {
  const RunConfig cfg = a.cfg.load();
  const auto grid = sweep::load_grid(a.grid);
  const auto corpus = load_configured_corpus(cfg);
  std::ostringstream csv;
  const auto failures = sweep::run(cfg, corpus, grid, csv);
  write_text(a.out, csv.str());
  std::cout << "wrote " << sweep::expand(grid, cfg).size() << " rows to " << a.out;
  if (failures) std::cout << " (" << failures << " failed)";
  std::cout << "\n";
}

struct AblateArgs {
  std::string data, out;
  double fraction = 0.0;
  std::uint64_t seed = 0;
};

void run_ablate(const AblateArgs& a) {
  const auto corpus = data::load_corpus(a.data);
  const auto kept = data::delete_random(corpus.sequences, a.fraction, a.seed);
  if (kept.empty()) throw Error(ErrorCode::kData, "ablate-delete: no sequence kept two actions");
  write_text(a.out, corpus_text(kept, corpus.vocab));
  std::cout << "kept " << kept.size() << " of " << corpus.sequences.size() << " sequences\n";
}

int fail(const std::string& code, const std::string& msg, int status) {
  std::cerr << "error: " << code << ": " << msg << "\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time action sequence modelling: training, evaluation, generation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "print help for every subcommand");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "draw a synthetic corpus from a generator spec");
  synth_cmd->add_option("--spec", synth_args.spec, "generator spec JSON")->required();
  synth_cmd->add_option("--out", synth_args.out, "output corpus JSONL")->required();
  synth_cmd->add_option("--seed", synth_args.seed, "overrides the spec's seed");
  synth_cmd->add_option("--sequences", synth_args.sequences, "overrides the spec's sequence count");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "split a corpus, train a model, write a run directory");
  train_args.cfg.attach(train_cmd);
  train_cmd->add_option("--out", train_args.out, "run directory (checkpoint.json, best.json, train_log.jsonl, splits)")
      ->required();
  train_cmd->add_flag("--resume", train_args.resume, "continue from the run directory's checkpoint.json if present");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a raw test corpus");
  eval_cmd->add_option("--ckpt", eval_args.ckpt, "run directory or checkpoint file")->required();
  eval_cmd->add_option("--data", eval_args.data, "test corpus JSONL")->required();
  eval_cmd->add_option("--report", eval_args.report, "output report JSON")->required();
  eval_cmd->add_option("--prefixes", eval_args.prefixes, "comma-separated goal-detection fractions (default 0.3,0.6,1.0)");
  eval_cmd->add_option("--seed", eval_args.seed, "generation seed (default 0)");
  eval_cmd->add_option("--workers", eval_args.workers, "worker threads");
  eval_cmd->add_flag("--greedy", eval_args.greedy, "greedy generation instead of sampling");
  eval_cmd->add_flag("--no-generation", eval_args.no_generation, "skip the generation metrics");

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "roll out sequences for a goal from a first action");
  gen_cmd->add_option("--ckpt", gen_args.ckpt, "run directory or checkpoint file")->required();
  gen_cmd->add_option("--goal", gen_args.goal, "goal name")->required();
  gen_cmd->add_option("--first-mark", gen_args.first_mark, "mark name of the first action")->required();
  gen_cmd->add_option("--first-t", gen_args.first_t, "time of the first action")->required();
  gen_cmd->add_option("--out", gen_args.out, "output JSONL; reasons go to <out>.reasons.json")->required();
  gen_cmd->add_flag("--greedy", gen_args.greedy, "argmax marks and median gaps");
  gen_cmd->add_option("--seed", gen_args.seed, "sampling seed (default 0)");
  gen_cmd->add_option("--max-len", gen_args.max_len, "length cap (default: the checkpoint's max_generation_length)");
  gen_cmd->add_option("--count", gen_args.count, "number of sequences (default 1)");

  GradcheckArgs grad_args;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the training objective's gradient");
  grad_args.cfg.attach(grad_cmd, false);
  grad_cmd->add_option("--tol", grad_args.tol, "maximum relative error (default 1e-4)");
  grad_cmd->add_option("--length", grad_args.length, "probe sequence length including EOS (default 5)");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate one model per grid point, write CSV");
  sweep_args.cfg.attach(sweep_cmd);
  sweep_cmd->add_option("--grid", sweep_args.grid, "grid JSON with optional D, M, gamma arrays")->required();
  sweep_cmd->add_option("--out", sweep_args.out, "output CSV")->required();

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate-delete", "delete a fraction of each sequence's actions at random");
  ablate_cmd->add_option("--data", ablate_args.data, "input corpus JSONL")->required();
  ablate_cmd->add_option("--fraction", ablate_args.fraction, "fraction of actions removed per sequence")->required();
  ablate_cmd->add_option("--seed", ablate_args.seed, "deletion seed (default 0)");
  ablate_cmd->add_option("--out", ablate_args.out, "output corpus JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("E_USAGE", e.what(), kUsageExit);
  }

  try {
    if (*synth_cmd) run_synth(synth_args);
    else if (*train_cmd) run_train(train_args);
    else if (*eval_cmd) run_eval(eval_args);
    else if (*gen_cmd) run_generate(gen_args);
    else if (*grad_cmd) run_gradcheck(grad_args);
    else if (*sweep_cmd) run_sweep(sweep_args);
    else if (*ablate_cmd) run_ablate(ablate_args);
  } catch (const Error& e) {
    return fail(error_code_name(e.code()), e.what(), error_exit_status(e.code()));
  } catch (const std::exception& e) {
    return fail("E_INTERNAL", e.what(), kInternalExit);
  }
  return EXIT_SUCCESS;
}
