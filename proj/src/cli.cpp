#include "cate/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

#include "cate/calibration.hpp"
#include "cate/checkpoint.hpp"
#include "cate/error.hpp"
#include "cate/evaluation.hpp"
#include "cate/inference.hpp"
#include "cate/service.hpp"
#include "cate/training.hpp"
#include "cate/treebank.hpp"

// After the Eigen users: <resolv.h> defines a `_res` macro.
#include "CLI11.hpp"
#include "httplib.h"

namespace cate {

namespace {

ReadOptions read_options(const std::string& normalize) {
  ReadOptions options;
  if (!normalize.empty()) options.normalize = parse_branching(normalize);
  return options;
}

std::vector<ParseTree> select_split(const Treebank& bank, const std::string& split) {
  if (split == "all") return bank.trees;
  return bank.split(parse_split(split));
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << j.dump(2) << '\n';
}

struct GenerateArgs {
  std::uint64_t seed = 7;
  int n = 100;
  std::string mode = "left";
  std::string out;
};

struct TrainArgs {
  std::string treebank;
  std::string out;
  std::string normalize;
  std::string branching;
  std::string embeddings;
  std::string embedding_mode;
  std::size_t limit = 0;
  std::string contextual;
  std::string report;
  TrainingConfig config;
  bool no_shuffle = false;
};

struct CalibrateArgs {
  std::string model;
  std::string treebank;
  std::string split = "validation";
  std::string normalize;
  std::string out;
};

struct ParseArgs {
  std::string model;
  std::string sentence;
  std::string vectors;
  int beam = 1;
  bool temperature = false;
  bool json = false;
};

struct EvalArgs {
  std::string model;
  std::string treebank;
  std::string split = "test";
  std::string normalize;
  std::string json;
  int beam = 1;
  bool temperature = false;
};

struct ServeArgs {
  std::string model_dir = "models";
  int port = 8080;
  std::string host = "0.0.0.0";
  std::string origin = "*";
};

int run_generate(const GenerateArgs& a, std::ostream& out) {
  Treebank bank = generate_synthetic_corpus(a.seed, a.n, parse_branching(a.mode));
  write_treebank_file(a.out, bank);
  out << "wrote " << bank.trees.size() << " trees (" << bank.count(Split::Train) << " train, "
      << bank.count(Split::Validation) << " validation, " << bank.count(Split::Test)
      << " test) to " << a.out << '\n';
  return kExitOk;
}

int run_train(TrainArgs a, std::ostream& out) {
  Treebank bank = parse_treebank_file(a.treebank, read_options(a.normalize));
  if (!a.normalize.empty()) a.config.branching = parse_branching(a.normalize);
  if (!a.branching.empty()) a.config.branching = parse_branching(a.branching);
  a.config.shuffle = !a.no_shuffle;

  std::vector<ContextualSentenceVectors> contextual;
  if (!a.contextual.empty()) {
    contextual = load_contextual_file(a.contextual);
    if (contextual.size() != bank.trees.size())
      throw Error(ErrorCode::DimensionMismatch, "contextual file must hold one entry per tree");
    a.config.dim = contextual.front().dim();
  }

  std::optional<EmbeddingTable> table;
  if (!a.embeddings.empty()) {
    LoadOptions options;
    if (a.limit > 0) options.limit = a.limit;
    options.mode = a.embedding_mode.empty() ? EmbeddingMode::PretrainedFrozen
                                            : parse_embedding_mode(a.embedding_mode);
    table = load_pretrained(a.embeddings, options);
    a.config.dim = table->dim();
  } else if (!contextual.empty()) {
    table.emplace(a.config.dim, EmbeddingMode::PretrainedFrozen);
  } else {
    table = init_random_table(a.config.dim, a.config.seed);
  }

  TrainingResult result = train(bank, a.config, std::move(*table), contextual);
  save_checkpoint(a.out, {result.params, std::nullopt});

  const auto& best = result.report.epochs[static_cast<std::size_t>(result.report.best_epoch)];
  out << "trained " << result.report.epochs.size() << " epochs in " << result.report.wall_seconds
      << " s; best epoch " << result.report.best_epoch + 1 << " (validation loss "
      << best.validation_loss << ", node accuracy " << best.validation_accuracy << ")\n";
  out << "checkpoint: " << a.out << '\n';
  if (!a.report.empty()) {
    nlohmann::json j;
    j["best_epoch"] = result.report.best_epoch + 1;
    j["wall_seconds"] = result.report.wall_seconds;
    auto& epochs = j["epochs"] = nlohmann::json::array();
    for (const auto& e : result.report.epochs)
      epochs.push_back({{"train_loss", e.train_loss},
                        {"validation_loss", e.validation_loss},
                        {"validation_accuracy", e.validation_accuracy}});
    write_json(a.report, j);
  }
  return kExitOk;
}

int run_calibrate(const CalibrateArgs& a, std::ostream& out) {
  Checkpoint checkpoint = load_checkpoint(a.model);
  Treebank bank = parse_treebank_file(a.treebank, read_options(a.normalize));
  const std::vector<ParseTree> trees = select_split(bank, a.split);
  CalibrationParams c = fit_temperature(checkpoint.params, trees);
  checkpoint.calibration = c;
  const std::string target = a.out.empty() ? a.model : a.out;
  save_checkpoint(target, checkpoint);
  out << "temperature " << c.temperature << " fitted on " << c.fitted_on << " nodes; NLL "
      << c.nll_before << " -> " << c.nll_after << '\n';
  out << "checkpoint: " << target << '\n';
  return kExitOk;
}

int run_parse(const ParseArgs& a, std::ostream& out) {
  const Checkpoint checkpoint = load_checkpoint(a.model);
  ParseConfig config;
  config.beam_width = a.beam;
  config.use_temperature = a.temperature;
  config.branching = checkpoint.params.branching;
  config.embedding_variant = checkpoint.params.embedding_variant;

  std::vector<ContextualSentenceVectors> contextual;
  if (!a.vectors.empty()) contextual = load_contextual_file(a.vectors);

  auto parse_one = [&](const std::string& sentence, std::size_t index) {
    std::vector<Token> tokens;
    std::span<const Eigen::VectorXd> leaf_vectors;
    if (!contextual.empty()) {
      if (index >= contextual.size())
        throw Error(ErrorCode::DimensionMismatch, "no contextual vectors for sentence " +
                                                      std::to_string(index + 1));
      tokens = contextual[index].tokens;
      leaf_vectors = contextual[index].vectors;
    } else {
      tokens = tokenize(sentence);
    }
    ParseOutcome outcome = run_parse(checkpoint, tokens, leaf_vectors, config);
    if (a.json) {
      out << outcome.tree_json.dump() << '\n';
    } else {
      out << render_ascii(outcome.tree, checkpoint.params.vocabulary);
      out << "cum_logprob " << outcome.tree.cum_logprob << '\n';
    }
  };

  if (!a.sentence.empty() || (!contextual.empty() && contextual.size() == 1)) {
    parse_one(a.sentence, 0);
    return kExitOk;
  }
  std::string line;
  std::size_t index = 0;
  while (std::getline(std::cin, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    parse_one(line, index++);
  }
  return kExitOk;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  const Checkpoint checkpoint = load_checkpoint(a.model);
  Treebank bank = parse_treebank_file(a.treebank, read_options(a.normalize));
  const std::vector<ParseTree> trees = select_split(bank, a.split);
  ParseConfig config;
  config.beam_width = a.beam;
  config.use_temperature = a.temperature;
  EvalReport report = evaluate_corpus(checkpoint.params, checkpoint.calibration, trees, config);
  out << report.to_table();
  if (!a.json.empty()) write_json(a.json, report.to_json(checkpoint.params.vocabulary));
  return kExitOk;
}

int run_serve(const ServeArgs& a, std::ostream& out) {
  auto registry = std::make_shared<const ModelRegistry>(ModelRegistry::load_directory(a.model_dir));
  ParseService service(registry);
  httplib::Server server;
  mount(server, service, a.origin);
  out << "serving " << registry->variants().size() << " model variant(s) on http://" << a.host
      << ':' << a.port << '\n';
  out.flush();
  if (!server.listen(a.host, a.port))
    throw Error(ErrorCode::IoError, "cannot listen on " + a.host + ":" + std::to_string(a.port));
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causality tree extraction with a recursive neural network", "cate"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "write a synthetic causal-requirement treebank");
  generate->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  generate->add_option("--n", gen.n, "number of trees")->capture_default_str()->check(CLI::PositiveNumber);
  generate->add_option("--mode", gen.mode, "binarization of flat segments")
      ->check(CLI::IsMember({"left", "right"}))
      ->capture_default_str();
  generate->add_option("--out", gen.out, "treebank file to write")->required();

  TrainArgs tr;
  tr.config.epochs = 300;
  tr.config.patience = 30;
  auto* train_cmd = app.add_subcommand("train", "train a model on a treebank");
  train_cmd->add_option("--treebank", tr.treebank, "treebank file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "checkpoint to write")->required();
  train_cmd->add_option("--normalize", tr.normalize, "binarize n-ary nodes (left|right)")
      ->check(CLI::IsMember({"left", "right"}));
  train_cmd->add_option("--dim", tr.config.dim, "hidden/embedding size")->capture_default_str();
  train_cmd->add_option("--epochs", tr.config.epochs, "maximum epochs")->capture_default_str();
  train_cmd->add_option("--lr", tr.config.learning_rate, "SGD learning rate")->capture_default_str();
  train_cmd->add_option("--l2", tr.config.l2, "L2 penalty on W and Ws")->capture_default_str();
  train_cmd->add_option("--seed", tr.config.seed, "random seed")->capture_default_str();
  train_cmd->add_option("--patience", tr.config.patience, "early-stopping patience")->capture_default_str();
  train_cmd->add_option("--negative-weight", tr.config.negative_weight,
                        "weight of the non-constituent merge term")
      ->capture_default_str();
  train_cmd->add_flag("--no-shuffle", tr.no_shuffle, "keep tree order fixed");
  train_cmd->add_option("--branching", tr.branching, "branching tag stored in the checkpoint")
      ->check(CLI::IsMember({"left", "right"}));
  train_cmd->add_option("--variant", tr.config.embedding_variant, "embedding variant id")
      ->capture_default_str();
  train_cmd->add_option("--embeddings", tr.embeddings, "pretrained vector file")->check(CLI::ExistingFile);
  train_cmd->add_option("--embedding-mode", tr.embedding_mode, "frozen|finetuned for pretrained vectors")
      ->check(CLI::IsMember({"frozen", "finetuned", "pretrained_frozen", "pretrained_finetuned"}));
  train_cmd->add_option("--limit", tr.limit, "load at most this many pretrained vectors");
  train_cmd->add_option("--contextual", tr.contextual, "per-tree contextual vectors (JSON lines)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--report", tr.report, "write the training report as JSON");

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "fit the softmax temperature");
  calibrate->add_option("--model", cal.model, "checkpoint")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--treebank", cal.treebank, "treebank file")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--split", cal.split, "split to fit on")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}))
      ->capture_default_str();
  calibrate->add_option("--normalize", cal.normalize, "binarize n-ary nodes (left|right)")
      ->check(CLI::IsMember({"left", "right"}));
  calibrate->add_option("--out", cal.out, "checkpoint to write (default: overwrite --model)");

  ParseArgs pa;
  auto* parse_cmd = app.add_subcommand("parse", "parse sentences (from --sentence or stdin)");
  parse_cmd->add_option("--model", pa.model, "checkpoint")->required()->check(CLI::ExistingFile);
  parse_cmd->add_option("--sentence", pa.sentence, "sentence to parse");
  parse_cmd->add_option("--beam", pa.beam, "beam width")->capture_default_str()->check(CLI::PositiveNumber);
  parse_cmd->add_flag("--temperature", pa.temperature, "use the fitted temperature");
  parse_cmd->add_flag("--json", pa.json, "print the tree as JSON");
  parse_cmd->add_option("--vectors", pa.vectors, "contextual vectors file")->check(CLI::ExistingFile);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "evaluate a model on a treebank split");
  eval->add_option("--model", ev.model, "checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--treebank", ev.treebank, "treebank file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", ev.split, "split to evaluate")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}))
      ->capture_default_str();
  eval->add_option("--normalize", ev.normalize, "binarize n-ary nodes (left|right)")
      ->check(CLI::IsMember({"left", "right"}));
  eval->add_option("--beam", ev.beam, "beam width")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_flag("--temperature", ev.temperature, "use the fitted temperature");
  eval->add_option("--json", ev.json, "write the full report as JSON");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "serve the parse API over HTTP");
  serve->add_option("--model-dir", sv.model_dir, "directory of checkpoints")
      ->envname("CATE_MODEL_DIR")
      ->capture_default_str();
  serve->add_option("--port", sv.port, "TCP port")->envname("CATE_PORT")->capture_default_str();
  serve->add_option("--host", sv.host, "bind address")->capture_default_str();
  serve->add_option("--origin", sv.origin, "allowed CORS origin")->capture_default_str();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*generate) return run_generate(gen, out);
    if (*train_cmd) return run_train(tr, out);
    if (*calibrate) return run_calibrate(cal, out);
    if (*parse_cmd) return run_parse(pa, out);
    if (*eval) return run_eval(ev, out);
    if (*serve) return run_serve(sv, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace cate
