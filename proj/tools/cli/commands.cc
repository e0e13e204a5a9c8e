//
// Copyright 2026 The Canary Audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "cli/commands.h"

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "canary_audit/conformance.h"
#include "canary_audit/corpus.h"
#include "canary_audit/eval.h"
#include "canary_audit/extract.h"
#include "canary_audit/oracle_server.h"
#include "canary_audit/parallel.h"
#include "canary_audit/refmodel.h"
#include "canary_audit/remote_oracle.h"
#include "canary_audit/status_macros.h"
#include "canary_audit/vocab.h"
#include "json.hpp"

namespace canary_audit::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct CommonOptions {
  std::uint64_t seed = 0;
  int jobs = DefaultParallelism();
  std::string config;
  std::string manifest;
};

struct GenDataOptions {
  std::string out;
  std::string vocab;
  int vocab_size = 1000;
  int classes = 10;
  std::vector<int> counts;
  double valid_fraction = 0.25;
  int min_length = 8;
  int max_length = 16;
  int signature_size = 10;
  double signal_ratio = 0.5;
};

struct InjectOptions {
  std::string data;
  std::string out;
  int length = 10;
  int secret = 1;
  int original_reps = 100;
  std::string support = "all-other";
  int support_reps = 1;
  int label = -1;
};

struct TrainOptions {
  std::string data;
  std::string out;
  TrainConfig train;
};

struct ExtractOptions {
  std::string oracle;
  std::string vocab;
  std::string freq_table;
  double lambda = 0.0;
  int beam = 1;
  int missing = 1;
  int batch_size = 256;
  std::string prefix_from_canary;
  std::string prefix;
  int label = -1;
  std::string out;
};

struct ExperimentOptions {
  std::string preset;
  int trials = 10;
  std::string out_csv;
  std::string out_table;
};

struct ServeOptions {
  std::string model;
  std::string vocab;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string model_id;
};

struct ConformanceOptionsCli {
  std::string oracle;
  std::string vocab;
  int probes = 4;
};

absl::Status WriteText(const std::string& path, const std::string& contents) {
  std::ofstream f(path + ".tmp", std::ios::binary | std::ios::trunc);
  if (!f) return absl::PermissionDeniedError(absl::StrCat("cannot write ", path));
  f << contents;
  f.close();
  if (!f) return absl::DataLossError(absl::StrCat("write failed: ", path));
  std::error_code ec;
  fs::rename(path + ".tmp", path, ec);
  if (ec) return absl::PermissionDeniedError(absl::StrCat("cannot rename to ", path));
  return absl::OkStatus();
}

absl::Status RequireFile(const std::string& path) {
  if (!fs::is_regular_file(path)) {
    return absl::NotFoundError(absl::StrCat("input file not found: ", path));
  }
  return absl::OkStatus();
}

absl::Status EnsureDirectory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) return absl::PermissionDeniedError(absl::StrCat("cannot create ", dir));
  return absl::OkStatus();
}

std::string Join(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

// Resolved option values of a subcommand, defaults included.
json ResolvedConfig(const CLI::App& app) {
  json config = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config" ||
        name == "manifest") {
      continue;
    }
    if (opt->count() > 0) {
      const auto& results = opt->results();
      config[name] = results.size() == 1 ? json(results[0]) : json(results);
    } else {
      config[name] = opt->get_default_str();
    }
  }
  return config;
}

absl::Status WriteManifest(const CLI::App& app, const std::string& path,
                           const std::vector<std::string>& outputs) {
  json manifest;
  manifest["tool"] = "canary_audit";
  manifest["version"] = kToolVersion;
  manifest["command"] = app.get_name();
  manifest["config"] = ResolvedConfig(app);
  manifest["outputs"] = outputs;
  return WriteText(path, manifest.dump(2) + "\n");
}

absl::StatusOr<std::unique_ptr<Oracle>> OpenOracle(const std::string& locator,
                                                   const Vocabulary& vocab) {
  if (absl::StartsWith(locator, "http://")) {
    CA_ASSIGN_OR_RETURN(auto remote, RemoteOracle::Connect(locator, vocab));
    return std::unique_ptr<Oracle>(std::move(remote));
  }
  CA_RETURN_IF_ERROR(RequireFile(locator));
  CA_ASSIGN_OR_RETURN(ModelParams params, LoadModel(locator));
  if (static_cast<std::size_t>(params.shape.vocab_size) != vocab.size()) {
    return absl::FailedPreconditionError(absl::StrCat(
        "model vocabulary size ", params.shape.vocab_size,
        " differs from the vocabulary file's ", vocab.size()));
  }
  return std::unique_ptr<Oracle>(std::make_unique<ReferenceModelOracle>(
      std::make_shared<const ModelParams>(std::move(params))));
}

absl::Status RunGenData(const CLI::App& app, const GenDataOptions& o,
                        const CommonOptions& common, std::ostream& out) {
  Vocabulary vocab;
  if (!o.vocab.empty()) {
    CA_RETURN_IF_ERROR(RequireFile(o.vocab));
    CA_ASSIGN_OR_RETURN(vocab, ReadVocabularyFile(o.vocab));
  } else {
    if (o.vocab_size < 2) return absl::InvalidArgumentError("--vocab-size must be >= 2");
    vocab = MakeSyntheticVocabulary(o.vocab_size);
  }
  DatasetSpec spec = DeskScaleDatasetSpec(common.seed);
  spec.num_classes = o.classes;
  if (!o.counts.empty()) {
    spec.train_counts = o.counts;
  } else if (o.classes != 10) {
    return absl::InvalidArgumentError("--counts is required unless --classes is 10");
  }
  spec.valid_fraction = o.valid_fraction;
  spec.min_length = o.min_length;
  spec.max_length = o.max_length;
  spec.signature_size = o.signature_size;
  spec.signal_ratio = o.signal_ratio;
  CA_ASSIGN_OR_RETURN(Dataset data, SynthesizeCorpus(spec, vocab));

  CA_RETURN_IF_ERROR(EnsureDirectory(o.out));
  const std::vector<std::string> outputs = {
      Join(o.out, "vocab.txt"), Join(o.out, "train.jsonl"),
      Join(o.out, "valid.jsonl")};
  CA_RETURN_IF_ERROR(WriteVocabularyFile(vocab, outputs[0]));
  CA_RETURN_IF_ERROR(WriteDatasetFile(data.train, vocab, outputs[1]));
  CA_RETURN_IF_ERROR(WriteDatasetFile(data.valid, vocab, outputs[2]));
  CA_RETURN_IF_ERROR(WriteManifest(
      app, common.manifest.empty() ? Join(o.out, "manifest.json") : common.manifest,
      outputs));
  out << "wrote " << data.train.size() << " train and " << data.valid.size()
      << " valid examples over " << vocab.size() << " tokens to " << o.out
      << " (rarest class " << spec.rarest_class() << ")\n";
  return absl::OkStatus();
}

struct LoadedData {
  Vocabulary vocab;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> valid;
};

absl::StatusOr<LoadedData> LoadDataDir(const std::string& dir) {
  LoadedData d;
  for (const char* name : {"vocab.txt", "train.jsonl", "valid.jsonl"}) {
    CA_RETURN_IF_ERROR(RequireFile(Join(dir, name)));
  }
  CA_ASSIGN_OR_RETURN(d.vocab, ReadVocabularyFile(Join(dir, "vocab.txt")));
  CA_ASSIGN_OR_RETURN(d.train, ReadDatasetFile(Join(dir, "train.jsonl"), d.vocab));
  CA_ASSIGN_OR_RETURN(d.valid, ReadDatasetFile(Join(dir, "valid.jsonl"), d.vocab));
  if (d.train.empty() || d.valid.empty()) {
    return absl::InvalidArgumentError(absl::StrCat("empty split in ", dir));
  }
  return d;
}

int NumClasses(const LoadedData& d) {
  int max_label = 0;
  for (const auto* split : {&d.train, &d.valid}) {
    for (const LabeledExample& ex : *split) max_label = std::max(max_label, ex.label);
  }
  return max_label + 1;
}

absl::Status RunInject(const CLI::App& app, const InjectOptions& o,
                       const CommonOptions& common, std::ostream& out) {
  CA_ASSIGN_OR_RETURN(LoadedData d, LoadDataDir(o.data));
  const int classes = std::max(2, NumClasses(d));
  int label = o.label;
  if (label < 0) {
    std::vector<int> counts(classes, 0);
    for (const LabeledExample& ex : d.train) {
      if (ex.origin == Origin::kNatural) ++counts[ex.label];
    }
    label = static_cast<int>(std::min_element(counts.begin(), counts.end()) -
                             counts.begin());
  }
  CanarySpec spec;
  spec.length = o.length;
  spec.n_secret = o.secret;
  spec.original_repetitions = o.original_reps;
  CA_ASSIGN_OR_RETURN(spec.support, ParseSupportMode(o.support));
  spec.supporting_repetitions = o.support_reps;
  CA_ASSIGN_OR_RETURN(CanarySuite suite,
                      GenerateCanarySuite(spec, classes, label, d.vocab.size(),
                                          DeriveSeed(common.seed, SeedStream::kCanary)));
  suite.seed = DeriveSeed(common.seed, SeedStream::kInjection);
  CA_ASSIGN_OR_RETURN(auto injected, Inject(d.train, suite, d.vocab.size()));
  CA_ASSIGN_OR_RETURN(FrequencyTable freq,
                      ComputeFrequencyTable(TokenSequences(injected), d.vocab.size()));

  CA_RETURN_IF_ERROR(EnsureDirectory(o.out));
  const std::vector<std::string> outputs = {
      Join(o.out, "vocab.txt"), Join(o.out, "train.jsonl"),
      Join(o.out, "valid.jsonl"), Join(o.out, "canaries.json"),
      Join(o.out, "freq.json")};
  CA_RETURN_IF_ERROR(WriteVocabularyFile(d.vocab, outputs[0]));
  CA_RETURN_IF_ERROR(WriteDatasetFile(injected, d.vocab, outputs[1]));
  CA_RETURN_IF_ERROR(WriteDatasetFile(d.valid, d.vocab, outputs[2]));
  CA_RETURN_IF_ERROR(WriteCanarySuiteFile(suite, d.vocab, outputs[3]));
  CA_RETURN_IF_ERROR(WriteFrequencyTableFile(freq, outputs[4]));
  CA_RETURN_IF_ERROR(WriteManifest(
      app, common.manifest.empty() ? Join(o.out, "manifest.json") : common.manifest,
      outputs));
  out << "injected original canary (label " << label << ", "
      << suite.original.repetitions << "x) and " << suite.supporting.size()
      << " supporting canaries; " << injected.size() << " training examples\n";
  return absl::OkStatus();
}

absl::Status RunTrain(const CLI::App& app, const TrainOptions& o,
                      const CommonOptions& common, std::ostream& out) {
  CA_ASSIGN_OR_RETURN(LoadedData d, LoadDataDir(o.data));
  TrainConfig config = o.train;
  config.seed = common.seed;
  CA_RETURN_IF_ERROR(ValidateTrainConfig(config));
  CA_ASSIGN_OR_RETURN(
      TrainResult result,
      Train(d.train, d.valid, static_cast<int>(d.vocab.size()), NumClasses(d),
            config, [&out](const EpochStats& s, const ModelParams&) {
              out << absl::StrFormat(
                  "epoch %3d  train_loss %.5f  train_acc %.4f  valid_acc %.4f\n",
                  s.epoch, s.train_loss, s.train_accuracy, s.valid_accuracy);
            }));
  CA_RETURN_IF_ERROR(SaveModel(result.params, o.out));
  CA_RETURN_IF_ERROR(WriteManifest(
      app, common.manifest.empty() ? o.out + ".manifest.json" : common.manifest,
      {o.out}));
  out << absl::StrFormat("best epoch %d of %d, valid_acc %.4f; wrote %s\n",
                         result.best_epoch, result.epochs_run,
                         result.best_valid_accuracy, o.out);
  return absl::OkStatus();
}

absl::Status RunExtract(const CLI::App& app, const ExtractOptions& o,
                        const CommonOptions& common, std::ostream& out) {
  CA_RETURN_IF_ERROR(RequireFile(o.vocab));
  CA_RETURN_IF_ERROR(RequireFile(o.freq_table));
  CA_ASSIGN_OR_RETURN(Vocabulary vocab, ReadVocabularyFile(o.vocab));
  CA_ASSIGN_OR_RETURN(FrequencyTable freq, ReadFrequencyTableFile(o.freq_table));

  ExtractionReport report;
  std::optional<TokenIds> truth;
  if (!o.prefix_from_canary.empty()) {
    if (!o.prefix.empty()) {
      return absl::InvalidArgumentError(
          "--prefix and --prefix-from-canary are mutually exclusive");
    }
    CA_RETURN_IF_ERROR(RequireFile(o.prefix_from_canary));
    CA_ASSIGN_OR_RETURN(CanarySuite suite,
                        ReadCanarySuiteFile(o.prefix_from_canary, vocab));
    if (static_cast<int>(suite.original.secret.size()) != o.missing) {
      return absl::InvalidArgumentError(absl::StrCat(
          "--missing ", o.missing, " but the canary hides ",
          suite.original.secret.size(), " tokens"));
    }
    report.prefix = suite.original.prefix;
    report.label = o.label >= 0 ? o.label : suite.original.label;
    truth = suite.original.secret;
  } else {
    if (o.prefix.empty() || o.label < 0) {
      return absl::InvalidArgumentError(
          "need --prefix-from-canary, or --prefix together with --label");
    }
    std::vector<std::string> tokens =
        absl::StrSplit(o.prefix, ' ', absl::SkipEmpty());
    CA_ASSIGN_OR_RETURN(report.prefix, vocab.Encode(tokens));
    report.label = o.label;
  }
  report.config.lambda = o.lambda;
  report.config.beam_size = o.beam;
  report.config.n_missing = o.missing;
  report.config.batch_size = o.batch_size;
  report.config.workers = std::max(1, common.jobs);
  CA_RETURN_IF_ERROR(ValidateExtractionConfig(report.config, vocab.size()));

  CA_ASSIGN_OR_RETURN(std::unique_ptr<Oracle> oracle, OpenOracle(o.oracle, vocab));
  CA_ASSIGN_OR_RETURN(report.result, ExtractBeam(*oracle, report.prefix,
                                                 report.label, report.config,
                                                 vocab, freq));
  if (truth) report.truth_rank = TruthRank(report.result, *truth);

  CA_RETURN_IF_ERROR(WriteText(o.out, SerializeExtractionReport(report, vocab) + "\n"));
  CA_RETURN_IF_ERROR(WriteManifest(
      app, common.manifest.empty() ? o.out + ".manifest.json" : common.manifest,
      {o.out}));
  out << "top candidate:";
  for (const std::string& t : vocab.Decode(report.result.ranked.front().tokens)) {
    out << " " << t;
  }
  out << absl::StrFormat(" (score %.6g), %d queries", report.result.ranked.front().score,
                         report.result.queries_used);
  if (truth) {
    out << ", truth rank "
        << (report.truth_rank ? absl::StrCat(*report.truth_rank) : "not in top-k");
  }
  out << "\n";
  return absl::OkStatus();
}

absl::Status RunExperimentCommand(const CLI::App& app,
                                  const ExperimentOptions& o,
                                  const CommonOptions& common, std::ostream& out,
                                  std::ostream& err) {
  if (o.out_csv.empty() && o.out_table.empty()) {
    return absl::InvalidArgumentError("need --out-csv and/or --out-table");
  }
  CA_ASSIGN_OR_RETURN(GridSpec spec, PresetGrid(o.preset, common.seed));
  spec.trials = o.trials;
  spec.jobs = std::max(1, common.jobs);
  CA_ASSIGN_OR_RETURN(ExperimentGrid grid, RunExperiment(spec));
  for (const GridCell& cell : grid.cells) {
    for (const TrialOutcome& t : cell.trials) {
      if (t.failed) {
        err << absl::StrFormat("trial seed %d failed (lambda %g, beam %d): %s\n",
                               t.seed, t.lambda, t.beam_size, t.failure);
      }
    }
  }
  std::vector<std::string> outputs;
  const std::string text = GridToText(grid);
  if (!o.out_csv.empty()) {
    CA_RETURN_IF_ERROR(WriteText(o.out_csv, GridToCsv(grid)));
    outputs.push_back(o.out_csv);
  }
  if (!o.out_table.empty()) {
    CA_RETURN_IF_ERROR(WriteText(o.out_table, text));
    outputs.push_back(o.out_table);
  }
  CA_RETURN_IF_ERROR(WriteManifest(
      app,
      common.manifest.empty() ? outputs.front() + ".manifest.json" : common.manifest,
      outputs));
  out << text;
  if (!grid.valid) {
    return absl::AbortedError("grid invalid: a cell lost more than half its trials");
  }
  return absl::OkStatus();
}

OracleServer* g_server = nullptr;

void HandleSignal(int) {
  if (g_server != nullptr) g_server->Stop();
}

absl::Status RunServe(const ServeOptions& o, std::ostream& out) {
  CA_RETURN_IF_ERROR(RequireFile(o.vocab));
  CA_ASSIGN_OR_RETURN(Vocabulary vocab, ReadVocabularyFile(o.vocab));
  CA_ASSIGN_OR_RETURN(std::unique_ptr<Oracle> oracle, OpenOracle(o.model, vocab));
  OracleServer server(*oracle, vocab, o.model_id.empty() ? o.model : o.model_id);
  out << "serving " << o.model << " on http://" << o.host << ":" << o.port
      << std::endl;
  g_server = &server;
  std::signal(SIGINT, HandleSignal);
  std::signal(SIGTERM, HandleSignal);
  absl::Status status = server.ServeForever(o.host, o.port);
  g_server = nullptr;
  return status;
}

absl::Status RunConformanceCommand(const ConformanceOptionsCli& o,
                                   const CommonOptions& common,
                                   std::ostream& out) {
  CA_RETURN_IF_ERROR(RequireFile(o.vocab));
  CA_ASSIGN_OR_RETURN(Vocabulary vocab, ReadVocabularyFile(o.vocab));
  ConformanceOptions options;
  Rng rng(common.seed);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::uniform_int_distribution<int> length(3, 12);
  for (int i = 0; i < std::max(2, o.probes); ++i) {
    TokenStrings probe(length(rng));
    for (std::string& t : probe) t = vocab.tokens()[pick(rng)];
    options.probes.push_back(std::move(probe));
  }
  ConformanceReport report = RunConformance(o.oracle, options);
  out << report.ToString();
  if (!report.all_passed()) {
    return absl::FailedPreconditionError("protocol conformance failed");
  }
  return absl::OkStatus();
}

// Splices "--key value" pairs from a JSON config file in front of the user's
// arguments. Keys the user passed explicitly are skipped, so flags win.
absl::StatusOr<std::vector<std::string>> ExpandConfigFile(
    const std::vector<std::string>& args) {
  std::string path;
  std::set<std::string> given;
  std::size_t command_index = 0;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (command_index == 0 && !absl::StartsWith(a, "-")) command_index = i;
    if (!absl::StartsWith(a, "--")) continue;
    std::string name = a.substr(2, a.find('=') == std::string::npos
                                       ? std::string::npos
                                       : a.find('=') - 2);
    given.insert(name);
    if (name == "config") {
      if (a.find('=') != std::string::npos) {
        path = a.substr(a.find('=') + 1);
      } else if (i + 1 < args.size()) {
        path = args[i + 1];
      }
    }
  }
  if (path.empty()) return args;
  if (command_index == 0) {
    return absl::InvalidArgumentError("--config needs a subcommand");
  }
  CA_RETURN_IF_ERROR(RequireFile(path));
  std::ifstream in(path);
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError(
        absl::StrCat("config file ", path, " is not a JSON object"));
  }
  std::vector<std::string> injected;
  for (const auto& [raw_key, value] : j.items()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") {
      return absl::InvalidArgumentError("config files cannot nest --config");
    }
    if (given.count(key) > 0) continue;
    auto scalar = [](const json& v) -> absl::StatusOr<std::string> {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
      if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
      if (v.is_number_float()) return absl::StrFormat("%.17g", v.get<double>());
      return absl::InvalidArgumentError("config values must be scalars or arrays");
    };
    injected.push_back("--" + key);
    if (value.is_array()) {
      for (const json& v : value) {
        CA_ASSIGN_OR_RETURN(std::string s, scalar(v));
        injected.push_back(s);
      }
    } else {
      CA_ASSIGN_OR_RETURN(std::string s, scalar(value));
      injected.push_back(s);
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + command_index + 1);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + command_index + 1, args.end());
  return out;
}

void AddCommon(CLI::App* sub, CommonOptions& common) {
  sub->add_option("--seed", common.seed, "Master seed; all module seeds derive from it");
  sub->add_option("--jobs", common.jobs, "Worker threads for trials and oracle batches")
      ->check(CLI::PositiveNumber);
  sub->add_option("--config", common.config,
                  "JSON file of option values; command-line flags override it");
  sub->add_option("--manifest", common.manifest, "Where to write the run manifest");
}

}  // namespace

int RunCli(const std::vector<std::string>& raw_args, std::ostream& out,
           std::ostream& err) {
  auto expanded = ExpandConfigFile(raw_args);
  if (!expanded.ok()) {
    err << "error: " << expanded.status().message() << "\n";
    return 2;
  }
  const std::vector<std::string>& args = *expanded;

  CLI::App app{"Canary-based memorization audits for text classifiers",
               "canary_audit"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", kToolVersion);

  CommonOptions common;

  GenDataOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Synthesize a labeled corpus");
  AddCommon(gen_cmd, common);
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--vocab", gen.vocab, "Existing vocabulary file to draw from");
  gen_cmd->add_option("--vocab-size", gen.vocab_size, "Synthetic vocabulary size");
  gen_cmd->add_option("--classes", gen.classes, "Number of classes");
  gen_cmd->add_option("--counts", gen.counts, "Training examples per class");
  gen_cmd->add_option("--valid-fraction", gen.valid_fraction);
  gen_cmd->add_option("--min-length", gen.min_length);
  gen_cmd->add_option("--max-length", gen.max_length);
  gen_cmd->add_option("--signature-size", gen.signature_size);
  gen_cmd->add_option("--signal-ratio", gen.signal_ratio);

  InjectOptions inj;
  CLI::App* inj_cmd = app.add_subcommand("inject", "Insert canaries into a corpus");
  AddCommon(inj_cmd, common);
  inj_cmd->add_option("--data", inj.data, "Directory written by gen-data")->required();
  inj_cmd->add_option("--out", inj.out, "Output directory")->required();
  inj_cmd->add_option("--length", inj.length, "Canary length in tokens");
  inj_cmd->add_option("--secret", inj.secret, "Hidden trailing tokens");
  inj_cmd->add_option("--original-reps", inj.original_reps);
  inj_cmd->add_option("--support", inj.support, "all-other, one-other or none");
  inj_cmd->add_option("--support-reps", inj.support_reps);
  inj_cmd->add_option("--label", inj.label, "Original canary label (default: rarest class)");

  TrainOptions tr;
  CLI::App* tr_cmd = app.add_subcommand("train", "Train the reference classifier");
  AddCommon(tr_cmd, common);
  tr_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  tr_cmd->add_option("--out", tr.out, "Model file")->required();
  tr_cmd->add_option("--epochs", tr.train.epochs);
  tr_cmd->add_option("--lr", tr.train.learning_rate);
  tr_cmd->add_option("--weight-decay", tr.train.weight_decay);
  tr_cmd->add_option("--momentum", tr.train.momentum);
  tr_cmd->add_option("--batch-size", tr.train.batch_size);
  tr_cmd->add_option("--patience", tr.train.patience);
  tr_cmd->add_option("--embed-dim", tr.train.embed_dim);
  tr_cmd->add_option("--hidden-dim", tr.train.hidden_dim);

  ExtractOptions ex;
  CLI::App* ex_cmd = app.add_subcommand("extract", "Recover hidden canary tokens");
  AddCommon(ex_cmd, common);
  ex_cmd->add_option("--oracle", ex.oracle, "Model file or http:// endpoint")->required();
  ex_cmd->add_option("--vocab", ex.vocab, "Vocabulary file")->required();
  ex_cmd->add_option("--freq-table", ex.freq_table, "Frequency table JSON")->required();
  ex_cmd->add_option("--lambda", ex.lambda, "Frequency penalty weight");
  ex_cmd->add_option("--beam", ex.beam, "Beam size k");
  ex_cmd->add_option("--missing", ex.missing, "Number of hidden tokens");
  ex_cmd->add_option("--batch-size", ex.batch_size, "Sequences per oracle call");
  ex_cmd->add_option("--prefix-from-canary", ex.prefix_from_canary,
                     "Canary suite whose original prefix and label to use");
  ex_cmd->add_option("--prefix", ex.prefix, "Space-separated known prefix");
  ex_cmd->add_option("--label", ex.label, "Known label");
  ex_cmd->add_option("--out", ex.out, "Extraction report JSON")->required();

  ExperimentOptions exp;
  CLI::App* exp_cmd = app.add_subcommand("experiment", "Run a seeded experiment grid");
  AddCommon(exp_cmd, common);
  exp_cmd->add_option("--preset", exp.preset, "table2, table3 or table4")->required();
  exp_cmd->add_option("--trials", exp.trials, "Seeded trials per cell")
      ->check(CLI::PositiveNumber);
  exp_cmd->add_option("--out-csv", exp.out_csv);
  exp_cmd->add_option("--out-table", exp.out_table);

  ServeOptions serve;
  CLI::App* serve_cmd =
      app.add_subcommand("serve", "Serve a model file over the oracle protocol");
  AddCommon(serve_cmd, common);
  serve_cmd->add_option("--model", serve.model)->required();
  serve_cmd->add_option("--vocab", serve.vocab)->required();
  serve_cmd->add_option("--host", serve.host);
  serve_cmd->add_option("--port", serve.port);
  serve_cmd->add_option("--model-id", serve.model_id);

  ConformanceOptionsCli conf;
  CLI::App* conf_cmd = app.add_subcommand(
      "conformance", "Check an oracle endpoint against the wire protocol");
  AddCommon(conf_cmd, common);
  conf_cmd->add_option("--oracle", conf.oracle, "http:// endpoint")->required();
  conf_cmd->add_option("--vocab", conf.vocab, "Vocabulary to draw probes from")
      ->required();
  conf_cmd->add_option("--probes", conf.probes);

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  absl::Status status;
  if (gen_cmd->parsed()) {
    status = RunGenData(*gen_cmd, gen, common, out);
  } else if (inj_cmd->parsed()) {
    status = RunInject(*inj_cmd, inj, common, out);
  } else if (tr_cmd->parsed()) {
    status = RunTrain(*tr_cmd, tr, common, out);
  } else if (ex_cmd->parsed()) {
    status = RunExtract(*ex_cmd, ex, common, out);
  } else if (exp_cmd->parsed()) {
    status = RunExperimentCommand(*exp_cmd, exp, common, out, err);
  } else if (serve_cmd->parsed()) {
    status = RunServe(serve, out);
  } else if (conf_cmd->parsed()) {
    status = RunConformanceCommand(conf, common, out);
  }
  if (!status.ok()) {
    err << "error: " << status.message() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace canary_audit::cli
