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

#include "canary_audit/refmodel.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "canary_audit/seeding.h"
#include "canary_audit/status_macros.h"
#include "file_util.h"

namespace canary_audit {
namespace {

struct Activations {
  std::vector<double> pooled;
  std::vector<double> hidden;
  std::vector<double> probs;
};

absl::Status CheckTokens(const ModelShape& shape,
                         std::span<const TokenId> tokens) {
  if (tokens.empty()) return absl::InvalidArgumentError("empty token sequence");
  for (TokenId t : tokens) {
    if (t < 0 || t >= shape.vocab_size) {
      return absl::OutOfRangeError(absl::StrCat(
          "token id ", t, " outside model vocabulary of ", shape.vocab_size));
    }
  }
  return absl::OkStatus();
}

// Assumes CheckTokens passed.
void RunForward(const ModelParams& p, std::span<const TokenId> tokens,
                Activations& act) {
  const int d = p.shape.embed_dim;
  const int h = p.shape.hidden_dim;
  const int c = p.shape.num_classes;

  act.pooled.assign(d, 0.0);
  for (TokenId t : tokens) {
    const double* row = &p.embedding[static_cast<std::size_t>(t) * d];
    for (int i = 0; i < d; ++i) act.pooled[i] += row[i];
  }
  const double inv_len = 1.0 / static_cast<double>(tokens.size());
  for (double& x : act.pooled) x *= inv_len;

  act.hidden.assign(p.hidden_bias.begin(), p.hidden_bias.end());
  for (int i = 0; i < d; ++i) {
    const double x = act.pooled[i];
    const double* w = &p.hidden_weights[static_cast<std::size_t>(i) * h];
    for (int j = 0; j < h; ++j) act.hidden[j] += x * w[j];
  }
  for (double& x : act.hidden) x = std::tanh(x);

  act.probs.assign(p.output_bias.begin(), p.output_bias.end());
  for (int j = 0; j < h; ++j) {
    const double x = act.hidden[j];
    const double* w = &p.output_weights[static_cast<std::size_t>(j) * c];
    for (int k = 0; k < c; ++k) act.probs[k] += x * w[k];
  }
  const double max_logit = *std::max_element(act.probs.begin(), act.probs.end());
  double norm = 0.0;
  for (double& x : act.probs) {
    x = std::exp(x - max_logit);
    norm += x;
  }
  for (double& x : act.probs) x /= norm;
}

// Adds the gradient of the summed (not averaged) cross-entropy of `batch` to
// `grad` and returns the summed loss.
double AccumulateCrossEntropy(const ModelParams& p,
                              std::span<const LabeledExample> batch,
                              ModelParams& grad, Activations& act) {
  const int d = p.shape.embed_dim;
  const int h = p.shape.hidden_dim;
  const int c = p.shape.num_classes;
  std::vector<double> d_logits(c), d_hidden(h), d_pooled(d);
  double loss = 0.0;

  for (const LabeledExample& ex : batch) {
    RunForward(p, ex.tokens, act);
    loss -= std::log(std::max(act.probs[ex.label], 1e-300));

    for (int k = 0; k < c; ++k) d_logits[k] = act.probs[k];
    d_logits[ex.label] -= 1.0;

    for (int k = 0; k < c; ++k) grad.output_bias[k] += d_logits[k];
    for (int j = 0; j < h; ++j) {
      double* gw = &grad.output_weights[static_cast<std::size_t>(j) * c];
      const double* w = &p.output_weights[static_cast<std::size_t>(j) * c];
      double back = 0.0;
      for (int k = 0; k < c; ++k) {
        gw[k] += act.hidden[j] * d_logits[k];
        back += w[k] * d_logits[k];
      }
      d_hidden[j] = back * (1.0 - act.hidden[j] * act.hidden[j]);
    }

    for (int j = 0; j < h; ++j) grad.hidden_bias[j] += d_hidden[j];
    for (int i = 0; i < d; ++i) {
      double* gw = &grad.hidden_weights[static_cast<std::size_t>(i) * h];
      const double* w = &p.hidden_weights[static_cast<std::size_t>(i) * h];
      double back = 0.0;
      for (int j = 0; j < h; ++j) {
        gw[j] += act.pooled[i] * d_hidden[j];
        back += w[j] * d_hidden[j];
      }
      d_pooled[i] = back;
    }

    const double inv_len = 1.0 / static_cast<double>(ex.tokens.size());
    for (TokenId t : ex.tokens) {
      double* ge = &grad.embedding[static_cast<std::size_t>(t) * d];
      for (int i = 0; i < d; ++i) ge[i] += d_pooled[i] * inv_len;
    }
  }
  return loss;
}

absl::Status CheckBatch(const ModelShape& shape,
                        std::span<const LabeledExample> batch) {
  for (const LabeledExample& ex : batch) {
    CA_RETURN_IF_ERROR(CheckTokens(shape, ex.tokens));
    if (ex.label < 0 || ex.label >= shape.num_classes) {
      return absl::OutOfRangeError(
          absl::StrCat("label ", ex.label, " outside [0, ",
                       shape.num_classes, ")"));
    }
  }
  return absl::OkStatus();
}

int ArgMax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

ModelParams ModelParams::Zeros(const ModelShape& shape) {
  ModelParams p;
  p.shape = shape;
  p.embedding.assign(static_cast<std::size_t>(shape.vocab_size) * shape.embed_dim, 0.0);
  p.hidden_weights.assign(static_cast<std::size_t>(shape.embed_dim) * shape.hidden_dim, 0.0);
  p.hidden_bias.assign(shape.hidden_dim, 0.0);
  p.output_weights.assign(static_cast<std::size_t>(shape.hidden_dim) * shape.num_classes, 0.0);
  p.output_bias.assign(shape.num_classes, 0.0);
  return p;
}

std::size_t ModelParams::parameter_count() const {
  return embedding.size() + hidden_weights.size() + hidden_bias.size() +
         output_weights.size() + output_bias.size();
}

std::vector<std::span<double>> ModelParams::tensors() {
  return {embedding, hidden_weights, hidden_bias, output_weights, output_bias};
}

std::vector<std::span<const double>> ModelParams::tensors() const {
  return {embedding, hidden_weights, hidden_bias, output_weights, output_bias};
}

absl::Status ValidateParams(const ModelParams& p) {
  const ModelShape& s = p.shape;
  if (s.vocab_size < 1 || s.embed_dim < 1 || s.hidden_dim < 1 ||
      s.num_classes < 2) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "invalid model shape V=%d d=%d h=%d C=%d", s.vocab_size, s.embed_dim,
        s.hidden_dim, s.num_classes));
  }
  const ModelParams expected = ModelParams::Zeros(s);
  const auto want = expected.tensors();
  const auto have = p.tensors();
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].size() != have[i].size()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "parameter tensor ", i, " has ", have[i].size(), " values, expected ",
          want[i].size()));
    }
    for (double x : have[i]) {
      if (!std::isfinite(x)) {
        return absl::InvalidArgumentError("non-finite model parameter");
      }
    }
  }
  return absl::OkStatus();
}

ModelParams InitializeParams(const ModelShape& shape, std::uint64_t seed) {
  ModelParams p = ModelParams::Zeros(shape);
  p.seed = seed;
  Rng rng(seed);
  auto fill = [&rng](std::vector<double>& v, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : v) x = dist(rng);
  };
  fill(p.embedding, 0.05);
  fill(p.hidden_weights, 1.0 / std::sqrt(static_cast<double>(shape.embed_dim)));
  fill(p.output_weights, 1.0 / std::sqrt(static_cast<double>(shape.hidden_dim)));
  return p;
}

absl::StatusOr<LabelDistribution> Forward(const ModelParams& params,
                                          std::span<const TokenId> tokens) {
  CA_RETURN_IF_ERROR(CheckTokens(params.shape, tokens));
  Activations act;
  RunForward(params, tokens, act);
  return LabelDistribution{std::move(act.probs)};
}

absl::StatusOr<LossAndGradient> ComputeLossAndGradient(
    const ModelParams& params, std::span<const LabeledExample> batch,
    double weight_decay) {
  if (batch.empty()) return absl::InvalidArgumentError("empty batch");
  CA_RETURN_IF_ERROR(CheckBatch(params.shape, batch));
  LossAndGradient out;
  out.gradient = ModelParams::Zeros(params.shape);
  Activations act;
  const double n = static_cast<double>(batch.size());
  out.loss = AccumulateCrossEntropy(params, batch, out.gradient, act) / n;

  double squared_norm = 0.0;
  auto grads = out.gradient.tensors();
  auto values = params.tensors();
  for (std::size_t t = 0; t < grads.size(); ++t) {
    for (std::size_t i = 0; i < grads[t].size(); ++i) {
      grads[t][i] = grads[t][i] / n + weight_decay * values[t][i];
      squared_norm += values[t][i] * values[t][i];
    }
  }
  out.loss += 0.5 * weight_decay * squared_norm;
  return out;
}

absl::StatusOr<Evaluation> Evaluate(const ModelParams& params,
                                    std::span<const LabeledExample> examples) {
  if (examples.empty()) return absl::InvalidArgumentError("empty dataset");
  CA_RETURN_IF_ERROR(CheckBatch(params.shape, examples));
  Activations act;
  double loss = 0.0;
  int correct = 0;
  for (const LabeledExample& ex : examples) {
    RunForward(params, ex.tokens, act);
    loss -= std::log(std::max(act.probs[ex.label], 1e-300));
    if (ArgMax(act.probs) == ex.label) ++correct;
  }
  const double n = static_cast<double>(examples.size());
  return Evaluation{loss / n, correct / n};
}

absl::Status ValidateTrainConfig(const TrainConfig& c) {
  if (c.epochs < 1 || c.batch_size < 1 || c.patience < 1 || c.embed_dim < 1 ||
      c.hidden_dim < 1) {
    return absl::InvalidArgumentError(
        "epochs, batch_size, patience and layer sizes must be positive");
  }
  if (c.patience > c.epochs) {
    return absl::InvalidArgumentError("patience exceeds epochs");
  }
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    return absl::InvalidArgumentError("learning_rate must be positive");
  }
  if (!(c.weight_decay >= 0.0) || !std::isfinite(c.weight_decay)) {
    return absl::InvalidArgumentError("weight_decay must be non-negative");
  }
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) {
    return absl::InvalidArgumentError("momentum must lie in [0,1)");
  }
  return absl::OkStatus();
}

ModelParams InitialParams(int vocab_size, int num_classes,
                          const TrainConfig& config) {
  ModelShape shape{vocab_size, config.embed_dim, config.hidden_dim, num_classes};
  return InitializeParams(shape, DeriveSeed(config.seed, SeedStream::kModelInit));
}

absl::StatusOr<TrainResult> Train(std::span<const LabeledExample> train,
                                  std::span<const LabeledExample> valid,
                                  int vocab_size, int num_classes,
                                  const TrainConfig& config,
                                  const EpochCallback& on_epoch) {
  CA_RETURN_IF_ERROR(ValidateTrainConfig(config));
  if (train.empty() || valid.empty()) {
    return absl::InvalidArgumentError("train and valid splits must be non-empty");
  }
  ModelParams params = InitialParams(vocab_size, num_classes, config);
  CA_RETURN_IF_ERROR(ValidateParams(params));
  CA_RETURN_IF_ERROR(CheckBatch(params.shape, train));
  CA_RETURN_IF_ERROR(CheckBatch(params.shape, valid));

  ModelParams velocity = ModelParams::Zeros(params.shape);
  ModelParams grad = ModelParams::Zeros(params.shape);
  Rng rng(DeriveSeed(config.seed, SeedStream::kTraining));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<LabeledExample> batch;
  batch.reserve(config.batch_size);
  Activations act;

  TrainResult result;
  result.best_valid_accuracy = -1.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);

      for (auto t : grad.tensors()) std::fill(t.begin(), t.end(), 0.0);
      AccumulateCrossEntropy(params, batch, grad, act);
      const double inv_n = 1.0 / static_cast<double>(batch.size());

      auto p = params.tensors();
      auto v = velocity.tensors();
      auto g = grad.tensors();
      for (std::size_t t = 0; t < p.size(); ++t) {
        for (std::size_t i = 0; i < p[t].size(); ++i) {
          v[t][i] = config.momentum * v[t][i] + g[t][i] * inv_n;
          p[t][i] -= config.learning_rate *
                     (v[t][i] + config.weight_decay * p[t][i]);
        }
      }
    }

    CA_ASSIGN_OR_RETURN(Evaluation train_eval, Evaluate(params, train));
    if (!std::isfinite(train_eval.loss)) {
      return absl::InternalError(
          absl::StrCat("training diverged at epoch ", epoch));
    }
    CA_ASSIGN_OR_RETURN(Evaluation valid_eval, Evaluate(params, valid));
    EpochStats stats{epoch, train_eval.loss, train_eval.accuracy,
                     valid_eval.accuracy};
    result.history.push_back(stats);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(stats, params);

    if (valid_eval.accuracy > result.best_valid_accuracy) {
      result.best_valid_accuracy = valid_eval.accuracy;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

namespace {

constexpr char kModelMagic[8] = {'C', 'A', 'M', 'O', 'D', 'E', 'L', '\0'};

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void PutU64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(absl::string_view bytes) : bytes_(bytes) {}

  absl::StatusOr<std::uint64_t> Uint(int width) {
    if (bytes_.size() - pos_ < static_cast<std::size_t>(width)) {
      return absl::DataLossError("model file is truncated");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += width;
    return v;
  }

  absl::Status Doubles(std::vector<double>& out) {
    CA_ASSIGN_OR_RETURN(std::uint64_t count, Uint(8));
    if (count != out.size()) {
      return absl::DataLossError(absl::StrCat(
          "tensor holds ", count, " values, shape implies ", out.size()));
    }
    for (double& x : out) {
      CA_ASSIGN_OR_RETURN(std::uint64_t bits, Uint(8));
      x = std::bit_cast<double>(bits);
    }
    return absl::OkStatus();
  }

  absl::string_view Take(std::size_t n) {
    if (bytes_.size() - pos_ < n) return {};
    absl::string_view out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  absl::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string SerializeModel(const ModelParams& params) {
  std::string out(kModelMagic, sizeof(kModelMagic));
  PutU32(out, kModelFormatVersion);
  PutU32(out, static_cast<std::uint32_t>(params.shape.vocab_size));
  PutU32(out, static_cast<std::uint32_t>(params.shape.embed_dim));
  PutU32(out, static_cast<std::uint32_t>(params.shape.hidden_dim));
  PutU32(out, static_cast<std::uint32_t>(params.shape.num_classes));
  PutU64(out, params.seed);
  for (std::span<const double> tensor : params.tensors()) {
    PutU64(out, tensor.size());
    for (double x : tensor) PutU64(out, std::bit_cast<std::uint64_t>(x));
  }
  return out;
}

absl::StatusOr<ModelParams> ParseModel(absl::string_view bytes) {
  Reader reader(bytes);
  if (reader.Take(sizeof(kModelMagic)) !=
      absl::string_view(kModelMagic, sizeof(kModelMagic))) {
    return absl::DataLossError("not a model file (bad magic)");
  }
  CA_ASSIGN_OR_RETURN(std::uint64_t version, reader.Uint(4));
  if (version != kModelFormatVersion) {
    return absl::FailedPreconditionError(
        absl::StrCat("model file version ", version,
                     " does not match supported version ", kModelFormatVersion));
  }
  ModelShape shape;
  std::uint64_t v = 0;
  CA_ASSIGN_OR_RETURN(v, reader.Uint(4));
  shape.vocab_size = static_cast<int>(v);
  CA_ASSIGN_OR_RETURN(v, reader.Uint(4));
  shape.embed_dim = static_cast<int>(v);
  CA_ASSIGN_OR_RETURN(v, reader.Uint(4));
  shape.hidden_dim = static_cast<int>(v);
  CA_ASSIGN_OR_RETURN(v, reader.Uint(4));
  shape.num_classes = static_cast<int>(v);
  if (shape.vocab_size < 1 || shape.embed_dim < 1 || shape.hidden_dim < 1 ||
      shape.num_classes < 2 || shape.vocab_size > (1 << 24) ||
      shape.embed_dim > 4096 || shape.hidden_dim > 4096 ||
      shape.num_classes > 65536) {
    return absl::DataLossError("model file has an implausible shape");
  }
  ModelParams params = ModelParams::Zeros(shape);
  CA_ASSIGN_OR_RETURN(params.seed, reader.Uint(8));
  CA_RETURN_IF_ERROR(reader.Doubles(params.embedding));
  CA_RETURN_IF_ERROR(reader.Doubles(params.hidden_weights));
  CA_RETURN_IF_ERROR(reader.Doubles(params.hidden_bias));
  CA_RETURN_IF_ERROR(reader.Doubles(params.output_weights));
  CA_RETURN_IF_ERROR(reader.Doubles(params.output_bias));
  if (!reader.done()) {
    return absl::DataLossError("trailing bytes after model parameters");
  }
  CA_RETURN_IF_ERROR(ValidateParams(params));
  return params;
}

absl::Status SaveModel(const ModelParams& params, const std::string& path) {
  CA_RETURN_IF_ERROR(ValidateParams(params));
  return internal::WriteFileAtomically(path, SerializeModel(params));
}

absl::StatusOr<ModelParams> LoadModel(const std::string& path) {
  CA_ASSIGN_OR_RETURN(std::string bytes, internal::ReadFile(path));
  auto params = ParseModel(bytes);
  if (!params.ok()) {
    return absl::Status(params.status().code(),
                        absl::StrCat(path, ": ", params.status().message()));
  }
  return params;
}

ReferenceModelOracle::ReferenceModelOracle(
    std::shared_ptr<const ModelParams> params)
    : params_(std::move(params)) {}

absl::StatusOr<std::vector<LabelDistribution>>
ReferenceModelOracle::ScoreBatchImpl(std::span<const TokenIds> sequences) {
  std::vector<LabelDistribution> out;
  out.reserve(sequences.size());
  Activations act;
  for (const TokenIds& seq : sequences) {
    CA_RETURN_IF_ERROR(CheckTokens(params_->shape, seq));
    RunForward(*params_, seq, act);
    out.push_back(LabelDistribution{act.probs});
  }
  return out;
}

}  // namespace canary_audit
