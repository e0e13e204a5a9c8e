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

// Small trainable text classifier used as the in-process audit target:
//
//   pooled = mean of embedding rows of the input tokens
//   hidden = tanh(pooled * W1 + b1)
//   P(. | x) = softmax(hidden * W2 + b2)
//
// Mean pooling makes the output invariant to token order and to repeating
// the whole sequence. All arithmetic is in double precision.

#ifndef CANARY_AUDIT_REFMODEL_H_
#define CANARY_AUDIT_REFMODEL_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "canary_audit/corpus.h"
#include "canary_audit/oracle.h"
#include "canary_audit/vocab.h"

namespace canary_audit {

struct ModelShape {
  int vocab_size = 0;
  int embed_dim = 32;
  int hidden_dim = 64;
  int num_classes = 0;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

// Row-major parameter tensors. Also used to hold gradients.
struct ModelParams {
  ModelShape shape;
  std::uint64_t seed = 0;
  std::vector<double> embedding;       // vocab_size x embed_dim
  std::vector<double> hidden_weights;  // embed_dim x hidden_dim
  std::vector<double> hidden_bias;     // hidden_dim
  std::vector<double> output_weights;  // hidden_dim x num_classes
  std::vector<double> output_bias;     // num_classes

  static ModelParams Zeros(const ModelShape& shape);

  std::size_t parameter_count() const;

  // The five tensors in a fixed order, for code that treats the parameters
  // as one flat vector.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Shapes consistent and every value finite.
absl::Status ValidateParams(const ModelParams& params);

// Embeddings uniform(-0.05, 0.05); W1, W2 uniform(+-1/sqrt(fan_in)); zero
// biases.
ModelParams InitializeParams(const ModelShape& shape, std::uint64_t seed);

absl::StatusOr<LabelDistribution> Forward(const ModelParams& params,
                                          std::span<const TokenId> tokens);

struct LossAndGradient {
  double loss = 0.0;
  ModelParams gradient;
};

// loss = mean cross-entropy over the batch + (weight_decay / 2) * ||params||^2
// with the exact gradient of that loss.
absl::StatusOr<LossAndGradient> ComputeLossAndGradient(
    const ModelParams& params, std::span<const LabeledExample> batch,
    double weight_decay);

// Mean cross-entropy and accuracy over a dataset.
struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};
absl::StatusOr<Evaluation> Evaluate(const ModelParams& params,
                                    std::span<const LabeledExample> examples);

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 0.05;
  double weight_decay = 0.01;
  double momentum = 0.9;
  int batch_size = 32;
  int patience = 10;
  int embed_dim = 32;
  int hidden_dim = 64;
  std::uint64_t seed = 0;
};

absl::Status ValidateTrainConfig(const TrainConfig& config);

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double valid_accuracy = 0.0;
};

struct TrainResult {
  // Snapshot with the best validation accuracy (earliest on ties).
  ModelParams params;
  int best_epoch = 0;
  int epochs_run = 0;
  double best_valid_accuracy = 0.0;
  std::vector<EpochStats> history;
};

// Called after every epoch with that epoch's statistics and parameters.
using EpochCallback =
    std::function<void(const EpochStats&, const ModelParams&)>;

// The parameters Train starts from for this config.
ModelParams InitialParams(int vocab_size, int num_classes,
                          const TrainConfig& config);

// Mini-batch SGD with momentum and decoupled weight decay; stops after
// `patience` epochs without a validation improvement. Deterministic given
// config.seed.
absl::StatusOr<TrainResult> Train(std::span<const LabeledExample> train,
                                  std::span<const LabeledExample> valid,
                                  int vocab_size, int num_classes,
                                  const TrainConfig& config,
                                  const EpochCallback& on_epoch = {});

// Binary container: magic, format version, shape, seed, then every tensor as
// little-endian IEEE-754 doubles. Round-trips bit-exactly.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string SerializeModel(const ModelParams& params);
absl::StatusOr<ModelParams> ParseModel(absl::string_view bytes);
absl::Status SaveModel(const ModelParams& params, const std::string& path);
absl::StatusOr<ModelParams> LoadModel(const std::string& path);

// In-process oracle over a fixed parameter snapshot. Read-only, so safe for
// concurrent use.
class ReferenceModelOracle : public Oracle {
 public:
  explicit ReferenceModelOracle(std::shared_ptr<const ModelParams> params);

  int num_classes() const override { return params_->shape.num_classes; }
  const ModelParams& params() const { return *params_; }

 protected:
  absl::StatusOr<std::vector<LabelDistribution>> ScoreBatchImpl(
      std::span<const TokenIds> sequences) override;

 private:
  std::shared_ptr<const ModelParams> params_;
};

}  // namespace canary_audit

#endif  // CANARY_AUDIT_REFMODEL_H_
