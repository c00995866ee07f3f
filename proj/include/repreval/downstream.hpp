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

#pragma once

#include "repreval/predictors.hpp"
#include "repreval/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace repreval::objects {

enum class Matching { loss, mask, deterministic };

std::string to_string(Matching m);
Matching parse_matching(const std::string& text);

struct DownstreamConfig {
  predict::PredictorConfig predictor = predict::PredictorConfig::mlp(1);
  predict::TrainProtocol protocol;
  Matching matching = Matching::loss;
  Index train_scenes = 10000;
  Index val_scenes = 1000;
  Index test_scenes = 2000;
  Index baseline_seeds = 10;
  bool baseline = true;
};

/// Protocol for learning constant outputs through a matching step.
predict::TrainProtocol matched_baseline_protocol();

// Scene ranges [0, train), [train, train + val), [train + val, total). When the
// table is smaller than the configured counts they shrink in ratio 10:1:2.
struct SceneSplit {
  Index train = 0, val = 0, test = 0;
};
SceneSplit split_scenes(const DownstreamConfig& config, Index available);

struct PropertyScore {
  std::string name;
  bool categorical = false;
  double all = 0;  // accuracy or R^2 over every matched test object
  double id = 0;   // NaN without ID objects
  double ood = 0;  // NaN without OOD objects
};

struct DownstreamResult {
  std::vector<PropertyScore> scores;
  std::vector<PropertyScore> baseline;                 // mean over baseline seeds
  std::vector<std::vector<PropertyScore>> baseline_per_seed;
  predict::TrainHistory history;
  Index test_objects = 0;
  Index test_ood_objects = 0;
  std::vector<std::string> flags;
};

// A trained slot predictor: one network shared across slots.
struct SlottedModel {
  predict::Mlp net;
  predict::TargetLayout layout;
  DownstreamConfig config;
  Index slot_dim = 0;
  predict::TrainHistory history;
};

/// Trains on matched (slot, object) pairs of the train scenes.
SlottedModel train_slotted(const Representation& repr, const PropertyTable& props, const DownstreamConfig& config,
                           std::uint64_t seed, const MaskSet* pred_masks = nullptr, const MaskSet* gt_masks = nullptr);

/// Scores a trained model on the test scenes of (repr, props).
DownstreamResult score_slotted(const SlottedModel& model, const Representation& repr, const PropertyTable& props,
                               const MaskSet* pred_masks = nullptr, const MaskSet* gt_masks = nullptr);

/// Shared per-slot predictor; matching is loss or mask (mask needs both mask sets,
/// with predicted label k marking slot k and ground-truth label m + 1 object m).
DownstreamResult eval_slotted(const Representation& repr, const PropertyTable& props, const DownstreamConfig& config,
                              std::uint64_t seed, const MaskSet* pred_masks = nullptr,
                              const MaskSet* gt_masks = nullptr);

/// Whole-scene predictor with K * P outputs; matching is loss or deterministic.
DownstreamResult eval_flat(const Representation& repr, Index slots, const PropertyTable& props,
                           const DownstreamConfig& config, std::uint64_t seed);

struct ShiftComparison {
  DownstreamResult zero_shot;  // original model on the shifted test scenes
  DownstreamResult retrained;  // fresh model trained on the shifted scenes
};

/// Retrains from scratch on the shifted data with the same config and seed.
ShiftComparison retrain_after_shift(const SlottedModel& model, const Representation& shifted_repr,
                                    const PropertyTable& shifted_props, std::uint64_t seed);

/// Adds "<prefix>.<property>" (and .id / .ood) metrics and the baselines.
void add_to_report(const DownstreamResult& result, const std::string& prefix, EvalReport& report);

}  // namespace repreval::objects
