// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "gim/model.hpp"

namespace gim {

enum class PlantKind { kNone, kSelfRepair, kRoutedCircuit };

/// Fixed token roles in the synthetic vocabulary. Generators and planted
/// models agree on these by construction, so a dataset is compatible with
/// any plant seed.
struct TokenRoles {
  static constexpr int64_t kBlank = 0;  // baseline / ablation token
  static constexpr int64_t kQuery = 1;  // readout query carrier, last position
  static constexpr int64_t kCopyTarget = 2;   // copy-key readout class
  static constexpr int64_t kPositiveClass = 3;
  static constexpr int64_t kNegativeClass = 4;
  static constexpr int64_t kPositiveSignal = 5;
  static constexpr int64_t kNegativeSignal = 6;
  static constexpr int64_t kFirstSignal = 7;  // copy-key signal tokens
  static constexpr int64_t kNumSignals = 6;   // ids 7..12
  static constexpr int64_t kFirstFiller = 13;

  static constexpr int64_t min_vocab() { return kFirstFiller + 3; }
};

struct PlantedModel {
  Weights weights;
  PlantKind kind = PlantKind::kNone;
  int layer = -1;  // planted attention site, when applicable
  int head = -1;
};

/// kSelfRepair: one head routes a query-token readout through two redundant
/// signal positions with identical values and near-equal weights, so that
/// individually ablating either score barely moves the output while jointly
/// ablating both removes it.
///
/// kRoutedCircuit: a sentiment carrier is amplified in place by layer 0 and
/// read into the final position by a layer-1 head, making (layer 1, carrier
/// position) the ground-truth circuit location.
///
/// Throws std::invalid_argument when the config cannot host the plant.
PlantedModel make_planted_model(const ModelConfig& config, PlantKind kind,
                                uint64_t seed);

const char* plant_kind_name(PlantKind kind);

}  // namespace gim
