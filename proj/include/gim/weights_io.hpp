// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

#include "gim/model.hpp"

namespace gim {

/// Raised for any structural problem in a weight file: bad magic, malformed
/// manifest, shape/blob length disagreement, truncation, non-finite data.
class WeightFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kWeightFormatVersion = 1;

/// Weight file layout: a text manifest (format version, model config,
/// ordered tensor names and shapes) terminated by a "blob" line, followed by
/// the tensor data as little-endian 64-bit reals concatenated in manifest
/// order. save/load round-trips are bit-exact.
void save_weights(const Weights& weights, const std::string& path);
Weights load_weights(const std::string& path);

}  // namespace gim
