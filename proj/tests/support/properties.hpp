/*
 * Copyright 2026 The PodSeal Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "podseal/measurement_log.hpp"

namespace podseal::testing {

struct PropertyReport {
  std::size_t cases = 0;
  std::size_t checks = 0;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

/// Randomized layered-trust suite: exclusion soundness, pod isolation,
/// unknown-pod escalation, sticky Untrusted, determinism, and agreement
/// with a brute-force reference evaluator.
PropertyReport check_layered_trust(std::uint64_t seed, std::size_t cases);

struct RandomLog {
  std::vector<ml::MeasurementEntry> entries;
  Digest pcr10;  // live emulated register after appending every entry
};

/// A log of exactly `n` entries (boot aggregate first) built through the
/// emulated TPM.
RandomLog random_log(std::mt19937_64& rng, std::size_t n);

enum class Mutation { kInsert, kDelete, kReorder, kBitFlip };
const char* to_string(Mutation m);

/// Applies one mutation; the result always differs from `entries`.
std::vector<ml::MeasurementEntry> mutate(const std::vector<ml::MeasurementEntry>& entries, Mutation m,
                                         std::mt19937_64& rng);

/// Runs the standalone oracle script over named ascii logs. Returns one
/// output line per log, in input order.
std::vector<std::string> run_replay_oracle(const std::vector<std::pair<std::string, std::string>>& logs);

}  // namespace podseal::testing
