// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace memdef::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// `memdef <command> --config <file> [--key value ...]`. Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Nearest-rank percentile of `values` (p in (0,100]); the input need not be sorted.
double nearest_rank_percentile(std::vector<double> values, double p);

}  // namespace memdef::cli
