#pragma once

#include "geopre/training/ablation.hpp"

#include <span>
#include <string>
#include <vector>

namespace geopre::training {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation; 0 for a single value
  std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

/// "mean(std)" after multiplying by `scale`; a single value prints without
/// the parenthesised std, an empty one as "-".
std::string format_cell(std::span<const double> values, double scale = 100.0, int decimals = 2);

/// Fixed-width text rendering, one row per metric.
std::string format_table(const Table& t, double scale = 100.0, int decimals = 2);
/// CSV with mean and std columns per variant.
std::string table_csv(const Table& t);

/// Backbone comparison from Stage-2 run results: one column per
/// (backbone, geometry source) pair, rows per query mode. Runs on different
/// datasets are rejected.
Table stage2_table(std::span<const RunResult> runs);

}  // namespace geopre::training
