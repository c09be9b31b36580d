#pragma once

#include "geopre/dataio/record.hpp"

#include <filesystem>
#include <span>

namespace geopre::dataio {

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
  int k_norm = 100;

  double normalize(double v) const { return (v - mean) / std; }
  double denormalize(double v) const { return v * std + mean; }
};

/// Pooled population mean/std over mesh and random-query physics values of
/// the first k_norm physics records in index order.
NormStats compute_norm_stats(std::span<const SampleRecord> train, int k_norm = 100);

void write_norm_stats(const std::filesystem::path& path, const NormStats& n);
NormStats read_norm_stats(const std::filesystem::path& path);

}  // namespace geopre::dataio
