#pragma once

#include "geopre/dataio/norm.hpp"
#include "geopre/dataio/record.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace geopre::dataio {

/// `mixed` draws mesh or random queries per sample with equal probability.
enum class QueryMode { occ_stage1, mesh, random, mixed };
enum class ProxyTask { occupancy, sdf, sv };

QueryMode parse_query_mode(const std::string& s);
std::string to_string(QueryMode m);
ProxyTask parse_proxy_task(const std::string& s);
std::string to_string(ProxyTask p);

struct BatchCounts {
  int geom = 2048;
  int occ_rand = 1024;
  int occ_perturbed = 1024;
  int physics = 4096;
};

/// Standard deviations used to standardise SDF/SV regression targets.
struct ProxyScale {
  double sdf = 1.0;
  double sv = 1.0;
};

struct QuerySample {
  std::int64_t record = 0;
  QueryMode mode = QueryMode::random;  ///< resolved mode (never `mixed`)
  FMatrix geom;     ///< geometry point cloud, G x 2
  FMatrix queries;  ///< Q x 2 for stage 1; Q x (2 + 1 + g) for physics
  FMatrix targets;  ///< Q x 1 (Q x 2 for sv)
};

struct QueryBatch {
  QueryMode mode = QueryMode::random;
  std::vector<QuerySample> samples;
};

/// Assembles one training batch. Stocks are subsampled without replacement
/// when large enough, with replacement otherwise. Physics targets are
/// normalised with `norm`; the occupancy value is appended to each physics
/// query. Pure function of its arguments.
QueryBatch make_query_batch(std::span<const SampleRecord* const> records, QueryMode mode, const BatchCounts& counts,
                            const NormStats* norm, std::uint64_t seed, ProxyTask proxy = ProxyTask::occupancy,
                            const ProxyScale& scale = {});

QuerySample make_query_sample(const SampleRecord& r, QueryMode mode, const BatchCounts& counts, const NormStats* norm,
                              std::uint64_t seed, ProxyTask proxy = ProxyTask::occupancy, const ProxyScale& scale = {});

/// Full-stock sample in stored order (evaluation: no subsampling).
QuerySample make_eval_sample(const SampleRecord& r, QueryMode mode, const NormStats* norm,
                             ProxyTask proxy = ProxyTask::occupancy, const ProxyScale& scale = {});

/// Standard deviations of stored SDF and SV values over the given records.
ProxyScale compute_proxy_scale(std::span<const SampleRecord> records);

/// Indices drawn from [0, stock): without replacement if k <= stock.
std::vector<int> draw_indices(int stock, int k, std::uint64_t seed);

}  // namespace geopre::dataio
