#include "geopre/training/report.hpp"

#include "geopre/common/error.hpp"
#include "geopre/dataio/batch.hpp"
#include "geopre/operators/operator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace geopre::training {

MeanStd mean_std(std::span<const double> values) {
  MeanStd m;
  m.n = values.size();
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

std::string format_cell(std::span<const double> values, double scale, int decimals) {
  if (values.empty()) return "-";
  const MeanStd m = mean_std(values);
  char buf[96];
  if (m.n == 1)
    std::snprintf(buf, sizeof buf, "%.*f", decimals, m.mean * scale);
  else
    std::snprintf(buf, sizeof buf, "%.*f(%.*f)", decimals, m.mean * scale, decimals, m.std * scale);
  return buf;
}

std::string format_table(const Table& t, double scale, int decimals) {
  std::vector<std::vector<std::string>> grid;
  grid.push_back({t.title});
  for (const auto& c : t.columns) grid.back().push_back(c);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    grid.push_back({t.rows[r]});
    const double s = r < t.row_scale.size() ? t.row_scale[r] : scale;
    for (const auto& cell : t.cells[r]) grid.back().push_back(format_cell(cell, s, decimals));
  }
  std::vector<std::size_t> width(grid.front().size(), 0);
  for (const auto& row : grid)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream os;
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      os << row[c] << std::string(width[c] - row[c].size(), ' ');
      os << (c + 1 < row.size() ? "  " : "\n");
    }
  }
  return os.str();
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

}  // namespace

std::string table_csv(const Table& t) {
  std::ostringstream os;
  os << "metric,column,mean,std,n,values\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      const auto& v = t.cells[r][c];
      const MeanStd m = mean_std(v);
      std::string joined;
      for (std::size_t k = 0; k < v.size(); ++k) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", v[k]);
        joined += (k ? ";" : "") + std::string(buf);
      }
      char nums[96];
      std::snprintf(nums, sizeof nums, "%.9g,%.9g,%zu", m.mean, m.std, m.n);
      os << csv_field(t.rows[r]) << ',' << csv_field(t.columns[c]) << ',' << (v.empty() ? std::string(",,0") : nums)
         << ',' << joined << '\n';
    }
  }
  return os.str();
}

Table stage2_table(std::span<const RunResult> runs) {
  require(!runs.empty(), Errc::invalid_argument, "report needs at least one completed run");
  for (const auto& r : runs) {
    require(r.stage == 2, Errc::mismatch, "report: not a stage-2 run");
    require(r.dataset_checksum == runs.front().dataset_checksum, Errc::mismatch,
            "report: runs were trained on different datasets");
  }
  // Columns ordered by backbone, raw before latent.
  std::map<std::pair<int, int>, std::vector<const RunResult*>> groups;
  std::vector<std::string> modes;
  for (const auto& r : runs) {
    const auto cfg = train_config(r.config);
    groups[{static_cast<int>(cfg.op.backbone), static_cast<int>(cfg.op.geom)}].push_back(&r);
    for (auto m : cfg.eval_modes) {
      const auto name = dataio::to_string(m);
      if (std::find(modes.begin(), modes.end(), name) == modes.end()) modes.push_back(name);
    }
  }
  Table t;
  t.title = "rel_l2 (x1e-2)";
  for (const auto& m : modes) {
    t.rows.push_back(m);
    t.row_scale.push_back(100.0);
  }
  t.cells.assign(modes.size(), {});
  for (const auto& [key, members] : groups) {
    std::string name = operators::to_string(static_cast<operators::Backbone>(key.first));
    for (auto& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (static_cast<operators::GeomSource>(key.second) == operators::GeomSource::latent) name += "+VAE";
    t.columns.push_back(name);
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
      std::vector<double> v;
      for (const auto* r : members)
        if (r->metrics.contains(modes[mi])) v.push_back(r->metrics[modes[mi]]["mean"].get<double>());
      t.cells[mi].push_back(std::move(v));
    }
  }
  return t;
}

}  // namespace geopre::training
