#include "robnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace robnet {

PartitionPolicy partition_policy_from_string(const std::string& name) {
  if (name == "contiguous") return PartitionPolicy::contiguous;
  if (name == "shuffled") return PartitionPolicy::shuffled;
  throw std::invalid_argument("unknown partition policy: " + name);
}

AgentDataSource AgentDataSource::synthetic(Eigen::VectorXd class_mean) {
  AgentDataSource s;
  s.mean_ = std::move(class_mean);
  return s;
}

AgentDataSource AgentDataSource::partition(std::shared_ptr<const Dataset> data,
                                           std::vector<int> indices) {
  if (!data) throw std::invalid_argument("AgentDataSource: null dataset");
  if (indices.empty()) throw std::invalid_argument("AgentDataSource: empty partition");
  AgentDataSource s;
  s.data_ = std::move(data);
  s.indices_ = std::move(indices);
  return s;
}

int AgentDataSource::dim() const {
  return is_synthetic() ? static_cast<int>(mean_.size()) : data_->dim;
}

Sample AgentDataSource::draw(Rng& rng) const {
  if (is_synthetic()) {
    Sample s;
    s.y = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    s.x.resize(mean_.size());
    for (int i = 0; i < mean_.size(); ++i) s.x(i) = s.y * mean_(i) + rng.normal();
    return s;
  }
  const int pick = rng.uniform_int(static_cast<int>(indices_.size()));
  return data_->rows[static_cast<std::size_t>(indices_[static_cast<std::size_t>(pick)])];
}

std::vector<Sample> AgentDataSource::minibatch(int batch_size, Rng& rng) const {
  if (batch_size < 1) throw std::invalid_argument("minibatch: B must be >= 1");
  std::vector<Sample> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) batch.push_back(draw(rng));
  return batch;
}

std::vector<Sample> AgentDataSource::frozen_set(int count, Rng& rng) const {
  if (!is_synthetic()) {
    std::vector<Sample> set;
    set.reserve(indices_.size());
    for (int idx : indices_) set.push_back(data_->rows[static_cast<std::size_t>(idx)]);
    return set;
  }
  std::vector<Sample> set;
  set.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) set.push_back(draw(rng));
  return set;
}

std::vector<AgentDataSource> gen_synthetic_binary(int agents, int dim,
                                                  double heterogeneity,
                                                  std::uint64_t seed, double margin) {
  if (agents < 1 || dim < 1)
    throw std::invalid_argument("gen_synthetic_binary: K and M must be >= 1");
  if (heterogeneity < 0.0)
    throw std::invalid_argument("gen_synthetic_binary: heterogeneity must be >= 0");

  Eigen::VectorXd base = Eigen::VectorXd::Constant(dim, margin / std::sqrt(double(dim)));
  std::vector<AgentDataSource> sources;
  sources.reserve(static_cast<std::size_t>(agents));
  for (int k = 0; k < agents; ++k) {
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(dim);
    if (heterogeneity > 0.0) {
      Rng rng = Rng::keyed(seed, static_cast<std::uint64_t>(k), 0, StreamPurpose::kData);
      for (int i = 0; i < dim; ++i) shift(i) = rng.normal();
      const double n = shift.norm();
      if (n > 0.0) shift *= heterogeneity * rng.uniform01() / n;
    }
    sources.push_back(AgentDataSource::synthetic(base + shift));
  }
  return sources;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

bool parse_double(const std::string& text, double* out) {
  try {
    std::size_t pos = 0;
    *out = std::stod(text, &pos);
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    return pos == text.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

Dataset load_csv_dataset(const std::string& path, const std::string& label_column,
                         bool normalize) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("load_csv_dataset: file not found: " + path);

  std::string line;
  std::vector<std::vector<std::string>> raw;
  while (std::getline(file, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    raw.push_back(split_csv_line(line));
  }
  if (raw.empty()) throw std::runtime_error("load_csv_dataset: empty file: " + path);

  const std::size_t columns = raw[0].size();
  for (std::size_t r = 0; r < raw.size(); ++r) {
    if (raw[r].size() != columns)
      throw std::runtime_error("load_csv_dataset: line " + std::to_string(r + 1) +
                               ": expected " + std::to_string(columns) + " cells");
  }

  // Header detection: any non-numeric first-row cell means a header row.
  bool has_header = false;
  for (const auto& cell : raw[0]) {
    double v;
    if (!parse_double(cell, &v)) {
      has_header = true;
      break;
    }
  }

  int label_idx = -1;
  double idx_value;
  if (parse_double(label_column, &idx_value)) {
    label_idx = static_cast<int>(idx_value);
  } else {
    if (!has_header)
      throw std::runtime_error("load_csv_dataset: label column named '" + label_column +
                               "' but the file has no header row");
    for (std::size_t c = 0; c < columns; ++c)
      if (raw[0][c] == label_column) label_idx = static_cast<int>(c);
    if (label_idx < 0)
      throw std::runtime_error("load_csv_dataset: missing label column '" +
                               label_column + "'");
  }
  if (label_idx < 0 || label_idx >= static_cast<int>(columns))
    throw std::runtime_error("load_csv_dataset: label column index out of range");

  Dataset out;
  out.dim = static_cast<int>(columns) - 1;
  const std::size_t first_row = has_header ? 1 : 0;
  for (std::size_t r = first_row; r < raw.size(); ++r) {
    Sample s;
    s.x.resize(out.dim);
    int f = 0;
    for (std::size_t c = 0; c < columns; ++c) {
      double v;
      if (!parse_double(raw[r][c], &v))
        throw std::runtime_error("load_csv_dataset: line " + std::to_string(r + 1) +
                                 ": non-numeric cell '" + raw[r][c] + "'");
      if (static_cast<int>(c) == label_idx)
        s.y = v;
      else
        s.x(f++) = v;
    }
    out.rows.push_back(std::move(s));
  }
  if (out.rows.empty()) throw std::runtime_error("load_csv_dataset: no data rows");

  if (normalize && out.dim > 0) {
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(out.dim, std::numeric_limits<double>::max());
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(out.dim, std::numeric_limits<double>::lowest());
    for (const auto& s : out.rows) {
      lo = lo.cwiseMin(s.x);
      hi = hi.cwiseMax(s.x);
    }
    for (auto& s : out.rows)
      for (int i = 0; i < out.dim; ++i) {
        const double span = hi(i) - lo(i);
        s.x(i) = span > 0.0 ? (s.x(i) - lo(i)) / span : 0.0;
      }
  }
  return out;
}

std::vector<AgentDataSource> partition_over_agents(
    std::shared_ptr<const Dataset> data, int agents, PartitionPolicy policy,
    std::uint64_t seed) {
  if (!data) throw std::invalid_argument("partition_over_agents: null dataset");
  const int n = data->size();
  if (agents < 1) throw std::invalid_argument("partition_over_agents: K must be >= 1");
  if (agents > n)
    throw std::invalid_argument("partition_over_agents: K exceeds dataset size");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  if (policy == PartitionPolicy::shuffled) {
    Rng rng = Rng::keyed(seed, 0, 0, StreamPurpose::kData);
    for (int i = n - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  }

  std::vector<AgentDataSource> sources;
  sources.reserve(static_cast<std::size_t>(agents));
  const int base = n / agents;
  const int extra = n % agents;
  int cursor = 0;
  for (int k = 0; k < agents; ++k) {
    const int take = base + (k < extra ? 1 : 0);
    std::vector<int> idx(order.begin() + cursor, order.begin() + cursor + take);
    cursor += take;
    sources.push_back(AgentDataSource::partition(data, std::move(idx)));
  }
  return sources;
}

}  // namespace robnet
