#include "uagan/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "uagan/error.hpp"
#include "uagan/random.hpp"

namespace uagan {

int Dataset::num_classes() const {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

void GaussianMixtureSpec::validate() const {
  if (centers.empty()) throw ConfigError("mixture spec: need at least one center");
  if (!(variance > 0.0)) throw ConfigError("mixture spec: variance must be positive");
  if (samples_per_mode == 0) throw ConfigError("mixture spec: samples_per_mode must be >= 1");
}

GaussianMixtureSpec GaussianMixtureSpec::toy() {
  GaussianMixtureSpec spec;
  spec.centers = {{10.0, 10.0}, {10.0, -10.0}, {-10.0, 10.0}, {-10.0, -10.0}};
  spec.variance = 0.5;
  spec.samples_per_mode = 2500;
  return spec;
}

Dataset gen_gaussian_mixture(const GaussianMixtureSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = make_rng(seed, 0x6d6978);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(spec.variance);
  const std::size_t n = spec.centers.size() * spec.samples_per_mode;
  Dataset out{Tensor({n, 2}), {}};
  out.labels.reserve(n);
  std::size_t r = 0;
  for (std::size_t mode = 0; mode < spec.centers.size(); ++mode) {
    for (std::size_t s = 0; s < spec.samples_per_mode; ++s, ++r) {
      out.rows.at(r, 0) = spec.centers[mode][0] + sd * normal(rng);
      out.rows.at(r, 1) = spec.centers[mode][1] + sd * normal(rng);
      out.labels.push_back(static_cast<int>(mode));
    }
  }
  return out;
}

PartitionMode parse_partition_mode(const std::string& name) {
  if (name == "iid") return PartitionMode::kIid;
  if (name == "by-mode") return PartitionMode::kByMode;
  if (name == "by-label") return PartitionMode::kByLabel;
  if (name == "fractions") return PartitionMode::kFractions;
  throw ConfigError("unknown partition mode '" + name + "'");
}

std::string partition_mode_name(PartitionMode mode) {
  switch (mode) {
    case PartitionMode::kIid: return "iid";
    case PartitionMode::kByMode: return "by-mode";
    case PartitionMode::kByLabel: return "by-label";
    case PartitionMode::kFractions: return "fractions";
  }
  return "iid";
}

std::uint64_t SitedDataset::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

namespace {

Dataset gather(const Dataset& data, const std::vector<std::size_t>& idx) {
  const std::size_t dim = data.dim();
  Dataset out{Tensor({idx.size(), dim}), {}};
  out.labels.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = data.rows.row(idx[r]);
    std::copy(src.begin(), src.end(), out.rows.row(r).begin());
    out.labels.push_back(data.labels[idx[r]]);
  }
  return out;
}

}  // namespace

Dataset SitedDataset::merged() const {
  if (sites.empty()) return {};
  const std::size_t dim = sites.front().dim();
  std::size_t n = 0;
  for (const Dataset& s : sites) {
    if (s.dim() != dim) throw ShapeError("merged: sites disagree on row width");
    n += s.size();
  }
  Dataset out{Tensor({n, dim}), {}};
  std::size_t r = 0;
  for (const Dataset& s : sites) {
    for (std::size_t i = 0; i < s.size(); ++i, ++r) {
      auto src = s.rows.row(i);
      std::copy(src.begin(), src.end(), out.rows.row(r).begin());
      out.labels.push_back(s.labels[i]);
    }
  }
  return out;
}

std::vector<std::uint64_t> class_counts(const Dataset& data, std::size_t num_classes) {
  std::vector<std::uint64_t> counts(num_classes, 0);
  for (int y : data.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DomainError("label " + std::to_string(y) + " outside class range");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

SitedDataset partition(const Dataset& data, const PartitionPlan& plan, std::size_t k) {
  if (k < 1) throw ConfigError("partition: K must be >= 1");
  if (data.size() == 0) throw ConfigError("partition: empty dataset");
  if (data.rows.rows() != data.size()) throw ShapeError("partition: row/label count mismatch");
  const std::size_t n = data.size();
  const std::size_t num_classes = static_cast<std::size_t>(data.num_classes());

  std::vector<std::vector<std::size_t>> assignment(k);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(plan.seed, 0x706172);

  switch (plan.mode) {
    case PartitionMode::kIid: {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i = 0; i < n; ++i) assignment[i % k].push_back(order[i]);
      break;
    }
    case PartitionMode::kByMode:
    case PartitionMode::kByLabel: {
      if (k != num_classes) {
        throw ConfigError("partition: " + partition_mode_name(plan.mode) + " needs K = " +
                          std::to_string(num_classes) + " (number of labels), got " +
                          std::to_string(k));
      }
      for (std::size_t i = 0; i < n; ++i) {
        assignment[static_cast<std::size_t>(data.labels[i])].push_back(i);
      }
      break;
    }
    case PartitionMode::kFractions: {
      if (plan.fractions.size() != k) {
        throw ConfigError("partition: need " + std::to_string(k) + " fractions, got " +
                          std::to_string(plan.fractions.size()));
      }
      double total = 0.0;
      for (double f : plan.fractions) {
        if (!(f > 0.0)) throw ConfigError("partition: fractions must be positive");
        total += f;
      }
      if (std::abs(total - 1.0) > 1e-9) throw ConfigError("partition: fractions must sum to 1");
      std::shuffle(order.begin(), order.end(), rng);
      std::size_t start = 0;
      double cum = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        cum += plan.fractions[j];
        const std::size_t end =
            j + 1 == k ? n : std::min(n, static_cast<std::size_t>(std::llround(cum * n)));
        for (std::size_t i = start; i < end; ++i) assignment[j].push_back(order[i]);
        start = std::max(start, end);
      }
      break;
    }
  }

  SitedDataset out;
  std::vector<std::vector<std::uint64_t>> per_class;
  for (std::size_t j = 0; j < k; ++j) {
    if (assignment[j].empty()) {
      throw ConfigError("partition: site " + std::to_string(j) + " received no rows");
    }
    out.sites.push_back(gather(data, assignment[j]));
    out.counts.push_back(assignment[j].size());
    per_class.push_back(class_counts(out.sites.back(), num_classes));
  }
  out.weights = MixtureWeights::from_class_counts(per_class);
  return out;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  const std::size_t dim = data.dim();
  for (std::size_t c = 0; c < dim; ++c) out << "x" << c << ",";
  out << "label\n";
  char buf[64];
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", data.rows.at(r, c));
      out << buf << ",";
    }
    out << data.labels[r] << "\n";
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header");
  const std::size_t fields = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (fields < 2 || line.substr(line.rfind(',') + 1) != "label") {
    throw FormatError(path.string() + ": header must be x0,...,label");
  }
  const std::size_t dim = fields - 1;
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        if (col < dim) {
          values.push_back(std::stod(cell, &used));
        } else {
          labels.push_back(std::stoi(cell, &used));
        }
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad value '" +
                          cell + "'");
      }
      ++col;
    }
    if (col != fields) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(fields) + " fields, got " + std::to_string(col));
    }
  }
  Dataset out{Tensor({labels.size(), dim}, std::move(values)), std::move(labels)};
  return out;
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("idx: cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 16) throw FormatError("idx: " + path.string() + " too short for an image header");
  if (be32(bytes, 0) != 0x00000803) throw FormatError("idx: " + path.string() + " bad image magic");
  IdxImages out;
  out.count = be32(bytes, 4);
  out.rows = be32(bytes, 8);
  out.cols = be32(bytes, 12);
  if (out.rows == 0 || out.cols == 0) throw FormatError("idx: zero image dimension");
  const std::size_t pixels = out.rows * out.cols;
  if (bytes.size() - 16 != out.count * pixels) {
    throw FormatError("idx: " + path.string() + " holds " + std::to_string(bytes.size() - 16) +
                      " pixel bytes, header promises " + std::to_string(out.count * pixels));
  }
  out.pixels = Tensor({out.count, pixels});
  for (std::size_t i = 0; i < out.count * pixels; ++i) {
    out.pixels[i] = static_cast<double>(bytes[16 + i]) / 127.5 - 1.0;
  }
  return out;
}

std::vector<int> read_idx_labels(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 8) throw FormatError("idx: " + path.string() + " too short for a label header");
  if (be32(bytes, 0) != 0x00000801) throw FormatError("idx: " + path.string() + " bad label magic");
  const std::size_t count = be32(bytes, 4);
  if (bytes.size() - 8 != count) {
    throw FormatError("idx: " + path.string() + " holds " + std::to_string(bytes.size() - 8) +
                      " labels, header promises " + std::to_string(count));
  }
  return std::vector<int>(bytes.begin() + 8, bytes.end());
}

Dataset read_idx_dataset(const std::filesystem::path& images,
                         const std::filesystem::path& labels) {
  IdxImages img = read_idx_images(images);
  std::vector<int> lab = read_idx_labels(labels);
  if (lab.size() != img.count) {
    throw FormatError("idx: " + std::to_string(img.count) + " images but " +
                      std::to_string(lab.size()) + " labels");
  }
  return Dataset{std::move(img.pixels), std::move(lab)};
}

}  // namespace uagan
