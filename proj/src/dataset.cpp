#include "cyclehash/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "cyclehash/errors.hpp"

namespace cyclehash {

static_assert(std::endian::native == std::endian::little,
              "feature files are read and written as native little-endian");

void LabeledFeatureSet::validate() const {
  if (labels.size() != features.rows()) {
    throw FormatError("feature set: " + std::to_string(labels.size()) + " labels for " +
                      std::to_string(features.rows()) + " rows");
  }
  if (!pairing_ids.empty() && pairing_ids.size() != features.rows()) {
    throw FormatError("feature set: pairing id count differs from row count");
  }
  for (auto l : labels) {
    if (l < 0) throw FormatError("feature set: negative label");
  }
  for (double v : features.data()) {
    if (!std::isfinite(v)) throw FormatError("feature set: non-finite feature value");
  }
}

LabeledFeatureSet LabeledFeatureSet::subset(std::span<const std::size_t> rows) const {
  LabeledFeatureSet out;
  out.modality = modality;
  out.features = Matrix(rows.size(), dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(labels[rows[i]]);
    out.pairing_ids.push_back(pairing_ids.empty() ? static_cast<std::int64_t>(rows[i])
                                                  : pairing_ids[rows[i]]);
  }
  return out;
}

void SynthConfig::validate() const {
  if (n_classes == 0 || samples_per_class == 0 || latent_dim == 0 || dim_u == 0 ||
      dim_v == 0) {
    throw ConfigError("synthetic config: counts and dimensions must be positive");
  }
  if (!(noise >= 0.0) || !(separation > 0.0)) {
    throw ConfigError("synthetic config: noise must be >= 0 and separation > 0");
  }
}

std::pair<LabeledFeatureSet, LabeledFeatureSet> generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t L = cfg.latent_dim;
  Matrix centers(cfg.n_classes, L);
  for (auto& c : centers.storage()) c = cfg.separation * normal(rng);

  auto make = [&](Modality modality, std::size_t dim) {
    Matrix map(dim, L);
    const double gain = 1.0 / std::sqrt(static_cast<double>(L));
    for (auto& a : map.storage()) a = gain * normal(rng);
    std::vector<double> offset(dim);
    for (auto& b : offset) b = normal(rng);

    LabeledFeatureSet set;
    set.modality = modality;
    const std::size_t n = cfg.n_classes * cfg.samples_per_class;
    set.features = Matrix(n, dim);
    std::vector<double> latent(L);
    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
      for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
        const std::size_t row = c * cfg.samples_per_class + s;
        for (std::size_t l = 0; l < L; ++l) latent[l] = centers(c, l) + cfg.noise * normal(rng);
        auto out = set.features.row(row);
        for (std::size_t i = 0; i < dim; ++i) {
          double acc = offset[i];
          for (std::size_t l = 0; l < L; ++l) acc += map(i, l) * latent[l];
          out[i] = acc;
        }
        set.labels.push_back(static_cast<std::int32_t>(c));
        set.pairing_ids.push_back(static_cast<std::int64_t>(row));
      }
    }
    return set;
  };

  auto u = make(Modality::kU, cfg.dim_u);
  auto v = make(Modality::kV, cfg.dim_v);
  return {std::move(u), std::move(v)};
}

namespace {

Modality parse_modality(const std::string& s) {
  if (s == "u") return Modality::kU;
  if (s == "v") return Modality::kV;
  throw FormatError("unknown modality tag '" + s + "'");
}

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

LabeledFeatureSet load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  LabeledFeatureSet set;
  std::vector<double> values;
  std::size_t dim = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string key, tag;
      if (ss >> key >> tag && key == "modality") set.modality = parse_modality(tag);
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 2) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected features followed by a label");
    }
    if (rows == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": row has " +
                        std::to_string(fields.size() - 1) + " features, expected " +
                        std::to_string(dim));
    }
    try {
      for (std::size_t i = 0; i < dim; ++i) {
        std::size_t used = 0;
        const double v = std::stod(fields[i], &used);
        if (fields[i].find_first_not_of(" \t", used) != std::string::npos || !std::isfinite(v)) {
          throw FormatError("bad value");
        }
        values.push_back(v);
      }
      set.labels.push_back(static_cast<std::int32_t>(std::stol(fields[dim])));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": unparsable or non-finite value");
    }
    ++rows;
  }
  if (rows == 0) throw FormatError(path.string() + ": feature file has no samples");
  set.features = Matrix(rows, dim, std::move(values));
  set.pairing_ids.resize(rows);
  std::iota(set.pairing_ids.begin(), set.pairing_ids.end(), 0);
  set.validate();
  return set;
}

LabeledFeatureSet load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw FormatError(path.string() + ": missing header");
  std::istringstream hs(header);
  long long n = -1, d = -1;
  std::string tag, extra;
  if (!(hs >> n >> d >> tag) || (hs >> extra)) {
    throw FormatError(path.string() + ": malformed header '" + header + "'");
  }
  if (n == 0) throw FormatError(path.string() + ": feature file has no samples");
  if (n < 0 || d <= 0) throw FormatError(path.string() + ": invalid n or d in header");

  LabeledFeatureSet set;
  set.modality = parse_modality(tag);
  const auto rows = static_cast<std::size_t>(n);
  const auto dim = static_cast<std::size_t>(d);
  set.features = Matrix(rows, dim);
  set.labels.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    auto row = set.features.row(i);
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(dim * sizeof(double)));
    std::int32_t label = 0;
    in.read(reinterpret_cast<char*>(&label), sizeof(label));
    if (!in) {
      throw FormatError(path.string() + ": truncated at record " + std::to_string(i));
    }
    set.labels[i] = label;
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes after " + std::to_string(rows) +
                      " records");
  }
  set.pairing_ids.resize(rows);
  std::iota(set.pairing_ids.begin(), set.pairing_ids.end(), 0);
  set.validate();
  return set;
}

}  // namespace

void save_features(const std::filesystem::path& path, const LabeledFeatureSet& set) {
  set.validate();
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << set.size() << ' ' << set.dim() << ' ' << modality_name(set.modality) << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto row = set.features.row(i);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
    const std::int32_t label = set.labels[i];
    out.write(reinterpret_cast<const char*>(&label), sizeof(label));
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

void save_features_csv(const std::filesystem::path& path, const LabeledFeatureSet& set) {
  set.validate();
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "# modality " << modality_name(set.modality) << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (double v : set.features.row(i)) out << v << ',';
    out << set.labels[i] << '\n';
  }
}

LabeledFeatureSet load_features(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return load_csv(path);
  return load_binary(path);
}

Split split(const LabeledFeatureSet& set, double database_fraction, std::uint64_t seed) {
  if (!(database_fraction > 0.0 && database_fraction < 1.0)) {
    throw std::invalid_argument("split: database fraction must lie in (0, 1)");
  }
  const std::size_t n = set.size();
  const auto n_db = static_cast<std::size_t>(std::floor(database_fraction * static_cast<double>(n)));
  if (n_db == 0 || n_db == n) throw std::invalid_argument("split: one side would be empty");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // Class coverage: a class with >= 2 members missing from one side takes a
  // slot from a class that has a spare member there.
  auto count_side = [&](std::size_t begin, std::size_t end) {
    std::map<std::int32_t, std::size_t> counts;
    for (std::size_t i = begin; i < end; ++i) ++counts[set.labels[order[i]]];
    return counts;
  };
  std::map<std::int32_t, std::size_t> totals;
  for (auto l : set.labels) ++totals[l];
  for (int side = 0; side < 2; ++side) {
    const std::size_t lo = side == 0 ? 0 : n_db;
    const std::size_t hi = side == 0 ? n_db : n;
    const std::size_t olo = side == 0 ? n_db : 0;
    const std::size_t ohi = side == 0 ? n : n_db;
    for (const auto& [label, total] : totals) {
      auto here = count_side(lo, hi);
      if (total < 2 || here.count(label)) continue;
      std::size_t donor = hi;
      for (std::size_t i = lo; i < hi; ++i) {
        if (here[set.labels[order[i]]] >= 2) {
          donor = i;
          break;
        }
      }
      if (donor == hi) continue;
      for (std::size_t j = olo; j < ohi; ++j) {
        if (set.labels[order[j]] == label) {
          std::swap(order[donor], order[j]);
          break;
        }
      }
    }
  }

  const std::vector<std::size_t> db(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_db));
  const std::vector<std::size_t> qs(order.begin() + static_cast<std::ptrdiff_t>(n_db), order.end());
  return {set.subset(db), set.subset(qs)};
}

}  // namespace cyclehash
