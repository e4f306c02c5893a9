#include "cyclehash/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "cyclehash/errors.hpp"
#include "cyclehash/kernels.hpp"

namespace cyclehash {

HashCode::HashCode(std::size_t bits) : bits_(bits) {
  if (bits == 0 || bits > kMaxCodeBits) {
    throw ShapeError("HashCode: length must be in [1, 256], got " + std::to_string(bits));
  }
}

HashCode HashCode::from_values(std::span<const double> values) {
  HashCode code(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) code.set(i, values[i] >= 0.5);
  return code;
}

HashCode HashCode::from_bits(std::span<const std::uint8_t> bits) {
  HashCode code(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) code.set(i, bits[i] != 0);
  return code;
}

void HashCode::set(std::size_t i, bool on) {
  const std::uint64_t mask = std::uint64_t{1} << (i % 64);
  if (on) {
    words_[i / 64] |= mask;
  } else {
    words_[i / 64] &= ~mask;
  }
}

std::vector<std::uint8_t> HashCode::unpack() const {
  std::vector<std::uint8_t> out(bits_);
  for (std::size_t i = 0; i < bits_; ++i) out[i] = get(i) ? 1 : 0;
  return out;
}

std::string HashCode::to_string() const {
  std::string s(bits_, '0');
  for (std::size_t i = 0; i < bits_; ++i) {
    if (get(i)) s[i] = '1';
  }
  return s;
}

std::uint32_t hamming_distance(const HashCode& a, const HashCode& b) {
  if (a.bits() != b.bits()) {
    throw ShapeError("hamming_distance: code lengths " + std::to_string(a.bits()) + " and " +
                     std::to_string(b.bits()) + " differ");
  }
  std::uint32_t d = 0;
  const auto wa = a.words();
  const auto wb = b.words();
  for (std::size_t w = 0; w < wa.size(); ++w) d += std::popcount(wa[w] ^ wb[w]);
  return d;
}

namespace {

// Stable counting sort of indices by distance in [0, bits].
void order_by_distance(std::span<const std::uint32_t> dist, std::size_t bits,
                       std::vector<std::size_t>& order, std::vector<std::size_t>& offsets) {
  offsets.assign(bits + 2, 0);
  for (auto d : dist) ++offsets[d + 1];
  for (std::size_t t = 1; t < offsets.size(); ++t) offsets[t] += offsets[t - 1];
  order.resize(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) order[offsets[dist[i]]++] = i;
}

std::vector<std::uint64_t> flatten(std::span<const HashCode> codes, std::size_t words) {
  std::vector<std::uint64_t> flat;
  flat.reserve(codes.size() * words);
  for (const auto& c : codes) {
    const auto w = c.words();
    flat.insert(flat.end(), w.begin(), w.end());
  }
  return flat;
}

}  // namespace

std::vector<std::size_t> rank(const HashCode& query, std::span<const HashCode> database) {
  if (database.empty()) throw std::invalid_argument("rank: empty database");
  std::vector<std::uint32_t> dist(database.size());
  for (std::size_t i = 0; i < database.size(); ++i) dist[i] = hamming_distance(query, database[i]);
  std::vector<std::size_t> order, offsets;
  order_by_distance(dist, query.bits(), order, offsets);
  return order;
}

std::vector<HashCode> pack_codes(const Tensor& binary) {
  const std::size_t n = binary.rows(), k = binary.cols();
  const auto values = binary.values();
  std::vector<HashCode> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(HashCode::from_values(values.subspan(i * k, k)));
  return out;
}

std::vector<HashCode> encode_codes(const Encoder& encoder, const Matrix& features) {
  constexpr std::size_t kBatch = 512;
  std::vector<HashCode> out;
  out.reserve(features.rows());
  for (std::size_t begin = 0; begin < features.rows(); begin += kBatch) {
    const std::size_t end = std::min(features.rows(), begin + kBatch);
    const auto data = features.data().subspan(begin * features.cols(),
                                              (end - begin) * features.cols());
    const Tensor batch = Tensor::constant({end - begin, features.cols()},
                                          std::vector<double>(data.begin(), data.end()));
    auto codes = pack_codes(encoder.binarize(batch));
    out.insert(out.end(), codes.begin(), codes.end());
  }
  return out;
}

bool is_relevant(const LabelSet& a, const LabelSet& b) {
  for (auto x : a) {
    for (auto y : b) {
      if (x == y) return true;
    }
  }
  return false;
}

std::vector<LabelSet> single_labels(std::span<const std::int32_t> labels) {
  std::vector<LabelSet> out;
  out.reserve(labels.size());
  for (auto l : labels) out.push_back({l});
  return out;
}

std::string direction_name(Direction d) {
  return d == Direction::kImageToText ? "i2t" : "t2i";
}

Direction parse_direction(const std::string& s) {
  if (s == "i2t") return Direction::kImageToText;
  if (s == "t2i") return Direction::kTextToImage;
  throw std::invalid_argument("unknown direction '" + s + "' (expected i2t or t2i)");
}

void RetrievalTask::validate() const {
  if (query_codes.empty() || database_codes.empty()) {
    throw std::invalid_argument("retrieval task: empty query or database set");
  }
  if (query_codes.size() != query_labels.size() ||
      database_codes.size() != database_labels.size()) {
    throw std::invalid_argument("retrieval task: code and label counts differ");
  }
  const std::size_t bits = query_codes.front().bits();
  for (const auto& c : query_codes) {
    if (c.bits() != bits) throw ShapeError("retrieval task: mixed code lengths");
  }
  for (const auto& c : database_codes) {
    if (c.bits() != bits) throw ShapeError("retrieval task: mixed code lengths");
  }
  auto check_labels = [](const std::vector<LabelSet>& sets) {
    for (const auto& s : sets) {
      for (auto l : s) {
        if (l < 0) throw std::invalid_argument("retrieval task: negative label");
      }
    }
  };
  check_labels(query_labels);
  check_labels(database_labels);
}

RetrievalTask make_task(const CrossModalModel& model, Direction direction,
                        const Matrix& query_features, std::span<const std::int32_t> query_labels,
                        const Matrix& database_features,
                        std::span<const std::int32_t> database_labels) {
  const bool i2t = direction == Direction::kImageToText;
  const Encoder& query_encoder = i2t ? model.u.encoder : model.v.encoder;
  const Encoder& db_encoder = i2t ? model.v.encoder : model.u.encoder;
  RetrievalTask task;
  task.direction = direction;
  task.query_codes = encode_codes(query_encoder, query_features);
  task.database_codes = encode_codes(db_encoder, database_features);
  task.query_labels = single_labels(query_labels);
  task.database_labels = single_labels(database_labels);
  task.validate();
  return task;
}

double average_precision(std::span<const std::uint8_t> relevance, std::size_t relevant_count) {
  if (relevant_count == 0) {
    throw std::invalid_argument("average_precision: no relevant items, AP is undefined");
  }
  std::size_t hits = 0;
  long double total = 0.0L;  // extended precision so short sums round correctly
  for (std::size_t r = 0; r < relevance.size(); ++r) {
    if (relevance[r]) {
      ++hits;
      total += static_cast<long double>(hits) / static_cast<long double>(r + 1);
    }
  }
  if (hits != relevant_count) {
    throw std::invalid_argument("average_precision: relevant count does not match flags");
  }
  return static_cast<double>(total / static_cast<long double>(relevant_count));
}

std::vector<std::size_t> default_r_values(std::size_t database_size) {
  std::vector<std::size_t> out;
  for (std::size_t base = 1; base < database_size; base *= 10) {
    for (std::size_t m : {1, 2, 5}) {
      if (base * m < database_size) out.push_back(base * m);
    }
  }
  out.push_back(database_size);
  return out;
}

namespace {

struct QueryResult {
  std::optional<double> ap;
  std::vector<std::size_t> hits_at_r;
  std::vector<std::size_t> relevant_at_distance;
  std::vector<std::size_t> count_at_distance;
  std::size_t relevant_total = 0;
};

}  // namespace

MetricsReport evaluate(const RetrievalTask& task, const MetricsOptions& options) {
  task.validate();
  const std::size_t bits = task.query_codes.front().bits();
  const std::size_t words = task.query_codes.front().word_count();
  const std::size_t n_db = task.database_codes.size();
  const std::size_t n_q = task.query_codes.size();
  const std::vector<std::size_t> r_values =
      options.r_values.empty() ? default_r_values(n_db) : options.r_values;
  for (auto r : r_values) {
    if (r == 0 || r > n_db) {
      throw std::invalid_argument("precision@R: R=" + std::to_string(r) +
                                  " outside [1, database size]");
    }
  }
  const std::size_t cutoff =
      options.map_cutoff == 0 ? n_db : std::min(options.map_cutoff, n_db);

  // (R, slot) pairs sorted by R so each ranking is scanned once.
  std::vector<std::pair<std::size_t, std::size_t>> sorted_r;
  for (std::size_t j = 0; j < r_values.size(); ++j) sorted_r.emplace_back(r_values[j], j);
  std::sort(sorted_r.begin(), sorted_r.end());

  const std::vector<std::uint64_t> db_words = flatten(task.database_codes, words);
  std::vector<QueryResult> results(n_q);
  const bool fan_out = kernels::default_backend() == kernels::Backend::kOpenMP;

#pragma omp parallel if (fan_out)
  {
    std::vector<std::uint32_t> dist(n_db);
    std::vector<std::size_t> order, offsets;
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t qi = 0; qi < static_cast<std::ptrdiff_t>(n_q); ++qi) {
      const auto q = static_cast<std::size_t>(qi);
      kernels::serial::hamming_row(task.query_codes[q].words(), db_words, words, dist);
      order_by_distance(dist, bits, order, offsets);

      QueryResult& res = results[q];
      res.relevant_at_distance.assign(bits + 1, 0);
      res.count_at_distance.assign(bits + 1, 0);
      for (std::size_t i = 0; i < n_db; ++i) {
        const bool r = is_relevant(task.query_labels[q], task.database_labels[i]);
        ++res.count_at_distance[dist[i]];
        if (r) {
          ++res.relevant_at_distance[dist[i]];
          ++res.relevant_total;
        }
      }
      std::size_t hits = 0;
      long double ap_sum = 0.0L;
      std::size_t next_r = 0;
      res.hits_at_r.assign(r_values.size(), 0);
      for (std::size_t pos = 0; pos < n_db; ++pos) {
        if (is_relevant(task.query_labels[q], task.database_labels[order[pos]])) {
          ++hits;
          if (pos < cutoff) {
            ap_sum += static_cast<long double>(hits) / static_cast<long double>(pos + 1);
          }
        }
        if (pos + 1 == cutoff && hits > 0) {
          res.ap = static_cast<double>(ap_sum / static_cast<long double>(hits));
        }
        while (next_r < sorted_r.size() && sorted_r[next_r].first == pos + 1) {
          res.hits_at_r[sorted_r[next_r].second] = hits;
          ++next_r;
        }
      }
    }
  }

  MetricsReport report;
  double ap_total = 0.0;
  for (const auto& res : results) {
    report.per_query_ap.push_back(res.ap);
    if (res.ap) {
      ap_total += *res.ap;
      ++report.valid_queries;
    }
  }
  if (report.valid_queries == 0) {
    throw std::invalid_argument("retrieval: no query has a relevant database item");
  }
  report.map = ap_total / static_cast<double>(report.valid_queries);

  std::size_t relevant_total = 0;
  for (const auto& res : results) relevant_total += res.relevant_total;
  std::size_t retrieved = 0, true_pos = 0;
  for (std::size_t t = 0; t <= bits; ++t) {
    for (const auto& res : results) {
      retrieved += res.count_at_distance[t];
      true_pos += res.relevant_at_distance[t];
    }
    const double precision =
        retrieved == 0 ? 0.0 : static_cast<double>(true_pos) / static_cast<double>(retrieved);
    const double recall = static_cast<double>(true_pos) / static_cast<double>(relevant_total);
    report.pr_curve.emplace_back(recall, precision);
  }

  for (std::size_t j = 0; j < r_values.size(); ++j) {
    double total = 0.0;
    for (const auto& res : results) {
      total += static_cast<double>(res.hits_at_r[j]) / static_cast<double>(r_values[j]);
    }
    report.prec_at_r.emplace_back(r_values[j], total / static_cast<double>(n_q));
  }
  return report;
}

double mean_average_precision(const RetrievalTask& task, std::size_t map_cutoff) {
  return evaluate(task, {.map_cutoff = map_cutoff, .r_values = {1}}).map;
}

std::vector<std::pair<double, double>> precision_recall_curve(const RetrievalTask& task) {
  return evaluate(task, {.r_values = {1}}).pr_curve;
}

std::vector<std::pair<std::size_t, double>> precision_at_top_r(
    const RetrievalTask& task, const std::vector<std::size_t>& r_values) {
  if (r_values.empty()) throw std::invalid_argument("precision@R: no R values given");
  return evaluate(task, {.r_values = r_values}).prec_at_r;
}

std::string report_to_json(const MetricsReport& report, int indent) {
  nlohmann::ordered_json j;
  j["map"] = report.map;
  j["pr_curve"] = nlohmann::json::array();
  for (const auto& [recall, precision] : report.pr_curve) {
    j["pr_curve"].push_back({{"recall", recall}, {"precision", precision}});
  }
  j["prec_at_r"] = nlohmann::json::array();
  for (const auto& [r, precision] : report.prec_at_r) {
    j["prec_at_r"].push_back({{"r", r}, {"precision", precision}});
  }
  j["per_query_ap"] = nlohmann::json::array();
  for (const auto& ap : report.per_query_ap) {
    if (ap) {
      j["per_query_ap"].push_back(*ap);
    } else {
      j["per_query_ap"].push_back(nullptr);
    }
  }
  return j.dump(indent);
}

void write_pr_csv(const std::filesystem::path& path, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out.precision(17);
  out << "radius,recall,precision\n";
  for (std::size_t t = 0; t < report.pr_curve.size(); ++t) {
    out << t << ',' << report.pr_curve[t].first << ',' << report.pr_curve[t].second << '\n';
  }
}

void write_prec_at_r_csv(const std::filesystem::path& path, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out.precision(17);
  out << "r,precision\n";
  for (const auto& [r, p] : report.prec_at_r) out << r << ',' << p << '\n';
}

void write_report(const std::filesystem::path& dir, const std::string& stem,
                  const MetricsReport& report) {
  std::filesystem::create_directories(dir);
  std::ofstream json(dir / (stem + ".json"));
  if (!json) throw FormatError("cannot write report in " + dir.string());
  json << report_to_json(report) << '\n';
  write_pr_csv(dir / (stem + "_pr.csv"), report);
  write_prec_at_r_csv(dir / (stem + "_prec_at_r.csv"), report);
}

void write_codes_csv(const std::filesystem::path& path, std::span<const HashCode> codes,
                     std::span<const LabelSet> labels) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "index,label,code\n";
  for (std::size_t i = 0; i < codes.size(); ++i) {
    out << i << ',';
    for (std::size_t j = 0; j < labels[i].size(); ++j) {
      if (j) out << ';';
      out << labels[i][j];
    }
    out << ',' << codes[i].to_string() << '\n';
  }
}

}  // namespace cyclehash
