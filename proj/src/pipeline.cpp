#include "cyclehash/pipeline.hpp"

#include <stdexcept>
#include <unordered_map>

#include "cyclehash/itq.hpp"
#include "cyclehash/trainer.hpp"

namespace cyclehash {

namespace {

constexpr std::uint64_t kBaselineStream = 3;

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

ExperimentData prepare_data(const RunConfig& cfg, const LabeledFeatureSet& set_u,
                            const LabeledFeatureSet& set_v) {
  return {split(set_u, cfg.database_fraction, cfg.seed()),
          split(set_v, cfg.database_fraction, cfg.seed())};
}

RetrievalTask direction_task(const CrossModalModel& model, const ExperimentData& data,
                             Direction direction) {
  const bool i2t = direction == Direction::kImageToText;
  const LabeledFeatureSet& q = i2t ? data.u.queries : data.v.queries;
  const LabeledFeatureSet& db = i2t ? data.v.database : data.u.database;
  return make_task(model, direction, q.features, q.labels, db.features, db.labels);
}

RetrievalTask random_code_task(const ExperimentData& data, Direction direction,
                               std::size_t bits, std::uint64_t seed) {
  const bool i2t = direction == Direction::kImageToText;
  const LabeledFeatureSet& q = i2t ? data.u.queries : data.v.queries;
  const LabeledFeatureSet& db = i2t ? data.v.database : data.u.database;
  auto rng = derived_rng(seed, kBaselineStream, static_cast<std::uint64_t>(direction));
  auto draw = [&](std::size_t n, std::vector<HashCode>& codes) {
    for (std::size_t i = 0; i < n; ++i) {
      HashCode c(bits);
      for (std::size_t k = 0; k < bits; ++k) c.set(k, (rng() >> 63) != 0);
      codes.push_back(c);
    }
  };
  RetrievalTask task;
  task.direction = direction;
  draw(q.size(), task.query_codes);
  draw(db.size(), task.database_codes);
  for (auto l : q.labels) task.query_labels.push_back({l});
  for (auto l : db.labels) task.database_labels.push_back({l});
  return task;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> match_pairs(
    const LabeledFeatureSet& a, const LabeledFeatureSet& b) {
  std::unordered_map<std::int64_t, std::size_t> where;
  for (std::size_t j = 0; j < b.size(); ++j) where.emplace(b.pairing_ids[j], j);
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (auto it = where.find(a.pairing_ids[i]); it != where.end()) {
      out.first.push_back(i);
      out.second.push_back(it->second);
    }
  }
  return out;
}

std::vector<TracePoint> reconstruction_trace(ReconMethod method, const CrossModalModel* model,
                                             const ExperimentData& data, std::size_t bits,
                                             std::size_t stride, std::uint64_t seed) {
  const LabeledFeatureSet& eval_u = data.u.queries;
  if (method == ReconMethod::kCycDgh) {
    if (!model) throw std::invalid_argument("reconstruction_trace: cycdgh needs a trained model");
    const Matrix rec = cycdgh_reconstruct(model->u, eval_u.features);
    return reconstruction_error_trace(squared_errors(eval_u.features, rec), stride);
  }
  const auto [train_u, train_v] = match_pairs(data.u.database, data.v.database);
  const auto [test_u, test_v] = match_pairs(eval_u, data.v.queries);
  if (train_u.empty() || test_u.empty()) {
    throw std::invalid_argument("reconstruction_trace: itq needs co-indexed u/v samples");
  }
  const CrossModalItq itq =
      fit_cross_modal_itq(take_rows(data.u.database.features, train_u),
                          take_rows(data.v.database.features, train_v), bits,
                          kDefaultItqIterations, seed);
  const Matrix target = take_rows(eval_u.features, test_u);
  const Matrix rec = itq_cross_reconstruct(itq, take_rows(data.v.queries.features, test_v));
  return reconstruction_error_trace(squared_errors(target, rec), stride);
}

}  // namespace cyclehash
