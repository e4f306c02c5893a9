#include "cyclehash/reconstruction.hpp"

#include <fstream>
#include <stdexcept>

#include "cyclehash/errors.hpp"

namespace cyclehash {

std::string recon_method_name(ReconMethod m) {
  return m == ReconMethod::kCycDgh ? "cycdgh" : "itq";
}

ReconMethod parse_recon_method(const std::string& s) {
  if (s == "cycdgh") return ReconMethod::kCycDgh;
  if (s == "itq") return ReconMethod::kItq;
  throw std::invalid_argument("unknown method '" + s + "' (expected cycdgh or itq)");
}

std::vector<TracePoint> reconstruction_error_trace(std::span<const double> squared_errors,
                                                   std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("reconstruction trace: stride must be positive");
  std::vector<TracePoint> trace;
  double total = 0.0;
  for (std::size_t i = 0; i < squared_errors.size(); ++i) {
    total += squared_errors[i];
    const std::size_t seen = i + 1;
    if (seen % stride == 0 || seen == squared_errors.size()) {
      trace.push_back({seen, total / static_cast<double>(seen)});
    }
  }
  return trace;
}

std::vector<double> squared_errors(const Matrix& x, const Matrix& reconstructed) {
  if (x.rows() != reconstructed.rows() || x.cols() != reconstructed.cols()) {
    throw ShapeError("squared_errors: shapes differ");
  }
  std::vector<double> out(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double r = x(i, j) - reconstructed(i, j);
      out[i] += r * r;
    }
  }
  return out;
}

Matrix cycdgh_reconstruct(const ModalityModel& model, const Matrix& x) {
  const Tensor xt = to_tensor(x);
  return to_matrix(model.decoder.decode(model.encoder.binarize(xt)));
}

HashCode CrossModalItq::encode_source(std::span<const double> x_source) const {
  if (x_source.size() != source_mean.size()) {
    throw ShapeError("cross-modal ITQ: source dimension mismatch");
  }
  HashCode code(target.bits);
  for (std::size_t k = 0; k < target.bits; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x_source.size(); ++j) {
      acc += (x_source[j] - source_mean[j]) * source_map(j, k);
    }
    code.set(k, acc >= 0.0);
  }
  return code;
}

CrossModalItq fit_cross_modal_itq(const Matrix& target, const Matrix& source, std::size_t bits,
                                  std::size_t iterations, std::uint64_t seed) {
  if (target.rows() != source.rows()) {
    throw ShapeError("cross-modal ITQ: target and source need co-indexed rows");
  }
  CrossModalItq out;
  out.target = itq_train(target, bits, iterations, seed);
  const Matrix codes_space = itq_project(out.target, target) * out.target.rotation;

  const std::size_t n = source.rows(), d = source.cols();
  out.source_mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out.source_mean[j] += source(i, j);
  }
  for (auto& m : out.source_mean) m /= static_cast<double>(n);
  Matrix centered = source;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered(i, j) -= out.source_mean[j];
  }
  // Ridge-regularized least squares onto the rotated target projections.
  Matrix gram = centered.transposed() * centered;
  double trace = 0.0;
  for (std::size_t j = 0; j < d; ++j) trace += gram(j, j);
  const double ridge = 1e-8 * std::max(trace / static_cast<double>(d), 1e-300);
  for (std::size_t j = 0; j < d; ++j) gram(j, j) += ridge;
  out.source_map = solve_spd(gram, centered.transposed() * codes_space);
  return out;
}

Matrix itq_cross_reconstruct(const CrossModalItq& model, const Matrix& source) {
  Matrix out(source.rows(), model.target.dim());
  for (std::size_t i = 0; i < source.rows(); ++i) {
    const auto x = model.reconstruct_target(model.encode_source(source.row(i)));
    std::copy(x.begin(), x.end(), out.row(i).begin());
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, std::span<const TracePoint> trace) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out.precision(17);
  out << "samples_seen,mean_l2\n";
  for (const auto& p : trace) out << p.samples_seen << ',' << p.mean_l2 << '\n';
}

}  // namespace cyclehash
