#include "rsisc/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "rsisc/error.hpp"

namespace rsisc {

void FusionInput::validate() const {
  if (probabilities.empty()) throw ShapeError("fusion needs at least one model");
  if (!model_ids.empty() && model_ids.size() != probabilities.size())
    throw ShapeError("fusion: model id count does not match probability matrices");
  const Shape& ref = probabilities.front().shape();
  if (ref.size() != 2) throw ShapeError("fusion: probabilities must be [examples, C], got " + shape_string(ref));
  for (std::size_t n = 0; n < probabilities.size(); ++n) {
    const Tensor& p = probabilities[n];
    if (p.shape() != ref)
      throw ShapeError("fusion: model " + std::to_string(n) + " has shape " + shape_string(p.shape()) + ", expected " +
                       shape_string(ref));
    const std::size_t c = ref[1];
    for (std::size_t row = 0; row < ref[0]; ++row) {
      double total = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const double v = p[row * c + j];
        if (!(v >= 0.0)) throw NumericError("fusion: negative or non-finite probability");
        total += v;
      }
      if (!(std::abs(total - 1.0) <= 1e-6))
        throw NumericError("fusion: model " + std::to_string(n) + " row " + std::to_string(row) + " sums to " +
                           std::to_string(total));
    }
  }
}

Tensor prod_fuse(const FusionInput& in) {
  in.validate();
  const Tensor& ref = in.probabilities.front();
  Tensor out(ref.shape());
  const double inv_n = 1.0 / static_cast<double>(in.models());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double mantissa = 1.0;
    long exponent = 0;
    for (const Tensor& p : in.probabilities) {
      int e = 0;
      mantissa = std::frexp(mantissa * std::max(p[i], kFusionFloor), &e);
      exponent += e;
    }
    const long clamped = std::clamp(exponent, -2000L, 2000L);
    out[i] = std::ldexp(mantissa, static_cast<int>(clamped)) * inv_n;
  }
  return out;
}

Tensor prod_fuse_log(const FusionInput& in) {
  in.validate();
  Tensor out(in.probabilities.front().shape());
  const double log_n = std::log(static_cast<double>(in.models()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = -log_n;
    for (const Tensor& p : in.probabilities) acc += std::log(std::max(p[i], kFusionFloor));
    out[i] = acc;
  }
  return out;
}

Tensor mean_fuse(const FusionInput& in) {
  in.validate();
  Tensor out(in.probabilities.front().shape());
  for (const Tensor& p : in.probabilities)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
  for (double& v : out.data()) v /= static_cast<double>(in.models());
  return out;
}

Tensor normalize_rows(const Tensor& scores) {
  if (scores.rank() != 2) throw ShapeError("normalize_rows expects [examples, C]");
  Tensor out = scores;
  const std::size_t c = scores.extent(1);
  for (std::size_t row = 0; row < scores.extent(0); ++row) {
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += scores[row * c + j];
    if (total > 0.0)
      for (std::size_t j = 0; j < c; ++j) out[row * c + j] /= total;
  }
  return out;
}

Tensor softmax_rows(const Tensor& log_scores) {
  if (log_scores.rank() != 2) throw ShapeError("softmax_rows expects [examples, C]");
  Tensor out = log_scores;
  const std::size_t c = log_scores.extent(1);
  for (std::size_t row = 0; row < log_scores.extent(0); ++row) {
    double top = log_scores[row * c];
    for (std::size_t j = 1; j < c; ++j) top = std::max(top, log_scores[row * c + j]);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += out[row * c + j] = std::exp(log_scores[row * c + j] - top);
    for (std::size_t j = 0; j < c; ++j) out[row * c + j] /= total;
  }
  return out;
}

std::vector<std::size_t> predict_label(const Tensor& scores) {
  if (scores.rank() != 2) throw ShapeError("predict_label expects [examples, C], got " + shape_string(scores.shape()));
  const std::size_t c = scores.extent(1);
  std::vector<std::size_t> labels(scores.extent(0));
  for (std::size_t row = 0; row < labels.size(); ++row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (scores[row * c + j] > scores[row * c + best]) best = j;
    labels[row] = best;
  }
  return labels;
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.empty()) throw ShapeError("accuracy of an empty prediction set");
  if (predicted.size() != truth.size())
    throw ShapeError("accuracy: " + std::to_string(predicted.size()) + " predictions vs " +
                     std::to_string(truth.size()) + " labels");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == truth[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(predicted.size());
}

void write_probabilities(std::ostream& out, std::span<const std::string> ids, const Tensor& probs,
                         std::span<const std::string> class_names) {
  if (probs.rank() != 2 || probs.extent(0) != ids.size())
    throw ShapeError("write_probabilities: ids do not match probability rows");
  const std::size_t c = probs.extent(1);
  if (!class_names.empty()) {
    if (class_names.size() != c) throw ShapeError("write_probabilities: class names do not match columns");
    out << "# classes";
    for (const auto& name : class_names) out << ' ' << name;
    out << '\n';
  }
  char buf[32];
  for (std::size_t row = 0; row < ids.size(); ++row) {
    if (ids[row].find_first_of(" \t\n") != std::string::npos)
      throw FormatError("example id contains whitespace: '" + ids[row] + "'");
    out << ids[row];
    for (std::size_t j = 0; j < c; ++j) {
      std::snprintf(buf, sizeof buf, " %.17g", probs[row * c + j]);
      out << buf;
    }
    out << '\n';
  }
}

ProbabilityFile read_probabilities(std::istream& in) {
  ProbabilityFile file;
  std::vector<double> values;
  std::size_t classes = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("# classes", 0) == 0) {
      std::istringstream is(line.substr(9));
      file.class_names.clear();
      for (std::string name; is >> name;) file.class_names.push_back(name);
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    std::istringstream is(line);
    std::string id;
    is >> id;
    std::vector<double> row;
    double v;
    while (is >> v) row.push_back(v);
    if (!is.eof()) throw FormatError("probability file line " + std::to_string(lineno) + ": bad number");
    if (row.empty()) throw FormatError("probability file line " + std::to_string(lineno) + ": no probabilities");
    if (classes == 0) classes = row.size();
    if (row.size() != classes)
      throw FormatError("probability file line " + std::to_string(lineno) + ": expected " + std::to_string(classes) +
                        " values, got " + std::to_string(row.size()));
    file.ids.push_back(id);
    values.insert(values.end(), row.begin(), row.end());
  }
  if (file.ids.empty()) throw FormatError("probability file is empty");
  if (!file.class_names.empty() && file.class_names.size() != classes)
    throw FormatError("probability file lists " + std::to_string(file.class_names.size()) + " classes but rows have " +
                      std::to_string(classes) + " values");
  file.probabilities = Tensor({file.ids.size(), classes}, std::move(values));
  return file;
}

void write_fusion_report(std::ostream& out, std::span<const FusionReportRow> rows) {
  out << "| Pooling layers |";
  for (const auto& r : rows) out << ' ' << r.pooling << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < rows.size(); ++i) out << "---|";
  out << "\n| Networks |";
  for (const auto& r : rows) out << ' ' << r.networks << " |";
  out << "\n| Acc.(%) |";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, " %.1f |", r.accuracy);
    out << buf;
  }
  out << '\n';
}

}  // namespace rsisc
