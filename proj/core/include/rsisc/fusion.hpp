#pragma once

// PROD late fusion of per-model class probabilities, argmax labelling and
// the accuracy metric.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rsisc/tensor.hpp"

namespace rsisc {

struct FusionInput {
  std::vector<std::string> model_ids;
  std::vector<Tensor> probabilities;  // one [examples, C] matrix per model

  std::size_t models() const { return probabilities.size(); }
  // Shapes agree, entries >= 0, rows sum to 1 within 1e-6.
  void validate() const;
};

inline constexpr double kFusionFloor = 1e-30;

/// score_c = (1/N) * prod_n p_nc per example, not renormalized. The product
/// keeps mantissa and binary exponent apart, so it does not underflow while
/// accumulating; entries are floored at kFusionFloor.
Tensor prod_fuse(const FusionInput& in);
// log(score_c) with the same floor; for argmax when scores themselves underflow.
Tensor prod_fuse_log(const FusionInput& in);
// Arithmetic mean of the members, for comparison.
Tensor mean_fuse(const FusionInput& in);
// Each row divided by its sum.
Tensor normalize_rows(const Tensor& scores);
// Row-wise exp(s - max) / sum; turns prod_fuse_log output into distributions.
Tensor softmax_rows(const Tensor& log_scores);

// Row-wise argmax, 0-based; ties go to the lowest index.
std::vector<std::size_t> predict_label(const Tensor& scores);

// Percentage of matching entries. Throws on empty or mismatched input.
double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

struct ProbabilityFile {
  std::vector<std::string> class_names;  // empty when the file has no "# classes" line
  std::vector<std::string> ids;
  Tensor probabilities;
};

// Optional "# classes <name>..." line, then one example per line: id followed
// by C probabilities.
void write_probabilities(std::ostream& out, std::span<const std::string> ids, const Tensor& probs,
                         std::span<const std::string> class_names = {});
ProbabilityFile read_probabilities(std::istream& in);

struct FusionReportRow {
  std::string pooling;
  std::string networks;
  double accuracy = 0.0;
};

// Column-per-configuration table with "Pooling layers", "Networks" and
// "Acc.(%)" rows.
void write_fusion_report(std::ostream& out, std::span<const FusionReportRow> rows);

}  // namespace rsisc
