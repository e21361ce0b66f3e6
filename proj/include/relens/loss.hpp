#pragma once
// Class-weighted cross-entropy over the four labels, summed one-vs-rest:
//
//   L(y, p) = -w[y] * sum_c [ y_c ln(p_c) + (1 - y_c) ln(1 - p_c) ]
//
// with p = softmax(scores). Probabilities are clamped to
// [1e-12, 1 - 1e-12] inside the logs. The exact gradient with respect to
// the pre-softmax scores is provided so every native trainer descends the
// same objective it reports.

#include <array>
#include <cmath>

#include "relens/core.hpp"

namespace relens {

inline constexpr double kProbClamp = 1e-12;

inline double clamp_prob(double p) {
  if (p < kProbClamp) return kProbClamp;
  if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
  return p;
}

inline double label_cross_entropy(const LabelDistribution& probs, EsciLabel label,
                                  double row_weight = 1.0) {
  double loss = 0.0;
  const int y = label_code(label);
  for (int c = 0; c < kNumLabels; ++c) {
    const double p = clamp_prob(probs[c]);
    loss -= (c == y) ? std::log(p) : std::log(1.0 - p);
  }
  return row_weight * loss;
}

// Weighted sum of per-row cross-entropies. Zero iff every prediction is
// one-hot correct; doubling a class weight doubles that class's share.
inline double dataset_cross_entropy(const std::vector<EsciLabel>& labels,
                                    const std::vector<LabelDistribution>& predictions,
                                    const std::array<double, kNumLabels>& class_weights) {
  if (labels.size() != predictions.size()) {
    throw DataError("dataset_cross_entropy: length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total += label_cross_entropy(predictions[i], labels[i],
                                 class_weights[static_cast<std::size_t>(label_code(labels[i]))]);
  }
  return total;
}

// d L / d scores, with p = softmax(scores) already computed.
inline std::array<double, kNumLabels> cross_entropy_score_gradient(
    const LabelDistribution& probs, EsciLabel label, double row_weight = 1.0) {
  const int y = label_code(label);
  std::array<double, kNumLabels> u;
  double weighted_mean = 0.0;  // sum_b u_b p_b
  for (int c = 0; c < kNumLabels; ++c) {
    const double p = clamp_prob(probs[c]);
    u[static_cast<std::size_t>(c)] = (c == y) ? -1.0 / p : 1.0 / (1.0 - p);
    weighted_mean += u[static_cast<std::size_t>(c)] * probs[c];
  }
  std::array<double, kNumLabels> grad;
  for (int c = 0; c < kNumLabels; ++c) {
    grad[static_cast<std::size_t>(c)] =
        row_weight * probs[c] * (u[static_cast<std::size_t>(c)] - weighted_mean);
  }
  return grad;
}

}  // namespace relens
