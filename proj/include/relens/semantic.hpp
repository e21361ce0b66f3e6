#pragma once
// Bag-of-words linear-softmax candidate over the assembled token sequence
// plus a locale one-hot. Trained by mini-batch gradient descent with a
// fixed learning rate on the class-weighted cross-entropy.

#include <algorithm>
#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "relens/core.hpp"
#include "relens/denoiser.hpp"
#include "relens/linalg.hpp"
#include "relens/loss.hpp"
#include "relens/rng.hpp"

namespace relens {

struct SemanticTrainParams {
  double lr = 0.5;
  int epochs = 20;
  int batch_size = 64;
  std::array<double, kNumLabels> class_weights{1.0, 1.0, 1.0, 1.0};
  std::uint64_t seed = 1;
};

struct SemanticExample {
  TokenSeq tokens;
  std::string locale;
  EsciLabel label = EsciLabel::Exact;
};

class SemanticCandidate {
 public:
  std::unordered_map<std::string, int> vocab;  // token -> feature index
  std::vector<std::string> locales;            // one-hot columns after the vocab
  Matrix weights;                              // (|vocab| + |locales|) x 4
  std::array<double, kNumLabels> bias{0.0, 0.0, 0.0, 0.0};

  int feature_dim() const { return static_cast<int>(vocab.size() + locales.size()); }

  // Sparse feature vector: token counts, then the locale indicator.
  std::vector<std::pair<int, double>> featurize(const TokenSeq& seq,
                                                const std::string& locale) const {
    std::unordered_map<int, double> acc;
    for (const auto& tok : seq.tokens) {
      const auto it = vocab.find(tok);
      if (it != vocab.end()) acc[it->second] += 1.0;
    }
    for (std::size_t i = 0; i < locales.size(); ++i) {
      if (locales[i] == locale) {
        acc[static_cast<int>(vocab.size() + i)] += 1.0;
        break;
      }
    }
    std::vector<std::pair<int, double>> out(acc.begin(), acc.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  LabelDistribution predict(const TokenSeq& seq, const std::string& locale) const {
    return predict_features(featurize(seq, locale));
  }

  LabelDistribution predict_features(const std::vector<std::pair<int, double>>& feats) const {
    std::array<double, kNumLabels> scores = bias;
    for (const auto& [idx, val] : feats) {
      const double* wrow = weights.row(idx);
      for (int c = 0; c < kNumLabels; ++c) scores[static_cast<std::size_t>(c)] += val * wrow[c];
    }
    return softmax4(scores);
  }

  std::size_t parameter_count() const {
    return weights.a.size() + bias.size();
  }
};

// Trains from scratch; epoch_loss (optional) receives the dataset
// cross-entropy after each epoch.
inline SemanticCandidate semantic_train(const std::vector<SemanticExample>& examples,
                                        const SemanticTrainParams& params,
                                        std::vector<double>* epoch_loss = nullptr) {
  if (examples.empty()) throw DataError("semantic_train: empty training set");
  if (params.epochs < 0 || params.lr < 0.0) {
    throw ConfigError("semantic_train: bad hyperparameters");
  }

  SemanticCandidate model;
  for (const auto& ex : examples) {
    for (const auto& tok : ex.tokens.tokens) model.vocab.try_emplace(tok, 0);
  }
  {
    // Deterministic indices: sorted vocabulary.
    std::vector<const std::string*> keys;
    keys.reserve(model.vocab.size());
    for (const auto& [k, v] : model.vocab) keys.push_back(&k);
    std::sort(keys.begin(), keys.end(),
              [](const std::string* a, const std::string* b) { return *a < *b; });
    for (std::size_t i = 0; i < keys.size(); ++i) model.vocab[*keys[i]] = static_cast<int>(i);

    std::vector<std::string> locs;
    for (const auto& ex : examples) locs.push_back(ex.locale);
    std::sort(locs.begin(), locs.end());
    locs.erase(std::unique(locs.begin(), locs.end()), locs.end());
    model.locales = std::move(locs);
  }
  model.weights = Matrix(model.feature_dim(), kNumLabels);

  std::vector<std::vector<std::pair<int, double>>> feats;
  feats.reserve(examples.size());
  for (const auto& ex : examples) feats.push_back(model.featurize(ex.tokens, ex.locale));

  const auto dataset_loss = [&]() {
    double total = 0.0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      total += label_cross_entropy(
          model.predict_features(feats[i]), examples[i].label,
          params.class_weights[static_cast<std::size_t>(label_code(examples[i].label))]);
    }
    return total;
  };

  Rng rng(params.seed);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const int batch = std::max(1, params.batch_size);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch));
      std::unordered_map<int, std::array<double, kNumLabels>> grad_w;
      std::array<double, kNumLabels> grad_b{0.0, 0.0, 0.0, 0.0};
      for (std::size_t bi = start; bi < stop; ++bi) {
        const std::size_t i = order[bi];
        const double w =
            params.class_weights[static_cast<std::size_t>(label_code(examples[i].label))];
        const auto probs = model.predict_features(feats[i]);
        const auto g = cross_entropy_score_gradient(probs, examples[i].label, w);
        for (int c = 0; c < kNumLabels; ++c) grad_b[static_cast<std::size_t>(c)] += g[static_cast<std::size_t>(c)];
        for (const auto& [idx, val] : feats[i]) {
          auto& gw = grad_w.try_emplace(idx, std::array<double, kNumLabels>{0, 0, 0, 0}).first->second;
          for (int c = 0; c < kNumLabels; ++c) gw[static_cast<std::size_t>(c)] += val * g[static_cast<std::size_t>(c)];
        }
      }
      const double step = params.lr / static_cast<double>(stop - start);
      for (const auto& [idx, gw] : grad_w) {
        double* wrow = model.weights.row(idx);
        for (int c = 0; c < kNumLabels; ++c) wrow[c] -= step * gw[static_cast<std::size_t>(c)];
      }
      for (int c = 0; c < kNumLabels; ++c) model.bias[static_cast<std::size_t>(c)] -= step * grad_b[static_cast<std::size_t>(c)];
    }
    if (epoch_loss) epoch_loss->push_back(dataset_loss());
  }
  return model;
}

}  // namespace relens
