// include/adl/metrics.hpp
#pragma once

#include <cstddef>
#include <vector>

namespace adl {

// Square confusion matrix indexed [truth][predicted].
class Confusion {
 public:
  explicit Confusion(std::size_t n_classes = 0)
      : n_(n_classes), counts_(n_classes * n_classes, 0) {}

  void add(std::size_t truth, std::size_t predicted, std::size_t count = 1) {
    counts_[truth * n_ + predicted] += count;
  }
  void merge(const Confusion& other) {
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  }

  std::size_t n_classes() const { return n_; }
  std::size_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * n_ + predicted];
  }
  std::size_t total() const {
    std::size_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::size_t trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < n_; ++i) t += at(i, i);
    return t;
  }
  std::size_t support(std::size_t c) const {
    std::size_t t = 0;
    for (std::size_t j = 0; j < n_; ++j) t += at(c, j);
    return t;
  }
  std::size_t predicted(std::size_t c) const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < n_; ++i) t += at(i, c);
    return t;
  }

  double accuracy() const {
    const auto t = total();
    return t == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(t);
  }

  // 2TP / (2TP + FP + FN); 0 for a class never seen nor predicted.
  double f1(std::size_t c) const {
    const double tp = static_cast<double>(at(c, c));
    const double denom = static_cast<double>(support(c) + predicted(c));
    return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
  }

  // Unweighted mean over classes that occur in truth or prediction.
  double macro_f1() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < n_; ++c) {
      if (support(c) + predicted(c) == 0) continue;
      sum += f1(c);
      ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
};

}  // namespace adl
