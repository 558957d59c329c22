#pragma once

#include <optional>
#include <vector>

#include "imed/tensor.hpp"

namespace imed {

enum class Domain { source, target };

/// One mini-batch. Target batches never carry labels.
class DomainBatch {
 public:
  DomainBatch() = default;
  /// Validates: B > 0, labels present iff source, labels in [0, num_classes).
  DomainBatch(Matrix inputs, std::optional<std::vector<int>> labels, Domain domain,
              int num_classes);

  static DomainBatch source(Matrix inputs, std::vector<int> labels, int num_classes);
  static DomainBatch target(Matrix inputs);

  const Matrix& inputs() const { return inputs_; }
  const std::optional<std::vector<int>>& labels() const { return labels_; }
  /// Throws if the batch is unlabeled.
  const std::vector<int>& require_labels(const char* who) const;
  Domain domain() const { return domain_; }
  Eigen::Index size() const { return inputs_.rows(); }

 private:
  Matrix inputs_;
  std::optional<std::vector<int>> labels_;
  Domain domain_ = Domain::source;
};

}  // namespace imed
