#include "imed/data.hpp"

#include <string>

namespace imed {

DomainBatch::DomainBatch(Matrix inputs, std::optional<std::vector<int>> labels, Domain domain,
                         int num_classes)
    : inputs_(std::move(inputs)), labels_(std::move(labels)), domain_(domain) {
  if (inputs_.rows() == 0) throw DimensionError("DomainBatch: empty batch");
  if (domain_ == Domain::target && labels_) {
    throw ConfigError("DomainBatch: target batches must be unlabeled");
  }
  if (domain_ == Domain::source && !labels_) {
    throw ConfigError("DomainBatch: source batches must carry labels");
  }
  if (labels_) {
    if (static_cast<Eigen::Index>(labels_->size()) != inputs_.rows()) {
      throw DimensionError("DomainBatch: " + std::to_string(labels_->size()) + " labels for " +
                           std::to_string(inputs_.rows()) + " rows");
    }
    for (int y : *labels_) {
      if (y < 0 || y >= num_classes) {
        throw ConfigError("DomainBatch: label " + std::to_string(y) + " outside [0, " +
                          std::to_string(num_classes) + ")");
      }
    }
  }
}

DomainBatch DomainBatch::source(Matrix inputs, std::vector<int> labels, int num_classes) {
  return DomainBatch(std::move(inputs), std::move(labels), Domain::source, num_classes);
}

DomainBatch DomainBatch::target(Matrix inputs) {
  return DomainBatch(std::move(inputs), std::nullopt, Domain::target, 0);
}

const std::vector<int>& DomainBatch::require_labels(const char* who) const {
  if (!labels_) throw ConfigError(std::string(who) + ": batch has no labels");
  return *labels_;
}

}  // namespace imed
