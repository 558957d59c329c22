#pragma once

// Synthetic domain-shift tasks and their on-disk bundle format:
//   <dir>/meta.json, source.csv, target.csv, test.csv
// Each CSV has float feature columns x0..x{d-1} followed by an integer label.
// target.csv carries labels on disk, but training only ever wraps it in an
// unlabeled DomainBatch; test.csv is a held-out labeled draw of the target domain.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imed/config.hpp"
#include "imed/tensor.hpp"

namespace imed {

struct Split {
  Matrix x;
  std::vector<int> y;

  Eigen::Index size() const { return x.rows(); }
};

struct DatasetBundle {
  DatasetSpec spec;
  int num_classes = 2;
  Split source;
  Split target;
  Split test;

  Eigen::Index input_dim() const { return source.x.cols(); }
  nlohmann::json meta() const;
};

/// Two interleaving half circles (noise = Gaussian stddev).
Split make_moons(int n, double noise, Rng& rng);
/// Rotation by `degrees` counter-clockwise about `center`.
Matrix rotate(const Matrix& x, double degrees, const Eigen::RowVector2d& center);
inline const Eigen::RowVector2d kMoonsCenter{0.5, 0.25};

/// moons: target and test rotated by `shift` degrees about the moons center.
/// blobs: three classes; target means translated by shift*(1, 0.5) and spread
///        stretched along x by (1 + shift/2).
/// rings: two concentric rings; target radii scaled by (1 + shift).
DatasetBundle generate_dataset(const DatasetSpec& spec);

std::string split_csv(const Split& split);
Split parse_split_csv(const std::string& text, const std::string& what);

/// Refuses a non-empty directory unless force is set.
void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir, bool force);
DatasetBundle read_bundle(const std::filesystem::path& dir);

}  // namespace imed
