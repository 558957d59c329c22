#include "imed/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

#include "imed/io.hpp"

namespace imed {

namespace fs = std::filesystem;

namespace {

void shuffle_rows(Split& s, Rng& rng) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(s.size()));
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with an explicit draw; std::shuffle's algorithm is unspecified.
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  Split out{Matrix(s.x.rows(), s.x.cols()), std::vector<int>(s.y.size())};
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = s.x.row(order[i]);
    out.y[i] = s.y[static_cast<std::size_t>(order[i])];
  }
  s = std::move(out);
}

Split make_blobs(int n, double noise, Rng& rng, double shift) {
  constexpr int kClasses = 3;
  constexpr double kRadius = 2.5, kSpread = 0.6;
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sd = std::sqrt(kSpread * kSpread + noise * noise);
  const double stretch = 1.0 + shift / 2.0;
  Split s{Matrix(n, 2), std::vector<int>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    const int k = i % kClasses;
    const double a = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * k / kClasses;
    const double cx = kRadius * std::cos(a) + shift, cy = kRadius * std::sin(a) + 0.5 * shift;
    s.x(i, 0) = cx + stretch * sd * gauss(rng);
    s.x(i, 1) = cy + sd * gauss(rng);
    s.y[static_cast<std::size_t>(i)] = k;
  }
  shuffle_rows(s, rng);
  return s;
}

Split make_rings(int n, double noise, Rng& rng, double scale) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Split s{Matrix(n, 2), std::vector<int>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    const int k = i % 2;
    const double r = (k == 0 ? 1.0 : 2.0) * scale;
    const double a = angle(rng);
    s.x(i, 0) = r * std::cos(a) + noise * gauss(rng);
    s.x(i, 1) = r * std::sin(a) + noise * gauss(rng);
    s.y[static_cast<std::size_t>(i)] = k;
  }
  shuffle_rows(s, rng);
  return s;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Split make_moons(int n, double noise, Rng& rng) {
  const int n_outer = n / 2;
  std::uniform_real_distribution<double> unit(0.0, std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Split s{Matrix(n, 2), std::vector<int>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    const double t = unit(rng);
    if (i < n_outer) {
      s.x(i, 0) = std::cos(t);
      s.x(i, 1) = std::sin(t);
      s.y[static_cast<std::size_t>(i)] = 0;
    } else {
      s.x(i, 0) = 1.0 - std::cos(t);
      s.x(i, 1) = 0.5 - std::sin(t);
      s.y[static_cast<std::size_t>(i)] = 1;
    }
  }
  for (Eigen::Index i = 0; i < s.x.size(); ++i) s.x.data()[i] += noise * gauss(rng);
  shuffle_rows(s, rng);
  return s;
}

Matrix rotate(const Matrix& x, double degrees, const Eigen::RowVector2d& center) {
  if (x.cols() != 2) throw DimensionError("rotate: expects 2-D points");
  const double a = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  Matrix out(x.rows(), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double dx = x(i, 0) - center(0), dy = x(i, 1) - center(1);
    out(i, 0) = center(0) + c * dx - s * dy;
    out(i, 1) = center(1) + s * dx + c * dy;
  }
  return out;
}

nlohmann::json DatasetBundle::meta() const {
  return {{"generator", spec.kind},
          {"shift", spec.shift},
          {"seed", spec.seed},
          {"n", spec.n},
          {"noise", spec.noise},
          {"num_classes", num_classes},
          {"input_dim", input_dim()},
          {"splits", {"source", "target", "test"}}};
}

DatasetBundle generate_dataset(const DatasetSpec& spec) {
  DatasetBundle b;
  b.spec = spec;
  auto draw = [&](const char* split, bool shifted) {
    Rng rng = make_stream(spec.seed, std::string(spec.kind) + "/" + split);
    if (spec.kind == "moons") {
      Split s = make_moons(spec.n, spec.noise, rng);
      if (shifted) s.x = rotate(s.x, spec.shift, kMoonsCenter);
      return s;
    }
    if (spec.kind == "blobs") return make_blobs(spec.n, spec.noise, rng, shifted ? spec.shift : 0.0);
    if (spec.kind == "rings") return make_rings(spec.n, spec.noise, rng, shifted ? 1.0 + spec.shift : 1.0);
    throw ConfigError("unknown dataset kind '" + spec.kind + "'");
  };
  b.num_classes = spec.kind == "blobs" ? 3 : 2;
  b.source = draw("source", false);
  b.target = draw("target", true);
  b.test = draw("test", true);
  return b;
}

std::string split_csv(const Split& split) {
  std::string out;
  for (Eigen::Index c = 0; c < split.x.cols(); ++c) out += "x" + std::to_string(c) + ",";
  out += "label\n";
  for (Eigen::Index i = 0; i < split.size(); ++i) {
    for (Eigen::Index c = 0; c < split.x.cols(); ++c) out += fmt_double(split.x(i, c)) + ",";
    out += std::to_string(split.y[static_cast<std::size_t>(i)]) + "\n";
  }
  return out;
}

Split parse_split_csv(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError(what + ": empty file");
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  if (cols < 1 || line.substr(line.rfind(',') + 1) != "label") {
    throw IoError(what + ": header must be x0,...,label");
  }
  std::vector<double> values;
  std::vector<int> labels;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    Eigen::Index c = 0;
    while (std::getline(row, cell, ',')) {
      char* end = nullptr;
      if (c < cols) {
        values.push_back(std::strtod(cell.c_str(), &end));
      } else {
        labels.push_back(static_cast<int>(std::strtol(cell.c_str(), &end, 10)));
      }
      if (end == cell.c_str() || *end != '\0') {
        throw IoError(what + ":" + std::to_string(lineno) + ": bad value '" + cell + "'");
      }
      ++c;
    }
    if (c != cols + 1) throw IoError(what + ":" + std::to_string(lineno) + ": wrong column count");
  }
  Split s;
  s.x = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(labels.size()), cols);
  s.y = std::move(labels);
  return s;
}

void write_bundle(const DatasetBundle& bundle, const fs::path& dir, bool force) {
  prepare_output_dir(dir, force);
  write_file_atomic(dir / "source.csv", split_csv(bundle.source));
  write_file_atomic(dir / "target.csv", split_csv(bundle.target));
  write_file_atomic(dir / "test.csv", split_csv(bundle.test));
  write_json_atomic(dir / "meta.json", bundle.meta());
}

DatasetBundle read_bundle(const fs::path& dir) {
  const auto meta = read_json(dir / "meta.json");
  DatasetBundle b;
  try {
    b.spec.kind = meta.at("generator").get<std::string>();
    b.spec.shift = meta.at("shift").get<double>();
    b.spec.seed = meta.at("seed").get<std::uint64_t>();
    b.spec.n = meta.at("n").get<int>();
    b.spec.noise = meta.at("noise").get<double>();
    b.num_classes = meta.at("num_classes").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError((dir / "meta.json").string() + ": " + e.what());
  }
  b.source = parse_split_csv(read_file(dir / "source.csv"), "source.csv");
  b.target = parse_split_csv(read_file(dir / "target.csv"), "target.csv");
  b.test = parse_split_csv(read_file(dir / "test.csv"), "test.csv");
  for (const Split* s : {&b.source, &b.target, &b.test}) {
    if (s->x.cols() != b.source.x.cols()) throw IoError(dir.string() + ": splits disagree on width");
    for (int y : s->y) {
      if (y < 0 || y >= b.num_classes) throw IoError(dir.string() + ": label out of range");
    }
  }
  return b;
}

}  // namespace imed
