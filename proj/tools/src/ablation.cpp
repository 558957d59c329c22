#include "imed/tools/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "imed/io.hpp"

namespace imed::tools {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::instance_aware: return "instance_aware";
    case AblationAxis::fusion_kind: return "fusion_kind";
    case AblationAxis::h: return "h";
    case AblationAxis::fusion_depth: return "fusion_depth";
    case AblationAxis::mu_factors: return "mu_factors";
    case AblationAxis::alpha: return "alpha";
    case AblationAxis::distill: return "distill";
  }
  return "?";
}

AblationAxis parse_axis(std::string_view s) {
  for (auto a : {AblationAxis::instance_aware, AblationAxis::fusion_kind, AblationAxis::h,
                 AblationAxis::fusion_depth, AblationAxis::mu_factors, AblationAxis::alpha,
                 AblationAxis::distill}) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("field 'plan.axis': unknown axis '" + std::string(s) +
                    "' (expected instance_aware, fusion_kind, h, fusion_depth, mu_factors, alpha "
                    "or distill)");
}

namespace {

void check_value(AblationAxis axis, const json& v, std::size_t i) {
  const std::string where = "field 'plan.values[" + std::to_string(i) + "]': ";
  auto fail = [&](const char* want) { throw ConfigError(where + "expected " + want); };
  switch (axis) {
    case AblationAxis::instance_aware:
      if (!v.is_boolean()) fail("a boolean");
      break;
    case AblationAxis::fusion_kind:
      if (!v.is_string()) fail("avg, dense or shuffle");
      parse_fusion_kind(v.get<std::string>());
      break;
    case AblationAxis::h:
    case AblationAxis::fusion_depth:
      if (!v.is_number_integer() || v.get<long>() < 1) fail("a positive integer");
      break;
    case AblationAxis::mu_factors:
      if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const json& x) {
            return x.is_number() && x.get<double>() >= 0.0;
          })) {
        fail("[mu1, mu2, mu3] with non-negative entries");
      }
      break;
    case AblationAxis::alpha:
      if (!v.is_number() || v.get<double>() < 1.0) fail("a number >= 1");
      break;
    case AblationAxis::distill:
      if (!v.is_string() || (v != "on" && v != "off")) fail("\"on\" or \"off\"");
      break;
  }
}

std::string fmt_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::istream& in, bool& ok) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  ok = false;
  char c;
  while (in.get(c)) {
    ok = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          cell += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c == '\n') {
      break;
    } else {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

AblationPlan AblationPlan::from_json(const json& j, const fs::path& origin) {
  if (!j.is_object()) throw ConfigError("plan: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::vector<std::string> known{"schema_version", "base_config", "transfers", "axis",
                                                "values"};
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ConfigError("field 'plan." + it.key() + "': unknown field");
    }
  }
  if (j.value("schema_version", kConfigSchemaVersion) != kConfigSchemaVersion) {
    throw ConfigError("field 'plan.schema_version': unsupported version");
  }
  AblationPlan p;
  auto base = j.find("base_config");
  if (base == j.end()) throw ConfigError("field 'plan.base_config': required");
  if (base->is_string()) {
    fs::path path = base->get<std::string>();
    if (path.is_relative() && !origin.empty()) path = origin / path;
    p.base = RunConfig::load(path);
  } else {
    p.base = RunConfig::from_json(*base);
  }
  if (auto t = j.find("transfers"); t != j.end()) {
    if (!t->is_array() || t->empty()) throw ConfigError("field 'plan.transfers': expected a non-empty array");
    for (std::size_t i = 0; i < t->size(); ++i) {
      p.transfers.push_back(DatasetSpec::from_json((*t)[i], "plan.transfers[" + std::to_string(i) + "]"));
    }
  } else {
    p.transfers.push_back(p.base.dataset);
  }
  auto axis = j.find("axis");
  if (axis == j.end() || !axis->is_string()) throw ConfigError("field 'plan.axis': expected a string");
  p.axis = parse_axis(axis->get<std::string>());
  auto values = j.find("values");
  if (values == j.end() || !values->is_array() || values->empty()) {
    throw ConfigError("field 'plan.values': expected a non-empty array");
  }
  for (std::size_t i = 0; i < values->size(); ++i) {
    check_value(p.axis, (*values)[i], i);
    p.values.push_back((*values)[i]);
  }
  return p;
}

AblationPlan AblationPlan::load(const fs::path& path) {
  return from_json(read_json(path), path.parent_path());
}

std::string value_label(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return fmt_number(v.get<double>());
  if (v.is_array()) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "-" : "") + value_label(v[i]);
    return out;
  }
  return v.dump();
}

RunConfig apply_axis(const RunConfig& base, AblationAxis axis, const json& v, bool* distill) {
  RunConfig c = base;
  if (distill) *distill = true;
  switch (axis) {
    case AblationAxis::instance_aware: c.instance_aware = v.get<bool>(); break;
    case AblationAxis::fusion_kind: c.fusion_kind = v.get<std::string>(); break;
    case AblationAxis::h: c.h = v.get<Eigen::Index>(); break;
    case AblationAxis::fusion_depth: c.fusion_depth = v.get<std::size_t>(); break;
    case AblationAxis::mu_factors:
      c.mu1 = v[0].get<double>();
      c.mu2 = v[1].get<double>();
      c.mu3 = v[2].get<double>();
      break;
    case AblationAxis::alpha: c.alpha = v.get<double>(); break;
    case AblationAxis::distill:
      if (distill) *distill = v.get<std::string>() == "on";
      break;
  }
  return c;
}

std::string transfer_name(const DatasetSpec& spec) {
  return spec.kind + "-" + fmt_number(spec.shift);
}

const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols{
      "axis",          "value",           "transfer",
      "status",        "model",           "source_acc",
      "target_acc",    "teacher_target_acc", "component_mean_target_acc",
      "component_max_target_acc", "params_component", "params_teacher",
      "params_student", "error"};
  return cols;
}

std::string summary_header() {
  std::string out;
  for (std::size_t i = 0; i < summary_columns().size(); ++i) out += (i ? "," : "") + summary_columns()[i];
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = summary_header() + "\n";
  for (const auto& r : rows) {
    const std::vector<std::string> cells{
        r.axis, r.value, r.transfer, r.status, r.model, fmt_number(r.source_acc),
        fmt_number(r.target_acc), fmt_number(r.teacher_target_acc),
        fmt_number(r.component_mean_target_acc), fmt_number(r.component_max_target_acc),
        std::to_string(r.params_component), std::to_string(r.params_teacher),
        std::to_string(r.params_student), r.error};
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_field(cells[i]);
    out += "\n";
  }
  return out;
}

std::vector<SummaryRow> parse_summary_csv(const std::string& text) {
  std::istringstream in(text);
  bool ok = false;
  auto header = split_csv_line(in, ok);
  if (header != summary_columns()) throw IoError("summary.csv: unexpected header");
  std::vector<SummaryRow> rows;
  while (true) {
    auto c = split_csv_line(in, ok);
    if (!ok) break;
    if (c.size() == 1 && c[0].empty()) continue;
    if (c.size() != summary_columns().size()) throw IoError("summary.csv: wrong column count");
    SummaryRow r;
    r.axis = c[0];
    r.value = c[1];
    r.transfer = c[2];
    r.status = c[3];
    r.model = c[4];
    r.source_acc = std::stod(c[5]);
    r.target_acc = std::stod(c[6]);
    r.teacher_target_acc = std::stod(c[7]);
    r.component_mean_target_acc = std::stod(c[8]);
    r.component_max_target_acc = std::stod(c[9]);
    r.params_component = std::stoull(c[10]);
    r.params_teacher = std::stoull(c[11]);
    r.params_student = std::stoull(c[12]);
    r.error = c[13];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SummaryRow> with_average_rows(const std::vector<SummaryRow>& rows) {
  std::vector<SummaryRow> out;
  std::vector<std::string> order;
  std::map<std::string, std::vector<const SummaryRow*>> by_value;
  for (const auto& r : rows) {
    if (r.transfer == "avg") continue;
    out.push_back(r);
    if (!by_value.count(r.value)) order.push_back(r.value);
    by_value[r.value].push_back(&r);
  }
  for (const auto& v : order) {
    const auto& group = by_value[v];
    SummaryRow a;
    a.axis = group.front()->axis;
    a.value = v;
    a.transfer = "avg";
    a.model = group.front()->model;
    std::size_t n = 0;
    for (const auto* r : group) {
      if (r->status != "ok") {
        a.status = "failed";
        a.error = "transfer " + r->transfer + " failed";
        continue;
      }
      ++n;
      a.model = r->model;
      a.source_acc += r->source_acc;
      a.target_acc += r->target_acc;
      a.teacher_target_acc += r->teacher_target_acc;
      a.component_mean_target_acc += r->component_mean_target_acc;
      a.component_max_target_acc += r->component_max_target_acc;
      a.params_component = r->params_component;
      a.params_teacher = r->params_teacher;
      a.params_student = r->params_student;
    }
    if (n > 0) {
      const double d = static_cast<double>(n);
      a.source_acc /= d;
      a.target_acc /= d;
      a.teacher_target_acc /= d;
      a.component_mean_target_acc /= d;
      a.component_max_target_acc /= d;
    }
    out.push_back(a);
  }
  return out;
}

std::string accuracy_plot_svg(const std::vector<SummaryRow>& rows, const std::string& metric) {
  constexpr double W = 640, H = 400, L = 60, R = 150, T = 40, B = 50;
  std::vector<std::string> values, transfers;
  for (const auto& r : rows) {
    if (std::find(values.begin(), values.end(), r.value) == values.end()) values.push_back(r.value);
    if (std::find(transfers.begin(), transfers.end(), r.transfer) == transfers.end()) {
      transfers.push_back(r.transfer);
    }
  }
  auto metric_of = [&](const SummaryRow& r) { return metric == "source_acc" ? r.source_acc : r.target_acc; };
  double lo = 1.0, hi = 0.0;
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    lo = std::min(lo, metric_of(r));
    hi = std::max(hi, metric_of(r));
  }
  if (lo > hi) lo = 0.0, hi = 1.0;
  lo = std::max(0.0, std::floor(lo * 20.0 - 1.0) / 20.0);
  hi = std::min(1.0, std::ceil(hi * 20.0 + 1.0) / 20.0);
  if (hi - lo < 1e-9) hi = lo + 0.05;
  const double pw = W - L - R, ph = H - T - B;
  auto xpos = [&](std::size_t i) {
    return values.size() == 1 ? L + pw / 2 : L + pw * static_cast<double>(i) / static_cast<double>(values.size() - 1);
  };
  auto ypos = [&](double v) { return T + ph * (1.0 - (v - lo) / (hi - lo)); };
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const std::string axis_name = rows.empty() ? "value" : rows.front().axis;
  s << "<text x=\"" << L + pw / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << svg_escape(metric + " vs " + axis_name) << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T + ph << "\" x2=\"" << L + pw << "\" y2=\"" << T + ph
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    s << "<text x=\"" << L - 6 << "\" y=\"" << ypos(v) + 4 << "\" text-anchor=\"end\">"
      << fmt_number(std::round(v * 1000.0) / 1000.0) << "</text>\n";
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    s << "<text x=\"" << xpos(i) << "\" y=\"" << T + ph + 18 << "\" text-anchor=\"middle\">"
      << svg_escape(values[i]) << "</text>\n";
  }
  s << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
    << svg_escape(axis_name) << "</text>\n";
  for (std::size_t t = 0; t < transfers.size(); ++t) {
    const char* color = kColors[t % 6];
    std::string path;
    for (std::size_t i = 0; i < values.size(); ++i) {
      auto it = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& r) {
        return r.transfer == transfers[t] && r.value == values[i];
      });
      if (it == rows.end() || it->status != "ok") {
        if (!path.empty()) {
          s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << path << "\"/>\n";
          path.clear();
        }
        continue;
      }
      const double x = xpos(i), y = ypos(metric_of(*it));
      path += (path.empty() ? "" : " ") + fmt_number(x) + "," + fmt_number(y);
      s << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    if (!path.empty()) {
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << path << "\"/>\n";
    }
    s << "<text x=\"" << L + pw + 12 << "\" y=\"" << T + 16 * (static_cast<double>(t) + 1)
      << "\" fill=\"" << color << "\">" << svg_escape(transfers[t]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace imed::tools
