// SPDX-License-Identifier: Apache-2.0
#include "distilkit/report.hpp"

#include <charconv>
#include <iomanip>
#include <sstream>

#include "distilkit/error.hpp"

namespace distilkit {

using nlohmann::json;

namespace {

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string metric_cells(const MetricsReport& m) {
  std::string out;
  for (double v : {m.accuracy, m.weighted_f1, m.precision, m.recall}) out += pad(format_percent(v), 8);
  return out;
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

json task_map(const std::map<TaskId, MetricsReport>& m) {
  json out = json::object();
  for (const auto& [t, r] : m) out[std::string(task_name(t))] = to_json(r);
  return out;
}

std::map<TaskId, MetricsReport> task_map_from(const json& doc) {
  std::map<TaskId, MetricsReport> out;
  for (const auto& [name, r] : doc.items()) out[parse_task(name)] = metrics_from_json(r);
  return out;
}

}  // namespace

std::string format_percent(double value) { return format_fixed(value * 100.0, 2); }

json to_json(const MetricsReport& m) {
  json per_class = json::array();
  for (const auto& c : m.per_class) {
    per_class.push_back({{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}});
  }
  return {{"accuracy", m.accuracy},   {"precision", m.precision}, {"recall", m.recall},
          {"weighted_f1", m.weighted_f1}, {"per_class", per_class}, {"confusion", m.confusion}};
}

MetricsReport metrics_from_json(const json& doc) {
  try {
    MetricsReport m;
    m.accuracy = doc.at("accuracy").get<double>();
    m.precision = doc.at("precision").get<double>();
    m.recall = doc.at("recall").get<double>();
    m.weighted_f1 = doc.at("weighted_f1").get<double>();
    for (const auto& c : doc.at("per_class")) {
      m.per_class.push_back({c.at("precision").get<double>(), c.at("recall").get<double>(), c.at("f1").get<double>(),
                             c.at("support").get<std::size_t>()});
    }
    m.confusion = doc.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report: malformed metrics: ") + e.what());
  }
}

json to_json(const RunRecord& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    json loss = json::object();
    for (const auto& [t, v] : e.train_loss) loss[std::string(task_name(t))] = v;
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", loss}, {"validation", task_map(e.validation)}});
  }
  json steps = json::array();
  for (const auto& s : r.steps) {
    steps.push_back({s.step, task_name(s.task), s.loss, s.supervised, s.distill, s.weight});
  }
  json teachers = json::object();
  for (const auto& [t, h] : r.teacher_fingerprints) teachers[std::string(task_name(t))] = h;
  return {{"pipeline", r.pipeline},
          {"config", r.config_snapshot},
          {"config_hash", r.config_hash},
          {"main_task", task_name(r.main_task)},
          {"epochs", epochs},
          {"steps", steps},
          {"best_epoch", r.best_epoch},
          {"test", task_map(r.test)},
          {"main_test", to_json(r.main_test)},
          {"teacher_fingerprints", teachers},
          {"params_fingerprint", r.params_fingerprint},
          {"wall_seconds", r.wall_seconds},
          {"checkpoint_path", r.checkpoint_path}};
}

RunRecord record_from_json(const json& doc) {
  try {
    RunRecord r;
    r.pipeline = doc.at("pipeline").get<std::string>();
    r.config_snapshot = doc.at("config").get<std::string>();
    r.config_hash = doc.at("config_hash").get<std::uint64_t>();
    r.main_task = parse_task(doc.at("main_task").get<std::string>());
    for (const auto& e : doc.at("epochs")) {
      EpochRow row;
      row.epoch = e.at("epoch").get<std::size_t>();
      for (const auto& [name, v] : e.at("train_loss").items()) row.train_loss[parse_task(name)] = v.get<double>();
      row.validation = task_map_from(e.at("validation"));
      r.epochs.push_back(std::move(row));
    }
    for (const auto& s : doc.at("steps")) {
      r.steps.push_back({s.at(0).get<std::uint64_t>(), parse_task(s.at(1).get<std::string>()), s.at(2).get<double>(),
                         s.at(3).get<double>(), s.at(4).get<double>(), s.at(5).get<double>()});
    }
    r.best_epoch = doc.at("best_epoch").get<std::size_t>();
    r.test = task_map_from(doc.at("test"));
    r.main_test = metrics_from_json(doc.at("main_test"));
    for (const auto& [name, h] : doc.at("teacher_fingerprints").items()) r.teacher_fingerprints[parse_task(name)] = h.get<std::uint64_t>();
    r.params_fingerprint = doc.at("params_fingerprint").get<std::uint64_t>();
    r.wall_seconds = doc.at("wall_seconds").get<double>();
    r.checkpoint_path = doc.at("checkpoint_path").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report: malformed run record: ") + e.what());
  }
}

std::string render_metrics(const std::string& label, const MetricsReport& m, ReportFormat format) {
  if (format == ReportFormat::machine) return to_json(m).dump(2) + "\n";
  std::string out = pad("Model", 24) + pad("Acc", 8) + pad("F1", 8) + pad("P", 8) + "R\n";
  out += pad(label, 24) + metric_cells(m) + "\n";
  return out;
}

std::string render_report(const RunRecord& r, ReportFormat format) {
  if (format == ReportFormat::machine) return to_json(r).dump(2) + "\n";
  std::ostringstream out;
  out << "pipeline: " << r.pipeline << "\nmain task: " << task_name(r.main_task) << "\nbest epoch: " << r.best_epoch
      << "\nconfig hash: " << std::hex << std::setw(16) << std::setfill('0') << r.config_hash << std::dec << "\n\n";
  out << pad("Model", 24) << pad("Acc", 8) << pad("F1", 8) << pad("P", 8) << "R\n";
  out << pad(r.pipeline + " (" + std::string(task_name(r.main_task)) + ")", 24) << metric_cells(r.main_test) << "\n";
  for (const auto& [t, m] : r.test) {
    if (t != r.main_task) out << pad("  " + std::string(task_name(t)), 24) << metric_cells(m) << "\n";
  }
  out << "\n" << pad("epoch", 8) << pad("task", 12) << pad("train loss", 14) << pad("val Acc", 10) << "val F1\n";
  for (const auto& e : r.epochs) {
    for (const auto& [t, m] : e.validation) {
      auto loss = e.train_loss.find(t);
      out << pad(std::to_string(e.epoch), 8) << pad(std::string(task_name(t)), 12)
          << pad(loss == e.train_loss.end() ? "-" : format_fixed(loss->second, 6), 14) << pad(format_percent(m.accuracy), 10)
          << format_percent(m.weighted_f1) << "\n";
    }
  }
  out << "\nwall seconds: " << format_fixed(r.wall_seconds, 2) << "\n";
  if (!r.checkpoint_path.empty()) out << "checkpoint: " << r.checkpoint_path << "\n";
  return out.str();
}

RunRecord parse_report(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("report: malformed JSON: ") + e.what());
  }
  return record_from_json(doc);
}

std::string render_ablation(const AblationResult& result, ReportFormat format) {
  std::vector<std::string> labels;
  std::map<std::string, std::map<Pipeline, const AblationCell*>> grid;
  for (const auto& cell : result.cells) {
    if (!grid.count(cell.row_label)) labels.push_back(cell.row_label);
    grid[cell.row_label][cell.pipeline] = &cell;
  }
  const Pipeline columns[] = {Pipeline::mtl, Pipeline::mtkd, Pipeline::mtkd_ta};
  if (format == ReportFormat::machine) {
    json rows = json::array();
    for (const auto& label : labels) {
      json row = {{"label", label}};
      for (Pipeline p : columns) {
        auto it = grid[label].find(p);
        if (it == grid[label].end()) continue;
        row["tasks"] = json::array();
        for (TaskId t : it->second->tasks) row["tasks"].push_back(task_name(t));
        row[std::string(pipeline_name(p))] = to_json(it->second->record.main_test);
      }
      rows.push_back(row);
    }
    json teachers = json::object();
    for (const auto& [t, h] : result.teacher_fingerprints) teachers[std::string(task_name(t))] = h;
    return json{{"rows", rows}, {"teacher_fingerprints", teachers}}.dump(2) + "\n";
  }
  std::string out = pad("Model", 50) + pad("MTL", 10) + pad("MTKD", 10) + "MTKD-TA\n";
  for (const auto& label : labels) {
    out += pad(label, 50);
    for (Pipeline p : columns) {
      auto it = grid[label].find(p);
      out += pad(it == grid[label].end() ? "-" : format_percent(it->second->record.main_test.weighted_f1), 10);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += "\n";
  }
  return out;
}

}  // namespace distilkit
