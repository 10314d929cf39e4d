// SPDX-License-Identifier: Apache-2.0
#include "distilkit/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "distilkit/error.hpp"

namespace distilkit {

using nlohmann::json;

namespace {

void only_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError("config: " + where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) throw ValidationError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: bad value for '" + std::string(key) + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (obj.contains(key)) out = get<T>(obj, key, where);
}

std::vector<TaskId> read_tasks(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw ValidationError("config: " + where + " must be a list of task names");
  std::vector<TaskId> out;
  for (const auto& v : arr) {
    if (!v.is_string()) throw ValidationError("config: " + where + " must be a list of task names");
    out.push_back(parse_task(v.get<std::string>()));
  }
  return out;
}

json tasks_json(std::span<const TaskId> tasks) {
  json arr = json::array();
  for (TaskId t : tasks) arr.push_back(task_name(t));
  return arr;
}

json model_json(const ModelConfig& m) {
  return {{"d_model", m.d_model}, {"n_heads", m.n_heads}, {"n_layers", m.n_layers},
          {"d_ff", m.d_ff},       {"max_len", m.max_len}, {"dropout", m.dropout_rate}};
}

ModelConfig model_from_json(const json& doc, ModelConfig base, const std::string& where) {
  only_keys(doc, {"d_model", "n_heads", "n_layers", "d_ff", "max_len", "dropout"}, where);
  read(doc, "d_model", base.d_model, where);
  read(doc, "n_heads", base.n_heads, where);
  read(doc, "n_layers", base.n_layers, where);
  read(doc, "d_ff", base.d_ff, where);
  read(doc, "max_len", base.max_len, where);
  read(doc, "dropout", base.dropout_rate, where);
  return base;
}

SplitRatios split_from_json(const json& doc, const std::string& where) {
  only_keys(doc, {"train", "validation", "test"}, where);
  SplitRatios r;
  read(doc, "train", r.train, where);
  read(doc, "validation", r.validation, where);
  read(doc, "test", r.test, where);
  r.validate();
  return r;
}

}  // namespace

SyntheticSpec SyntheticSettings::spec_for(const TaskSpec& task) const {
  SyntheticSpec s = SyntheticSpec::defaults_for(task);
  s.examples_per_task = examples_per_task;
  s.vocab_size = vocab_size;
  s.keyword_count_per_class = keyword_count_per_class;
  s.min_tokens = min_tokens;
  s.max_tokens = max_tokens;
  if (auto it = class_proportions.find(task.id); it != class_proportions.end()) {
    s.class_proportions.clear();
    for (const auto& [label, p] : it->second) s.class_proportions[label] = p;
  }
  s.validate(task);
  return s;
}

json to_json(const AugmentConfig& a) {
  return {{"kind", augment_kind_name(a.kind)},
          {"noisy_gate_alpha", a.noisy_gate_alpha},
          {"word_drop_rate", a.word_drop_rate},
          {"word_drop_min", a.word_drop_min},
          {"word_drop_max", a.word_drop_max},
          {"mixup_lambda", a.mixup_lambda},
          {"asda_mask_rate", a.asda_mask_rate},
          {"continuation_keep_fraction", a.continuation_keep_fraction}};
}

AugmentConfig augment_config_from_json(const json& doc) {
  const std::string where = "augmentations";
  only_keys(doc, {"kind", "noisy_gate_alpha", "word_drop_rate", "word_drop_min", "word_drop_max", "mixup_lambda",
                  "asda_mask_rate", "continuation_keep_fraction"},
            where);
  if (!doc.contains("kind")) throw ValidationError("config: augmentation entry without 'kind'");
  AugmentConfig a;
  a.kind = parse_augment_kind(get<std::string>(doc, "kind", where));
  read(doc, "noisy_gate_alpha", a.noisy_gate_alpha, where);
  read(doc, "word_drop_rate", a.word_drop_rate, where);
  read(doc, "word_drop_min", a.word_drop_min, where);
  read(doc, "word_drop_max", a.word_drop_max, where);
  read(doc, "mixup_lambda", a.mixup_lambda, where);
  read(doc, "asda_mask_rate", a.asda_mask_rate, where);
  read(doc, "continuation_keep_fraction", a.continuation_keep_fraction, where);
  a.validate();
  return a;
}

json to_json(const TrainConfig& c) {
  json per_task = json::object();
  for (const auto& [t, temp] : c.distill.per_task_temperature) per_task[std::string(task_name(t))] = temp;
  json augs = json::array();
  for (const auto& a : c.augmentations) augs.push_back(to_json(a));
  json anneal = nullptr;
  if (c.anneal) {
    anneal = json::object();
    if (c.anneal->total_steps) anneal["total_steps"] = *c.anneal->total_steps;
  }
  json train = {{"learning_rate", c.learning_rate},
                {"weight_decay", c.weight_decay},
                {"batch_size", c.batch_size},
                {"epochs", c.epochs},
                {"min_frequency", c.min_frequency},
                {"supervised_scope", c.supervised_scope == SupervisedScope::all_tasks ? "all_tasks" : "main_task"},
                {"accumulation", c.accumulation == Accumulation::per_batch ? "per_batch" : "per_round"},
                {"mixup_mode", c.mixup_mode == MixupMode::supplement ? "supplement" : "replace"}};
  if (c.student_epochs) train["student_epochs"] = *c.student_epochs;
  return {{"seed", c.seed},
          {"tasks", tasks_json(c.active_tasks)},
          {"train", train},
          {"distill", {{"temperature", c.distill.temperature}, {"alpha", c.distill.alpha}, {"per_task_temperature", per_task}}},
          {"anneal", anneal},
          {"augmentations", augs},
          {"teacher_model", model_json(c.teacher_model)},
          {"student_model", model_json(c.student_model)}};
}

TrainConfig train_config_from_json(const json& doc, TrainConfig c) {
  if (!doc.is_object()) throw ValidationError("config: top level must be an object");
  read(doc, "seed", c.seed, "config");
  if (doc.contains("tasks")) c.active_tasks = read_tasks(doc["tasks"], "tasks");
  if (doc.contains("train")) {
    const json& t = doc["train"];
    const std::string w = "train";
    only_keys(t, {"learning_rate", "weight_decay", "batch_size", "epochs", "student_epochs", "min_frequency",
                  "supervised_scope", "accumulation", "mixup_mode"},
              w);
    read(t, "learning_rate", c.learning_rate, w);
    read(t, "weight_decay", c.weight_decay, w);
    read(t, "batch_size", c.batch_size, w);
    read(t, "epochs", c.epochs, w);
    if (t.contains("student_epochs")) c.student_epochs = get<std::size_t>(t, "student_epochs", w);
    read(t, "min_frequency", c.min_frequency, w);
    if (t.contains("supervised_scope")) {
      const auto v = get<std::string>(t, "supervised_scope", w);
      if (v != "all_tasks" && v != "main_task") throw ValidationError("config: supervised_scope must be all_tasks or main_task");
      c.supervised_scope = v == "all_tasks" ? SupervisedScope::all_tasks : SupervisedScope::main_task;
    }
    if (t.contains("accumulation")) {
      const auto v = get<std::string>(t, "accumulation", w);
      if (v != "per_batch" && v != "per_round") throw ValidationError("config: accumulation must be per_batch or per_round");
      c.accumulation = v == "per_batch" ? Accumulation::per_batch : Accumulation::per_round;
    }
    if (t.contains("mixup_mode")) {
      const auto v = get<std::string>(t, "mixup_mode", w);
      if (v != "supplement" && v != "replace") throw ValidationError("config: mixup_mode must be supplement or replace");
      c.mixup_mode = v == "supplement" ? MixupMode::supplement : MixupMode::replace;
    }
  }
  if (doc.contains("distill")) {
    const json& d = doc["distill"];
    only_keys(d, {"temperature", "alpha", "per_task_temperature"}, "distill");
    read(d, "temperature", c.distill.temperature, "distill");
    read(d, "alpha", c.distill.alpha, "distill");
    if (d.contains("per_task_temperature")) {
      const json& p = d["per_task_temperature"];
      if (!p.is_object()) throw ValidationError("config: per_task_temperature must be an object");
      c.distill.per_task_temperature.clear();
      for (const auto& [name, v] : p.items()) {
        if (!v.is_number()) throw ValidationError("config: temperature for " + name + " must be a number");
        c.distill.per_task_temperature[parse_task(name)] = v.get<double>();
      }
    }
  }
  if (doc.contains("anneal")) {
    const json& a = doc["anneal"];
    if (a.is_null()) {
      c.anneal.reset();
    } else {
      only_keys(a, {"total_steps"}, "anneal");
      c.anneal = AnnealPlan{};
      if (a.contains("total_steps") && !a["total_steps"].is_null()) {
        c.anneal->total_steps = get<std::uint64_t>(a, "total_steps", "anneal");
      }
    }
  }
  if (doc.contains("augmentations")) {
    const json& a = doc["augmentations"];
    if (!a.is_array()) throw ValidationError("config: augmentations must be a list");
    c.augmentations.clear();
    for (const auto& entry : a) c.augmentations.push_back(augment_config_from_json(entry));
  }
  if (doc.contains("teacher_model")) c.teacher_model = model_from_json(doc["teacher_model"], c.teacher_model, "teacher_model");
  if (doc.contains("student_model")) c.student_model = model_from_json(doc["student_model"], c.student_model, "student_model");
  c.validate();
  return c;
}

std::string config_snapshot(const TrainConfig& config, Pipeline pipeline, std::span<const TaskId> tasks) {
  json doc = to_json(config);
  doc["pipeline"] = pipeline_name(pipeline);
  doc["run_tasks"] = tasks_json(tasks);
  return doc.dump();
}

TaskSpec ExperimentConfig::task_spec(TaskId task) const {
  TaskSpec spec = TaskSpec::defaults(task);
  if (auto it = split_ratios.find(task); it != split_ratios.end()) spec.split = it->second;
  return spec;
}

void ExperimentConfig::require_datasets() const {
  for (TaskId t : train.active_tasks) {
    auto it = datasets.find(t);
    if (it == datasets.end()) throw ValidationError("config: no dataset path for task " + std::string(task_name(t)));
    if (!std::filesystem::exists(it->second)) throw ValidationError("config: dataset " + it->second.string() + " does not exist");
  }
}

ExperimentConfig ExperimentConfig::from_json(const json& doc, const std::filesystem::path& base_dir) {
  only_keys(doc,
            {"pipeline", "preset", "seed", "tasks", "datasets", "output_dir", "train", "distill", "anneal",
             "augmentations", "teacher_model", "student_model", "synthetic", "ablation", "split_ratios"},
            "config");
  ExperimentConfig e;
  TrainConfig base;
  if (doc.contains("preset")) {
    const auto preset = get<std::string>(doc, "preset", "config");
    if (preset == "paper") {
      base = TrainConfig::paper_preset();
    } else if (preset != "toy") {
      throw ValidationError("config: preset must be toy or paper");
    }
  }
  if (doc.contains("pipeline")) e.pipeline = parse_pipeline(get<std::string>(doc, "pipeline", "config"));
  e.train = train_config_from_json(doc, base);
  const auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  if (doc.contains("datasets")) {
    const json& d = doc["datasets"];
    if (!d.is_object()) throw ValidationError("config: datasets must map task names to paths");
    for (const auto& [name, v] : d.items()) {
      if (!v.is_string()) throw ValidationError("config: dataset path for " + name + " must be a string");
      e.datasets[parse_task(name)] = resolve(v.get<std::string>());
    }
  }
  if (doc.contains("output_dir")) e.output_dir = resolve(get<std::string>(doc, "output_dir", "config"));
  if (doc.contains("synthetic")) {
    const json& s = doc["synthetic"];
    const std::string w = "synthetic";
    only_keys(s, {"examples_per_task", "vocab_size", "keyword_count_per_class", "min_tokens", "max_tokens", "class_proportions"}, w);
    read(s, "examples_per_task", e.synthetic.examples_per_task, w);
    read(s, "vocab_size", e.synthetic.vocab_size, w);
    read(s, "keyword_count_per_class", e.synthetic.keyword_count_per_class, w);
    read(s, "min_tokens", e.synthetic.min_tokens, w);
    read(s, "max_tokens", e.synthetic.max_tokens, w);
    if (s.contains("class_proportions")) {
      for (const auto& [name, props] : s["class_proportions"].items()) {
        e.synthetic.class_proportions[parse_task(name)] = props.get<std::map<std::string, double>>();
      }
    }
  }
  if (doc.contains("ablation")) {
    only_keys(doc["ablation"], {"subsets"}, "ablation");
    if (doc["ablation"].contains("subsets")) {
      e.ablation_subsets.clear();
      for (const auto& subset : doc["ablation"]["subsets"]) e.ablation_subsets.push_back(read_tasks(subset, "ablation subset"));
    }
  }
  if (doc.contains("split_ratios")) {
    for (const auto& [name, r] : doc["split_ratios"].items()) e.split_ratios[parse_task(name)] = split_from_json(r, "split_ratios");
  }
  return e;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  return from_json(doc, base_dir);
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.parent_path());
}

}  // namespace distilkit
