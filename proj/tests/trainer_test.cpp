// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <set>

#include "distilkit/error.hpp"
#include "distilkit/trainer.hpp"
#include "support.hpp"

namespace distilkit {
namespace {

constexpr TaskId kOffense = TaskId::offense;
constexpr TaskId kEmotion = TaskId::emotion;

const TaskSpec& offense_spec() {
  static const TaskSpec spec = TaskSpec::defaults(kOffense);
  return spec;
}

const DatasetMap& two_tasks() {
  static const DatasetMap data = [] {
    const std::vector<TaskId> tasks{kOffense, kEmotion};
    return testing::synthetic_tasks(tasks, 60, 11);
  }();
  return data;
}

TrainConfig two_task_config() {
  TrainConfig c = testing::tiny_config();
  c.active_tasks = {kOffense, kEmotion};
  return c;
}

std::vector<double> losses(const RunRecord& r) {
  std::vector<double> out;
  for (const auto& s : r.steps) out.push_back(s.loss);
  return out;
}

TEST(TrainConfig, Validation) {
  TrainConfig c = testing::tiny_config();
  EXPECT_NO_THROW(c.validate());
  for (std::size_t bad : {0u, 1u, 31u}) {
    c.epochs = bad;
    EXPECT_THROW(c.validate(), ValidationError) << bad;
  }
  c.epochs = 30;
  EXPECT_NO_THROW(c.validate());
  c.active_tasks = {kEmotion};
  EXPECT_THROW(c.validate(), ValidationError);
  c.active_tasks = {kOffense, kOffense};
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_EQ(TrainConfig::paper_preset().learning_rate, 2e-5);
  EXPECT_EQ(parse_pipeline("mtkd_ta"), Pipeline::mtkd_ta);
  EXPECT_THROW(parse_pipeline("bert"), ValidationError);
}

TEST(FineTune, RecordShapeAndDeterminism) {
  const TrainConfig c = testing::tiny_config();
  const DatasetSplit& data = two_tasks().at(kOffense);
  const TrainResult a = fine_tune(offense_spec(), data, c);
  EXPECT_EQ(a.record.pipeline, "finetune");
  EXPECT_EQ(a.record.epochs.size(), 2u);
  EXPECT_GE(a.record.best_epoch, 1u);
  EXPECT_LE(a.record.best_epoch, 2u);
  EXPECT_EQ(a.record.steps.size(), 2 * ((data.train.size() + 7) / 8));
  EXPECT_EQ(a.params.config.n_layers, 2u);
  EXPECT_EQ(a.params.config.vocab_size, a.vocab.size());
  for (const auto& s : a.record.steps) EXPECT_EQ(s.weight, 1.0);
  const TrainResult b = fine_tune(offense_spec(), data, c);
  EXPECT_TRUE(a.record.same_results(b.record));
  EXPECT_EQ(a.params, b.params);
  TrainConfig other = c;
  other.seed = 4;
  EXPECT_NE(fine_tune(offense_spec(), data, other).params.fingerprint(), a.params.fingerprint());
}

TEST(Distill, AlphaOneMatchesFineTuneOfStudent) {
  TrainConfig c = testing::tiny_config();
  const DatasetSplit& data = two_tasks().at(kOffense);
  const TrainResult teacher = fine_tune(offense_spec(), data, c);
  const std::uint64_t teacher_print = teacher.params.fingerprint();
  c.distill.alpha = 1.0;
  const TrainResult kd = distill(teacher, offense_spec(), data, c);
  const TrainResult plain = fine_tune(offense_spec(), data, c, c.student_model);
  EXPECT_EQ(losses(kd.record), losses(plain.record));
  EXPECT_EQ(kd.params.fingerprint(), plain.params.fingerprint());
  EXPECT_EQ(teacher.params.fingerprint(), teacher_print);
  EXPECT_EQ(kd.record.teacher_fingerprints.at(kOffense), teacher_print);
  for (const auto& s : kd.record.steps) {
    EXPECT_EQ(s.weight, 1.0);
    EXPECT_GE(s.distill, 0.0);
  }
}

TEST(Distill, AlphaZeroIgnoresLabels) {
  TrainConfig c = testing::tiny_config();
  const DatasetSplit& data = two_tasks().at(kOffense);
  const TrainResult teacher = fine_tune(offense_spec(), data, c);
  c.distill.alpha = 0.0;
  const TrainResult kd = distill(teacher, offense_spec(), data, c);
  for (const auto& s : kd.record.steps) EXPECT_NEAR(s.loss, s.distill, 1e-12);
}

TEST(Distill, RejectsVocabularyMismatch) {
  const TrainConfig c = testing::tiny_config();
  const TrainResult teacher = fine_tune(offense_spec(), two_tasks().at(kOffense), c);
  DatasetSplit other = two_tasks().at(kOffense);
  other.train[0].text += " zyzzyva";
  EXPECT_THROW(distill(teacher, offense_spec(), other, c), ValidationError);
}

TEST(Mtl, SingleTaskEqualsFineTune) {
  const TrainConfig c = testing::tiny_config();
  const DatasetMap data{{kOffense, two_tasks().at(kOffense)}};
  const TrainResult mtl = train_mtl(data, c);
  const TrainResult ft = fine_tune(offense_spec(), data.at(kOffense), c, c.student_model);
  EXPECT_EQ(losses(mtl.record), losses(ft.record));
  EXPECT_EQ(mtl.params.fingerprint(), ft.params.fingerprint());
}

TEST(Mtl, HeadsFollowActiveTasks) {
  TrainConfig c = two_task_config();
  const TrainResult both = train_mtl(two_tasks(), c);
  EXPECT_TRUE(both.params.has_head(kEmotion));
  EXPECT_EQ(both.record.test.size(), 2u);
  EXPECT_EQ(both.record.main_task, kOffense);
  EXPECT_EQ(both.record.main_test, both.record.test.at(kOffense));
  std::set<TaskId> seen;
  for (const auto& s : both.record.steps) seen.insert(s.task);
  EXPECT_EQ(seen.size(), 2u);
  EXPECT_EQ(both.record.steps.size(), planned_steps(two_tasks(), c, 2));

  c.active_tasks = {kOffense};
  const TrainResult one = train_mtl(two_tasks(), c);
  EXPECT_FALSE(one.params.has_head(kEmotion));
  EXPECT_EQ(one.record.test.count(kEmotion), 0u);

  c.active_tasks = {kOffense, TaskId::sexism};
  EXPECT_THROW(train_mtl(two_tasks(), c), ValidationError);
}

TEST(Mtl, PerRoundAccumulationStepsOncePerRound) {
  TrainConfig c = two_task_config();
  c.accumulation = Accumulation::per_round;
  const TrainResult r = train_mtl(two_tasks(), c);
  std::size_t batches = 0;
  for (TaskId t : {kOffense, kEmotion}) batches += (two_tasks().at(t).train.size() + 7) / 8;
  EXPECT_EQ(planned_steps(two_tasks(), c, 1), (batches + 1) / 2);
  EXPECT_EQ(r.record.steps.back().step + 1, planned_steps(two_tasks(), c, 2));
}

class MultiTaskDistill : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { teachers_ = new TeacherBundle(train_teachers(two_tasks(), two_task_config())); }
  static void TearDownTestSuite() {
    delete teachers_;
    teachers_ = nullptr;
  }
  static TeacherBundle* teachers_;
};
TeacherBundle* MultiTaskDistill::teachers_ = nullptr;

TEST_F(MultiTaskDistill, TeachersAreSingleTaskAndFrozen) {
  EXPECT_EQ(teachers_->tasks(), (std::vector<TaskId>{kOffense, kEmotion}));
  EXPECT_FALSE(teachers_->at(kOffense).params.has_head(kEmotion));
  EXPECT_THROW(teachers_->at(TaskId::sexism), ValidationError);
  const auto before = teachers_->fingerprints();
  TrainConfig c = two_task_config();
  const TrainResult r = train_mtkd(*teachers_, two_tasks(), c);
  EXPECT_EQ(teachers_->fingerprints(), before);
  EXPECT_EQ(r.record.teacher_fingerprints, before);
  EXPECT_EQ(r.params.config.n_layers, 1u);
}

TEST_F(MultiTaskDistill, AlphaOneEqualsMtl) {
  TrainConfig c = two_task_config();
  c.distill.alpha = 1.0;
  const TrainResult mtkd = train_mtkd(*teachers_, two_tasks(), c);
  const TrainResult mtl = train_mtl(two_tasks(), c);
  EXPECT_EQ(losses(mtkd.record), losses(mtl.record));
  EXPECT_EQ(mtkd.params.fingerprint(), mtl.params.fingerprint());
}

TEST_F(MultiTaskDistill, AnnealedWeightRunsFromZeroToOne) {
  TrainConfig c = two_task_config();
  EXPECT_THROW(train_mtkd_ta(*teachers_, two_tasks(), c), ValidationError);
  c.anneal = AnnealPlan{};
  const TrainResult r = train_mtkd_ta(*teachers_, two_tasks(), c);
  const auto& steps = r.record.steps;
  ASSERT_EQ(steps.size(), planned_steps(two_tasks(), c, 2));
  EXPECT_EQ(steps.front().weight, 0.0);
  EXPECT_EQ(steps.back().weight, 1.0);
  EXPECT_NEAR(steps.front().loss, steps.front().distill, 1e-12);
  EXPECT_NEAR(steps.back().loss, steps.back().supervised, 1e-12);
  for (std::size_t i = 1; i < steps.size(); ++i) EXPECT_GE(steps[i].weight, steps[i - 1].weight);

  c.anneal->total_steps = 3;
  const TrainResult fast = train_mtkd_ta(*teachers_, two_tasks(), c);
  EXPECT_EQ(fast.record.steps[3].weight, 1.0);
  EXPECT_NEAR(fast.record.steps[1].weight, 1.0 / 3.0, 1e-15);
}

TEST_F(MultiTaskDistill, MissingTeacherRejected) {
  std::map<TaskId, TrainResult> only;
  only.emplace(kOffense, teachers_->at(kOffense));
  const TeacherBundle partial(std::move(only));
  EXPECT_THROW(train_mtkd(partial, two_tasks(), two_task_config()), ValidationError);
}

TEST_F(MultiTaskDistill, MainTaskScopeDropsAuxiliaryLabels) {
  TrainConfig c = two_task_config();
  c.supervised_scope = SupervisedScope::main_task;
  const TrainResult r = train_mtkd(*teachers_, two_tasks(), c);
  for (const auto& s : r.record.steps) {
    if (s.task == kEmotion) {
      EXPECT_EQ(s.supervised, 0.0);
      EXPECT_NEAR(s.loss, (1.0 - c.distill.alpha) * s.distill, 1e-12);
    }
  }
}

TEST(Augmented, MixupReplaceAndDeterminism) {
  TrainConfig c = testing::tiny_config();
  AugmentConfig mix;
  mix.kind = AugmentKind::mixup_sentence;
  mix.mixup_lambda = 1.0;
  c.augmentations = {mix};
  c.mixup_mode = MixupMode::replace;
  const DatasetSplit& data = two_tasks().at(kOffense);
  // Lambda 1 reproduces the clean batch, so replace mode matches no augmentation.
  const TrainResult replaced = fine_tune(offense_spec(), data, c);
  TrainConfig plain = testing::tiny_config();
  EXPECT_EQ(replaced.params.fingerprint(), fine_tune(offense_spec(), data, plain).params.fingerprint());

  AugmentConfig asda;
  asda.kind = AugmentKind::asda;
  c.augmentations = {asda, mix};
  c.mixup_mode = MixupMode::supplement;
  const TrainResult a = fine_tune(offense_spec(), data, c);
  EXPECT_GT(a.record.steps.size(), plain.epochs * ((data.train.size() + 7) / 8));
  EXPECT_TRUE(a.record.same_results(fine_tune(offense_spec(), data, c).record));
}

TEST(Ablation, LabelsAndSubsets) {
  const auto subsets = ablation_subsets();
  ASSERT_EQ(subsets.size(), 8u);
  std::set<std::string> labels;
  for (const auto& s : subsets) {
    EXPECT_EQ(s.front(), kOffense);
    labels.insert(ablation_row_label(s));
  }
  EXPECT_EQ(labels.size(), 8u);
  EXPECT_EQ(ablation_row_label(subsets[0]), "Proposed model");
  EXPECT_EQ(ablation_row_label(subsets[1]), "w/o emotions & sentiment & sexist language");
  const std::vector<TaskId> no_emotion{kOffense, TaskId::sentiment, TaskId::sexism};
  EXPECT_EQ(ablation_row_label(no_emotion), "w/o emotions");
}

TEST(Ablation, RunsThreePipelinesPerSubset) {
  const std::vector<std::vector<TaskId>> subsets{{kOffense, kEmotion}, {kOffense}};
  const AblationResult r = run_ablation(two_tasks(), two_task_config(), subsets);
  ASSERT_EQ(r.cells.size(), 6u);
  EXPECT_EQ(r.cells[0].pipeline, Pipeline::mtl);
  EXPECT_EQ(r.cells[2].pipeline, Pipeline::mtkd_ta);
  EXPECT_EQ(r.cells[0].row_label, "w/o sentiment & sexist language");
  EXPECT_EQ(r.cells[3].row_label, "w/o emotions & sentiment & sexist language");
  EXPECT_EQ(r.teacher_fingerprints.size(), 2u);
  EXPECT_EQ(r.cells[4].record.teacher_fingerprints.at(kOffense), r.teacher_fingerprints.at(kOffense));
  const std::vector<std::vector<TaskId>> bad{{kEmotion}};
  EXPECT_THROW(run_ablation(two_tasks(), two_task_config(), bad), ValidationError);
}

}  // namespace
}  // namespace distilkit
