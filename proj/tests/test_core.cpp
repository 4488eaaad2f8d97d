#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "caos/core.hpp"
#include "caos/simlab.hpp"
#include "test_util.hpp"

namespace caos {
namespace {

struct ConstantProvider {
  using input_type = int;
  std::size_t num_labels() const { return 2; }
  double score(const Labeled<int>&, const int&, Label) const { return 0.5; }
};

// 1 when the reference label differs from the candidate label, else 0.
struct LabelMismatchProvider {
  using input_type = int;
  std::size_t num_labels() const { return 2; }
  double score(const Labeled<int>& ref, const int&, Label y) const { return ref.label != y ? 1.0 : 0.0; }
};

struct NanProvider {
  using input_type = int;
  std::size_t num_labels() const { return 2; }
  double score(const Labeled<int>& ref, const int& x, Label) const {
    return ref.input == 1 && x == 0 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  }
};

static_assert(ScoreProvider<ConstantProvider>);
static_assert(ScoreProvider<SyntheticProvider>);

TEST(LabelSpace, RejectsEmptyAndDuplicateNames) {
  EXPECT_THROW(LabelSpace(0), ConfigError);
  EXPECT_THROW(LabelSpace(std::vector<std::string>{"a", "a"}), ConfigError);
  LabelSpace named(std::vector<std::string>{"cat", "dog"});
  EXPECT_EQ(named.size(), 2u);
  EXPECT_EQ(named.name(1), "dog");
  EXPECT_EQ(LabelSpace(3).name(2), "2");
}

TEST(Materialize, ConstantProviderFillsEveryBlock) {
  const std::vector<Labeled<int>> calib{{0, 0}, {1, 1}};
  const std::vector<int> test{5};
  const auto t = materialize(ConstantProvider{}, std::span<const Labeled<int>>(calib), std::span<const int>(test), true);
  for (double v : t.p_block()) EXPECT_EQ(v, 0.5);
  for (double v : t.test_block()) EXPECT_EQ(v, 0.5);
  for (double v : t.full_block()) EXPECT_EQ(v, 0.5);
  EXPECT_EQ(t.full_block().size(), 4u);
}

TEST(Materialize, ScoresFollowReferenceLabel) {
  const std::vector<Labeled<int>> calib{{0, 0}, {1, 1}};
  const std::vector<int> test{7};
  const auto t = materialize(LabelMismatchProvider{}, std::span<const Labeled<int>>(calib), std::span<const int>(test),
                             false);
  EXPECT_EQ(t.test(0, 0, 0), 0.0);
  EXPECT_EQ(t.test(0, 1, 0), 1.0);
  EXPECT_FALSE(t.has_full());
}

TEST(Materialize, RejectsTinyCalibrationSet) {
  const std::vector<Labeled<int>> calib{{0, 0}};
  EXPECT_THROW(materialize(ConstantProvider{}, std::span<const Labeled<int>>(calib), std::span<const int>(), false),
               PreconditionError);
}

TEST(Materialize, NonFiniteScoreIsLocated) {
  const std::vector<Labeled<int>> calib{{0, 0}, {1, 1}};
  try {
    materialize(NanProvider{}, std::span<const Labeled<int>>(calib), std::span<const int>(), false);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("block P at [0,1"), std::string::npos) << e.what();
  }
}

TEST(Materialize, SyntheticEntriesMatchDirectRecomputation) {
  SyntheticTaskSpec spec;
  spec.n = 4;
  spec.num_test = 2;
  spec.num_labels = 3;
  spec.seed = 99;
  const auto task = generate_task_with_examples(spec);
  const SyntheticProvider provider(spec.num_labels, spec.dim);
  const auto& c = task.calibration;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(task.tensor.p(i, j), provider.score(c[j], c[i].input, c[i].label));
  for (std::size_t r = 0; r < 2; ++r)
    for (Label y = 0; y < 3; ++y)
      for (std::size_t i = 0; i < 4; ++i) {
        const Labeled<SyntheticInput> hyp{task.test[r].input, y};
        EXPECT_EQ(task.tensor.full(r, y, i), provider.score(hyp, c[i].input, c[i].label));
        EXPECT_EQ(task.tensor.test(r, i, y), provider.score(c[i], task.test[r].input, y));
      }
}

TEST(Materialize, IsPure) {
  SyntheticTaskSpec spec;
  spec.n = 6;
  spec.seed = 5;
  const auto task = generate_task_with_examples(spec);
  std::vector<SyntheticInput> test_inputs;
  for (const auto& e : task.test) test_inputs.push_back(e.input);
  const SyntheticProvider provider(spec.num_labels, spec.dim);
  const auto a = materialize(provider, std::span<const Labeled<SyntheticInput>>(task.calibration),
                             std::span<const SyntheticInput>(test_inputs), true, true);
  const auto b = materialize(provider, std::span<const Labeled<SyntheticInput>>(task.calibration),
                             std::span<const SyntheticInput>(test_inputs), true, true);
  EXPECT_TRUE(testing::bit_identical(a, b));
}

TEST(ScoreTensor, ValidateLocatesNonFinite) {
  ScoreTensor t(3, 1, 2, true);
  t.test(0, 2, 1) = std::numeric_limits<double>::infinity();
  try {
    t.validate();
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("block test at [0,2,1]"), std::string::npos) << e.what();
  }
  t.test(0, 2, 1) = 0.0;
  t.full(0, 1, 2) = std::nan("");
  EXPECT_THROW(t.validate(), DataError);
}

TEST(ScoreTensor, TruthMustFitLabelSpace) {
  ScoreTensor t(2, 2, 3);
  EXPECT_THROW(t.set_truth({0}), DataError);
  EXPECT_THROW(t.set_truth({0, 3}), DataError);
  t.set_truth({2, 1});
  EXPECT_EQ(t.truth()[0], 2u);
}

TEST(ExperimentConfig, FieldLevelValidation) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate(10));
  c.alphas = {0.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c.alphas = {0.1};
  c.k = 10;
  try {
    c.validate(10);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("k:", 0), 0u);
  }
  c.k = 9;
  EXPECT_NO_THROW(c.validate(10));
}

}  // namespace
}  // namespace caos
