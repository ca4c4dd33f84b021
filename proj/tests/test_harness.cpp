#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>
#include <sstream>

#include "samlab/emit.hpp"
#include "samlab/harness.hpp"

using namespace samlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("samlab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, RejectsUnstableAndDegenerate) {
  ExperimentConfig c = default_config(Experiment::kQuadratic);
  EXPECT_NO_THROW(validate_config(c));
  c.eta = 0.5;  // eta * lambda_1 = 1
  EXPECT_THROW(validate_config(c), std::invalid_argument);

  c = default_config(Experiment::kQuadratic);
  c.loss = "diag: 1 1 1";
  EXPECT_THROW(validate_config(c), std::invalid_argument);

  c = default_config(Experiment::kToy4D);
  c.x0 = Vector{1.5, 0.5, 0.2, 0.1};
  EXPECT_THROW(validate_config(c), std::invalid_argument);

  c = default_config(Experiment::kExplicitBias);
  c.axis1 = 0;
  EXPECT_THROW(validate_config(c), std::invalid_argument);
}

TEST(Config, KeysAndRoundTrip) {
  for (Experiment e : {Experiment::kQuadratic, Experiment::kToy4D, Experiment::kFlowCompare, Experiment::kSharpnessScan,
                       Experiment::kExplicitBias}) {
    const ExperimentConfig c = default_config(e);
    ExperimentConfig back = default_config(e);
    back.eta = 123.0;
    back.points.clear();
    apply_config_file(back, KeyValueFile::parse(format_config(c)));
    EXPECT_EQ(format_config(back), format_config(c)) << to_string(e);
  }
  ExperimentConfig c = default_config(Experiment::kToy4D);
  EXPECT_THROW(set_config_value(c, "learning_rate", "0.1"), std::invalid_argument);
  EXPECT_THROW(set_config_value(c, "eta", "fast"), std::invalid_argument);
  EXPECT_THROW(apply_config_file(c, KeyValueFile::parse("experiment = quadratic\n")), ParseError);
  set_config_value(c, "algorithm", "one_sam");
  EXPECT_EQ(c.algorithm, Algorithm::kOneSam);
}

TEST(Config, EffectiveSteps) {
  ExperimentConfig c = default_config(Experiment::kFlowCompare);
  EXPECT_EQ(effective_steps(c), 2'000'000u);
  c.steps = 7;
  EXPECT_EQ(effective_steps(c), 7u);
}

TEST(Config, RelativeLossPathUsesFileDirectory) {
  const fs::path dir = scratch("relpath");
  fs::create_directories(dir);
  std::ofstream(dir / "q.loss") << "kind = quadratic\ndiag = 3 1\n";
  std::ofstream(dir / "run.cfg") << "loss = q.loss\nx0 = 0.1 0.2\neta = 0.1\n";
  ExperimentConfig c = default_config(Experiment::kQuadratic);
  apply_config_file(c, KeyValueFile::load((dir / "run.cfg").string()));
  EXPECT_EQ(resolve_loss(c)->dimension(), 2u);
  EXPECT_NO_THROW(validate_config(c));
}

TEST(Quadratic, DefaultRunClaims) {
  const RunOutput out = run_experiment(default_config(Experiment::kQuadratic));
  const Claim* n = out.summary.find("final_norm");
  ASSERT_NE(n, nullptr);
  EXPECT_NEAR(n->target, 0.1 * 0.01 * 2.0 / (2.0 - 0.2), 1e-15);
  EXPECT_TRUE(n->pass);
  EXPECT_TRUE(out.summary.find("direction")->pass);
  EXPECT_EQ(out.summary.find("invariant_sets")->measured, 0.0);
  for (const auto& c : out.summary.claims) EXPECT_FALSE(c.provenance.empty()) << c.id;
}

TEST(Quadratic, OrthogonalStartExcludesAlignment) {
  ExperimentConfig c = default_config(Experiment::kQuadratic);
  c.x0 = Vector{0.0, 1.0, 0.0};
  const RunOutput out = run_experiment(c);
  const Claim* d = out.summary.find("direction");
  ASSERT_NE(d, nullptr);
  EXPECT_FALSE(d->asserted);
  EXPECT_TRUE(out.summary.all_pass() || !out.summary.find("final_norm")->pass);
}

TEST(FlowCompare, QuadraticHasZeroTrackingError) {
  ExperimentConfig c = default_config(Experiment::kFlowCompare);
  c.loss = "diag: 2 1";
  c.x0 = Vector{0.3, 0.4};
  c.eta = 0.1;
  c.horizon = 0.001;
  c.record_every = 10;
  const RunOutput out = run_experiment(c);
  const Claim* t = out.summary.find("tracking");
  ASSERT_NE(t, nullptr);
  EXPECT_LE(t->measured, 1e-9);
}

TEST(Emit, EmptyTrajectoryIsHeaderOnly) {
  Trajectory tr;
  tr.diagnostic_names = {"angle"};
  EXPECT_EQ(trajectory_csv(tr, 2), "t,x1,x2,loss,grad_norm,angle\n");
}

TEST(Emit, ByteIdenticalReruns) {
  const ExperimentConfig c = default_config(Experiment::kQuadratic);
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  prepare_output_dir(a.string());
  prepare_output_dir(b.string());
  emit(run_experiment(c), a.string(), 3);
  emit(run_experiment(c), b.string(), 3);
  for (const char* f : {"trajectory.csv", "summary.json", "invariant_sets.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(Emit, SummaryJsonRoundTrip) {
  RunSummary s;
  s.experiment = "quadratic";
  s.config = {{"eta", "0.1"}};
  s.claims.push_back({"a", "first", 1.0, 0.999, 0.01, true, true, "formula"});
  s.claims.push_back({"b", "undefined", 1.0, std::numeric_limits<double>::infinity(), 0.0, false, false, "def"});
  s.notes = {{"k", "v"}};
  const std::string text = summary_json(s);
  const RunSummary back = parse_summary_json(text);
  EXPECT_EQ(summary_json(back), text);
  EXPECT_TRUE(std::isinf(back.claims[1].measured));
  EXPECT_FALSE(back.claims[1].asserted);
}

TEST(Emit, UnwritableOutputRejected) {
  const fs::path file = scratch("not_a_dir");
  std::ofstream(file) << "x";
  EXPECT_THROW(prepare_output_dir((file / "sub").string()), std::runtime_error);
}
