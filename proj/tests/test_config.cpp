#include <gtest/gtest.h>

#include <sstream>

#include "mixdec/commands.hpp"
#include "mixdec/config.hpp"

using namespace mixdec;

namespace {

RunConfig from_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  c.load(in, "test.conf");
  return c;
}

}  // namespace

TEST(RunConfig, DefaultsBuildEveryView) {
  RunConfig c;
  EXPECT_NO_THROW(c.pipeline());
  EXPECT_NO_THROW(c.synthetic());
  EXPECT_NO_THROW(c.split());
  EXPECT_NO_THROW(c.filter());
  EXPECT_EQ(c.model().dim, 128u);
  EXPECT_EQ(c.train().mode, SamplingMode::MixDec);
  EXPECT_EQ(c.decay().k, 500u);
  EXPECT_EQ(c.candidates().n_neg, 499u);
  EXPECT_EQ(c.pipeline().k, 30u);
}

TEST(RunConfig, UnknownKeyRejected) {
  RunConfig c;
  EXPECT_THROW(c.set("dimension", "4"), ValidationError);
  try {
    from_text("dim = 4\n\nbogus = 1\n");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("test.conf:3"), std::string::npos);
  }
}

TEST(RunConfig, MalformedLineIsParseError) { EXPECT_THROW(from_text("dim 4\n"), ParseError); }

TEST(RunConfig, CommentsAndWhitespace) {
  auto c = from_text("# model\n  dim=16  \nmode = uniform\n");
  EXPECT_EQ(c.model().dim, 16u);
  EXPECT_EQ(c.train().mode, SamplingMode::UniformOnly);
}

TEST(RunConfig, BadValuesFailInTheirView) {
  EXPECT_THROW(from_text("dim = 0").model(), ValidationError);
  EXPECT_THROW(from_text("dim = -3").model(), ValidationError);
  EXPECT_THROW(from_text("dim = 3x").model(), ValidationError);
  EXPECT_THROW(from_text("rho = 1").decay(), ValidationError);
  EXPECT_THROW(from_text("l = 4").decay(), ValidationError);
  EXPECT_THROW(from_text("mode = both").train(), ValidationError);
  EXPECT_THROW(from_text("aggregator = lstm").model(), ValidationError);
  EXPECT_THROW(from_text("alpha = 0").train(), ValidationError);
  EXPECT_THROW(from_text("select_best = maybe").train(), ValidationError);
  EXPECT_THROW(from_text("n_neg = 0").candidates(), ValidationError);
  EXPECT_THROW(from_text("K = 0").pipeline(), ValidationError);
  EXPECT_THROW(from_text("split_test = 0.5").split(), ValidationError);
  EXPECT_THROW(from_text("sparsity_ratios = 0,1").sparsity_ratios(), ValidationError);
  EXPECT_THROW(from_text("sparsity_modes = uniform,fancy").sparsity_modes(), ValidationError);
}

TEST(RunConfig, ResolvedRoundTrip) {
  auto c = from_text("dim = 16\nmode = decay\nsparsity_ratios = 0, 0.5\n");
  auto again = from_text(c.resolved());
  EXPECT_EQ(again.resolved(), c.resolved());
  EXPECT_NE(c.resolved().find("dim = 16\n"), std::string::npos);
  auto text = c.resolved();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'),
            static_cast<std::ptrdiff_t>(RunConfig::defaults().size()));
}

TEST(RunConfig, Assignments) {
  RunConfig c;
  c.set_assignment("epochs=7");
  c.set_assignment(" c_m = 2 ");
  EXPECT_EQ(c.train().epochs, 7u);
  EXPECT_EQ(c.train().counts.c_m, 2u);
  EXPECT_THROW(c.set_assignment("epochs"), ValidationError);
  EXPECT_THROW(c.set_assignment("nope=1"), ValidationError);
}

TEST(RunConfig, Lists) {
  auto c = from_text("sparsity_ratios = 0, 0.25 ,0.5\nsparsity_modes = mixup,decay\nsparsity_seeds = 3\nseed = 10\n");
  EXPECT_EQ(c.sparsity_ratios(), (std::vector<double>{0, 0.25, 0.5}));
  EXPECT_EQ(c.sparsity_modes(), (std::vector<SamplingMode>{SamplingMode::Mixup, SamplingMode::Decay}));
  EXPECT_EQ(c.sparsity_seeds(), (std::vector<std::uint64_t>{10, 11, 12}));
}

TEST(RunConfig, SeedReachesEveryStream) {
  auto c = from_text("seed = 42\n");
  EXPECT_EQ(c.model().seed, 42u);
  EXPECT_EQ(c.train().seed, 42u);
  EXPECT_EQ(c.decay().seed, 42u);
  EXPECT_EQ(c.candidates().seed, 42u);
  EXPECT_EQ(c.synthetic().seed, 42u);
}

TEST(ExitCodes, MapErrorKinds) {
  EXPECT_EQ(cmd::exit_code_for(MissingInputError("x")), cmd::kExitMissingInput);
  EXPECT_EQ(cmd::exit_code_for(ValidationError("x")), cmd::kExitValidation);
  EXPECT_EQ(cmd::exit_code_for(ParseError("x", 1)), cmd::kExitValidation);
  EXPECT_EQ(cmd::exit_code_for(IoError("x")), cmd::kExitRuntime);
  EXPECT_EQ(cmd::exit_code_for(std::runtime_error("x")), cmd::kExitRuntime);
}
