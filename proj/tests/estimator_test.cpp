#include <gtest/gtest.h>

#include "support.hpp"

using namespace bitesim;
using namespace bitesim::test;

namespace {

double sum(const Dist& d) {
  double s = 0;
  for (double x : d) s += x;
  return s;
}

Belief single(const BeliefEntry& e, int id = 0) {
  Belief b;
  b.entries.emplace(id, e);
  return b;
}

// Likelihood with random but well-conditioned cells.
LikelihoodModel random_likelihood(Rng& rng) {
  LikelihoodModel lik;
  for (Channel c : kChannels)
    for (Property p : kScalarProperties)
      for (std::size_t l = 0; l < 5; ++l)
        lik.cell(c, p, l) = GaussianCell{uniform(rng, -5.0, 5.0), uniform(rng, 0.5, 3.0), true};
  lik.mark_fitted();
  return lik;
}

Dist random_dist(Rng& rng) {
  Dist d;
  for (auto& x : d) x = uniform(rng, 0.01, 1.0);
  if (uniform01(rng) < 0.2) d[uniform_index(rng, 5)] = 0.0;
  return normalized(d);
}

LikelihoodModel default_likelihood() { return fit_likelihoods(default_calibration()); }

}  // namespace

TEST(InitPrior, UnknownLabelIsUniform) {
  const BeliefEntry e = init_prior("durian", priors());
  for (Property p : kScalarProperties)
    for (double x : e.dist(p)) EXPECT_DOUBLE_EQ(x, 0.2);
  EXPECT_EQ(e.provenance, Provenance::prior);
}

TEST(InitPrior, NutsSoftnessModeIsOne) {
  EXPECT_EQ(argmax(init_prior("nuts", priors()).dist(Property::softness)), 0u);
}

TEST(InitPrior, ValidRowReturnedUnchanged) {
  PriorTable t;
  PriorRow row;
  row.dists[0] = {0, 0, 0, 0, 1};
  t.set("x", row);
  const BeliefEntry e = init_prior("x", t);
  EXPECT_EQ(e.dist(Property::softness), (Dist{0, 0, 0, 0, 1}));
}

TEST(InitPrior, TableCoversEveryRegistryLabel) {
  for (const auto& [label, entry] : registry().foods()) EXPECT_NE(priors().find(label), nullptr) << label;
}

TEST(UpdateBelief, MinusInfinityUpdatesEverything) {
  const auto lik = default_likelihood();
  Rng rng = make_rng(1);
  for (int n = 0; n < 100; ++n) {
    const auto obs = synth_observations(rng, world().observation, plastic_fork(), Skill::skewer,
                                        props(1 + n % 5, 1 + n % 3, 1 + n % 4), n % 2);
    const auto up = update_belief(single(init_prior("steak", priors())), 0, obs, lik,
                                  -std::numeric_limits<double>::infinity());
    EXPECT_TRUE(up.updated[0] && up.updated[1] && up.updated[2]);
  }
}

TEST(UpdateBelief, ZeroThresholdUpdatesNothing) {
  const auto lik = default_likelihood();
  Rng rng = make_rng(2);
  for (int n = 0; n < 100; ++n) {
    const auto obs = synth_observations(rng, world().observation, plastic_fork(), Skill::scoop,
                                        props(1 + n % 5, 1 + n % 3, 1 + n % 4), true);
    const Belief b = single(init_prior("steak", priors()));
    const auto up = update_belief(b, 0, obs, lik, 0.0);
    EXPECT_FALSE(up.updated[0] || up.updated[1] || up.updated[2]);
    EXPECT_EQ(up.belief.at(0).dists, b.at(0).dists);
    EXPECT_EQ(up.belief.at(0).provenance, Provenance::prior);
  }
}

TEST(UpdateBelief, TwoChannelZeroNoiseAtLevelThree) {
  LikelihoodModel lik;
  for (Channel c : kChannels)
    for (Property p : kScalarProperties)
      for (std::size_t l = 0; l < 5; ++l) lik.cell(c, p, l) = GaussianCell{0.0, 1.0, true};
  for (std::size_t l = 0; l < 5; ++l) {
    lik.cell(Channel::peak_force, Property::softness, l) = {12.0 - 2.5 * double(l), 0.05, true};
    lik.cell(Channel::penetration_depth, Property::softness, l) = {2.0 + 4.0 * double(l), 0.05, true};
  }
  lik.mark_fitted();
  ObservationSeries obs;
  obs[Channel::peak_force] = 12.0 - 2.5 * 2;
  obs[Channel::penetration_depth] = 2.0 + 4.0 * 2;
  BeliefEntry e;
  const auto up = update_belief(single(e), 0, obs, lik, -std::numeric_limits<double>::infinity());
  EXPECT_NEAR(up.belief.at(0).dist(Property::softness)[2], 1.0, 1e-9);
  const auto oracle = enumerate_posterior(uniform_dist(), obs, lik, Property::softness, all_channels());
  for (std::size_t l = 0; l < 5; ++l)
    EXPECT_NEAR(up.belief.at(0).dist(Property::softness)[l], oracle[l], 1e-9);
}

TEST(UpdateBelief, MatchesEnumerationOracle) {
  Rng rng = make_rng(1234);
  const std::vector<ChannelMask> masks{all_channels(), modality_mask({Modality::visual}),
                                       modality_mask({Modality::haptic, Modality::pose})};
  for (int n = 0; n < 1500; ++n) {
    const LikelihoodModel lik = random_likelihood(rng);
    BeliefEntry e;
    for (auto& d : e.dists) d = random_dist(rng);
    ObservationSeries obs;
    for (auto& f : obs.features) f = uniform(rng, -6.0, 6.0);
    const ChannelMask& mask = masks[static_cast<std::size_t>(n) % masks.size()];
    const auto up = update_belief(single(e), 0, obs, lik, -std::numeric_limits<double>::infinity(), mask);
    for (Property p : kScalarProperties) {
      const auto oracle = enumerate_posterior(e.dist(p), obs, lik, p, mask);
      const Dist& got = up.belief.at(0).dist(p);
      for (std::size_t l = 0; l < 5; ++l) ASSERT_NEAR(got[l], oracle[l], 1e-9);
      ASSERT_NEAR(sum(got), 1.0, 1e-9);
      ASSERT_NEAR(logsumexp(up.logits.row(p)), 0.0, 1e-9);
    }
  }
}

TEST(UpdateBelief, GatingIsMonotoneInThreshold) {
  const auto lik = default_likelihood();
  Rng rng = make_rng(8);
  const std::vector<double> thresholds{-50.0, -3.0, std::log(0.2), std::log(0.4), std::log(0.6),
                                       std::log(0.9), std::log(0.999), 0.0};
  for (int n = 0; n < 300; ++n) {
    const auto obs = synth_observations(rng, world().observation, plastic_fork(), kAllSkills[n % 6],
                                        props(1 + n % 5, 1 + (n / 5) % 5, 1 + (n / 25) % 5), n % 3 != 0);
    const Belief b = single(init_prior("broccoli", priors()));
    std::array<bool, 3> prev{true, true, true};
    for (double th : thresholds) {
      const auto up = update_belief(b, 0, obs, lik, th);
      for (std::size_t i = 0; i < 3; ++i) {
        ASSERT_LE(up.updated[i], prev[i]);
        prev[i] = up.updated[i];
      }
    }
  }
}

TEST(UpdateBelief, ZeroNoiseArgmaxRecoversTrueLevel) {
  // Independent channels, one informative channel per property, zero noise.
  LikelihoodModel lik;
  for (Channel c : kChannels)
    for (Property p : kScalarProperties)
      for (std::size_t l = 0; l < 5; ++l) lik.cell(c, p, l) = GaussianCell{0.0, 1.0, true};
  const std::array<Channel, 3> informative{Channel::peak_force, Channel::gloss, Channel::residue};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t l = 0; l < 5; ++l)
      lik.cell(informative[i], kScalarProperties[i], l) = {double(l), 0.2, true};
  lik.mark_fitted();
  for (int level = 1; level <= 5; ++level) {
    ObservationSeries obs;
    for (Channel c : informative) obs[c] = level - 1;
    const auto up = update_belief(single(BeliefEntry{}), 0, obs, lik, std::log(0.4));
    for (Property p : kScalarProperties) {
      EXPECT_TRUE(up.updated[static_cast<std::size_t>(p)]);
      EXPECT_EQ(argmax(up.belief.at(0).dist(p)), static_cast<std::size_t>(level - 1));
    }
  }
}

TEST(UpdateBelief, DefaultLikelihoodRecoversSoftnessFromNoiselessHaptics) {
  const InteractionModel w = noiseless_world();
  const auto lik = fit_likelihoods(
      run_calibration(7, w, plastic_fork(), registry(), default_calibration_foods(), 5));
  for (const auto& label : default_calibration_foods()) {
    const PropertyVector p = registry().mode_properties(label);
    Rng rng = make_rng(1);
    const auto obs = synth_observations(rng, w.observation, plastic_fork(), Skill::skewer, p, false);
    const auto up = update_belief(single(BeliefEntry{}), 0, obs, lik,
                                  -std::numeric_limits<double>::infinity(),
                                  modality_mask({Modality::haptic}));
    EXPECT_EQ(argmax(up.belief.at(0).dist(Property::softness)), p.softness.index()) << label;
  }
}

TEST(UpdateBelief, Errors) {
  LikelihoodModel unfitted;
  EXPECT_THROW(update_belief(single(BeliefEntry{}), 0, ObservationSeries{}, unfitted, 0.0), ModelError);
  const auto lik = default_likelihood();
  EXPECT_THROW(update_belief(single(BeliefEntry{}), 3, ObservationSeries{}, lik, 0.0), StateError);
}

TEST(UpdateBelief, NormalizedAfterEverySequentialUpdate) {
  const auto lik = default_likelihood();
  Rng rng = make_rng(99);
  for (int chain = 0; chain < 50; ++chain) {
    Belief b = single(init_prior("chicken", priors()));
    for (int step = 0; step < 10; ++step) {
      const auto obs = synth_observations(rng, world().observation, plastic_fork(),
                                          kAllSkills[uniform_index(rng, 6)],
                                          props(1 + int(uniform_index(rng, 5)), 2, 3), true);
      b = update_belief(b, 0, obs, lik, std::log(0.4)).belief;
      for (const auto& d : b.at(0).dists) {
        ASSERT_NEAR(sum(d), 1.0, 1e-9);
        for (double x : d) ASSERT_GE(x, 0.0);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Transfer

namespace {

AttemptRecord attempt(int id, const std::string& label) {
  AttemptRecord a;
  a.item_id = id;
  a.label = label;
  a.attempt_index = 1;
  return a;
}

}  // namespace

TEST(TransferPrior, NoHistoryEqualsInitPrior) {
  const Belief b = transfer_prior(Belief{}, 4, "steak", {}, priors(), 0.7, &registry());
  EXPECT_EQ(b.at(4).dists, init_prior("steak", priors()).dists);
  EXPECT_EQ(b.at(4).provenance, Provenance::prior);
}

TEST(TransferPrior, ZeroBlendKeepsTablePrior) {
  BeliefEntry refined = init_prior("steak", priors());
  refined.dist(Property::softness) = {1, 0, 0, 0, 0};
  refined.provenance = Provenance::refined;
  const Belief b = transfer_prior(single(refined), 1, "steak", {attempt(0, "steak")}, priors(), 0.0);
  EXPECT_EQ(b.at(1).dists, init_prior("steak", priors()).dists);
}

TEST(TransferPrior, FullBlendCopiesPointMass) {
  BeliefEntry refined = init_prior("steak", priors());
  refined.dists = {Dist{0, 1, 0, 0, 0}, Dist{0, 0, 1, 0, 0}, Dist{1, 0, 0, 0, 0}};
  refined.provenance = Provenance::refined;
  const Belief b = transfer_prior(single(refined), 1, "steak", {attempt(0, "steak")}, priors(), 1.0);
  EXPECT_EQ(b.at(1).dists, refined.dists);
  EXPECT_EQ(b.at(1).provenance, Provenance::transferred);
}

TEST(TransferPrior, ConvexCombinationOracle) {
  BeliefEntry refined = init_prior("steak", priors());
  refined.dist(Property::moisture) = {0.1, 0.2, 0.3, 0.2, 0.2};
  refined.provenance = Provenance::refined;
  const double w = 0.35;
  const Belief b = transfer_prior(single(refined), 1, "steak", {attempt(0, "steak")}, priors(), w);
  const Dist& table = init_prior("steak", priors()).dist(Property::moisture);
  for (std::size_t l = 0; l < 5; ++l)
    EXPECT_NEAR(b.at(1).dist(Property::moisture)[l], w * refined.dist(Property::moisture)[l] + (1 - w) * table[l],
                1e-12);
}

TEST(TransferPrior, FallsBackToRegistryCategory) {
  BeliefEntry refined = init_prior("chicken", priors());
  refined.dist(Property::viscosity) = {0, 0, 0, 1, 0};
  refined.provenance = Provenance::refined;
  ASSERT_EQ(registry().at("chicken").category, registry().at("roasted_turkey").category);
  const Belief with = transfer_prior(single(refined), 1, "roasted_turkey", {attempt(0, "chicken")},
                                     priors(), 1.0, &registry());
  EXPECT_EQ(with.at(1).dist(Property::viscosity), (Dist{0, 0, 0, 1, 0}));
  const Belief without = transfer_prior(single(refined), 1, "roasted_turkey", {attempt(0, "chicken")},
                                        priors(), 1.0, nullptr);
  EXPECT_EQ(without.at(1).provenance, Provenance::prior);
}

TEST(TransferPrior, IgnoresUnrefinedItems) {
  const BeliefEntry unrefined = init_prior("steak", priors());
  const Belief b = transfer_prior(single(unrefined), 1, "steak", {attempt(0, "steak")}, priors(), 1.0);
  EXPECT_EQ(b.at(1).provenance, Provenance::prior);
}

TEST(TransferPrior, RejectsExistingIdAndBadBlend) {
  EXPECT_THROW(transfer_prior(single(BeliefEntry{}, 2), 2, "x", {}, priors(), 0.5), StateError);
  EXPECT_THROW(transfer_prior(Belief{}, 2, "x", {}, priors(), 1.5), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Prompt plumbing

TEST(PropertyPrompt, TofuHasAnswerFormatLine) {
  const std::string tmpl = read_text_file(data_path("prompts/property_estimation.txt"));
  const std::string s = build_property_prompt(tmpl, "tofu", "img0");
  EXPECT_NE(s.find("Food on the plate: tofu."), std::string::npos);
  EXPECT_NE(s.find("Shape: <shape> ; Size: <size>"), std::string::npos);
  EXPECT_EQ(s.find("{{"), std::string::npos);
  EXPECT_EQ(s, build_property_prompt(tmpl, "tofu", "img0"));
}

TEST(PropertyPrompt, EmptyLabelStillWellFormed) {
  const std::string tmpl = read_text_file(data_path("prompts/property_estimation.txt"));
  const std::string s = build_property_prompt(tmpl, "", "");
  EXPECT_NE(s.find("Food on the plate: ."), std::string::npos);
  EXPECT_EQ(s.find("{{"), std::string::npos);
}

TEST(PropertyAnswer, ParsesAndClamps) {
  const auto row = parse_property_answer(
      "Reasoning: soft.\nAnswer: Shape: Cubic ; Size: bite-sized; Softness: 0; Moisture: 4; Viscosity: 2");
  ASSERT_TRUE(row.has_value());
  EXPECT_EQ(row->shape, Shape::cubic);
  EXPECT_EQ(row->size, Size::bite_sized);
  EXPECT_EQ(argmax(row->dists[0]), 0u);
  EXPECT_EQ(argmax(row->dists[1]), 3u);
  EXPECT_FALSE(parse_property_answer("no answer here").has_value());
}
