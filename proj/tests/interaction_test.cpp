#include <gtest/gtest.h>

#include "support.hpp"

using namespace bitesim;
using namespace bitesim::test;

TEST(SuccessProbability, NutsSkewerIsLow) {
  EXPECT_LE(success_probability(world().outcome, plastic_fork(), Skill::skewer,
                                registry().mode_properties("nuts")),
            0.10);
  EXPECT_LE(success_probability(world().outcome, plastic_fork(), Skill::skewer, props(1, 1, 1)), 0.10);
}

TEST(SuccessProbability, CheeseSkewerIsHigh) {
  EXPECT_GE(success_probability(world().outcome, plastic_fork(), Skill::skewer,
                                registry().mode_properties("cheese")),
            0.90);
}

TEST(SuccessProbability, PushIsCertainForAnyTool) {
  for (const auto& name : tools().names())
    for (int s = 1; s <= 5; ++s)
      EXPECT_DOUBLE_EQ(success_probability(world().outcome, tools().at(name), Skill::push,
                                            props(s, 3, 3)),
                       1.0);
}

TEST(SuccessProbability, StaysInUnitInterval) {
  for (const auto& name : tools().names())
    for (Skill sk : kAllSkills)
      for (int s = 1; s <= 5; ++s)
        for (int m = 1; m <= 5; ++m)
          for (int v = 1; v <= 5; ++v)
            for (Size z : {Size::bite_sized, Size::large}) {
              const double p = success_probability(world().outcome, tools().at(name), sk,
                                                   props(s, m, v, z, Shape::noodle));
              ASSERT_GE(p, 0.0);
              ASSERT_LE(p, 1.0);
            }
}

TEST(SuccessProbability, TwirlNeedsNoodles) {
  EXPECT_EQ(success_probability(world().outcome, plastic_fork(), Skill::twirl, props(3, 3, 3)), 0.0);
  EXPECT_GT(success_probability(world().outcome, plastic_fork(), Skill::twirl,
                                props(3, 3, 3, Size::bite_sized, Shape::noodle)),
            0.5);
}

TEST(SuccessProbability, BracingAddsLogitBonus) {
  const PropertyVector p = props(3, 2, 1);
  const double a = success_probability(world().outcome, plastic_fork(), Skill::skewer, p);
  const double b = success_probability(world().outcome, plastic_fork(), Skill::skewer, p,
                                       ItemFlags{}.with(ItemFlag::braced));
  const double la = std::log(a / (1 - a)), lb = std::log(b / (1 - b));
  EXPECT_NEAR(lb - la, 0.75, 1e-9);
}

TEST(ExecuteSkill, ForcedOneAlwaysAcquires) {
  const InteractionModel w = forced_world(1.0);
  Rng rng = make_rng(3);
  for (int n = 0; n < 200; ++n) {
    const auto r = execute_skill(rng, w, plastic_fork(), Skill::scoop, item(props(2, 2, 2)), 0, 1);
    ASSERT_TRUE(r.outcome.success);
    ASSERT_TRUE(r.item.flags.has(ItemFlag::acquired));
  }
}

TEST(ExecuteSkill, ForcedZeroNeverChangesFlags) {
  const InteractionModel w = forced_world(0.0);
  Rng rng = make_rng(3);
  const FoodItemState it = item(props(2, 2, 2, Size::large));
  for (Skill sk : kAllSkills) {
    const auto r = execute_skill(rng, w, plastic_fork(), sk, it, 0, 1);
    EXPECT_FALSE(r.outcome.success);
    EXPECT_EQ(r.item.flags, it.flags);
  }
}

TEST(ExecuteSkill, CutOnLargeItemMakesItBiteSized) {
  const InteractionModel w = forced_world(1.0);
  Rng rng = make_rng(5);
  const auto r = execute_skill(rng, w, plastic_fork(), Skill::cut, item(props(3, 2, 1, Size::large)), 0, 1);
  EXPECT_TRUE(r.item.flags.has(ItemFlag::cut_applied));
  EXPECT_FALSE(r.item.flags.has(ItemFlag::acquired));
  EXPECT_EQ(effective_properties(r.item, 0).size, Size::bite_sized);
}

TEST(ExecuteSkill, PushBracesAgainstRim) {
  const InteractionModel w = forced_world(1.0);
  Rng rng = make_rng(5);
  FoodItemState it = item(props(3, 2, 1));
  it.position = {3.0, 4.0};
  const auto r = execute_skill(rng, w, plastic_fork(), Skill::push, it, 0, 1, 12.0);
  EXPECT_TRUE(r.item.flags.has(ItemFlag::braced));
  EXPECT_NEAR(std::hypot(r.item.position.x_cm, r.item.position.y_cm), 12.0 - 1.5, 1e-9);
}

TEST(ExecuteSkill, TwirlOnNonNoodleFailsWithoutError) {
  Rng rng = make_rng(5);
  for (int n = 0; n < 50; ++n) {
    const auto r = execute_skill(rng, world(), plastic_fork(), Skill::twirl, item(props(3, 3, 3)), 0, 1);
    EXPECT_FALSE(r.outcome.success);
  }
}

TEST(ExecuteSkill, FinishedItemsAreNeverResurrected) {
  FoodItemState it = item(props(3, 3, 3));
  it.flags = it.flags.with(ItemFlag::acquired);
  Rng rng = make_rng(1);
  EXPECT_THROW(execute_skill(rng, world(), plastic_fork(), Skill::skewer, it, 0, 1), StateError);
}

TEST(ExecuteSkill, EmpiricalRateMatchesProbability) {
  struct Case {
    Skill skill;
    PropertyVector p;
  };
  const std::vector<Case> cases{{Skill::scoop, props(3, 2, 1)},
                                {Skill::skewer, props(3, 3, 2)},
                                {Skill::scoop, props(4, 4, 2)},
                                {Skill::cut, props(2, 2, 1)}};
  for (const auto& c : cases) {
    const double p = success_probability(world().outcome, plastic_fork(), c.skill, c.p);
    Rng rng = make_rng(2024);
    int ok = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
      ok += execute_skill(rng, world(), plastic_fork(), c.skill, item(c.p), 0, 1).outcome.success;
    EXPECT_NEAR(static_cast<double>(ok) / n, p, 0.02) << to_string(c.skill);
  }
}

TEST(SynthObservations, PeakForceFallsWithSoftness) {
  const InteractionModel w = noiseless_world();
  for (Skill sk : kAllSkills) {
    Rng a = make_rng(1), b = make_rng(1);
    const auto hard = synth_observations(a, w.observation, plastic_fork(), sk, props(1, 3, 3), true);
    const auto soft = synth_observations(b, w.observation, plastic_fork(), sk, props(5, 3, 3), true);
    EXPECT_GT(hard[Channel::peak_force], soft[Channel::peak_force]);
  }
}

TEST(SynthObservations, ZeroNoiseResidueEqualsLevelMean) {
  const InteractionModel w = noiseless_world();
  Rng rng = make_rng(9);
  const auto o = synth_observations(rng, w.observation, plastic_fork(), Skill::dip, props(3, 3, 5), true);
  EXPECT_DOUBLE_EQ(o[Channel::residue], w.observation.channel(Channel::residue).means[4]);
}

TEST(SynthObservations, SameSeedSameSeries) {
  Rng a = make_rng(77), b = make_rng(77);
  EXPECT_EQ(synth_observations(a, world().observation, plastic_fork(), Skill::skewer, props(2, 3, 4), false),
            synth_observations(b, world().observation, plastic_fork(), Skill::skewer, props(2, 3, 4), false));
}

TEST(SynthObservations, MeansMonotoneInGoverningPropertyForEverySkill) {
  const InteractionModel w = noiseless_world();
  for (const auto& name : tools().names())
    for (Skill sk : kAllSkills)
      for (Channel c : kChannels) {
        const Property gov = w.observation.channel(c).governing;
        std::vector<double> v;
        for (int l = 1; l <= 5; ++l) {
          int lv[3] = {3, 3, 3};
          lv[static_cast<int>(gov)] = l;
          Rng rng = make_rng(1);
          v.push_back(synth_observations(rng, w.observation, tools().at(name), sk,
                                         props(lv[0], lv[1], lv[2]), true)[c]);
        }
        const bool up = v[1] > v[0];
        for (int l = 1; l < 5; ++l) {
          if (up) EXPECT_GT(v[l], v[l - 1]) << to_string(c);
          else EXPECT_LT(v[l], v[l - 1]) << to_string(c);
        }
      }
}

TEST(SynthObservations, DirectionsOfNamedChannels) {
  const auto& m = world().observation;
  auto inc = [&](Channel c) { return m.channel(c).means[4] > m.channel(c).means[0]; };
  EXPECT_FALSE(inc(Channel::peak_force));
  EXPECT_TRUE(inc(Channel::deformation_ratio));
  EXPECT_TRUE(inc(Channel::gloss));
  EXPECT_TRUE(inc(Channel::residue));
  EXPECT_EQ(m.channel(Channel::gloss).governing, Property::moisture);
  EXPECT_EQ(m.channel(Channel::residue).governing, Property::viscosity);
}

TEST(SynthObservations, FeaturesFiniteAndLengthPositive) {
  Rng rng = make_rng(4);
  for (int n = 0; n < 500; ++n) {
    const auto o = synth_observations(rng, world().observation, plastic_fork(),
                                      kAllSkills[n % 6], props(1 + n % 5, 1 + (n / 5) % 5, 1 + (n / 25) % 5),
                                      n % 2 == 0);
    ASSERT_TRUE(o.valid());
  }
}

TEST(WorldModel, RejectsNonMonotoneMeans) {
  Json doc = load_json_file(data_path("world_model.json"));
  doc["observation"]["channels"]["gloss"]["means"] = {0.1, 0.3, 0.2, 0.6, 0.8};
  EXPECT_THROW(InteractionModel::from_json(doc), ConfigError);
}
