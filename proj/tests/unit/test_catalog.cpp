#include <gtest/gtest.h>

#include <cmath>

#include "kfbi/catalog.hpp"
#include "kfbi/error.hpp"

using namespace kfbi;

namespace {

const std::vector<std::string> kTerms = {
    "exp_cos 1.3 0.8",        "exp_sin -0.5 1.2",           "sin_sinh 1 2.5",   "cosh_cos 0.7 1.1",
    "wave 1 1.4 0.3 0.2",     "hpoly 0.9 3 0.4 0.1 -0.2 0.8", "pole 1.1 2 0.5 1.6 0.2 0.3", "exp_lin 1 0.6 0.8",
    "sin_cos 1 2.1 1.9",      "poly 2 3 1",                 "const 4",
};

}  // namespace

TEST(Catalog, JetsMatchFiniteDifferences) {
  const double d = 1e-4;
  const std::vector<Vec2> pts = {{0.3, -0.2}, {-0.7, 0.5}, {0.1, 0.9}};
  for (const auto& text : kTerms) {
    const auto u = ManufacturedSolution::parse(text);
    for (const auto& p : pts) {
      const Jet j = u.jet(p);
      auto v = [&](double dx, double dy) { return u.value({p.x + dx, p.y + dy}); };
      const double scale = 1.0 + std::abs(j.u) + std::abs(j.uxx) + std::abs(j.uyy);
      EXPECT_NEAR(j.ux, (v(d, 0) - v(-d, 0)) / (2 * d), 1e-6 * scale) << text;
      EXPECT_NEAR(j.uy, (v(0, d) - v(0, -d)) / (2 * d), 1e-6 * scale) << text;
      EXPECT_NEAR(j.uxx, (v(d, 0) - 2 * j.u + v(-d, 0)) / (d * d), 1e-5 * scale) << text;
      EXPECT_NEAR(j.uyy, (v(0, d) - 2 * j.u + v(0, -d)) / (d * d), 1e-5 * scale) << text;
      EXPECT_NEAR(j.uxy, (v(d, d) - v(d, -d) - v(-d, d) + v(-d, -d)) / (4 * d * d), 1e-5 * scale) << text;
    }
  }
}

TEST(Catalog, HarmonicFlagMatchesLaplacian) {
  for (const auto& text : kTerms) {
    const auto u = ManufacturedSolution::parse(text);
    const double lap = std::abs(u.jet({0.21, -0.33}).laplacian());
    if (u.harmonic()) {
      EXPECT_LT(lap, 1e-10) << text;
    }
  }
  EXPECT_FALSE(ManufacturedSolution::parse("exp_lin 1 0.6 0.8").harmonic());
  EXPECT_TRUE(ManufacturedSolution::parse("laplace1").harmonic());
}

TEST(Catalog, PresetsHaveClosedForms) {
  const Vec2 p{0.4, -0.3};
  EXPECT_NEAR(ManufacturedSolution::parse("laplace1").value(p),
              std::exp(p.x) * std::cos(p.y) + std::exp(p.y) * std::sin(p.x), 1e-15);
  EXPECT_NEAR(ManufacturedSolution::parse("laplace3").value(p), std::sin(2.5 * p.x) * std::sinh(2.5 * p.y), 1e-15);
  const auto mh2 = ManufacturedSolution::parse("mh2");
  EXPECT_NEAR(mh2.source(p, 1.0), -(2.1 * 2.1 + 1.9 * 1.9 + 1.0) * mh2.value(p), 1e-13);
  for (const auto& name : ManufacturedSolution::presets()) EXPECT_NO_THROW(ManufacturedSolution::parse(name));
  EXPECT_TRUE(ManufacturedSolution::parse("zero").empty());
}

TEST(Catalog, TextRoundTrip) {
  for (const auto& text : kTerms) {
    const auto u = ManufacturedSolution::parse(text);
    const auto back = ManufacturedSolution::parse(u.to_string());
    EXPECT_EQ(back.value({0.1, 0.2}), u.value({0.1, 0.2})) << text;
  }
}

TEST(Catalog, SumAndScale) {
  const auto a = ManufacturedSolution::parse("laplace1");
  const auto b = ManufacturedSolution::parse("exp_lin 1 0.6 0.8");
  const Vec2 p{-0.2, 0.5};
  EXPECT_NEAR((a + b.scaled(-2.0)).value(p), a.value(p) - 2 * b.value(p), 1e-14);
}

TEST(Catalog, RejectsMalformedTerms) {
  EXPECT_THROW(ManufacturedSolution::parse("bogus 1 2"), ConfigError);
  EXPECT_THROW(ManufacturedSolution::parse("exp_cos 1"), ConfigError);
  EXPECT_THROW(ManufacturedSolution::parse("pole 1 0 0 1 1 1"), ConfigError);
  EXPECT_THROW(ManufacturedSolution::parse("hpoly 1 2 0 0 0 0"), ConfigError);
  EXPECT_THROW(ManufacturedSolution::parse("poly 1 -1 2"), ConfigError);
}
