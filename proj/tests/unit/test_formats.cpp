#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kfbi/container.hpp"
#include "kfbi/datagen.hpp"
#include "kfbi/error.hpp"
#include "kfbi/keyvalue.hpp"
#include "kfbi/operator_model.hpp"
#include "support.hpp"

using namespace kfbi;

// Fixtures in tests/data were written by the Python trainer (kfbi-train fixtures).

TEST(KeyValue, CommentsBlanksAndRepeats) {
  const auto doc = KeyValueDoc::parse("# header\n\n  a = 1  \nb=two words\na = 3\n# a = 9\n");
  EXPECT_EQ(doc.entries().size(), 3u);
  EXPECT_EQ(doc.require_int("a"), 3);
  EXPECT_EQ(doc.get_all("a"), (std::vector<std::string>{"1", "3"}));
  EXPECT_EQ(doc.require("b"), "two words");
  EXPECT_EQ(doc.entries()[1].line, 4);
  EXPECT_FALSE(doc.has("c"));
  EXPECT_EQ(doc.get_double("c", 2.5), 2.5);
}

TEST(KeyValue, MalformedInputRejected) {
  EXPECT_THROW(KeyValueDoc::parse("just words\n"), ConfigError);
  EXPECT_THROW(KeyValueDoc::parse(" = 3\n"), ConfigError);
  const auto doc = KeyValueDoc::parse("n = 3.5\nx = abc\n");
  EXPECT_THROW(doc.require_int("n"), ConfigError);
  EXPECT_THROW(doc.require_double("x"), ConfigError);
  EXPECT_THROW(doc.require("missing"), ConfigError);
  EXPECT_THROW(doc.reject_unknown({"n"}), ConfigError);
  EXPECT_NO_THROW(doc.reject_unknown({"n", "x"}));
  EXPECT_THROW(parse_numbers("1 2 three"), ConfigError);
  EXPECT_EQ(parse_numbers("1, -2.5e-3\t4"), (std::vector<double>{1.0, -2.5e-3, 4.0}));
}

TEST(KeyValue, ErrorsNameTheLine) {
  try {
    KeyValueDoc::parse("a = 1\nb = 2\nbroken\n", "f.kfbi");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("f.kfbi:3"), std::string::npos) << e.what();
  }
}

TEST(Container, RoundTripAndTruncation) {
  test::TempDir dir("container");
  Container c;
  c.magic = "KFBIF1";
  c.header.set("n", "2");
  append_f64(c.payload, 1.5);
  append_f64(c.payload, -0.0);
  append_u32(c.payload, 7);
  write_container(dir / "c.bin", c);
  const auto back = read_container(dir / "c.bin", "KFBIF1");
  EXPECT_EQ(back.header.require("n"), "2");
  PayloadReader in(back.payload, "c");
  EXPECT_EQ(in.f64(), 1.5);
  EXPECT_TRUE(std::signbit(in.f64()));
  EXPECT_EQ(in.u32(), 7u);
  EXPECT_EQ(in.remaining(), 0u);
  EXPECT_THROW(in.f64(), ConfigError);

  EXPECT_THROW(read_container(dir / "c.bin", "KFBIW1"), ConfigError);
  const auto bytes = test::read_bytes(dir / "c.bin");
  test::write_bytes(dir / "noend.bin", bytes.substr(0, bytes.find("end_header")));
  EXPECT_THROW(read_container(dir / "noend.bin", "KFBIF1"), ConfigError);
}

TEST(CrossComponent, PythonParamModelReproducesGolden) {
  const auto model = load_weights(test::test_data("param_small.kfbiw"));
  ASSERT_EQ(model.kind(), "param");
  EXPECT_EQ(model.M(), 16);
  EXPECT_EQ(model.P(), 2);
  EXPECT_NO_THROW(model.param().validate());
  const auto golden = read_golden(test::test_data("param_small.kfbig"));
  ASSERT_EQ(golden.pairs.size(), 10u);
  EXPECT_LE(verify_golden(model, golden), 1e-10);
  EXPECT_EQ(model.metadata.require("lr"), "0.001");
}

TEST(CrossComponent, PythonLinearModelReproducesGolden) {
  const auto model = load_weights(test::test_data("linear_small.kfbiw"));
  ASSERT_EQ(model.kind(), "linear-direct");
  const auto golden = read_golden(test::test_data("linear_small.kfbig"));
  ASSERT_EQ(golden.pairs.size(), 10u);
  EXPECT_LE(verify_golden(model, golden), 1e-10);
}

TEST(CrossComponent, LoadedParamModelIsLinearInInput) {
  const auto model = load_weights(test::test_data("param_small.kfbiw"));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> p{0.3, -0.7}, u(16), v(16), w(16);
  for (int i = 0; i < 16; ++i) u[i] = n(rng), v[i] = n(rng), w[i] = 2.0 * u[i] - 0.5 * v[i];
  const auto fu = model.infer(p, u), fv = model.infer(p, v), fw = model.infer(p, w);
  double scale = 0.0, dev = 0.0;
  for (int i = 0; i < 16; ++i) {
    scale = std::max(scale, std::abs(fw[i]));
    dev = std::max(dev, std::abs(fw[i] - (2.0 * fu[i] - 0.5 * fv[i])));
  }
  EXPECT_LE(dev, 1e-8 * scale);
}

TEST(CrossComponent, ResavedWeightsAreByteIdentical) {
  test::TempDir dir("resave");
  for (const char* name : {"param_small.kfbiw", "linear_small.kfbiw"}) {
    save_weights(load_weights(test::test_data(name)), dir / name);
    EXPECT_EQ(test::read_bytes(dir / name), test::read_bytes(test::test_data(name))) << name;
  }
}

TEST(CrossComponent, PythonDatasetReadsAndRewritesIdentically) {
  test::TempDir dir("dataset");
  const auto ds = read_dataset(test::test_data("param_small.kfbid"));
  EXPECT_EQ(ds.M, 16);
  EXPECT_EQ(ds.param_names, (std::vector<std::string>{"p0", "p1"}));
  EXPECT_EQ(ds.records.size(), 64u);
  EXPECT_EQ(ds.info.require("source"), "synthetic");
  write_dataset(dir / "d.kfbid", ds);
  EXPECT_EQ(test::read_bytes(dir / "d.kfbid"), test::read_bytes(test::test_data("param_small.kfbid")));
}

TEST(CrossComponent, HandEditedHeaderRejected) {
  test::TempDir dir("edit");
  const auto bytes = test::read_bytes(test::test_data("param_small.kfbiw"));
  auto edit = [&](const std::string& from, const std::string& to) {
    auto b = bytes;
    const auto pos = b.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    b.replace(pos, from.size(), to);
    const auto path = dir / "edited.kfbiw";
    test::write_bytes(path, b);
    return path;
  };
  EXPECT_THROW(load_weights(edit("preprocess dense 2 8 bias", "preprocess dense 2 9 bias")), ConfigError);
  EXPECT_THROW(load_weights(edit("activation tanh", "activation swish")), ConfigError);
  EXPECT_THROW(load_weights(edit("branch_b dense 16 16 nobias", "branch_b dense 16 16 bias")), ConfigError);
  EXPECT_THROW(load_weights(edit("kind = param", "kind = params")), ConfigError);
  EXPECT_THROW(load_weights(edit("P = 2", "P = 3")), ConfigError);
  EXPECT_THROW(load_weights(edit("element = float64", "element = float32")), ConfigError);
  test::write_bytes(dir / "cut.kfbiw", bytes.substr(0, bytes.size() - 8));
  EXPECT_THROW(load_weights(dir / "cut.kfbiw"), ConfigError);
}

TEST(CrossComponent, GoldenShapeMismatchRejected) {
  const auto model = load_weights(test::test_data("linear_small.kfbiw"));
  const auto golden = read_golden(test::test_data("param_small.kfbig"));
  EXPECT_THROW(verify_golden(model, golden), ConfigError);
  test::TempDir dir("golden");
  test::write_bytes(dir / "bad.kfbig", "KFBIG1\nM = 2\nP = 0\ncount = 2\ninput = 1 2\noutput = 3 4\n");
  EXPECT_THROW(read_golden(dir / "bad.kfbig"), ConfigError);
  test::write_bytes(dir / "magic.kfbig", "KFBIGX\nM = 2\n");
  EXPECT_THROW(read_golden(dir / "magic.kfbig"), ConfigError);
}
