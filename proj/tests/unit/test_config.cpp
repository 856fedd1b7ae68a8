#include "doctest.h"
#include "facediff/config.hpp"
#include "facediff/errors.hpp"

using namespace facediff;

TEST_CASE("defaults serialize and parse back") {
  const RunConfig c;
  CHECK(parse_config(c.serialize()) == c);
  CHECK_NOTHROW(c.validate());
  const std::string text = c.serialize();
  for (const char* section : {"[schedule]", "[model]", "[train]", "[degrade]", "[restore]", "[paths]"}) {
    CHECK(text.find(section) != std::string::npos);
  }
  CHECK(c.schedule.steps == 1000);
  CHECK(c.restore.truncation == 100);
  CHECK(c.train.batch_size == 4);
  CHECK(c.train.learning_rate == 1e-4);
}

TEST_CASE("overrides, comments and exact round trip") {
  const RunConfig c = parse_config(R"(
# desk-scale toy run
[model]
image_size = 32
widths = 16, 32 ,64
[train]
learning_rate = 0.00031
ema_decay=0.99
; paths may contain spaces
[paths]
data_dir = /tmp/some dir
[restore]
use_ema = no
)");
  CHECK(c.model.image_size == 32);
  CHECK(c.model.widths == std::vector<int>{16, 32, 64});
  CHECK(c.train.learning_rate == 0.00031);
  CHECK(c.train.ema_decay == 0.99);
  CHECK(c.paths.data_dir == "/tmp/some dir");
  CHECK_FALSE(c.restore.use_ema);
  CHECK(parse_config(c.serialize()) == c);
  CHECK(c.digest() != RunConfig{}.digest());
  CHECK(c.digest() == parse_config(c.serialize()).digest());
}

TEST_CASE("unknown keys and malformed values are errors") {
  CHECK_THROWS_AS(parse_config("[model]\nwidth = 3\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("[optimizer]\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("steps = 3\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("[train]\nsteps = many\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("[train]\nsteps\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("[train]\nlearning_rate = 1e-4x\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("[restore]\nuse_ema = maybe\n"), InvalidArgument);
  try {
    parse_config("[train]\n\nbogus = 1\n");
    FAIL("expected an error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("validation") {
  RunConfig c;
  c.model.image_size = 30;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = RunConfig{};
  c.restore.truncation = 1001;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = RunConfig{};
  c.restore.restorer = "swinir";
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = RunConfig{};
  c.degrade.ranges.q_hi = 101;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(hex64(0xabcull) == "0000000000000abc");
}
