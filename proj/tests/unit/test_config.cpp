#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sitar/config.hpp"
#include "sitar/errors.hpp"

using namespace sitar;
namespace fs = std::filesystem;

TEST_CASE("defaults carry the documented hyperparameters") {
  const auto cfg = config::defaults();
  CHECK(cfg.train.phase1_epochs == 25);
  CHECK(cfg.train.phase2_epochs == 50);
  CHECK(cfg.train.mu == 4);
  CHECK(cfg.train.tau == doctest::Approx(0.5));
  CHECK(cfg.train.gamma == doctest::Approx(0.6));
  CHECK(cfg.train.beta == doctest::Approx(1.0));
  CHECK(cfg.train.base_lr == doctest::Approx(1e-4));
  CHECK(cfg.train.weight_decay == doctest::Approx(0.05));
  CHECK(cfg.train.label_smoothing == doctest::Approx(0.1));
  CHECK(cfg.train.mix.mixup_alpha == doctest::Approx(0.8));
  CHECK(cfg.train.mix.cutmix_alpha == doctest::Approx(1.0));
  CHECK(cfg.train.drop_path == doctest::Approx(0.1));
  CHECK(cfg.train.frames_fast == 8);
  CHECK(cfg.train.frames_slow == 4);
  CHECK_FALSE(cfg.train.pseudo_threshold.has_value());
}

TEST_CASE("config file parsing with comments and overrides") {
  const auto dir = fs::temp_directory_path() / "sitar_config_test";
  fs::create_directories(dir);
  const auto path = (dir / "run.cfg").string();
  std::ofstream(path) << "# a comment\n"
                      << "gamma = 0.4\n"
                      << "mu=8   # inline comment\n"
                      << "frame_order = reverse\n"
                      << "pseudo_threshold = 0.75\n";
  auto cfg = config::parse_file(path);
  CHECK(cfg.train.gamma == doctest::Approx(0.4));
  CHECK(cfg.train.mu == 8);
  CHECK(cfg.train.frame_order == superimage::FrameOrder::kReverse);
  REQUIRE(cfg.train.pseudo_threshold.has_value());
  CHECK(*cfg.train.pseudo_threshold == doctest::Approx(0.75));

  config::apply_overrides(cfg, {"beta=2", "pseudo_threshold=none"});
  CHECK(cfg.train.beta == doctest::Approx(2.0));
  CHECK_FALSE(cfg.train.pseudo_threshold.has_value());
  fs::remove_all(dir);
}

TEST_CASE("unknown keys are rejected by name") {
  auto cfg = config::defaults();
  CHECK_THROWS_WITH_AS(config::apply_overrides(cfg, {"warp_speed=9"}),
                       doctest::Contains("warp_speed"), ConfigError);
  CHECK_THROWS_AS(config::apply_overrides(cfg, {"no_equals_sign"}), ConfigError);
}

TEST_CASE("bad values name the key") {
  auto cfg = config::defaults();
  CHECK_THROWS_WITH_AS(config::apply_overrides(cfg, {"mu=banana"}), doctest::Contains("mu"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(config::apply_overrides(cfg, {"frame_order=zigzag"}),
                       doctest::Contains("frame_order"), ConfigError);
}

TEST_CASE("snapshot round-trip is stable") {
  auto cfg = config::defaults();
  config::apply_overrides(cfg, {"gamma=0.2", "enc_width=24", "synth_noise_std=0.05"});
  const std::string text = config::to_text(cfg);

  const auto dir = fs::temp_directory_path() / "sitar_config_snapshot";
  fs::create_directories(dir);
  const auto path = (dir / "snap.cfg").string();
  config::write_snapshot(cfg, path);
  const auto reloaded = config::parse_file(path);
  CHECK(config::to_text(reloaded) == text);
  fs::remove_all(dir);
}

TEST_CASE("encoder spec derives from the training geometry") {
  auto cfg = config::defaults();
  config::apply_overrides(cfg, {"super_side=96", "enc_width=32", "enc_depth=2",
                                "enc_patch_size=16", "drop_path=0.2"});
  const auto spec = cfg.encoder_spec(8);
  CHECK(spec.input_side == 96);
  CHECK(spec.num_classes == 8);
  CHECK(spec.drop_path_rate == doctest::Approx(0.2));
  spec.validate();
}
