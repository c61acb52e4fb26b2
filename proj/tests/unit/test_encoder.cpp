#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "sitar/encoder.hpp"
#include "sitar/losses.hpp"

using namespace sitar;
using nn::EncoderSpec;
using nn::Mat;

namespace {

// Small double-precision net for finite-difference work.
EncoderSpec tiny_spec() {
  EncoderSpec spec;
  spec.input_side = 8;
  spec.num_classes = 4;
  spec.width = 4;
  spec.depth = 1;
  spec.patch_size = 4;
  spec.drop_path_rate = 0.0;
  return spec;
}

Mat<double> random_inputs(Rng& rng, int batch, int dim) {
  Mat<double> x(batch, dim);
  for (int r = 0; r < batch; ++r)
    for (int c = 0; c < dim; ++c) x(r, c) = rng.uniform(-1.0, 1.0);
  return x;
}

superimage::SuperImage make_super_image(int side, float fill) {
  superimage::SuperImage si;
  si.image = Image(side, side, fill);
  si.grid_side = 1;
  si.pad_count = 0;
  si.frame_side = side;
  return si;
}

}  // namespace

TEST_CASE("tiny double net stays under 500 parameters") {
  nn::VitNet<double> net(tiny_spec());
  CHECK(net.num_params() <= 500);
  CHECK(net.num_params() > 100);
}

TEST_CASE("analytic gradient of cross entropy through the net matches finite differences") {
  nn::VitNet<double> net(tiny_spec());
  Rng rng(17);
  net.init_params(rng, /*zero_head=*/false);
  const int batch = 2;
  const Mat<double> x = random_inputs(rng, batch, net.input_dim());
  const std::vector<int> labels{1, 3};

  auto loss_fn = [&]() {
    Mat<double> logits(batch, 4);
    for (int i = 0; i < batch; ++i)
      logits.row(i) = net.forward_one(x.row(i).data(), false, nullptr, nullptr);
    return losses::cross_entropy_smoothed<double>(logits, labels, 0.1);
  };

  // Analytic gradient.
  std::vector<double> grad(net.num_params(), 0.0);
  Mat<double> logits(batch, 4);
  std::vector<nn::VitNet<double>::Cache> caches(batch);
  for (int i = 0; i < batch; ++i)
    logits.row(i) = net.forward_one(x.row(i).data(), false, nullptr, &caches[i]);
  const Mat<double> dlogits = losses::cross_entropy_smoothed_grad<double>(logits, labels, 0.1);
  for (int i = 0; i < batch; ++i) {
    const Mat<double> drow = dlogits.row(i);
    net.backward_one(caches[i], drow, grad.data());
  }

  const auto fd = oracles::finite_differences(net.params(), 1e-5, loss_fn);
  for (size_t i = 0; i < grad.size(); ++i)
    CHECK(std::abs(grad[i] - fd[i]) <= 1e-6 + 1e-4 * std::abs(fd[i]));
}

TEST_CASE("analytic gradient of the instance loss through the net matches finite differences") {
  nn::VitNet<double> net(tiny_spec());
  Rng rng(23);
  net.init_params(rng, /*zero_head=*/false);
  const int batch = 3;
  const Mat<double> xf = random_inputs(rng, batch, net.input_dim());
  const Mat<double> xs = random_inputs(rng, batch, net.input_dim());

  auto forward_all = [&](const Mat<double>& x, std::vector<nn::VitNet<double>::Cache>* caches) {
    Mat<double> logits(batch, 4);
    for (int i = 0; i < batch; ++i)
      logits.row(i) =
          net.forward_one(x.row(i).data(), false, nullptr, caches ? &(*caches)[i] : nullptr);
    return logits;
  };

  auto loss_fn = [&]() {
    return losses::instance_contrastive_loss<double>(forward_all(xf, nullptr),
                                                     forward_all(xs, nullptr), 0.5);
  };

  std::vector<nn::VitNet<double>::Cache> cf(batch), cs(batch);
  const Mat<double> zf = forward_all(xf, &cf);
  const Mat<double> zs = forward_all(xs, &cs);
  Mat<double> dzf, dzs;
  losses::instance_contrastive_loss<double>(zf, zs, 0.5, &dzf, &dzs);
  std::vector<double> grad(net.num_params(), 0.0);
  for (int i = 0; i < batch; ++i) {
    const Mat<double> df = dzf.row(i);
    const Mat<double> ds = dzs.row(i);
    net.backward_one(cf[i], df, grad.data());
    net.backward_one(cs[i], ds, grad.data());
  }

  const auto fd = oracles::finite_differences(net.params(), 1e-5, loss_fn);
  for (size_t i = 0; i < grad.size(); ++i)
    CHECK(std::abs(grad[i] - fd[i]) <= 1e-6 + 1e-4 * std::abs(fd[i]));
}

TEST_CASE("zero-initialized head emits all-zero logits") {
  encoder::ReferenceEncoder enc(tiny_spec(), /*seed=*/9, /*zero_head=*/true);
  const auto batch = std::vector<superimage::SuperImage>{make_super_image(8, 0.3f)};
  const auto rep = enc.encode(batch, false);
  CHECK(rep.values.rows() == 1);
  CHECK(rep.values.cols() == 4);
  for (int c = 0; c < 4; ++c) CHECK(rep.values(0, c) == 0.0f);
}

TEST_CASE("eval-mode encoding is deterministic and pathway-independent") {
  EncoderSpec spec = tiny_spec();
  spec.drop_path_rate = 0.3;
  encoder::ReferenceEncoder enc(spec, 3, /*zero_head=*/false);
  const auto batch = std::vector<superimage::SuperImage>{make_super_image(8, 0.1f),
                                                         make_super_image(8, -0.4f)};
  const auto a = enc.encode(batch, false, encoder::Pathway::kFast);
  const auto b = enc.encode(batch, false, encoder::Pathway::kSlow);
  CHECK(a.values.cwiseEqual(b.values).all());  // one parameter store, shared by both pathways
  CHECK(a.pathway == encoder::Pathway::kFast);
  CHECK(b.pathway == encoder::Pathway::kSlow);
}

TEST_CASE("encode rejects mismatched super-image sides") {
  encoder::ReferenceEncoder enc(tiny_spec(), 1);
  const auto batch = std::vector<superimage::SuperImage>{make_super_image(16, 0.0f)};
  CHECK_THROWS_AS(enc.encode(batch, false), std::invalid_argument);
}

TEST_CASE("deterministic initialization for a fixed seed") {
  encoder::ReferenceEncoder a(tiny_spec(), 42, false), b(tiny_spec(), 42, false);
  CHECK(a.net().params() == b.net().params());
  encoder::ReferenceEncoder c(tiny_spec(), 43, false);
  CHECK(a.net().params() != c.net().params());
}

TEST_CASE("drop path zeroes a branch's contribution deterministically") {
  EncoderSpec spec = tiny_spec();
  spec.drop_path_rate = 0.5;
  nn::VitNet<float> net(spec);
  Rng rng(4);
  net.init_params(rng, false);
  nn::Mat<float> x(1, net.input_dim());
  for (int c = 0; c < net.input_dim(); ++c) x(0, c) = static_cast<float>(rng.uniform(-1, 1));

  const std::vector<std::uint8_t> keep_all{1, 1};
  const std::vector<std::uint8_t> drop_all{0, 0};
  const auto with = net.forward_one(x.row(0).data(), true, keep_all.data(), nullptr);
  const auto without = net.forward_one(x.row(0).data(), true, drop_all.data(), nullptr);
  const auto eval = net.forward_one(x.row(0).data(), false, nullptr, nullptr);
  CHECK_FALSE(with.cwiseEqual(without).all());
  // Kept branches in train mode are rescaled, so they differ from eval too.
  CHECK_FALSE(with.cwiseEqual(eval).all());
}

TEST_CASE("checkpoint round-trip restores parameters, optimizer state and epoch") {
  const auto dir = std::filesystem::temp_directory_path() / "sitar_encoder_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "ckpt.bin").string();

  encoder::ReferenceEncoder enc(tiny_spec(), 11, false);
  encoder::OptimizerSnapshot snap;
  snap.first_moment.assign(enc.num_params(), 0.25f);
  snap.second_moment.assign(enc.num_params(), 0.5f);
  snap.first_moment[3] = -1.75f;
  snap.step = 1234;
  encoder::save_checkpoint(path, enc, &snap, 7);

  const auto loaded = encoder::load_checkpoint(path);
  CHECK(loaded.epoch == 7);
  CHECK(loaded.encoder.spec() == enc.spec());
  CHECK(loaded.encoder.net().params() == enc.net().params());
  REQUIRE(loaded.optimizer.has_value());
  CHECK(loaded.optimizer->step == 1234);
  CHECK(loaded.optimizer->first_moment == snap.first_moment);
  CHECK(loaded.optimizer->second_moment == snap.second_moment);

  // Outputs reproduce exactly on a probe batch.
  const auto batch = std::vector<superimage::SuperImage>{make_super_image(8, 0.2f)};
  CHECK(enc.encode(batch, false).values.cwiseEqual(loaded.encoder.encode(batch, false).values).all());
  std::filesystem::remove_all(dir);
}

TEST_CASE("load_checkpoint rejects foreign files") {
  const auto dir = std::filesystem::temp_directory_path() / "sitar_encoder_test2";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "not_a_ckpt.bin").string();
  std::ofstream(path) << "definitely not a checkpoint";
  CHECK_THROWS_AS(encoder::load_checkpoint(path), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("batch forward/backward equals the per-sample path") {
  nn::VitNet<float> net(tiny_spec());
  Rng rng(31);
  net.init_params(rng, false);
  const int batch = 4;
  nn::Mat<float> x(batch, net.input_dim());
  for (int r = 0; r < batch; ++r)
    for (int c = 0; c < net.input_dim(); ++c) x(r, c) = static_cast<float>(rng.uniform(-1, 1));

  auto fwd = encoder::forward_batch(net, x, false, nullptr);
  nn::Mat<float> dlogits = nn::Mat<float>::Constant(batch, 4, 0.125f);
  std::vector<float> grad_batch(net.num_params(), 0.0f);
  encoder::backward_batch(net, fwd, dlogits, grad_batch);

  std::vector<float> grad_seq(net.num_params(), 0.0f);
  for (int i = 0; i < batch; ++i) {
    nn::VitNet<float>::Cache cache;
    const auto logits = net.forward_one(x.row(i).data(), false, nullptr, &cache);
    CHECK(logits.cwiseEqual(fwd.logits.row(i)).all());
    const nn::Mat<float> drow = dlogits.row(i);
    net.backward_one(cache, drow, grad_seq.data());
  }
  // Accumulation order differs between the two paths, so compare within
  // float rounding rather than bitwise.
  for (size_t j = 0; j < grad_batch.size(); ++j)
    CHECK(grad_batch[j] == doctest::Approx(grad_seq[j]).epsilon(1e-4));
}
