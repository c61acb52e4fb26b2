#include "sitar/encoder.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sitar/errors.hpp"

namespace sitar::encoder {

using nlohmann::json;

nn::Mat<float> ReferenceEncoder::to_input(const std::vector<superimage::SuperImage>& batch) const {
  const int side = spec().input_side;
  nn::Mat<float> inputs(static_cast<Eigen::Index>(batch.size()), net_.input_dim());
  for (size_t i = 0; i < batch.size(); ++i) {
    const Image& img = batch[i].image;
    if (img.height != side || img.width != side)
      throw std::invalid_argument("encode: super image side " + std::to_string(img.height) +
                                  " does not match encoder input side " + std::to_string(side));
    std::memcpy(inputs.row(static_cast<Eigen::Index>(i)).data(), img.px.data(),
                img.px.size() * sizeof(float));
  }
  return inputs;
}

RepresentationBatch ReferenceEncoder::encode(const std::vector<superimage::SuperImage>& batch,
                                             bool train_mode, Pathway pathway, Rng* drop_rng) const {
  const nn::Mat<float> inputs = to_input(batch);
  BatchForward fwd = forward_batch(net_, inputs, train_mode, train_mode ? drop_rng : nullptr);
  return {std::move(fwd.logits), pathway};
}

BatchForward forward_batch(const nn::VitNet<float>& net, const nn::Mat<float>& inputs, bool train,
                           Rng* drop_rng) {
  const int b = static_cast<int>(inputs.rows());
  BatchForward out;
  out.logits.resize(b, net.spec().num_classes);
  out.caches.resize(b);

  const int mask_len = net.spec().depth * 2;
  const bool drop_active = train && net.spec().drop_path_rate > 0.0 && drop_rng != nullptr;
  if (drop_active) {
    out.keep_masks.resize(static_cast<size_t>(b) * mask_len);
    // Drawn sequentially up front so parallel execution cannot reorder draws.
    for (auto& byte : out.keep_masks)
      byte = drop_rng->uniform() >= net.spec().drop_path_rate ? 1 : 0;
  }

#pragma omp parallel for schedule(static)
  for (int i = 0; i < b; ++i) {
    const std::uint8_t* mask =
        drop_active ? out.keep_masks.data() + static_cast<size_t>(i) * mask_len : nullptr;
    out.logits.row(i) = net.forward_one(inputs.row(i).data(), train, mask, &out.caches[i]);
  }
  return out;
}

void backward_batch(const nn::VitNet<float>& net, const BatchForward& fwd,
                    const nn::Mat<float>& dlogits, std::vector<float>& grad) {
  const int b = static_cast<int>(dlogits.rows());
  if (grad.size() != static_cast<size_t>(net.num_params()))
    throw std::invalid_argument("backward_batch: grad buffer size mismatch");
  std::vector<std::vector<float>> slabs(b);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < b; ++i) {
    slabs[i].assign(net.num_params(), 0.0f);
    const nn::Mat<float> drow = dlogits.row(i);
    net.backward_one(fwd.caches[i], drow, slabs[i].data());
  }

  // Sample-order reduction keeps the sum independent of scheduling.
  for (int i = 0; i < b; ++i)
    for (size_t j = 0; j < grad.size(); ++j) grad[j] += slabs[i][j];
}

namespace {

json spec_to_json(const EncoderSpec& spec) {
  return json{{"input_side", spec.input_side}, {"num_classes", spec.num_classes},
              {"width", spec.width},           {"depth", spec.depth},
              {"patch_size", spec.patch_size}, {"drop_path_rate", spec.drop_path_rate}};
}

EncoderSpec spec_from_json(const json& j) {
  EncoderSpec spec;
  spec.input_side = j.at("input_side").get<int>();
  spec.num_classes = j.at("num_classes").get<int>();
  spec.width = j.at("width").get<int>();
  spec.depth = j.at("depth").get<int>();
  spec.patch_size = j.at("patch_size").get<int>();
  spec.drop_path_rate = j.at("drop_path_rate").get<double>();
  return spec;
}

void write_floats(std::ofstream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> read_floats(std::ifstream& in, size_t n, const std::string& path) {
  std::vector<float> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) throw DataError("truncated checkpoint: " + path);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ReferenceEncoder& enc,
                     const OptimizerSnapshot* opt, int epoch) {
  json tensors = json::array();
  for (const auto& info : enc.net().tensors())
    tensors.push_back(json{{"name", info.name}, {"offset", info.offset}, {"rows", info.rows},
                           {"cols", info.cols}});
  json header{{"spec", spec_to_json(enc.spec())},
              {"epoch", epoch},
              {"dtype", "f32"},
              {"param_count", enc.num_params()},
              {"tensors", tensors},
              {"optimizer", json{{"present", opt != nullptr}, {"step", opt ? opt->step : 0}}}};
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  out.put('\n');
  const std::uint64_t len = head.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  write_floats(out, enc.net().params());
  if (opt) {
    write_floats(out, opt->first_moment);
    write_floats(out, opt->second_moment);
  }
  if (!out) throw DataError("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string magic(sizeof(kCheckpointMagic) - 1, '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  char newline = 0;
  in.get(newline);
  if (!in || magic != kCheckpointMagic || newline != '\n')
    throw DataError("not a SITAR checkpoint: " + path);

  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string head(len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint header: " + path);

  json header;
  try {
    header = json::parse(head);
  } catch (const json::parse_error& e) {
    throw DataError("corrupt checkpoint header: " + path + ": " + e.what());
  }
  if (header.at("dtype").get<std::string>() != "f32")
    throw DataError("unsupported checkpoint dtype in " + path);

  LoadedCheckpoint loaded{ReferenceEncoder(spec_from_json(header.at("spec"))), std::nullopt,
                          header.at("epoch").get<int>()};
  const size_t count = header.at("param_count").get<size_t>();
  if (count != static_cast<size_t>(loaded.encoder.num_params()))
    throw DataError("checkpoint parameter count mismatch: " + path);
  loaded.encoder.net().params() = read_floats(in, count, path);

  const auto& opt_info = header.at("optimizer");
  if (opt_info.at("present").get<bool>()) {
    OptimizerSnapshot snap;
    snap.first_moment = read_floats(in, count, path);
    snap.second_moment = read_floats(in, count, path);
    snap.step = opt_info.at("step").get<std::int64_t>();
    loaded.optimizer = std::move(snap);
  }
  return loaded;
}

}  // namespace sitar::encoder
