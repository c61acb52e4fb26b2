#include "sitar/core_types.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sitar/errors.hpp"
#include "sitar/rng.hpp"

namespace sitar {

using nlohmann::json;

std::vector<std::string> validate_manifest(const DatasetManifest& manifest) {
  std::vector<std::string> violations;
  if (manifest.num_classes < 1) violations.push_back("num_classes must be positive");
  if (!manifest.class_names.empty() &&
      static_cast<int>(manifest.class_names.size()) != manifest.num_classes)
    violations.push_back("class_names size differs from num_classes");

  std::set<std::string> seen;
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& rec = manifest.records[i];
    const std::string at = " @record " + std::to_string(i);
    if (rec.video.id.empty()) violations.push_back("empty id" + at);
    if (rec.video.frame_count < 1) violations.push_back("frame_count < 1" + at);
    if (rec.label < kUnlabeled || rec.label >= manifest.num_classes)
      violations.push_back("label out of range" + at);
    if (!seen.insert(rec.video.id).second)
      violations.push_back("duplicate id '" + rec.video.id + "'");
  }
  return violations;
}

std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          const SplitSpec& spec) {
  if (!(spec.labeled_fraction > 0.0 && spec.labeled_fraction <= 1.0))
    throw std::invalid_argument("split_dataset: labeled_fraction must lie in (0, 1]");
  for (size_t i = 0; i < manifest.records.size(); ++i)
    if (manifest.records[i].label == kUnlabeled)
      throw DataError("split_dataset: record " + std::to_string(i) + " is unlabeled");

  const size_t n = manifest.records.size();
  std::vector<char> keep_label(n, 0);
  Rng rng(spec.seed);

  if (spec.per_class_balanced) {
    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < n; ++i) by_class[manifest.records[i].label].push_back(i);
    for (int c = 0; c < manifest.num_classes; ++c) {
      auto it = by_class.find(c);
      const size_t count = it == by_class.end() ? 0 : it->second.size();
      size_t want = static_cast<size_t>(spec.labeled_fraction * static_cast<double>(count));
      want = std::max<size_t>(want, 1);
      if (count < want)
        throw DataError("split_dataset: class " + std::to_string(c) +
                        " has too few videos for at least one labeled sample");
      auto& idx = it->second;
      rng.shuffle(idx.begin(), idx.end());
      for (size_t k = 0; k < want; ++k) keep_label[idx[k]] = 1;
    }
  } else {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx.begin(), idx.end());
    size_t want = static_cast<size_t>(spec.labeled_fraction * static_cast<double>(n));
    want = std::max<size_t>(want, std::min<size_t>(1, n));
    for (size_t k = 0; k < want && k < n; ++k) keep_label[idx[k]] = 1;
  }

  DatasetManifest labeled{.records = {}, .num_classes = manifest.num_classes,
                          .class_names = manifest.class_names};
  DatasetManifest unlabeled = labeled;
  // Emit in input order so the split is byte-stable.
  for (size_t i = 0; i < n; ++i) {
    if (keep_label[i]) {
      labeled.records.push_back(manifest.records[i]);
    } else {
      ManifestRecord rec = manifest.records[i];
      rec.label = kUnlabeled;
      unlabeled.records.push_back(rec);
    }
  }
  return {std::move(labeled), std::move(unlabeled)};
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  DatasetManifest manifest;
  std::string line;
  bool have_header = false;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("manifest " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      if (!j.contains("num_classes"))
        throw DataError("manifest " + path + ": first line must be the {\"num_classes\": C} header");
      manifest.num_classes = j.at("num_classes").get<int>();
      if (j.contains("class_names"))
        manifest.class_names = j.at("class_names").get<std::vector<std::string>>();
      have_header = true;
      continue;
    }
    ManifestRecord rec;
    try {
      rec.video.id = j.at("id").get<std::string>();
      rec.video.path = j.at("path").get<std::string>();
      rec.video.frame_count = j.at("frames").get<int>();
      rec.label = j.at("label").get<int>();
    } catch (const json::exception& e) {
      throw DataError("manifest " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    manifest.records.push_back(std::move(rec));
  }
  if (!have_header) throw DataError("manifest " + path + " is empty");
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  json header{{"num_classes", manifest.num_classes}};
  if (!manifest.class_names.empty()) header["class_names"] = manifest.class_names;
  out << header.dump() << "\n";
  for (const auto& rec : manifest.records) {
    const json j{{"id", rec.video.id},
                 {"path", rec.video.path},
                 {"frames", rec.video.frame_count},
                 {"label", rec.label}};
    out << j.dump() << "\n";
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace sitar
