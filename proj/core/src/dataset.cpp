#include "hfe/dataset.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <random>

#include "hfe/error.hpp"

namespace hfe {

namespace fs = std::filesystem;

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open manifest");
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw IoError(path.string(), "line " + std::to_string(line_no) +
                                       ": expected degraded<TAB>target");
    }
    fs::path degraded = line.substr(0, tab);
    fs::path target = line.substr(tab + 1);
    if (degraded.is_relative()) degraded = base / degraded;
    if (target.is_relative()) target = base / target;
    entries.push_back({std::move(degraded), std::move(target)});
  }
  return entries;
}

void write_manifest(const fs::path& path,
                    const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot write manifest");
  for (const ManifestEntry& e : entries) {
    out << e.degraded.string() << '\t' << e.target.string() << '\n';
  }
  if (!out) throw IoError(path.string(), "write failed");
}

bool DatasetIndex::admit(const ImageBuffer& degraded, const ImageBuffer& target,
                         const std::string& label) {
  const std::size_t s = options_.scale;
  if (degraded.height * s != target.height ||
      degraded.width * s != target.width ||
      degraded.channels != target.channels) {
    throw ContractViolation(label + ": degraded " +
                            std::to_string(degraded.height) + "x" +
                            std::to_string(degraded.width) +
                            " does not match target at scale " +
                            std::to_string(s));
  }
  if (target.height < options_.patch_size ||
      target.width < options_.patch_size) {
    spdlog::warn("{}: {}x{} smaller than patch {}, skipped", label,
                 target.height, target.width, options_.patch_size);
    return false;
  }
  degraded_.push_back(to_rgb(degraded));
  target_.push_back(to_rgb(target));
  return true;
}

DatasetIndex DatasetIndex::from_manifest(const fs::path& manifest,
                                         const DatasetOptions& options) {
  return from_entries(read_manifest(manifest), options);
}

DatasetIndex DatasetIndex::from_entries(
    const std::vector<ManifestEntry>& entries, const DatasetOptions& options) {
  if (options.scale == 0 || options.patch_size % options.scale != 0) {
    throw ContractViolation("dataset: patch size must be a multiple of scale");
  }
  DatasetIndex index;
  index.options_ = options;
  for (const ManifestEntry& e : entries) {
    index.admit(load_image(e.degraded), load_image(e.target),
                e.target.string());
  }
  return index;
}

DatasetIndex DatasetIndex::from_images(
    std::vector<std::pair<ImageBuffer, ImageBuffer>> pairs,
    const DatasetOptions& options) {
  if (options.scale == 0 || options.patch_size % options.scale != 0) {
    throw ContractViolation("dataset: patch size must be a multiple of scale");
  }
  DatasetIndex index;
  index.options_ = options;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    index.admit(pairs[i].first, pairs[i].second, "item " + std::to_string(i));
  }
  return index;
}

PatchPair sample_patch_pair(const DatasetIndex& index, Rng& rng) {
  if (index.empty()) throw ContractViolation("sample_patch_pair: empty dataset");
  const DatasetOptions& opt = index.options();
  const std::size_t s = opt.scale;
  const std::size_t lr_patch = opt.patch_size / s;
  PatchPair out;
  out.item = std::uniform_int_distribution<std::size_t>(0, index.size() - 1)(rng);
  const ImageBuffer& deg = index.degraded(out.item);
  const ImageBuffer& tgt = index.target(out.item);
  out.y = std::uniform_int_distribution<std::size_t>(0, deg.height - lr_patch)(rng);
  out.x = std::uniform_int_distribution<std::size_t>(0, deg.width - lr_patch)(rng);
  out.transform =
      opt.augment ? std::uniform_int_distribution<unsigned>(0, 7)(rng) : 0u;
  out.degraded = dihedral(crop(deg, out.y, out.x, lr_patch, lr_patch), out.transform);
  out.target = dihedral(crop(tgt, out.y * s, out.x * s, opt.patch_size,
                             opt.patch_size),
                        out.transform);
  return out;
}

PatchPair DatasetIndex::sample(std::uint64_t sample_index) const {
  Rng rng = derive_rng(options_.seed, sample_index);
  return sample_patch_pair(*this, rng);
}

Batch DatasetIndex::sample_batch(std::uint64_t step,
                                 std::size_t batch_size) const {
  std::vector<ImageBuffer> degraded;
  std::vector<ImageBuffer> target;
  Batch batch;
  for (std::size_t b = 0; b < batch_size; ++b) {
    PatchPair p = sample(step * batch_size + b);
    batch.items.push_back(p.item);
    degraded.push_back(std::move(p.degraded));
    target.push_back(std::move(p.target));
  }
  batch.degraded = images_to_tensor(degraded);
  batch.target = images_to_tensor(target);
  return batch;
}

}  // namespace hfe
