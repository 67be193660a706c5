#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hfe/image.hpp"
#include "hfe/random.hpp"

namespace hfe {

struct ManifestEntry {
  std::filesystem::path degraded;
  std::filesystem::path target;
};

// One `degraded<TAB>target` pair per line. Relative paths resolve against
// the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries);

struct DatasetOptions {
  std::size_t patch_size = 192;  // target-side patch extent
  std::size_t scale = 1;         // target extent / degraded extent
  std::uint64_t seed = 0;
  bool augment = true;
};

struct PatchPair {
  ImageBuffer degraded;
  ImageBuffer target;
  std::size_t item = 0;
  unsigned transform = 0;  // dihedral element, see hfe::dihedral
  std::size_t y = 0;       // crop origin in degraded coordinates
  std::size_t x = 0;
};

struct Batch {
  Tensor degraded;
  Tensor target;
  std::vector<std::size_t> items;
};

// Decoded image pairs held in memory as RGB. Items smaller than the patch
// are excluded with a warning when the index is built.
class DatasetIndex {
 public:
  static DatasetIndex from_manifest(const std::filesystem::path& manifest,
                                    const DatasetOptions& options);
  static DatasetIndex from_entries(const std::vector<ManifestEntry>& entries,
                                   const DatasetOptions& options);
  static DatasetIndex from_images(
      std::vector<std::pair<ImageBuffer, ImageBuffer>> pairs,
      const DatasetOptions& options);

  std::size_t size() const { return degraded_.size(); }
  bool empty() const { return degraded_.empty(); }
  const DatasetOptions& options() const { return options_; }
  const ImageBuffer& degraded(std::size_t i) const { return degraded_[i]; }
  const ImageBuffer& target(std::size_t i) const { return target_[i]; }

  // Sample `sample_index` of the run; depends only on (seed, sample_index).
  PatchPair sample(std::uint64_t sample_index) const;
  // Samples step*batch_size ... step*batch_size + batch_size - 1.
  Batch sample_batch(std::uint64_t step, std::size_t batch_size) const;

 private:
  bool admit(const ImageBuffer& degraded, const ImageBuffer& target,
             const std::string& label);

  DatasetOptions options_;
  std::vector<ImageBuffer> degraded_;
  std::vector<ImageBuffer> target_;
};

PatchPair sample_patch_pair(const DatasetIndex& index, Rng& rng);

}  // namespace hfe
